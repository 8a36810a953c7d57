#pragma once

#include <cmath>
#include <vector>

#include "grasp/kinematics.hpp"

namespace grasp {

/// Surface sample rigidly bound to one joint frame. `finger` is -1 for
/// palm points, otherwise 0..4 (thumb..pinky).
struct HandPoint {
    int owner;
    Vec3 offset;
    Vec3 normal;
    int finger;
};

struct HandKeypoint {
    int owner;
    Vec3 offset;
};

struct HandCapsule {
    int owner;
    Vec3 a, b;  // segment endpoints in the owner frame
    double radius;
};

/// Procedural right-hand surface: 48 points on each of the 15 finger-bone
/// capsules plus 58 palm points, 778 total (matching the MANO vertex
/// count so point-set formulas carry over). Keypoints per finger are the
/// 3 joints, the 3 bone midpoints and the fingertip.
struct HandSurface {
    std::vector<HandPoint> points;
    std::array<std::array<HandKeypoint, 7>, 5> keypoints{};
    std::vector<HandCapsule> capsules;

    static constexpr int kPointCount = 778;
    static constexpr int kPointsPerBone = 48;
    static constexpr int kPalmPoints = 58;
    static constexpr int kKeypointsPerFinger = 7;
};

namespace detail {

inline void radial_basis(const Vec3& axis, Vec3& e1, Vec3& e2) {
    Vec3 u = axis.cross(Vec3::UnitX());
    if (u.squaredNorm() < 1e-8) {
        u = axis.cross(Vec3::UnitY());
    }
    e1 = u.normalized();
    e2 = axis.cross(e1);
}

inline void sample_capsule_side(std::vector<HandPoint>& out, int owner, int finger, const Vec3& a, const Vec3& b,
                                double radius, int stations, int around) {
    const Vec3 axis = (b - a).normalized();
    Vec3 e1, e2;
    radial_basis(axis, e1, e2);
    for (int s = 0; s < stations; ++s) {
        const double f = (s + 0.5) / stations;
        const Vec3 center = a + f * (b - a);
        for (int k = 0; k < around; ++k) {
            const double theta = 2.0 * M_PI * (k + 0.5 * (s % 2)) / around;
            const Vec3 radial = std::cos(theta) * e1 + std::sin(theta) * e2;
            out.push_back({owner, center + radius * radial, radial, finger});
        }
    }
}

inline void sample_capsule_cap(std::vector<HandPoint>& out, int owner, int finger, const Vec3& tip_end,
                               const Vec3& axis, double radius, int around) {
    Vec3 e1, e2;
    radial_basis(axis, e1, e2);
    const double c = std::cos(M_PI / 4), s = std::sin(M_PI / 4);
    for (int k = 0; k < around; ++k) {
        const double theta = 2.0 * M_PI * (k + 0.25) / around;
        const Vec3 dir = c * (std::cos(theta) * e1 + std::sin(theta) * e2) + s * axis;
        out.push_back({owner, tip_end + radius * dir, dir, finger});
    }
}

}  // namespace detail

inline HandSurface build_hand_surface(const Skeleton& skel, const BodyMap& map, const HandModel& model = {}) {
    HandSurface hs;
    hs.points.reserve(HandSurface::kPointCount);

    for (int f = 0; f < 5; ++f) {
        // Bone b of finger f runs, in the frame of joint b, from the joint
        // to its child (or to the fingertip for the distal bone).
        std::array<std::pair<int, Vec3>, 3> bones;
        for (int b = 0; b < 2; ++b) {
            const int child = map.finger[f][b + 1];
            bones[static_cast<std::size_t>(b)] = {map.finger[f][b], skel.bone_offset(child)};
        }
        const int distal = map.finger[f][2];
        const Vec3 tip_offset =
            model.tip_lengths[static_cast<std::size_t>(f)] * skel.rest_dirs[static_cast<std::size_t>(distal)];
        bones[2] = {distal, tip_offset};

        for (int b = 0; b < 3; ++b) {
            const auto& [owner, end] = bones[static_cast<std::size_t>(b)];
            detail::sample_capsule_side(hs.points, owner, f, Vec3::Zero(), end, model.finger_radius, 7, 6);
            detail::sample_capsule_cap(hs.points, owner, f, end, end.normalized(), model.finger_radius, 6);
            hs.capsules.push_back({owner, Vec3::Zero(), end, model.finger_radius});
        }

        const Vec3 mid_prox = 0.5 * bones[0].second;
        const Vec3 mid_mid = 0.5 * bones[1].second;
        hs.keypoints[static_cast<std::size_t>(f)] = {{
            {map.finger[f][0], Vec3::Zero()},
            {map.finger[f][1], Vec3::Zero()},
            {map.finger[f][2], Vec3::Zero()},
            {map.finger[f][0], mid_prox},
            {map.finger[f][1], mid_mid},
            {map.finger[f][2], 0.5 * tip_offset},
            {map.finger[f][2], tip_offset},
        }};
    }

    // Palm: one thick capsule from the wrist toward the middle-finger base.
    const int wrist = map.wrist[1];
    const Vec3 palm_end = skel.bone_offset(map.finger[2][0]);
    detail::sample_capsule_side(hs.points, wrist, -1, Vec3::Zero(), palm_end, model.palm_radius, 8, 7);
    const Vec3 palm_axis = palm_end.normalized();
    hs.points.push_back({wrist, -model.palm_radius * palm_axis, -palm_axis, -1});
    hs.points.push_back({wrist, palm_end + model.palm_radius * palm_axis, palm_axis, -1});
    hs.capsules.push_back({wrist, Vec3::Zero(), palm_end, model.palm_radius});

    if (static_cast<int>(hs.points.size()) != HandSurface::kPointCount) {
        throw ValidationError("hand surface: expected 778 points, built " + std::to_string(hs.points.size()));
    }
    return hs;
}

/// World positions (and outward normals) of all hand surface points.
inline void hand_surface_points(const FkResult& fk, const HandSurface& hs, Eigen::MatrixX3d& positions,
                                Eigen::MatrixX3d* normals = nullptr) {
    positions.resize(static_cast<Eigen::Index>(hs.points.size()), 3);
    if (normals != nullptr) {
        normals->resize(static_cast<Eigen::Index>(hs.points.size()), 3);
    }
    for (std::size_t i = 0; i < hs.points.size(); ++i) {
        const auto& pt = hs.points[i];
        const auto o = static_cast<std::size_t>(pt.owner);
        positions.row(static_cast<Eigen::Index>(i)) = (fk.rot[o] * pt.offset + fk.pos[o]).transpose();
        if (normals != nullptr) {
            normals->row(static_cast<Eigen::Index>(i)) = (fk.rot[o] * pt.normal).transpose();
        }
    }
}

inline Eigen::MatrixX3d hand_surface_points(const Skeleton& skel, const Pose& pose, const HandSurface& hs) {
    Eigen::MatrixX3d p;
    hand_surface_points(forward_kinematics(skel, pose), hs, p);
    return p;
}

/// World positions of one finger's 7 keypoints.
inline Eigen::MatrixX3d finger_keypoints_world(const FkResult& fk, const HandSurface& hs, int finger) {
    Eigen::MatrixX3d out(HandSurface::kKeypointsPerFinger, 3);
    for (int k = 0; k < HandSurface::kKeypointsPerFinger; ++k) {
        const auto& kp = hs.keypoints[static_cast<std::size_t>(finger)][static_cast<std::size_t>(k)];
        const auto o = static_cast<std::size_t>(kp.owner);
        out.row(k) = (fk.rot[o] * kp.offset + fk.pos[o]).transpose();
    }
    return out;
}

/// Adjoint of a bound point p = A_o * offset + t_o.
inline void bound_point_backward(int owner, const Vec3& offset, const Vec3& d_p, FkAdjoint& adj) {
    const auto o = static_cast<std::size_t>(owner);
    adj.d_rot[o] += d_p * offset.transpose();
    adj.d_pos[o] += d_p;
}

}  // namespace grasp
