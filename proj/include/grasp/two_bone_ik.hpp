#pragma once

#include "grasp/kinematics.hpp"

namespace grasp {

/// Position-level solution of a three-joint, two-bone chain.
struct TwoBoneSolution {
    Vec3 mid;
    Vec3 end;
    bool reached = true;  // false when the target was clamped
};

/// Analytic two-bone IK by law of cosines. The bend happens in the plane
/// through base and target with normal closest to `plane_normal`; the
/// bend side follows the current middle joint. Unreachable targets
/// straighten (or maximally fold) the chain along the target direction.
inline TwoBoneSolution solve_two_bone(const Vec3& base, const Vec3& mid, const Vec3& end, const Vec3& target,
                                      const Vec3& plane_normal) {
    const double l1 = (mid - base).norm();
    const double l2 = (end - mid).norm();
    if (!(l1 > 0.0) || !(l2 > 0.0)) {
        throw ValidationError("two_bone_ik: bones must have positive length");
    }

    Vec3 to_target = target - base;
    double dist = to_target.norm();
    Vec3 dir;
    if (dist < 1e-12) {
        // zero-length target offset: keep the current reach direction
        dir = (end - base).norm() > 1e-12 ? (end - base).normalized() : Vec3::UnitX();
        dist = 0.0;
    } else {
        dir = to_target / dist;
    }

    TwoBoneSolution sol;
    if (dist >= l1 + l2) {
        sol.mid = base + l1 * dir;
        sol.end = base + (l1 + l2) * dir;
        sol.reached = dist <= l1 + l2;
        return sol;
    }
    if (dist <= std::abs(l1 - l2)) {
        sol.mid = base + l1 * dir;
        sol.end = base + (l1 - l2) * dir;
        sol.reached = false;
        return sol;
    }

    Vec3 bend = plane_normal.cross(dir);
    if (bend.squaredNorm() < 1e-16) {
        // plane normal parallel to the reach direction: fall back to the
        // current bend plane, then to an arbitrary perpendicular
        bend = (mid - base).cross(dir).cross(dir);
        if (bend.squaredNorm() < 1e-16) {
            bend = dir.cross(Vec3::UnitX());
            if (bend.squaredNorm() < 1e-12) {
                bend = dir.cross(Vec3::UnitY());
            }
        }
    }
    bend.normalize();
    const Vec3 current_offset = (mid - base) - (mid - base).dot(dir) * dir;
    if (current_offset.dot(bend) < 0.0) {
        bend = -bend;
    }

    const double cos_base = (l1 * l1 + dist * dist - l2 * l2) / (2.0 * l1 * dist);
    const double clamped = std::clamp(cos_base, -1.0, 1.0);
    const double sin_base = std::sqrt(std::max(0.0, 1.0 - clamped * clamped));
    sol.mid = base + l1 * (clamped * dir + sin_base * bend);
    sol.end = base + dist * dir;
    return sol;
}

/// World-frame delta rotations realizing a two-bone position solution:
/// the base delta swings the middle joint into place, the mid delta then
/// swings the end joint.
struct ChainDeltas {
    Mat3 base;  // applied about the base joint position
    Mat3 mid;   // total world delta of the middle joint's frame
};

inline ChainDeltas two_bone_world_deltas(const Vec3& base, const Vec3& mid, const Vec3& end,
                                         const TwoBoneSolution& sol) {
    ChainDeltas d;
    d.base = rotation_from_to((mid - base).normalized(), (sol.mid - base).normalized());
    const Vec3 end_after_base = base + d.base * (end - base);
    const Vec3 old_dir = end_after_base - sol.mid;
    const Vec3 new_dir = sol.end - sol.mid;
    Mat3 delta_mid = Mat3::Identity();
    if (old_dir.norm() > 1e-12 && new_dir.norm() > 1e-12) {
        delta_mid = rotation_from_to(old_dir.normalized(), new_dir.normalized());
    }
    d.mid = delta_mid * d.base;
    return d;
}

/// Rewrites the local 6D rotations of a base/middle joint pair from world
/// delta rotations (A' = delta * A). Only those two blocks change.
inline void write_chain_rotations(const Skeleton& skel, Pose& pose, const FkResult& fk, int base_joint,
                                  int mid_joint, const Mat3& delta_base, const Mat3& delta_mid) {
    if (skel.parents[static_cast<std::size_t>(mid_joint)] != base_joint) {
        throw ValidationError("two_bone_ik: middle joint must be a child of the base joint");
    }
    const auto b = static_cast<std::size_t>(base_joint);
    const auto m = static_cast<std::size_t>(mid_joint);
    const auto parent = static_cast<std::size_t>(skel.parents[b]);
    const Mat3 base_world = delta_base * fk.rot[b];
    const Mat3 mid_world = delta_mid * fk.rot[m];
    pose.joint_block(base_joint) = matrix_to_rot6d(fk.rot[parent].transpose() * base_world, 1e-5);
    pose.joint_block(mid_joint) = matrix_to_rot6d(base_world.transpose() * mid_world, 1e-5);
}

}  // namespace grasp
