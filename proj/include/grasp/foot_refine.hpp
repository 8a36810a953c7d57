#pragma once

#include "grasp/sequence.hpp"
#include "grasp/two_bone_ik.hpp"

namespace grasp {

/// Frames [begin, end] (inclusive) of one foot in continuous ground
/// contact, with the position the foot is pinned to.
struct ContactGroup {
    int begin;
    int end;
    Vec3 target;

    bool contains(int frame) const { return frame >= begin && frame <= end; }
};

/// Boolean contact per frame for one foot; p >= threshold counts as contact.
inline std::vector<bool> threshold_contacts(const std::vector<Vec2>& probs, int foot_side, double threshold) {
    std::vector<bool> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = probs[i][foot_side];
        if (p < 0.0 || p > 1.0) {
            throw ValidationError("threshold_contacts: probabilities must lie in [0,1]");
        }
        out[i] = p >= threshold;
    }
    return out;
}

/// Maximal runs of contact frames. Groups touching the first or last frame
/// pin the foot to that frame's position; interior groups pin to the mean
/// of their member positions.
inline std::vector<ContactGroup> build_groups(const std::vector<bool>& contact,
                                              const std::vector<Vec3>& foot_positions) {
    if (contact.size() != foot_positions.size()) {
        throw ValidationError("build_groups: contact/position length mismatch");
    }
    std::vector<ContactGroup> groups;
    const int n = static_cast<int>(contact.size());
    int i = 0;
    while (i < n) {
        if (!contact[static_cast<std::size_t>(i)]) {
            ++i;
            continue;
        }
        int j = i;
        while (j + 1 < n && contact[static_cast<std::size_t>(j + 1)]) {
            ++j;
        }
        ContactGroup grp{i, j, Vec3::Zero()};
        if (i == 0) {
            grp.target = foot_positions.front();
        } else if (j == n - 1) {
            grp.target = foot_positions.back();
        } else {
            for (int f = i; f <= j; ++f) {
                grp.target += foot_positions[static_cast<std::size_t>(f)];
            }
            grp.target /= static_cast<double>(j - i + 1);
        }
        groups.push_back(grp);
        i = j + 1;
    }
    return groups;
}

namespace detail {

/// Rotate `target` about an axis through `pivot` onto the plane with
/// normal `n` through `plane_point`, preserving its distance to the
/// pivot. Returns false when no such rotation exists.
inline bool rotate_into_plane(const Vec3& pivot, const Vec3& target, const Vec3& plane_point, const Vec3& n,
                              Vec3& rotated) {
    const Vec3 w = target - pivot;
    const double wn = w.norm();
    const double h = (pivot - plane_point).dot(n);
    if (wn < 1e-12 || wn < std::abs(h)) {
        return false;
    }
    const double a = w.dot(n);
    Vec3 axis = w.cross(n);
    const double b = axis.norm();
    if (b < 1e-12) {
        // w parallel to the plane normal: rotate about any perpendicular
        Vec3 e = n.cross(Vec3::UnitX());
        if (e.squaredNorm() < 1e-12) {
            e = n.cross(Vec3::UnitY());
        }
        axis = e.normalized();
        const double beta = std::acos(std::clamp(-h / wn, -1.0, 1.0));
        rotated = pivot + Eigen::AngleAxisd(beta, axis).toRotationMatrix() * w;
        return true;
    }
    axis /= b;
    // solve a cos(beta) + b sin(beta) = -h with minimal |beta|
    const double psi = std::atan2(b, a);
    const double gamma = std::acos(std::clamp(-h / wn, -1.0, 1.0));
    double beta = psi - gamma;
    const double alt = psi + gamma - 2.0 * M_PI;
    if (std::abs(alt) < std::abs(beta)) {
        beta = alt;
    }
    const double alt2 = psi + gamma;
    if (std::abs(alt2) < std::abs(beta)) {
        beta = alt2;
    }
    rotated = pivot + Eigen::AngleAxisd(beta, axis).toRotationMatrix() * w;
    return true;
}

}  // namespace detail

/// Plants the foot of one leg at `target` by updating only the hip and
/// knee rotations. The bend plane is the knee-ankle-foot plane: the hip
/// is projected into it, the target is rotated into it about an axis
/// through the hip, a planar two-bone solve (knee-to-foot treated as one
/// rigid link, ankle fixed) moves the foot there, and the inverse
/// rotation carries the whole leg so the foot lands exactly on `target`.
/// Unreachable or degenerate cases fall back to a plain clamped solve.
inline void retarget_foot(const Skeleton& skel, Pose& pose, const BodyMap& map, int side, const Vec3& target) {
    if (!target.allFinite()) {
        throw ValidationError("retarget_foot: non-finite target");
    }
    const FkResult fk = forward_kinematics(skel, pose);
    const Vec3 hip = fk.pos[static_cast<std::size_t>(map.hip[side])];
    const Vec3 knee = fk.pos[static_cast<std::size_t>(map.knee[side])];
    const Vec3 ankle = fk.pos[static_cast<std::size_t>(map.ankle[side])];
    const Vec3 foot = fk.pos[static_cast<std::size_t>(map.foot[side])];

    const double l1 = (knee - hip).norm();
    const double l2 = (foot - knee).norm();  // knee..foot rigid composite

    // knee-ankle-foot plane; collinear joints fall back to hip-knee-foot
    Vec3 n = (ankle - knee).cross(foot - knee);
    if (n.norm() < 1e-10) {
        n = (knee - hip).cross(foot - hip);
    }
    const bool plane_ok = n.norm() > 1e-10;
    if (plane_ok) {
        n.normalize();
    }

    auto apply = [&](const Mat3& delta_base, const Mat3& delta_mid) {
        write_chain_rotations(skel, pose, fk, map.hip[side], map.knee[side], delta_base, delta_mid);
    };
    auto plain_solve = [&]() {
        const Vec3 bend_normal = plane_ok ? n : Vec3::UnitY();
        const TwoBoneSolution sol = solve_two_bone(hip, knee, foot, target, bend_normal);
        const ChainDeltas d = two_bone_world_deltas(hip, knee, foot, sol);
        apply(d.base, d.mid);
    };

    const double reach = (target - hip).norm();
    Vec3 target_in_plane;
    if (!plane_ok || reach >= l1 + l2 || reach <= std::abs(l1 - l2) ||
        !detail::rotate_into_plane(hip, target, knee, n, target_in_plane)) {
        plain_solve();
        return;
    }

    // planar solve with the projected hip as base
    const double h = (hip - knee).dot(n);
    const Vec3 hip_proj = hip - h * n;
    const double l1_plane = std::sqrt(std::max(0.0, l1 * l1 - h * h));
    const double dist_plane = (target_in_plane - hip_proj).norm();
    if (l1_plane < 1e-9 || dist_plane >= l1_plane + l2 || dist_plane <= std::abs(l1_plane - l2)) {
        plain_solve();
        return;
    }
    const TwoBoneSolution planar = solve_two_bone(hip_proj, knee, foot, target_in_plane, n);
    if (!planar.reached) {
        plain_solve();
        return;
    }

    const Mat3 delta_base = rotation_from_to((knee - hip).normalized(), (planar.mid - hip).normalized());
    const Vec3 foot_after_base = hip + delta_base * (foot - hip);
    const Mat3 delta_mid =
        rotation_from_to((foot_after_base - planar.mid).normalized(), (planar.end - planar.mid).normalized()) *
        delta_base;
    // undo the target rotation: carries the planar solution onto the true target
    const Mat3 back = rotation_from_to((target_in_plane - hip).normalized(), (target - hip).normalized());
    apply(back * delta_base, back * delta_mid);
}

/// Eq.-style subsequence blending: shift everything by the correction of
/// the first anchor, then ramp linearly into the correction of the last.
/// Both anchors are reproduced exactly. Input must already be filtered.
template <typename T>
std::vector<T> blend_airborne(const std::vector<T>& filtered, const T& refined_first, const T& refined_last) {
    if (filtered.empty()) {
        throw ValidationError("blend_airborne: empty subsequence");
    }
    const std::size_t k = filtered.size();
    if (k == 1) {
        return {refined_first};
    }
    std::vector<T> shifted(k);
    for (std::size_t i = 0; i < k; ++i) {
        shifted[i] = filtered[i] + (refined_first - filtered[0]);
    }
    std::vector<T> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double ramp = static_cast<double>(i) / static_cast<double>(k - 1);
        out[i] = shifted[i] + ramp * (refined_last - shifted[k - 1]);
    }
    return out;
}

/// Full lower-body pass: threshold contacts, pin contact-group frames with
/// the planar IK, and blend airborne runs between refined anchors. Only
/// hip and knee rotations of the two legs change.
inline MotionSequence refine_feet(const MotionSequence& seq, const Skeleton& skel, double threshold = 0.5) {
    seq.validate();
    if (!seq.contact_probs) {
        throw ValidationError("refine_feet: sequence carries no contact probabilities");
    }
    const BodyMap map = BodyMap::resolve(skel);
    MotionSequence out = seq;
    const int n = seq.frame_count();

    for (int side = 0; side < 2; ++side) {
        const std::vector<bool> contact = threshold_contacts(*seq.contact_probs, side, threshold);
        std::vector<Vec3> foot_pos(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            foot_pos[static_cast<std::size_t>(i)] =
                forward_kinematics(skel, seq.frames[static_cast<std::size_t>(i)])
                    .pos[static_cast<std::size_t>(map.foot[side])];
        }
        const std::vector<ContactGroup> groups = build_groups(contact, foot_pos);
        if (groups.empty()) {
            continue;
        }
        std::vector<bool> refined(static_cast<std::size_t>(n), false);
        for (const auto& grp : groups) {
            for (int f = grp.begin; f <= grp.end; ++f) {
                retarget_foot(skel, out.frames[static_cast<std::size_t>(f)], map, side, grp.target);
                refined[static_cast<std::size_t>(f)] = true;
            }
        }

        // airborne subsequences, per changed joint, blended in 6D coordinates
        for (const int joint : {map.hip[side], map.knee[side]}) {
            int i = 0;
            while (i < n) {
                if (refined[static_cast<std::size_t>(i)]) {
                    ++i;
                    continue;
                }
                int j = i;
                while (j + 1 < n && !refined[static_cast<std::size_t>(j + 1)]) {
                    ++j;
                }
                const int lo = i > 0 ? i - 1 : i;        // adjacent contact anchors, when present
                const int hi = j < n - 1 ? j + 1 : j;
                std::vector<Eigen::VectorXd> sub;
                for (int f = lo; f <= hi; ++f) {
                    sub.emplace_back(seq.frames[static_cast<std::size_t>(f)].joint_block(joint));
                }
                const auto filtered = mean_filter3(sub);
                const Eigen::VectorXd first_anchor =
                    i > 0 ? Eigen::VectorXd(out.frames[static_cast<std::size_t>(lo)].joint_block(joint))
                          : filtered.front();
                const Eigen::VectorXd last_anchor =
                    j < n - 1 ? Eigen::VectorXd(out.frames[static_cast<std::size_t>(hi)].joint_block(joint))
                              : filtered.back();
                const auto blended = blend_airborne(filtered, first_anchor, last_anchor);
                for (int f = i; f <= j; ++f) {
                    out.frames[static_cast<std::size_t>(f)].joint_block(joint) =
                        blended[static_cast<std::size_t>(f - lo)];
                }
                i = j + 1;
            }
            // blended 6D blocks are re-orthonormalized by a decode/encode pass
            for (int f = 0; f < n; ++f) {
                if (!refined[static_cast<std::size_t>(f)]) {
                    auto block = out.frames[static_cast<std::size_t>(f)].joint_block(joint);
                    block = matrix_to_rot6d(rot6d_to_matrix(block), 1e-3);
                }
            }
        }
    }
    return out;
}

}  // namespace grasp
