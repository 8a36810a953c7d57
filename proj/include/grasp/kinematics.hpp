#pragma once

#include <span>
#include <vector>

#include "grasp/pose.hpp"

namespace grasp {

/// World transform of every joint: accumulated rotation and position.
struct FkResult {
    std::vector<Mat3> rot;
    std::vector<Vec3> pos;

    Eigen::MatrixX3d positions() const {
        Eigen::MatrixX3d p(pos.size(), 3);
        for (std::size_t j = 0; j < pos.size(); ++j) {
            p.row(static_cast<Eigen::Index>(j)) = pos[j].transpose();
        }
        return p;
    }

    Eigen::VectorXd positions_flat() const {
        Eigen::VectorXd p(3 * pos.size());
        for (std::size_t j = 0; j < pos.size(); ++j) {
            p.segment<3>(static_cast<Eigen::Index>(3 * j)) = pos[j];
        }
        return p;
    }
};

/// Recursive frame composition over an arbitrary skeleton: joint frame =
/// parent frame * local rotation; child position = parent position +
/// parent rotation * bone offset.
inline FkResult fk_from_locals(const Skeleton& skel, const Vec3& root_t, const std::vector<Mat3>& locals) {
    const int n = skel.joint_count();
    if (static_cast<int>(locals.size()) != n) {
        throw ValidationError("fk: one local rotation per joint required");
    }
    FkResult out;
    out.rot.resize(static_cast<std::size_t>(n));
    out.pos.resize(static_cast<std::size_t>(n));
    out.rot[0] = locals[0];
    out.pos[0] = root_t;
    for (int j = 1; j < n; ++j) {
        const auto p = static_cast<std::size_t>(skel.parents[static_cast<std::size_t>(j)]);
        out.rot[static_cast<std::size_t>(j)] = out.rot[p] * locals[static_cast<std::size_t>(j)];
        out.pos[static_cast<std::size_t>(j)] = out.pos[p] + out.rot[p] * skel.bone_offset(j);
    }
    return out;
}

inline FkResult forward_kinematics(const Skeleton& skel, const Pose& pose) {
    if (skel.joint_count() != kJointCount) {
        throw ValidationError("forward_kinematics: pose requires the canonical 37-joint skeleton");
    }
    return fk_from_locals(skel, pose.t(), pose.decode_rotations());
}

/// Analytic derivative of selected joint world positions w.r.t. selected
/// flat pose parameters. Rows: 3 per joint in `joints` (x, y, z); columns
/// follow `params` (indices into the 225-dim pose vector).
inline Eigen::MatrixXd fk_jacobian(const Skeleton& skel, const Pose& pose, std::span<const int> joints,
                                   std::span<const int> params) {
    const int n = skel.joint_count();
    for (int j : joints) {
        if (j < 0 || j >= n) {
            throw ValidationError("fk_jacobian: joint index out of range");
        }
    }
    for (int p : params) {
        if (p < 0 || p >= kPoseDim) {
            throw ValidationError("fk_jacobian: parameter index out of range");
        }
    }
    const auto locals = pose.decode_rotations();
    const FkResult fk = fk_from_locals(skel, pose.t(), locals);

    Eigen::MatrixXd jac(3 * joints.size(), params.size());
    std::vector<Mat3> d_rot(static_cast<std::size_t>(n));
    std::vector<Vec3> d_pos(static_cast<std::size_t>(n));
    std::vector<char> touched(static_cast<std::size_t>(n));

    for (std::size_t c = 0; c < params.size(); ++c) {
        const int p = params[c];
        if (p < 3) {  // root translation: rigid shift of every joint
            for (std::size_t r = 0; r < joints.size(); ++r) {
                jac.block<3, 1>(static_cast<Eigen::Index>(3 * r), static_cast<Eigen::Index>(c)) =
                    Vec3::Unit(p);
            }
            continue;
        }
        const int owner = Pose::param_owner(p);
        const int comp = (p - Pose::joint_param_offset(owner));
        const auto d_local = rot6d_jacobian(pose.joint_block(owner));

        std::fill(touched.begin(), touched.end(), 0);
        touched[static_cast<std::size_t>(owner)] = 1;
        d_rot[static_cast<std::size_t>(owner)] =
            (owner == 0 ? d_local[static_cast<std::size_t>(comp)]
                        : fk.rot[static_cast<std::size_t>(skel.parents[static_cast<std::size_t>(owner)])] *
                              d_local[static_cast<std::size_t>(comp)]);
        d_pos[static_cast<std::size_t>(owner)].setZero();
        for (int j = owner + 1; j < n; ++j) {
            const int par = skel.parents[static_cast<std::size_t>(j)];
            if (!touched[static_cast<std::size_t>(par)]) {
                continue;
            }
            touched[static_cast<std::size_t>(j)] = 1;
            d_rot[static_cast<std::size_t>(j)] =
                d_rot[static_cast<std::size_t>(par)] * locals[static_cast<std::size_t>(j)];
            d_pos[static_cast<std::size_t>(j)] =
                d_pos[static_cast<std::size_t>(par)] + d_rot[static_cast<std::size_t>(par)] * skel.bone_offset(j);
        }
        for (std::size_t r = 0; r < joints.size(); ++r) {
            const auto j = static_cast<std::size_t>(joints[r]);
            jac.block<3, 1>(static_cast<Eigen::Index>(3 * r), static_cast<Eigen::Index>(c)) =
                touched[j] ? d_pos[j] : Vec3::Zero();
        }
    }
    return jac;
}

inline std::vector<int> all_pose_params() {
    std::vector<int> p(kPoseDim);
    for (int i = 0; i < kPoseDim; ++i) {
        p[static_cast<std::size_t>(i)] = i;
    }
    return p;
}

/// Adjoint seed for reverse-mode FK: gradients of a scalar w.r.t. each
/// joint's world rotation and position.
struct FkAdjoint {
    std::vector<Mat3> d_rot;
    std::vector<Vec3> d_pos;

    explicit FkAdjoint(int joints)
        : d_rot(static_cast<std::size_t>(joints), Mat3::Zero()),
          d_pos(static_cast<std::size_t>(joints), Vec3::Zero()) {}
};

/// Reverse-mode FK: propagates world-frame adjoints down to the flat pose
/// parameters in O(joints). `adj` is consumed.
inline Eigen::VectorXd fk_backward(const Skeleton& skel, const Pose& pose, const FkResult& fk, FkAdjoint adj) {
    const int n = skel.joint_count();
    const auto locals = pose.decode_rotations();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(kPoseDim);
    for (int j = n - 1; j >= 1; --j) {
        const auto ju = static_cast<std::size_t>(j);
        const auto pu = static_cast<std::size_t>(skel.parents[ju]);
        // A_j = A_p L_j ; p_j = p_p + A_p o_j
        const Mat3 d_local = fk.rot[pu].transpose() * adj.d_rot[ju];
        adj.d_rot[pu] += adj.d_rot[ju] * locals[ju].transpose() + adj.d_pos[ju] * skel.bone_offset(j).transpose();
        adj.d_pos[pu] += adj.d_pos[ju];
        grad.segment<6>(Pose::joint_param_offset(j)) = rot6d_backward(pose.joint_block(j), d_local);
    }
    grad.segment<3>(0) = adj.d_pos[0];
    grad.segment<6>(3) = rot6d_backward(pose.phi(), adj.d_rot[0]);
    return grad;
}

/// Positions of the 15 right-hand finger joints expressed in the right
/// wrist frame: h = R_w^T (p - p_w).
inline Eigen::MatrixX3d wrist_local_finger_positions(const Skeleton& skel, const Pose& pose, const BodyMap& map) {
    const FkResult fk = forward_kinematics(skel, pose);
    const auto w = static_cast<std::size_t>(map.wrist[1]);
    Eigen::MatrixX3d out(kHandJointCount, 3);
    int row = 0;
    for (int f = 0; f < 5; ++f) {
        for (int k = 0; k < 3; ++k) {
            const auto j = static_cast<std::size_t>(map.finger[f][k]);
            out.row(row++) = (fk.rot[w].transpose() * (fk.pos[j] - fk.pos[w])).transpose();
        }
    }
    return out;
}

/// Adds the adjoint of the wrist-local map to `adj`: `d_h` holds the
/// gradient w.r.t. each wrist-local finger position, rows ordered as in
/// wrist_local_finger_positions.
inline void wrist_local_backward(const FkResult& fk, const BodyMap& map, const Eigen::MatrixX3d& d_h,
                                 FkAdjoint& adj) {
    const auto w = static_cast<std::size_t>(map.wrist[1]);
    int row = 0;
    for (int f = 0; f < 5; ++f) {
        for (int k = 0; k < 3; ++k) {
            const auto j = static_cast<std::size_t>(map.finger[f][k]);
            const Vec3 g = d_h.row(row++).transpose();
            const Vec3 wg = fk.rot[w] * g;
            adj.d_pos[j] += wg;
            adj.d_pos[w] -= wg;
            adj.d_rot[w] += (fk.pos[j] - fk.pos[w]) * g.transpose();
        }
    }
}

}  // namespace grasp
