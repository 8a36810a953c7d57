#pragma once

#include <vector>

#include "grasp/rotation.hpp"
#include "grasp/skeleton.hpp"

namespace grasp {

/// Full-body pose [t, phi, theta_b, theta_r] stored flat as 225 values:
/// root translation (3), global orientation (6D), 21 body rotations and
/// 15 right-hand rotations in 6D. Blocks are raw 6D coordinates; decoding
/// orthonormalizes.
struct Pose {
    Eigen::VectorXd x;

    Pose() : x(Eigen::VectorXd::Zero(kPoseDim)) {
        phi() = rot6d_identity();
        for (int j = 0; j < kBodyJointCount - 1; ++j) {
            body(j) = rot6d_identity();
        }
        for (int j = 0; j < kHandJointCount; ++j) {
            hand(j) = rot6d_identity();
        }
    }

    explicit Pose(const Eigen::VectorXd& flat) : x(flat) {
        if (x.size() != kPoseDim) {
            throw ValidationError("pose: flattened dimension must be 225, got " + std::to_string(x.size()));
        }
    }

    Eigen::VectorBlock<Eigen::VectorXd, 3> t() { return x.segment<3>(0); }
    Eigen::VectorBlock<const Eigen::VectorXd, 3> t() const { return x.segment<3>(0); }
    Eigen::VectorBlock<Eigen::VectorXd, 6> phi() { return x.segment<6>(3); }
    Eigen::VectorBlock<const Eigen::VectorXd, 6> phi() const { return x.segment<6>(3); }
    Eigen::VectorBlock<Eigen::VectorXd, 6> body(int j) { return x.segment<6>(9 + 6 * j); }
    Eigen::VectorBlock<const Eigen::VectorXd, 6> body(int j) const { return x.segment<6>(9 + 6 * j); }
    Eigen::VectorBlock<Eigen::VectorXd, 6> hand(int j) { return x.segment<6>(9 + 6 * (kBodyJointCount - 1) + 6 * j); }
    Eigen::VectorBlock<const Eigen::VectorXd, 6> hand(int j) const {
        return x.segment<6>(9 + 6 * (kBodyJointCount - 1) + 6 * j);
    }

    /// Raw 6D block of joint j of the canonical skeleton (j > 0).
    Eigen::VectorBlock<Eigen::VectorXd, 6> joint_block(int j) {
        return j == 0 ? phi() : x.segment<6>(3 + 6 * j);
    }
    Eigen::VectorBlock<const Eigen::VectorXd, 6> joint_block(int j) const {
        return j == 0 ? phi() : x.segment<6>(3 + 6 * j);
    }

    /// Local rotation matrices in joint order (index 0 = global orientation).
    std::vector<Mat3> decode_rotations() const {
        std::vector<Mat3> r(kJointCount);
        for (int j = 0; j < kJointCount; ++j) {
            r[static_cast<std::size_t>(j)] = rot6d_to_matrix(joint_block(j));
        }
        return r;
    }

    /// Checks dimension and that every 6D block decodes to a proper rotation.
    void validate() const {
        if (x.size() != kPoseDim) {
            throw ValidationError("pose: flattened dimension must be 225");
        }
        if (!x.allFinite()) {
            throw ValidationError("pose: non-finite values");
        }
        for (int j = 0; j < kJointCount; ++j) {
            const Mat3 r = rot6d_to_matrix(joint_block(j));
            if (std::abs(r.determinant() - 1.0) > 1e-6) {
                throw ValidationError("pose: block " + std::to_string(j) + " does not decode to a rotation");
            }
        }
    }

    /// Index of the first flat coordinate of joint j's 6D block.
    static int joint_param_offset(int j) { return j == 0 ? 3 : 3 + 6 * j; }

    /// Joint owning flat parameter p (root for translation and phi).
    static int param_owner(int p) { return p < 9 ? 0 : (p - 3) / 6; }
};

}  // namespace grasp
