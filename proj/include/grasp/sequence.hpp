#pragma once

#include <optional>
#include <vector>

#include "grasp/kinematics.hpp"

namespace grasp {

/// Fixed-length motion F = [X_0 .. X_T] with optional per-frame
/// left/right foot contact probabilities.
struct MotionSequence {
    std::vector<Pose> frames;
    double fps = 30.0;
    std::optional<std::vector<Vec2>> contact_probs;

    int frame_count() const { return static_cast<int>(frames.size()); }

    void validate() const {
        if (frames.size() < 2) {
            throw ValidationError("motion: needs at least two frames");
        }
        if (!(fps > 0.0)) {
            throw ValidationError("motion: fps must be positive");
        }
        for (const auto& f : frames) {
            f.validate();
        }
        if (contact_probs && contact_probs->size() != frames.size()) {
            throw ValidationError("motion: contact probabilities must match frame count");
        }
        if (contact_probs) {
            for (const auto& c : *contact_probs) {
                if (c.minCoeff() < 0.0 || c.maxCoeff() > 1.0) {
                    throw ValidationError("motion: contact probabilities must lie in [0,1]");
                }
            }
        }
    }
};

/// Network input token: Z = [X, J] (336 values) plus the given/interpolated
/// flag, zero for the two endpoint frames.
struct ExtendedFrame {
    Eigen::VectorXd z;
    double flag = 1.0;
};

/// Pose extended with its FK joint positions.
inline Eigen::VectorXd extend_with_joints(const Skeleton& skel, const Pose& pose) {
    Eigen::VectorXd z(kExtendedDim);
    z.head(kPoseDim) = pose.x;
    z.tail(3 * kJointCount) = forward_kinematics(skel, pose).positions_flat();
    return z;
}

/// Componentwise linear interpolation from Z_0 to Z_T over T steps. The 6D
/// blocks are interpolated raw; the network consumes them as-is.
inline std::vector<ExtendedFrame> seed_interpolation(const Eigen::VectorXd& z0, const Eigen::VectorXd& zT, int T) {
    if (T < 1) {
        throw ValidationError("seed: sequence length T must be >= 1");
    }
    if (z0.size() != kExtendedDim || zT.size() != kExtendedDim) {
        throw ValidationError("seed: endpoint payloads must have dimension 336");
    }
    std::vector<ExtendedFrame> frames(static_cast<std::size_t>(T) + 1);
    for (int i = 0; i <= T; ++i) {
        const double s = static_cast<double>(i) / T;
        frames[static_cast<std::size_t>(i)].z = z0 + s * (zT - z0);
        frames[static_cast<std::size_t>(i)].flag = (i == 0 || i == T) ? 0.0 : 1.0;
    }
    frames.front().z = z0;
    frames.back().z = zT;
    return frames;
}

/// Size-3 mean filter; interior samples become the average of their
/// neighborhood, the first and last samples pass through unchanged.
template <typename T>
std::vector<T> mean_filter3(const std::vector<T>& signal) {
    if (signal.empty()) {
        throw ValidationError("mean_filter3: empty signal");
    }
    std::vector<T> out = signal;
    for (std::size_t i = 1; i + 1 < signal.size(); ++i) {
        out[i] = (signal[i - 1] + signal[i] + signal[i + 1]) / 3.0;
    }
    return out;
}

}  // namespace grasp
