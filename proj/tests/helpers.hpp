#pragma once

#include <functional>
#include <random>

#include "grasp/pose.hpp"
#include "grasp/rotation.hpp"

namespace testutil {

using grasp::Mat3;
using grasp::Pose;
using grasp::Vec3;
using grasp::Vec6;

inline std::mt19937_64 rng(unsigned seed = 42) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& g, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline Vec3 random_unit(std::mt19937_64& g) {
    Vec3 v;
    do {
        v = Vec3(uniform(g, -1, 1), uniform(g, -1, 1), uniform(g, -1, 1));
    } while (v.norm() < 1e-3);
    return v.normalized();
}

inline Mat3 random_rotation(std::mt19937_64& g) {
    return Eigen::AngleAxisd(uniform(g, -M_PI, M_PI), random_unit(g)).toRotationMatrix();
}

inline Vec6 random_rot6d(std::mt19937_64& g) {
    Vec6 v;
    for (int i = 0; i < 6; ++i) {
        v[i] = uniform(g, -1, 1);
    }
    // keep clear of the degenerate set
    if (v.head<3>().norm() < 0.2 || v.head<3>().normalized().cross(v.tail<3>()).norm() < 0.2) {
        v << 1, 0.3, -0.2, 0.1, 1, 0.4;
    }
    return v;
}

/// Random pose with bounded joint rotations (radians) so FK stays well away
/// from rotation-encoding degeneracies.
inline Pose random_pose(std::mt19937_64& g, double max_angle = 0.8) {
    Pose p;
    p.t() = Vec3(uniform(g, -1, 1), uniform(g, -1, 1), uniform(g, 0, 1.5));
    auto rand_block = [&]() {
        const Mat3 r = Eigen::AngleAxisd(uniform(g, -max_angle, max_angle), random_unit(g)).toRotationMatrix();
        return grasp::matrix_to_rot6d(r);
    };
    p.phi() = rand_block();
    for (int j = 0; j < grasp::kBodyJointCount - 1; ++j) {
        p.body(j) = rand_block();
    }
    for (int j = 0; j < grasp::kHandJointCount; ++j) {
        p.hand(j) = rand_block();
    }
    return p;
}

/// Central finite differences of f at x, column c = df/dx_c.
inline Eigen::MatrixXd finite_difference(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                         const Eigen::VectorXd& x, double step = 1e-5) {
    const Eigen::VectorXd f0 = f(x);
    Eigen::MatrixXd jac(f0.size(), x.size());
    for (Eigen::Index c = 0; c < x.size(); ++c) {
        Eigen::VectorXd xp = x, xm = x;
        xp[c] += step;
        xm[c] -= step;
        jac.col(c) = (f(xp) - f(xm)) / (2.0 * step);
    }
    return jac;
}

/// Relative error with absolute floor, as used by the gradient checks.
inline double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-8});
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace testutil
