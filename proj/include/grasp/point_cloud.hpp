#pragma once

#include <random>

#include <Eigen/Eigenvalues>

#include "grasp/kdtree.hpp"

namespace grasp {

/// Object to be grasped: 4096 oriented surface samples in world frame.
struct ObjectCloud {
    Eigen::MatrixX3d points;
    Eigen::MatrixX3d normals;

    static constexpr int kPointCount = 4096;

    void validate() const {
        if (points.rows() != kPointCount) {
            throw ValidationError("object cloud: expected 4096 points, got " + std::to_string(points.rows()));
        }
        if (normals.rows() != points.rows()) {
            throw ValidationError("object cloud: normals/points count mismatch");
        }
        for (Eigen::Index i = 0; i < normals.rows(); ++i) {
            if (std::abs(normals.row(i).norm() - 1.0) > 1e-6) {
                throw ValidationError("object cloud: normal " + std::to_string(i) + " is not unit length");
            }
        }
    }
};

/// Deterministic sphere sampling (Fibonacci lattice) with analytic
/// outward normals.
inline ObjectCloud sphere_cloud(const Vec3& center, double radius, int count = ObjectCloud::kPointCount) {
    ObjectCloud c;
    c.points.resize(count, 3);
    c.normals.resize(count, 3);
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double theta = golden * i;
        const Vec3 n(r * std::cos(theta), r * std::sin(theta), z);
        c.normals.row(i) = n.transpose();
        c.points.row(i) = (center + radius * n).transpose();
    }
    return c;
}

/// Axis-aligned box surface sampling with analytic face normals,
/// deterministic for a given seed.
inline ObjectCloud box_cloud(const Vec3& center, const Vec3& half, uint64_t seed,
                             int count = ObjectCloud::kPointCount) {
    ObjectCloud c;
    c.points.resize(count, 3);
    c.normals.resize(count, 3);
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double ax = half.y() * half.z(), ay = half.x() * half.z(), az = half.x() * half.y();
    std::discrete_distribution<int> face({ax, ax, ay, ay, az, az});
    for (int i = 0; i < count; ++i) {
        const int f = face(g);
        const int axis = f / 2;
        const double sign = (f % 2 == 0) ? 1.0 : -1.0;
        Vec3 p;
        for (int k = 0; k < 3; ++k) {
            p[k] = unit(g) * half[k];
        }
        p[axis] = sign * half[axis];
        c.points.row(i) = (center + p).transpose();
        c.normals.row(i) = (sign * Vec3::Unit(axis)).transpose();
    }
    return c;
}

/// Normal estimation for clouds supplied without orientation: local plane
/// fit over the k nearest neighbors, flipped to point away from the
/// centroid.
inline Eigen::MatrixX3d estimate_normals(const Eigen::MatrixX3d& points, int k = 12) {
    const KdTree3 tree(points);
    const Vec3 centroid = points.colwise().mean().transpose();
    Eigen::MatrixX3d normals(points.rows(), 3);
    const int n = static_cast<int>(points.rows());
    k = std::min(k, n);
    for (int i = 0; i < n; ++i) {
        const Vec3 q = points.row(i).transpose();
        // collect k nearest by partial sort (clouds are static, this runs once at load)
        std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
            dist[static_cast<std::size_t>(j)] = {(points.row(j).transpose() - q).squaredNorm(), j};
        }
        std::nth_element(dist.begin(), dist.begin() + k, dist.end());
        Vec3 mean = Vec3::Zero();
        for (int j = 0; j < k; ++j) {
            mean += points.row(dist[static_cast<std::size_t>(j)].second).transpose();
        }
        mean /= k;
        Mat3 cov = Mat3::Zero();
        for (int j = 0; j < k; ++j) {
            const Vec3 d = points.row(dist[static_cast<std::size_t>(j)].second).transpose() - mean;
            cov += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        Vec3 normal = eig.eigenvectors().col(0);
        if (normal.dot(q - centroid) < 0.0) {
            normal = -normal;
        }
        normals.row(i) = normal.transpose();
    }
    return normals;
}

}  // namespace grasp
