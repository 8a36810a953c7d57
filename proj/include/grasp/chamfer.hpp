#pragma once

#include "grasp/kdtree.hpp"

namespace grasp {

/// Per-query-point signed nearest distances; negative means the query
/// lies behind the reference surface (inside).
struct SignedDistanceResult {
    Eigen::VectorXd signed_distance;
    Eigen::VectorXi nearest;
    double mean = 0.0;
};

/// Signed Chamfer distance from `query` to the oriented set `reference`:
/// for each query point, distance to its exact nearest reference point,
/// signed by the reference normal.
inline SignedDistanceResult signed_chamfer(const Eigen::MatrixX3d& query, const KdTree3& reference,
                                           const Eigen::MatrixX3d& reference_normals) {
    if (query.rows() == 0) {
        throw ValidationError("signed_chamfer: empty query set");
    }
    SignedDistanceResult out;
    out.signed_distance.resize(query.rows());
    out.nearest.resize(query.rows());
    for (Eigen::Index i = 0; i < query.rows(); ++i) {
        const Vec3 q = query.row(i).transpose();
        const auto hit = reference.nearest(q);
        const Vec3 r = reference.points().row(hit.index).transpose();
        const Vec3 n = reference_normals.row(hit.index).transpose();
        const double sign = (q - r).dot(n) >= 0.0 ? 1.0 : -1.0;
        out.signed_distance[i] = sign * hit.distance;
        out.nearest[i] = hit.index;
    }
    out.mean = out.signed_distance.mean();
    return out;
}

inline SignedDistanceResult signed_chamfer(const Eigen::MatrixX3d& query, const Eigen::MatrixX3d& reference,
                                           const Eigen::MatrixX3d& reference_normals) {
    return signed_chamfer(query, KdTree3(reference), reference_normals);
}

/// Unsigned mean nearest distance from `query` to `reference`.
inline double mean_nearest_distance(const Eigen::MatrixX3d& query, const KdTree3& reference) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < query.rows(); ++i) {
        sum += reference.nearest(query.row(i).transpose()).distance;
    }
    return sum / static_cast<double>(query.rows());
}

/// Collision penalty d(x) = abs(min(x + delta, 0)): active only when a
/// signed distance is below -delta.
inline double penetration_penalty(double signed_distance, double delta) {
    return std::abs(std::min(signed_distance + delta, 0.0));
}

}  // namespace grasp
