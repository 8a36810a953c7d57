#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <stdexcept>

namespace grasp {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;

/// Raised when input data violates a documented precondition.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a 6D rotation vector cannot be orthonormalized
/// (zero first vector, or second vector parallel to the first).
class DegenerateRotationError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Raised when an iterative computation produces non-finite values.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {
constexpr double kDegenerateEps = 1e-10;
}

/// Decode a continuous 6D rotation vector into a rotation matrix.
///
/// The two 3-vectors are Gram-Schmidt orthonormalized to form the first
/// two columns; the third column is their cross product. The result is
/// a proper rotation (det = 1) for any non-degenerate input, so scaled
/// inputs decode to the same rotation.
inline Mat3 rot6d_to_matrix(const Vec6& v) {
    if (!v.allFinite()) {
        throw DegenerateRotationError("rot6d: non-finite input");
    }
    const Vec3 a = v.head<3>();
    const Vec3 b = v.tail<3>();
    const double na = a.norm();
    if (na < detail::kDegenerateEps) {
        throw DegenerateRotationError("rot6d: first vector has (near-)zero norm");
    }
    const Vec3 c1 = a / na;
    const Vec3 u = b - c1.dot(b) * c1;
    const double nu = u.norm();
    if (nu < detail::kDegenerateEps) {
        throw DegenerateRotationError("rot6d: second vector is (near-)parallel to the first");
    }
    const Vec3 c2 = u / nu;
    Mat3 r;
    r.col(0) = c1;
    r.col(1) = c2;
    r.col(2) = c1.cross(c2);
    return r;
}

/// Encode a rotation matrix as its first two columns.
inline Vec6 matrix_to_rot6d(const Mat3& r, double tol = 1e-6) {
    const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho <= tol) || std::abs(r.determinant() - 1.0) > tol) {
        throw ValidationError("matrix_to_rot6d: input is not a rotation matrix");
    }
    Vec6 v;
    v.head<3>() = r.col(0);
    v.tail<3>() = r.col(1);
    return v;
}

/// Canonical 6D encoding of the identity rotation.
inline Vec6 rot6d_identity() {
    Vec6 v;
    v << 1, 0, 0, 0, 1, 0;
    return v;
}

/// Per-component derivative of the decoded rotation: element k holds
/// dR/dv_k as a 3x3 matrix.
inline std::array<Mat3, 6> rot6d_jacobian(const Vec6& v) {
    const Vec3 a = v.head<3>();
    const Vec3 b = v.tail<3>();
    const double na = a.norm();
    if (na < detail::kDegenerateEps) {
        throw DegenerateRotationError("rot6d_jacobian: first vector has (near-)zero norm");
    }
    const Vec3 c1 = a / na;
    const double s = c1.dot(b);
    const Vec3 u = b - s * c1;
    const double nu = u.norm();
    if (nu < detail::kDegenerateEps) {
        throw DegenerateRotationError("rot6d_jacobian: second vector is (near-)parallel to the first");
    }
    const Vec3 c2 = u / nu;

    // dc1/da, then chain through u = b - (c1.b) c1 and the second normalize.
    const Mat3 d_c1_da = (Mat3::Identity() - c1 * c1.transpose()) / na;
    const Mat3 d_u_da = -(c1 * (b.transpose() * d_c1_da) + s * d_c1_da);
    const Mat3 d_u_db = Mat3::Identity() - c1 * c1.transpose();
    const Mat3 d_norm = (Mat3::Identity() - c2 * c2.transpose()) / nu;
    const Mat3 d_c2_da = d_norm * d_u_da;
    const Mat3 d_c2_db = d_norm * d_u_db;

    auto cross_mat = [](const Vec3& w) {
        Mat3 m;
        m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
        return m;
    };
    const Mat3 c1x = cross_mat(c1);
    const Mat3 c2x = cross_mat(c2);
    // d(c1 x c2) = dc1 x c2 + c1 x dc2
    const Mat3 d_c3_da = -c2x * d_c1_da + c1x * d_c2_da;
    const Mat3 d_c3_db = c1x * d_c2_db;

    std::array<Mat3, 6> jac;
    for (int k = 0; k < 3; ++k) {
        Mat3 m;
        m.col(0) = d_c1_da.col(k);
        m.col(1) = d_c2_da.col(k);
        m.col(2) = d_c3_da.col(k);
        jac[static_cast<std::size_t>(k)] = m;
        Mat3 mb;
        mb.col(0).setZero();
        mb.col(1) = d_c2_db.col(k);
        mb.col(2) = d_c3_db.col(k);
        jac[static_cast<std::size_t>(k + 3)] = mb;
    }
    return jac;
}

/// Vector-Jacobian product: gradient of a scalar w.r.t. the 6D vector,
/// given its gradient w.r.t. the decoded matrix.
inline Vec6 rot6d_backward(const Vec6& v, const Mat3& d_loss_d_r) {
    const auto jac = rot6d_jacobian(v);
    Vec6 g;
    for (int k = 0; k < 6; ++k) {
        g[k] = (d_loss_d_r.array() * jac[static_cast<std::size_t>(k)].array()).sum();
    }
    return g;
}

/// Minimal rotation taking unit vector `from` onto unit vector `to`.
/// Antiparallel inputs rotate pi about an arbitrary perpendicular axis.
inline Mat3 rotation_from_to(const Vec3& from, const Vec3& to) {
    const double c = from.dot(to);
    const Vec3 axis = from.cross(to);
    const double s = axis.norm();
    if (s < 1e-12) {
        if (c > 0.0) {
            return Mat3::Identity();
        }
        Vec3 ortho = from.cross(Vec3::UnitX());
        if (ortho.squaredNorm() < 1e-12) {
            ortho = from.cross(Vec3::UnitY());
        }
        return Eigen::AngleAxisd(M_PI, ortho.normalized()).toRotationMatrix();
    }
    return Eigen::AngleAxisd(std::atan2(s, c), axis / s).toRotationMatrix();
}

}  // namespace grasp
