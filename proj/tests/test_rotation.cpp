#include <catch2/catch_amalgamated.hpp>

#include "grasp/rotation.hpp"
#include "helpers.hpp"

using namespace grasp;

TEST_CASE("canonical 6D of the identity decodes to the identity") {
    Vec6 v;
    v << 1, 0, 0, 0, 1, 0;
    REQUIRE((rot6d_to_matrix(v) - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("decoding normalizes scale") {
    Vec6 v;
    v << 2, 0, 0, 0, 3, 0;
    REQUIRE((rot6d_to_matrix(v) - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("random 6D inputs decode to proper rotations") {
    auto g = testutil::rng(7);
    for (int i = 0; i < 100; ++i) {
        const Vec6 v = testutil::random_rot6d(g);
        const Mat3 r = rot6d_to_matrix(v);
        REQUIRE((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
        REQUIRE(r.determinant() == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("degenerate 6D inputs are rejected") {
    Vec6 zero_first;
    zero_first << 0, 0, 0, 0, 1, 0;
    REQUIRE_THROWS_AS(rot6d_to_matrix(zero_first), DegenerateRotationError);
    Vec6 parallel;
    parallel << 1, 0, 0, 2, 0, 0;
    REQUIRE_THROWS_AS(rot6d_to_matrix(parallel), DegenerateRotationError);
}

TEST_CASE("matrix encoding takes the first two columns") {
    const Vec6 v = matrix_to_rot6d(Mat3::Identity());
    Vec6 expect;
    expect << 1, 0, 0, 0, 1, 0;
    REQUIRE((v - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encoding a 90 degree rotation about z") {
    const Mat3 r = Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()).toRotationMatrix();
    const Vec6 v = matrix_to_rot6d(r);
    Vec6 expect;
    expect << 0, 1, 0, -1, 0, 0;
    REQUIRE((v - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("matrix -> 6D -> matrix round trips") {
    auto g = testutil::rng(11);
    for (int i = 0; i < 100; ++i) {
        const Mat3 r = testutil::random_rotation(g);
        const Mat3 back = rot6d_to_matrix(matrix_to_rot6d(r));
        REQUIRE((back - r).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("non-orthonormal matrices are rejected") {
    Mat3 bad = Mat3::Identity();
    bad(0, 0) = 1.1;
    REQUIRE_THROWS_AS(matrix_to_rot6d(bad), ValidationError);
    // reflections fail the determinant check
    Mat3 reflect = Mat3::Identity();
    reflect(2, 2) = -1.0;
    REQUIRE_THROWS_AS(matrix_to_rot6d(reflect), ValidationError);
}

TEST_CASE("analytic 6D jacobian matches finite differences") {
    auto g = testutil::rng(13);
    for (int i = 0; i < 20; ++i) {
        const Vec6 v = testutil::random_rot6d(g);
        const auto jac = rot6d_jacobian(v);
        auto flatten = [](const Mat3& m) {
            Eigen::VectorXd f(9);
            for (int c = 0; c < 3; ++c) {
                f.segment<3>(3 * c) = m.col(c);
            }
            return f;
        };
        const Eigen::MatrixXd fd = testutil::finite_difference(
            [&](const Eigen::VectorXd& x) { return flatten(rot6d_to_matrix(Vec6(x))); }, v, 1e-6);
        Eigen::MatrixXd analytic(9, 6);
        for (int k = 0; k < 6; ++k) {
            analytic.col(k) = flatten(jac[static_cast<std::size_t>(k)]);
        }
        REQUIRE(testutil::rel_error(analytic, fd) < 1e-6);
    }
}

TEST_CASE("rotation_from_to maps between unit vectors") {
    auto g = testutil::rng(17);
    for (int i = 0; i < 50; ++i) {
        const Vec3 a = testutil::random_unit(g);
        const Vec3 b = testutil::random_unit(g);
        REQUIRE((rotation_from_to(a, b) * a - b).norm() < 1e-12);
    }
    const Vec3 a = Vec3::UnitX();
    REQUIRE((rotation_from_to(a, a) - Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((rotation_from_to(a, Vec3(-a)) * a + a).norm() < 1e-12);
}
