#include <catch2/catch_amalgamated.hpp>

#include "grasp/hand_surface.hpp"
#include "helpers.hpp"

using namespace grasp;

namespace {
const Skeleton skel = standard_skeleton();
const BodyMap body = BodyMap::resolve(skel);
const HandSurface surface = build_hand_surface(skel, body);
}  // namespace

TEST_CASE("hand surface has exactly 778 points") {
    REQUIRE(surface.points.size() == 778);
    REQUIRE(surface.capsules.size() == 16);  // 15 finger bones + palm
    int palm = 0;
    for (const auto& p : surface.points) {
        if (p.finger < 0) {
            ++palm;
        }
    }
    REQUIRE(palm == HandSurface::kPalmPoints);
}

TEST_CASE("identity pose places points at their rest offsets") {
    const FkResult fk = forward_kinematics(skel, Pose{});
    Eigen::MatrixX3d pts;
    hand_surface_points(fk, surface, pts);
    for (std::size_t i = 0; i < surface.points.size(); ++i) {
        const auto& hp = surface.points[i];
        const Vec3 expect = fk.pos[static_cast<std::size_t>(hp.owner)] + hp.offset;
        REQUIRE((pts.row(static_cast<Eigen::Index>(i)).transpose() - expect).norm() < 1e-12);
    }
}

TEST_CASE("a rigid global rotation rotates every point the same way") {
    auto g = testutil::rng(3);
    const Mat3 r = testutil::random_rotation(g);
    Pose p;
    p.phi() = matrix_to_rot6d(r);
    Eigen::MatrixX3d base = hand_surface_points(skel, Pose{}, surface);
    Eigen::MatrixX3d rotated = hand_surface_points(skel, p, surface);
    for (Eigen::Index i = 0; i < base.rows(); ++i) {
        const Vec3 expect = r * base.row(i).transpose();
        REQUIRE((rotated.row(i).transpose() - expect).norm() < 1e-10);
    }
}

TEST_CASE("pairwise distances within one bone are pose-invariant") {
    auto g = testutil::rng(9);
    // two points on the same owner joint
    std::size_t i = 0, j = 1;
    REQUIRE(surface.points[i].owner == surface.points[j].owner);
    const Eigen::MatrixX3d rest = hand_surface_points(skel, Pose{}, surface);
    const double d0 = (rest.row(static_cast<Eigen::Index>(i)) - rest.row(static_cast<Eigen::Index>(j))).norm();
    for (int it = 0; it < 50; ++it) {
        const Eigen::MatrixX3d pts = hand_surface_points(skel, testutil::random_pose(g), surface);
        const double d = (pts.row(static_cast<Eigen::Index>(i)) - pts.row(static_cast<Eigen::Index>(j))).norm();
        REQUIRE(d == Catch::Approx(d0).epsilon(1e-9));
    }
}

TEST_CASE("surface normals stay unit length") {
    auto g = testutil::rng(15);
    const Pose p = testutil::random_pose(g);
    const FkResult fk = forward_kinematics(skel, p);
    Eigen::MatrixX3d pts, normals;
    hand_surface_points(fk, surface, pts, &normals);
    for (Eigen::Index i = 0; i < normals.rows(); ++i) {
        REQUIRE(normals.row(i).norm() == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("every finger carries 7 keypoints including the tip") {
    const FkResult fk = forward_kinematics(skel, Pose{});
    for (int f = 0; f < 5; ++f) {
        const Eigen::MatrixX3d kp = finger_keypoints_world(fk, surface, f);
        REQUIRE(kp.rows() == 7);
        // tip lies beyond the distal joint
        const Vec3 distal = fk.pos[static_cast<std::size_t>(body.finger[f][2])];
        const Vec3 middle = fk.pos[static_cast<std::size_t>(body.finger[f][1])];
        const Vec3 tip = kp.row(6).transpose();
        REQUIRE((tip - middle).norm() > (distal - middle).norm());
    }
}

TEST_CASE("bound point adjoint matches finite differences") {
    auto g = testutil::rng(21);
    const Pose p = testutil::random_pose(g);
    const FkResult fk = forward_kinematics(skel, p);
    const auto& hp = surface.points[100];
    const Vec3 d_p(0.3, -0.7, 1.1);

    FkAdjoint adj(kJointCount);
    bound_point_backward(hp.owner, hp.offset, d_p, adj);
    const Eigen::VectorXd grad = fk_backward(skel, p, fk, std::move(adj));

    const Eigen::MatrixXd fd = testutil::finite_difference(
        [&](const Eigen::VectorXd& x) {
            Eigen::MatrixX3d pts;
            hand_surface_points(forward_kinematics(skel, Pose(x)), surface, pts);
            return Eigen::VectorXd(pts.row(100).transpose());
        },
        p.x, 1e-6);
    const Eigen::VectorXd expected = fd.transpose() * d_p;
    REQUIRE(testutil::rel_error(grad, expected) < 1e-5);
}
