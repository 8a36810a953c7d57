#include <catch2/catch_amalgamated.hpp>

#include "grasp/kinematics.hpp"
#include "helpers.hpp"

using namespace grasp;

namespace {

// Independent oracle: rest positions by summing bone offsets along the
// parent path, no transform composition involved.
Vec3 rest_position(const Skeleton& s, int joint) {
    Vec3 p = Vec3::Zero();
    for (int j = joint; j > 0; j = s.parents[static_cast<std::size_t>(j)]) {
        p += s.bone_offset(j);
    }
    return p;
}

}  // namespace

TEST_CASE("standard skeleton satisfies its invariants") {
    const Skeleton s = standard_skeleton();
    REQUIRE(s.joint_count() == 37);
    REQUIRE(s.bone_count() == 36);
    REQUIRE_NOTHROW(s.validate());
    REQUIRE_NOTHROW(BodyMap::resolve(s));
    REQUIRE(s.length_vector().size() == 36);
    REQUIRE(s.length_vector().minCoeff() > 0.0);
}

TEST_CASE("identity pose reproduces rest positions") {
    const Skeleton s = standard_skeleton();
    const FkResult fk = forward_kinematics(s, Pose{});
    for (int j = 0; j < s.joint_count(); ++j) {
        REQUIRE((fk.pos[static_cast<std::size_t>(j)] - rest_position(s, j)).norm() < 1e-12);
        REQUIRE((fk.rot[static_cast<std::size_t>(j)] - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("root translation shifts every joint rigidly") {
    const Skeleton s = standard_skeleton();
    Pose p;
    p.t() = Vec3(1, 2, 3);
    const FkResult fk = forward_kinematics(s, p);
    for (int j = 0; j < s.joint_count(); ++j) {
        REQUIRE((fk.pos[static_cast<std::size_t>(j)] - (rest_position(s, j) + Vec3(1, 2, 3))).norm() < 1e-12);
    }
}

TEST_CASE("two-link chain with a 90 degree bend lands where hand composition says") {
    // root -> A (0.4 along +x) -> B (0.4 along +x), knee joint A bent 90
    // degrees about +z: B ends up at (0.4, 0.4, 0).
    Skeleton s;
    s.joint_names = {"root", "a", "b"};
    s.parents = {-1, 0, 1};
    s.rest_dirs = {Vec3::Zero(), Vec3::UnitX(), Vec3::UnitX()};
    s.bone_lengths = {0.0, 0.4, 0.4};
    s.validate();

    std::vector<Mat3> locals = {Mat3::Identity(),
                                Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()).toRotationMatrix(), Mat3::Identity()};
    const FkResult fk = fk_from_locals(s, Vec3::Zero(), locals);
    REQUIRE((fk.pos[1] - Vec3(0.4, 0, 0)).norm() < 1e-12);
    REQUIRE((fk.pos[2] - Vec3(0.4, 0.4, 0)).norm() < 1e-12);
}

TEST_CASE("rigid-bone property holds on random poses") {
    const Skeleton s = standard_skeleton();
    auto g = testutil::rng(5);
    for (int it = 0; it < 25; ++it) {
        const FkResult fk = forward_kinematics(s, testutil::random_pose(g));
        for (int j = 1; j < s.joint_count(); ++j) {
            const auto pj = static_cast<std::size_t>(s.parents[static_cast<std::size_t>(j)]);
            const double d = (fk.pos[static_cast<std::size_t>(j)] - fk.pos[pj]).norm();
            REQUIRE(std::abs(d - s.bone_lengths[static_cast<std::size_t>(j)]) < 1e-6);
        }
    }
}

TEST_CASE("root position derivative w.r.t. translation is the identity") {
    const Skeleton s = standard_skeleton();
    const int joints[] = {0};
    const int params[] = {0, 1, 2};
    const Eigen::MatrixXd jac = fk_jacobian(s, Pose{}, joints, params);
    REQUIRE((jac - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("non-ancestor rotations have zero position derivative") {
    const Skeleton s = standard_skeleton();
    const BodyMap m = BodyMap::resolve(s);
    auto g = testutil::rng(23);
    const Pose p = testutil::random_pose(g);
    // left foot position w.r.t. right elbow rotation
    const int joints[] = {m.foot[0]};
    int params[6];
    for (int k = 0; k < 6; ++k) {
        params[k] = Pose::joint_param_offset(m.elbow[1]) + k;
    }
    const Eigen::MatrixXd jac = fk_jacobian(s, p, joints, params);
    REQUIRE(jac.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("full FK jacobian matches finite differences") {
    const Skeleton s = standard_skeleton();
    auto g = testutil::rng(31);
    const Pose p = testutil::random_pose(g);
    std::vector<int> joints(kJointCount);
    for (int j = 0; j < kJointCount; ++j) {
        joints[static_cast<std::size_t>(j)] = j;
    }
    const auto params = all_pose_params();
    const Eigen::MatrixXd analytic = fk_jacobian(s, p, joints, params);
    const Eigen::MatrixXd fd = testutil::finite_difference(
        [&](const Eigen::VectorXd& x) { return forward_kinematics(s, Pose(x)).positions_flat(); }, p.x, 1e-5);
    REQUIRE(testutil::rel_error(analytic, fd) < 1e-4);
}

TEST_CASE("reverse-mode FK agrees with the jacobian") {
    const Skeleton s = standard_skeleton();
    auto g = testutil::rng(37);
    for (int it = 0; it < 5; ++it) {
        const Pose p = testutil::random_pose(g);
        const FkResult fk = forward_kinematics(s, p);
        // random linear functional of joint positions
        FkAdjoint adj(kJointCount);
        Eigen::VectorXd weights(3 * kJointCount);
        for (int j = 0; j < kJointCount; ++j) {
            const Vec3 w(testutil::uniform(g, -1, 1), testutil::uniform(g, -1, 1), testutil::uniform(g, -1, 1));
            adj.d_pos[static_cast<std::size_t>(j)] = w;
            weights.segment<3>(3 * j) = w;
        }
        const Eigen::VectorXd grad = fk_backward(s, p, fk, adj);
        std::vector<int> joints(kJointCount);
        for (int j = 0; j < kJointCount; ++j) {
            joints[static_cast<std::size_t>(j)] = j;
        }
        const Eigen::MatrixXd jac = fk_jacobian(s, p, joints, all_pose_params());
        const Eigen::VectorXd expected = jac.transpose() * weights;
        REQUIRE(testutil::rel_error(grad, expected) < 1e-10);
    }
}

TEST_CASE("wrist-local finger positions are rigid-transform invariant") {
    const Skeleton s = standard_skeleton();
    const BodyMap m = BodyMap::resolve(s);
    auto g = testutil::rng(41);
    const Pose p = testutil::random_pose(g);
    const Eigen::MatrixX3d base = wrist_local_finger_positions(s, p, m);

    Pose moved = p;
    moved.t() = Vec3(3, -2, 5);
    moved.phi() = matrix_to_rot6d(testutil::random_rotation(g));
    const Eigen::MatrixX3d after = wrist_local_finger_positions(s, moved, m);
    REQUIRE((after - base).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("wrist-local positions match the explicit inverse-transform path") {
    const Skeleton s = standard_skeleton();
    const BodyMap m = BodyMap::resolve(s);
    auto g = testutil::rng(43);
    for (int it = 0; it < 10; ++it) {
        const Pose p = testutil::random_pose(g);
        const FkResult fk = forward_kinematics(s, p);
        const Eigen::MatrixX3d h = wrist_local_finger_positions(s, p, m);
        const auto w = static_cast<std::size_t>(m.wrist[1]);
        int row = 0;
        for (int f = 0; f < 5; ++f) {
            for (int k = 0; k < 3; ++k) {
                const auto j = static_cast<std::size_t>(m.finger[f][k]);
                const Vec3 expect = fk.rot[w].inverse() * (fk.pos[j] - fk.pos[w]);
                REQUIRE((h.row(row++).transpose() - expect).norm() < 1e-10);
            }
        }
    }
}

TEST_CASE("identity pose wrist-local positions are rest offsets") {
    const Skeleton s = standard_skeleton();
    const BodyMap m = BodyMap::resolve(s);
    const Eigen::MatrixX3d h = wrist_local_finger_positions(s, Pose{}, m);
    int row = 0;
    for (int f = 0; f < 5; ++f) {
        for (int k = 0; k < 3; ++k) {
            Vec3 expect = Vec3::Zero();
            for (int j = m.finger[f][k]; j != m.wrist[1]; j = s.parents[static_cast<std::size_t>(j)]) {
                expect += s.bone_offset(j);
            }
            REQUIRE((h.row(row++).transpose() - expect).norm() < 1e-12);
        }
    }
}
