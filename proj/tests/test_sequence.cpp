#include <catch2/catch_amalgamated.hpp>

#include "grasp/sequence.hpp"
#include "helpers.hpp"

using namespace grasp;

namespace {
const Skeleton skel = standard_skeleton();
}

TEST_CASE("extended frame payload has dimension 336 and exact FK block") {
    auto g = testutil::rng(2);
    const Pose p = testutil::random_pose(g);
    const Eigen::VectorXd z = extend_with_joints(skel, p);
    REQUIRE(z.size() == 336);
    REQUIRE((z.head(kPoseDim) - p.x).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::VectorXd j = forward_kinematics(skel, p).positions_flat();
    REQUIRE((z.tail(111) - j).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity pose at the origin extends with rest positions") {
    const Eigen::VectorXd z = extend_with_joints(skel, Pose{});
    const Eigen::VectorXd rest = forward_kinematics(skel, Pose{}).positions_flat();
    REQUIRE((z.tail(111) - rest).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("seeded interpolation hits the midpoint and keeps endpoints bit-exact") {
    auto g = testutil::rng(4);
    const Eigen::VectorXd z0 = extend_with_joints(skel, testutil::random_pose(g));
    const Eigen::VectorXd zT = extend_with_joints(skel, testutil::random_pose(g));

    const auto mid = seed_interpolation(z0, zT, 2);
    REQUIRE(mid.size() == 3);
    REQUIRE((mid[1].z - 0.5 * (z0 + zT)).cwiseAbs().maxCoeff() < 1e-15);

    const auto frames = seed_interpolation(z0, zT, 7);
    REQUIRE(frames.front().z == z0);
    REQUIRE(frames.back().z == zT);
    REQUIRE(frames.front().flag == 0.0);
    REQUIRE(frames.back().flag == 0.0);
    for (std::size_t i = 1; i + 1 < frames.size(); ++i) {
        REQUIRE(frames[i].flag == 1.0);
    }
}

TEST_CASE("constant endpoints interpolate to a constant sequence") {
    const Eigen::VectorXd z = extend_with_joints(skel, Pose{});
    const auto frames = seed_interpolation(z, z, 5);
    for (const auto& f : frames) {
        REQUIRE((f.z - z).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("zero-length seeding is rejected") {
    const Eigen::VectorXd z = extend_with_joints(skel, Pose{});
    REQUIRE_THROWS_AS(seed_interpolation(z, z, 0), ValidationError);
}

TEST_CASE("mean filter keeps constants and endpoints") {
    std::vector<double> constant(9, 4.2);
    REQUIRE(mean_filter3(constant) == constant);

    const std::vector<double> spike = {0.0, 3.0, 0.0};
    const std::vector<double> expect = {0.0, 1.0, 0.0};
    REQUIRE(mean_filter3(spike) == expect);

    const std::vector<double> one = {7.0};
    REQUIRE(mean_filter3(one) == one);
    const std::vector<double> two = {7.0, -1.0};
    REQUIRE(mean_filter3(two) == two);
}

TEST_CASE("mean filter is linear") {
    auto g = testutil::rng(6);
    std::vector<double> x(12), y(12);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = testutil::uniform(g, -5, 5);
        y[i] = testutil::uniform(g, -5, 5);
    }
    const double a = 2.5, b = -1.25;
    std::vector<double> combo(12);
    for (std::size_t i = 0; i < x.size(); ++i) {
        combo[i] = a * x[i] + b * y[i];
    }
    const auto fc = mean_filter3(combo);
    const auto fx = mean_filter3(x);
    const auto fy = mean_filter3(y);
    for (std::size_t i = 0; i < x.size(); ++i) {
        REQUIRE(fc[i] == Catch::Approx(a * fx[i] + b * fy[i]).margin(1e-12));
    }
}

TEST_CASE("mean filter works on vector-valued samples") {
    std::vector<Eigen::VectorXd> sig(4, Eigen::VectorXd::Zero(2));
    sig[1] << 3.0, -3.0;
    const auto out = mean_filter3(sig);
    REQUIRE(out[0].isZero());
    REQUIRE(out[1][0] == Catch::Approx(1.0));
    REQUIRE(out[2][0] == Catch::Approx(1.0));
    REQUIRE(out[3].isZero());
}

TEST_CASE("motion sequence validation") {
    MotionSequence seq;
    seq.frames = {Pose{}, Pose{}, Pose{}};
    seq.fps = 30.0;
    REQUIRE_NOTHROW(seq.validate());

    seq.contact_probs = std::vector<Vec2>{{1, 1}, {0.5, 0.5}};
    REQUIRE_THROWS_AS(seq.validate(), ValidationError);
    seq.contact_probs = std::vector<Vec2>{{1, 1}, {0.5, 0.5}, {0, 0}};
    REQUIRE_NOTHROW(seq.validate());
    (*seq.contact_probs)[0][0] = 1.5;
    REQUIRE_THROWS_AS(seq.validate(), ValidationError);

    MotionSequence single;
    single.frames = {Pose{}};
    REQUIRE_THROWS_AS(single.validate(), ValidationError);
}
