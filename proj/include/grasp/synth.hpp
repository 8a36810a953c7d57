#pragma once

#include <random>

#include "grasp/foot_refine.hpp"
#include "grasp/generator.hpp"
#include "grasp/hand_refine.hpp"
#include "grasp/point_cloud.hpp"

namespace grasp {

struct SynthOptions {
    int seq_len = 30;  // T: frames = T + 1
    double fps = 30.0;
    double drift_per_frame = 0.0;  // injected contact-phase foot drift, meters
};

struct SynthScene {
    MotionSequence motion;
    ObjectCloud object;
    Vec3 object_center = Vec3::Zero();
    double object_radius = 0.0;
};

namespace detail {

inline double smoothstep(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
}

inline Vec3 rest_offset_from_root(const Skeleton& s, int joint) {
    Vec3 p = Vec3::Zero();
    for (int j = joint; j > 0; j = s.parents[static_cast<std::size_t>(j)]) {
        p += s.bone_offset(j);
    }
    return p;
}

struct FootPlan {
    std::vector<Vec3> target;
    std::vector<bool> planted;
};

}  // namespace detail

/// Procedural reach-and-grasp scene: the character walks toward a random
/// object (alternating planted-foot gait driven by the leg IK, so contact
/// labels are honest by construction), then reaches with the right arm and
/// curls the fingers around the object. Fully determined by the seed.
inline SynthScene synth_scene(const Skeleton& skel, uint64_t seed, const SynthOptions& opt = {},
                              const HandModel& hand = {}) {
    if (opt.seq_len < 4) {
        throw ValidationError("synth: sequence length too short");
    }
    std::mt19937_64 rng(seed);
    auto uniform = [&rng](double lo, double hi) { return lo + (hi - lo) * nn::uniform01(rng); };

    const BodyMap map = BodyMap::resolve(skel);
    const int n = opt.seq_len + 1;
    const int walk_end = static_cast<int>(0.6 * n);
    const int reach_start = static_cast<int>(0.5 * n);
    const int curl_start = static_cast<int>(0.75 * n);

    SynthScene scene;
    const double obj_x = uniform(0.7, 1.1);
    const double obj_y = uniform(-0.25, 0.0);
    const double obj_z = uniform(0.85, 1.0);
    scene.object_center = Vec3(obj_x, obj_y, obj_z);
    const bool sphere = nn::uniform01(rng) < 0.7;
    if (sphere) {
        scene.object_radius = uniform(0.035, 0.05);
        scene.object = sphere_cloud(scene.object_center, scene.object_radius);
    } else {
        const Vec3 half(uniform(0.03, 0.05), uniform(0.03, 0.05), uniform(0.03, 0.05));
        scene.object_radius = half.maxCoeff();
        scene.object = box_cloud(scene.object_center, half, rng());
    }

    const double root_z = 0.82;
    const double walk_dist = std::max(0.0, obj_x - 0.35);
    const Vec3 foot_rest[2] = {detail::rest_offset_from_root(skel, map.foot[0]),
                               detail::rest_offset_from_root(skel, map.foot[1])};

    // gait plan: alternating swings, constant targets while planted
    const double step_len = 0.30;
    const int n_steps = std::max(1, static_cast<int>(std::ceil(walk_dist / step_len)));
    const double advance = walk_dist / n_steps;
    detail::FootPlan plan[2];
    double plant_x[2] = {foot_rest[0].x(), foot_rest[1].x()};
    int plant_age[2] = {0, 0};
    for (int side = 0; side < 2; ++side) {
        plan[side].target.resize(static_cast<std::size_t>(n));
        plan[side].planted.resize(static_cast<std::size_t>(n));
    }
    for (int i = 0; i < n; ++i) {
        int swinging = -1;
        double u = 0.0;
        if (i < walk_end && walk_dist > 1e-9) {
            const double cycle = static_cast<double>(i) * n_steps / walk_end;
            const int c = std::min(n_steps - 1, static_cast<int>(cycle));
            swinging = c % 2;
            u = cycle - c;
        }
        for (int side = 0; side < 2; ++side) {
            const double y = foot_rest[static_cast<std::size_t>(side)].y();
            if (side == swinging) {
                const double from = plant_x[side];
                const double to = foot_rest[static_cast<std::size_t>(side)].x() +
                                  advance * (static_cast<int>(static_cast<double>(i) * n_steps / walk_end) + 1);
                const double x = from + (to - from) * detail::smoothstep(u);
                plan[side].target[static_cast<std::size_t>(i)] = Vec3(x, y, 0.06 * std::sin(M_PI * u));
                plan[side].planted[static_cast<std::size_t>(i)] = false;
                if (u > 1.0 - 1e-9 || i + 1 >= walk_end ||
                    static_cast<int>(static_cast<double>(i + 1) * n_steps / walk_end) % 2 != swinging) {
                    plant_x[side] = to;  // landing
                    plant_age[side] = 0;
                }
            } else {
                plan[side].target[static_cast<std::size_t>(i)] =
                    Vec3(plant_x[side] + opt.drift_per_frame * plant_age[side], y, 0.0);
                plan[side].planted[static_cast<std::size_t>(i)] = true;
                ++plant_age[side];
            }
        }
    }

    // base poses: eased root advance, slight torso sway, legs by IK
    MotionSequence seq;
    seq.fps = opt.fps;
    seq.contact_probs.emplace();
    for (int i = 0; i < n; ++i) {
        const double prog = walk_end > 0 ? detail::smoothstep(static_cast<double>(i) / walk_end) : 1.0;
        Pose pose;
        pose.t() = Vec3(walk_dist * prog, 0.012 * std::sin(2.0 * M_PI * prog) * (1.0 - prog), root_z);
        const double sway = 0.05 * std::sin(2.0 * M_PI * static_cast<double>(i) / n);
        pose.body(1) = matrix_to_rot6d(Eigen::AngleAxisd(sway, Vec3::UnitX()).toRotationMatrix());  // spine2
        for (int side = 0; side < 2; ++side) {
            retarget_foot(skel, pose, map, side, plan[side].target[static_cast<std::size_t>(i)]);
        }
        seq.frames.push_back(pose);
        seq.contact_probs->push_back(Vec2(plan[0].planted[static_cast<std::size_t>(i)] ? 1.0 : 0.0,
                                          plan[1].planted[static_cast<std::size_t>(i)] ? 1.0 : 0.0));
    }

    // right-arm reach: the wrist eases toward a point beside the object
    // while the palm turns to face it, fingers across the approach line
    const FkResult final_fk = forward_kinematics(skel, seq.frames.back());
    const Vec3 shoulder_final = final_fk.pos[static_cast<std::size_t>(map.shoulder[1])];
    const Vec3 approach = (scene.object_center - shoulder_final).normalized();
    const Vec3 grasp_point =
        scene.object_center - (scene.object_radius + hand.palm_radius + 0.01) * approach;
    Vec3 tangent = approach.cross(Vec3::UnitZ());
    if (tangent.norm() < 1e-6) {
        tangent = approach.cross(Vec3::UnitY());
    }
    tangent.normalize();
    // columns: palm faces the approach (local -z), fingers along the tangent (local -y)
    Mat3 wrist_goal;
    wrist_goal.col(0) = tangent.cross(approach);
    wrist_goal.col(1) = -tangent;
    wrist_goal.col(2) = -approach;
    const Mat3 wrist_start =
        forward_kinematics(skel, seq.frames[static_cast<std::size_t>(reach_start)])
            .rot[static_cast<std::size_t>(map.wrist[1])];
    const Eigen::AngleAxisd wrist_swing(wrist_goal * wrist_start.transpose());
    for (int i = reach_start; i < n; ++i) {
        Pose& pose = seq.frames[static_cast<std::size_t>(i)];
        const double u = detail::smoothstep(static_cast<double>(i - reach_start) / (n - 1 - reach_start));
        const FkResult fk = forward_kinematics(skel, pose);
        const Vec3 shoulder = fk.pos[static_cast<std::size_t>(map.shoulder[1])];
        const Vec3 elbow = fk.pos[static_cast<std::size_t>(map.elbow[1])];
        const Vec3 wrist = fk.pos[static_cast<std::size_t>(map.wrist[1])];
        const Vec3 target = wrist + (grasp_point - wrist) * u;
        Vec3 normal = (elbow - shoulder).cross(wrist - shoulder);
        if (normal.norm() < 1e-10) {
            normal = Vec3::UnitZ();
        }
        const TwoBoneSolution sol = solve_two_bone(shoulder, elbow, wrist, target, normal.normalized());
        const ChainDeltas d = two_bone_world_deltas(shoulder, elbow, wrist, sol);
        write_chain_rotations(skel, pose, fk, map.shoulder[1], map.elbow[1], d.base, d.mid);
        const Mat3 elbow_rot = d.mid * fk.rot[static_cast<std::size_t>(map.elbow[1])];
        const Mat3 wrist_world =
            Eigen::AngleAxisd(u * wrist_swing.angle(), wrist_swing.axis()).toRotationMatrix() * wrist_start;
        pose.joint_block(map.wrist[1]) = matrix_to_rot6d(elbow_rot.transpose() * wrist_world, 1e-5);
    }

    // finger curl; thumb folds toward the fingers
    const double base_curl = std::clamp(1.5 - 8.0 * scene.object_radius, 0.5, 1.2);
    const double joint_gain[3] = {0.5, 0.8, 0.6};
    for (int i = curl_start; i < n; ++i) {
        Pose& pose = seq.frames[static_cast<std::size_t>(i)];
        const double u = detail::smoothstep(static_cast<double>(i - curl_start) / (n - 1 - curl_start));
        for (int f = 0; f < 5; ++f) {
            const Vec3 dir = skel.rest_dirs[static_cast<std::size_t>(map.finger[f][0])];
            const Vec3 axis = (f == 0) ? Vec3(dir.cross(Vec3::UnitZ()).normalized())
                                       : Vec3(Vec3::UnitX());
            for (int k = 0; k < 3; ++k) {
                const double angle = u * base_curl * joint_gain[k];
                pose.joint_block(map.finger[f][k]) =
                    matrix_to_rot6d(Eigen::AngleAxisd(angle, axis).toRotationMatrix());
            }
        }
    }

    seq.validate();
    scene.motion = seq;
    return scene;
}

inline std::vector<TrainingSample> synth_corpus(const Skeleton& skel, uint64_t seed, int count,
                                                const SynthOptions& opt = {}) {
    if (count < 1) {
        throw ValidationError("synth_corpus: count must be >= 1");
    }
    std::vector<TrainingSample> corpus;
    corpus.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        corpus.push_back({synth_scene(skel, seed + 9973ull * static_cast<uint64_t>(i), opt).motion});
    }
    return corpus;
}

}  // namespace grasp
