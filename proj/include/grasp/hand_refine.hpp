#pragma once

#include <sstream>

#include "grasp/chamfer.hpp"
#include "grasp/hand_surface.hpp"
#include "grasp/point_cloud.hpp"
#include "grasp/sequence.hpp"
#include "grasp/two_bone_ik.hpp"

namespace grasp {

/// Hyperparameters of the upper-body grasping pass.
struct RefineConfig {
    double alpha1 = 1.0;
    double alpha2 = 1.0;
    double alpha3 = 50.0;
    double alpha4 = 100.0;
    double alpha5 = 10.0;
    double delta = 0.004;        // collision tolerance, meters
    double delta2 = 0.012;       // minimum inter-finger distance, meters
    int last_frames = 15;        // L, number of optimized trailing frames
    int iterations = 40;
    double step_size = 1e-2;
    double wrist_radius = 0.4;   // cone activation distance, meters
    double cone_half_angle = M_PI / 4.0;
    // Eq. 14 as printed penalizes hand-joint speeds *below* the original
    // sequence; this flag flips the comparison without changing anything else.
    bool flip_speed_penalty = false;

    void validate() const {
        if (alpha1 < 0 || alpha2 < 0 || alpha3 < 0 || alpha4 < 0 || alpha5 < 0) {
            throw ValidationError("refine config: energy weights must be >= 0");
        }
        if (!(delta2 > 0.0)) {
            throw ValidationError("refine config: delta2 must be positive");
        }
        if (last_frames < 1) {
            throw ValidationError("refine config: L must be >= 1");
        }
        if (iterations < 0 || !(step_size > 0.0)) {
            throw ValidationError("refine config: bad descent parameters");
        }
    }
};

struct WristConeResult {
    std::vector<Vec3> positions;
    std::vector<bool> corrected;  // true where the trajectory actually moved
    bool active = false;          // cone constraint was triggered
};

/// Eq.-10 wrist trajectory correction: wrists within `wrist_radius` of the
/// grasp target O form the corrected set; if the widest angle AOB against
/// the first such wrist A exceeds the cone half-angle, every corrected
/// wrist D rotates toward OA (preserving |OD|) so its angle rescales by
/// half-angle / AOB.
inline WristConeResult wrist_cone_correct(const std::vector<Vec3>& wrists, const Vec3& target,
                                          const RefineConfig& cfg) {
    if (wrists.empty()) {
        throw ValidationError("wrist_cone_correct: empty trajectory");
    }
    WristConeResult out{wrists, std::vector<bool>(wrists.size(), false), false};

    int first = -1;
    for (std::size_t i = 0; i < wrists.size(); ++i) {
        if ((wrists[i] - target).norm() <= cfg.wrist_radius) {
            first = static_cast<int>(i);
            break;
        }
    }
    if (first < 0) {
        return out;
    }
    const Vec3 oa = wrists[static_cast<std::size_t>(first)] - target;
    if (oa.norm() < 1e-12) {
        return out;  // cone apex coincides with A; nothing well-defined to do
    }
    const Vec3 axis = oa.normalized();

    auto angle_of = [&](const Vec3& d) { return std::acos(std::clamp(d.normalized().dot(axis), -1.0, 1.0)); };

    double widest = 0.0;
    std::vector<int> window;
    for (std::size_t i = 0; i < wrists.size(); ++i) {
        const Vec3 d = wrists[i] - target;
        if (d.norm() > cfg.wrist_radius || d.norm() < 1e-12) {
            continue;
        }
        window.push_back(static_cast<int>(i));
        widest = std::max(widest, angle_of(d));
    }
    if (widest <= cfg.cone_half_angle) {
        return out;
    }
    out.active = true;
    const double scale = cfg.cone_half_angle / widest;
    for (const int i : window) {
        const Vec3 d = wrists[static_cast<std::size_t>(i)] - target;
        const double alpha = angle_of(d);
        if (alpha < 1e-12 || alpha > M_PI - 1e-9) {
            continue;  // on the axis (or opposite): plane of rotation undefined
        }
        const Vec3 perp = (d - d.dot(axis) * axis).normalized();
        const double alpha_new = alpha * scale;
        const Vec3 corrected = target + d.norm() * (std::cos(alpha_new) * axis + std::sin(alpha_new) * perp);
        out.positions[static_cast<std::size_t>(i)] = corrected;
        out.corrected[static_cast<std::size_t>(i)] = true;
    }
    return out;
}

/// Standard two-bone IK on the right shoulder-elbow-wrist chain, bending
/// in the current arm plane, for every corrected frame.
inline void arm_ik_follow(MotionSequence& seq, const Skeleton& skel, const BodyMap& map,
                          const WristConeResult& cone) {
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        if (!cone.corrected[i]) {
            continue;
        }
        Pose& pose = seq.frames[i];
        const FkResult fk = forward_kinematics(skel, pose);
        const Vec3 shoulder = fk.pos[static_cast<std::size_t>(map.shoulder[1])];
        const Vec3 elbow = fk.pos[static_cast<std::size_t>(map.elbow[1])];
        const Vec3 wrist = fk.pos[static_cast<std::size_t>(map.wrist[1])];
        Vec3 n = (elbow - shoulder).cross(wrist - shoulder);
        if (n.norm() < 1e-10) {
            n = (elbow - shoulder).cross(Vec3::UnitZ());
            if (n.norm() < 1e-10) {
                n = (elbow - shoulder).cross(Vec3::UnitX());
            }
        }
        const TwoBoneSolution sol = solve_two_bone(shoulder, elbow, wrist, cone.positions[i], n.normalized());
        const ChainDeltas d = two_bone_world_deltas(shoulder, elbow, wrist, sol);
        write_chain_rotations(skel, pose, fk, map.shoulder[1], map.elbow[1], d.base, d.mid);
    }
}

namespace detail {

struct FrameGeometry {
    FkResult fk;
    Eigen::MatrixX3d hand_points;
    Eigen::MatrixX3d hand_normals;
    std::array<Eigen::MatrixX3d, 5> keypoints;
};

inline FrameGeometry frame_geometry(const Skeleton& skel, const Pose& pose, const HandSurface& hs) {
    FrameGeometry g;
    g.fk = forward_kinematics(skel, pose);
    hand_surface_points(g.fk, hs, g.hand_points, &g.hand_normals);
    for (int f = 0; f < 5; ++f) {
        g.keypoints[static_cast<std::size_t>(f)] = finger_keypoints_world(g.fk, hs, f);
    }
    return g;
}

}  // namespace detail

/// Eq.-11 collision energy over the optimized frames: penetration beyond
/// the tolerance delta, measured by signed Chamfer distances in both
/// directions, penalized per point and summed. `grads`, when given, must
/// hold one zeroed 225-vector per frame; nearest neighbors and signs are
/// held fixed for the gradient.
inline double energy_e1(const Skeleton& skel, const HandSurface& hs, std::span<const Pose> frames,
                        const ObjectCloud& object, const KdTree3& object_tree, const RefineConfig& cfg,
                        std::vector<Eigen::VectorXd>* grads = nullptr) {
    double total = 0.0;
    for (std::size_t fi = 0; fi < frames.size(); ++fi) {
        const detail::FrameGeometry geo = detail::frame_geometry(skel, frames[fi], hs);
        FkAdjoint adj(skel.joint_count());

        // object -> hand: object points inside the hand surface
        const KdTree3 hand_tree(geo.hand_points);
        for (Eigen::Index q = 0; q < object.points.rows(); ++q) {
            const Vec3 p = object.points.row(q).transpose();
            const auto hit = hand_tree.nearest(p);
            const Vec3 r = geo.hand_points.row(hit.index).transpose();
            const Vec3 n = geo.hand_normals.row(hit.index).transpose();
            const double sign = (p - r).dot(n) >= 0.0 ? 1.0 : -1.0;
            const double sd = sign * hit.distance;
            total += cfg.alpha1 * penetration_penalty(sd, cfg.delta);
            if (grads != nullptr && sd < -cfg.delta && hit.distance > 1e-12) {
                const Vec3 d_r = cfg.alpha1 * (-sign) * (r - p) / hit.distance;
                const auto& hp = hs.points[static_cast<std::size_t>(hit.index)];
                bound_point_backward(hp.owner, hp.offset, d_r, adj);
            }
        }
        // hand -> object: hand points behind the object surface
        for (Eigen::Index q = 0; q < geo.hand_points.rows(); ++q) {
            const Vec3 p = geo.hand_points.row(q).transpose();
            const auto hit = object_tree.nearest(p);
            const Vec3 r = object.points.row(hit.index).transpose();
            const Vec3 n = object.normals.row(hit.index).transpose();
            const double sign = (p - r).dot(n) >= 0.0 ? 1.0 : -1.0;
            const double sd = sign * hit.distance;
            total += cfg.alpha2 * penetration_penalty(sd, cfg.delta);
            if (grads != nullptr && sd < -cfg.delta && hit.distance > 1e-12) {
                const Vec3 d_p = cfg.alpha2 * (-sign) * (p - r) / hit.distance;
                const auto& hp = hs.points[static_cast<std::size_t>(q)];
                bound_point_backward(hp.owner, hp.offset, d_p, adj);
            }
        }
        if (grads != nullptr) {
            (*grads)[fi] += fk_backward(skel, frames[fi], geo.fk, std::move(adj));
        }
    }
    return total;
}

/// Eq.-12 contact energy on the final frame: mean nearest distance of each
/// contact finger's surface points to the object, pinky excluded.
inline double energy_e2(const Skeleton& skel, const HandSurface& hs, const Pose& last_frame,
                        const KdTree3& object_tree, const RefineConfig& cfg,
                        Eigen::VectorXd* grad = nullptr) {
    const detail::FrameGeometry geo = detail::frame_geometry(skel, last_frame, hs);
    FkAdjoint adj(skel.joint_count());
    double total = 0.0;
    std::array<int, 4> counts{};
    for (const auto& hp : hs.points) {
        if (hp.finger >= 0 && hp.finger < 4) {
            ++counts[static_cast<std::size_t>(hp.finger)];
        }
    }
    for (Eigen::Index q = 0; q < geo.hand_points.rows(); ++q) {
        const auto& hp = hs.points[static_cast<std::size_t>(q)];
        if (hp.finger < 0 || hp.finger >= 4) {
            continue;  // palm and pinky do not take part in the contact loss
        }
        const Vec3 p = geo.hand_points.row(q).transpose();
        const auto hit = object_tree.nearest(p);
        const double count = counts[static_cast<std::size_t>(hp.finger)];
        total += cfg.alpha3 * hit.distance / count;
        if (grad != nullptr && hit.distance > 1e-12) {
            const Vec3 r = object_tree.points().row(hit.index).transpose();
            const Vec3 d_p = cfg.alpha3 * (p - r) / (hit.distance * count);
            bound_point_backward(hp.owner, hp.offset, d_p, adj);
        }
    }
    if (grad != nullptr) {
        *grad += fk_backward(skel, last_frame, geo.fk, std::move(adj));
    }
    return total;
}

/// Eq.-13 finger-separation energy over the optimized frames: for each
/// finger, the mean nearest distance of its keypoints to the other four
/// fingers' keypoints must stay above delta2.
inline double energy_e3(const Skeleton& skel, const HandSurface& hs, std::span<const Pose> frames,
                        const RefineConfig& cfg, std::vector<Eigen::VectorXd>* grads = nullptr) {
    constexpr int kKp = HandSurface::kKeypointsPerFinger;
    double total = 0.0;
    for (std::size_t fi = 0; fi < frames.size(); ++fi) {
        const detail::FrameGeometry geo = detail::frame_geometry(skel, frames[fi], hs);
        FkAdjoint adj(skel.joint_count());
        for (int g = 0; g < 5; ++g) {
            double mean = 0.0;
            std::array<std::pair<int, int>, kKp> nearest{};  // (other finger, keypoint)
            for (int k = 0; k < kKp; ++k) {
                const Vec3 h = geo.keypoints[static_cast<std::size_t>(g)].row(k).transpose();
                double best = std::numeric_limits<double>::infinity();
                for (int o = 0; o < 5; ++o) {
                    if (o == g) {
                        continue;
                    }
                    for (int j = 0; j < kKp; ++j) {
                        const double d = (geo.keypoints[static_cast<std::size_t>(o)].row(j).transpose() - h).norm();
                        if (d < best) {
                            best = d;
                            nearest[static_cast<std::size_t>(k)] = {o, j};
                        }
                    }
                }
                mean += best / kKp;
            }
            if (mean >= cfg.delta2) {
                continue;
            }
            total += cfg.alpha4 * (cfg.delta2 - mean);
            if (grads == nullptr) {
                continue;
            }
            for (int k = 0; k < kKp; ++k) {
                const auto [o, j] = nearest[static_cast<std::size_t>(k)];
                const Vec3 h = geo.keypoints[static_cast<std::size_t>(g)].row(k).transpose();
                const Vec3 other = geo.keypoints[static_cast<std::size_t>(o)].row(j).transpose();
                const double d = (h - other).norm();
                if (d < 1e-12) {
                    continue;
                }
                const Vec3 d_h = -cfg.alpha4 * (h - other) / (d * kKp);
                const auto& kp_h = hs.keypoints[static_cast<std::size_t>(g)][static_cast<std::size_t>(k)];
                const auto& kp_o = hs.keypoints[static_cast<std::size_t>(o)][static_cast<std::size_t>(j)];
                bound_point_backward(kp_h.owner, kp_h.offset, d_h, adj);
                bound_point_backward(kp_o.owner, kp_o.offset, -d_h, adj);
            }
        }
        if (grads != nullptr) {
            (*grads)[fi] += fk_backward(skel, frames[fi], geo.fk, std::move(adj));
        }
    }
    return total;
}

/// Eq.-14/15 deviation energy: per hand joint and frame pair, the updated
/// frame-to-frame displacement is compared against the pre-optimization
/// one; as printed the penalty activates when the updated speed drops
/// below the original. `boundary` holds the hand-joint positions of the
/// frame preceding the window (empty when the window starts the sequence);
/// `reference_speeds(i, h)` are the original displacements.
inline double energy_e4(const Skeleton& skel, const BodyMap& map, std::span<const Pose> frames,
                        const Eigen::MatrixX3d& boundary, const Eigen::MatrixXd& reference_speeds,
                        const RefineConfig& cfg, std::vector<Eigen::VectorXd>* grads = nullptr) {
    const int window = static_cast<int>(frames.size());
    const bool has_boundary = boundary.rows() == kHandJointCount;
    std::vector<Eigen::MatrixX3d> joints(static_cast<std::size_t>(window));
    std::vector<FkResult> fks(static_cast<std::size_t>(window));
    for (int i = 0; i < window; ++i) {
        fks[static_cast<std::size_t>(i)] = forward_kinematics(skel, frames[static_cast<std::size_t>(i)]);
        Eigen::MatrixX3d jp(kHandJointCount, 3);
        int row = 0;
        for (int f = 0; f < 5; ++f) {
            for (int k = 0; k < 3; ++k) {
                jp.row(row++) =
                    fks[static_cast<std::size_t>(i)].pos[static_cast<std::size_t>(map.finger[f][k])].transpose();
            }
        }
        joints[static_cast<std::size_t>(i)] = jp;
    }

    std::vector<FkAdjoint> adjoints(static_cast<std::size_t>(window), FkAdjoint(skel.joint_count()));
    double total = 0.0;
    // displacement pairs (i-1, i); the final displacement into the last
    // frame is left free, matching the printed summation bound L-1
    const int first_pair = has_boundary ? 0 : 1;
    for (int i = first_pair; i < window - 1; ++i) {
        const Eigen::MatrixX3d& cur = joints[static_cast<std::size_t>(i)];
        const Eigen::MatrixX3d prev =
            (i == 0) ? boundary : joints[static_cast<std::size_t>(i - 1)];
        for (int h = 0; h < kHandJointCount; ++h) {
            const Vec3 diff = (cur.row(h) - prev.row(h)).transpose();
            const double v = diff.norm();
            const double ref = reference_speeds(i, h);
            const double gap = cfg.flip_speed_penalty ? (v - ref) : (ref - v);
            if (gap <= 0.0) {
                continue;
            }
            total += cfg.alpha5 * gap;
            if (grads == nullptr || v < 1e-12) {
                continue;
            }
            const double sgn = cfg.flip_speed_penalty ? 1.0 : -1.0;
            const Vec3 d_cur = cfg.alpha5 * sgn * diff / v;
            const int joint = map.finger[h / 3][h % 3];
            adjoints[static_cast<std::size_t>(i)].d_pos[static_cast<std::size_t>(joint)] += d_cur;
            if (i > 0) {
                adjoints[static_cast<std::size_t>(i - 1)].d_pos[static_cast<std::size_t>(joint)] -= d_cur;
            }
        }
    }
    if (grads != nullptr) {
        for (int i = 0; i < window; ++i) {
            (*grads)[static_cast<std::size_t>(i)] += fk_backward(
                skel, frames[static_cast<std::size_t>(i)], fks[static_cast<std::size_t>(i)],
                std::move(adjoints[static_cast<std::size_t>(i)]));
        }
    }
    return total;
}

/// Hand-joint positions of one frame, rows ordered finger-major.
inline Eigen::MatrixX3d hand_joint_positions(const Skeleton& skel, const BodyMap& map, const Pose& pose) {
    const FkResult fk = forward_kinematics(skel, pose);
    Eigen::MatrixX3d jp(kHandJointCount, 3);
    int row = 0;
    for (int f = 0; f < 5; ++f) {
        for (int k = 0; k < 3; ++k) {
            jp.row(row++) = fk.pos[static_cast<std::size_t>(map.finger[f][k])].transpose();
        }
    }
    return jp;
}

/// Per-iteration record of the descent.
struct RefineTrace {
    std::vector<double> total;
    std::vector<std::array<double, 4>> terms;
};

/// Full upper-body pass: wrist cone correction, arm IK follow-up, gradient
/// descent of E1+E2+E3+E4 on the 12 contact-finger joints over the last L
/// frames, then a size-3 mean filter over every changed angle channel.
inline MotionSequence refine_hand(const MotionSequence& seq, const ObjectCloud& object, const Skeleton& skel,
                                  const RefineConfig& cfg, RefineTrace* trace = nullptr) {
    seq.validate();
    object.validate();
    cfg.validate();
    const BodyMap map = BodyMap::resolve(skel);
    const HandSurface hs = build_hand_surface(skel, map);
    MotionSequence out = seq;
    const int n = seq.frame_count();

    // 1) wrist cone: the grasp target O is the final frame's wrist position
    std::vector<Vec3> wrists(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        wrists[static_cast<std::size_t>(i)] = forward_kinematics(skel, seq.frames[static_cast<std::size_t>(i)])
                                                  .pos[static_cast<std::size_t>(map.wrist[1])];
    }
    const Vec3 target_o = wrists.back();
    const WristConeResult cone = wrist_cone_correct(wrists, target_o, cfg);
    int arm_first_changed = n;
    if (cone.active) {
        arm_ik_follow(out, skel, map, cone);
        for (int i = 0; i < n; ++i) {
            if (cone.corrected[static_cast<std::size_t>(i)]) {
                arm_first_changed = std::min(arm_first_changed, i);
            }
        }
    }

    // 2) gradient descent on the contact fingers over the last L frames
    const int window_start = std::max(0, n - cfg.last_frames);
    const int window = n - window_start;
    const KdTree3 object_tree(object.points);

    Eigen::MatrixX3d boundary(0, 3);
    if (window_start > 0) {
        boundary = hand_joint_positions(skel, map, out.frames[static_cast<std::size_t>(window_start - 1)]);
    }
    Eigen::MatrixXd reference_speeds = Eigen::MatrixXd::Zero(window, kHandJointCount);
    {
        Eigen::MatrixX3d prev = boundary;
        for (int i = 0; i < window; ++i) {
            const Eigen::MatrixX3d cur =
                hand_joint_positions(skel, map, out.frames[static_cast<std::size_t>(window_start + i)]);
            if (prev.rows() == kHandJointCount) {
                for (int h = 0; h < kHandJointCount; ++h) {
                    reference_speeds(i, h) = (cur.row(h) - prev.row(h)).norm();
                }
            }
            prev = cur;
        }
    }

    std::vector<int> opt_params;  // flat pose indices of the 12 optimized joints
    for (int f = 0; f < 4; ++f) {
        for (int k = 0; k < 3; ++k) {
            const int base = Pose::joint_param_offset(map.finger[f][k]);
            for (int c = 0; c < 6; ++c) {
                opt_params.push_back(base + c);
            }
        }
    }

    std::vector<Pose> frames(out.frames.begin() + window_start, out.frames.end());
    auto energy = [&](const std::vector<Pose>& fr, std::vector<Eigen::VectorXd>* grads,
                      std::array<double, 4>* terms) {
        const std::span<const Pose> span_fr(fr);
        const double e1 = energy_e1(skel, hs, span_fr, object, object_tree, cfg, grads);
        Eigen::VectorXd* last_grad = grads != nullptr ? &grads->back() : nullptr;
        const double e2 = energy_e2(skel, hs, fr.back(), object_tree, cfg, last_grad);
        const double e3 = energy_e3(skel, hs, span_fr, cfg, grads);
        const double e4 = energy_e4(skel, map, span_fr, boundary, reference_speeds, cfg, grads);
        if (terms != nullptr) {
            *terms = {e1, e2, e3, e4};
        }
        const double total = e1 + e2 + e3 + e4;
        if (!std::isfinite(total)) {
            std::ostringstream msg;
            msg << "refine_hand: non-finite energy (E1=" << e1 << " E2=" << e2 << " E3=" << e3 << " E4=" << e4
                << ")";
            throw NumericalError(msg.str());
        }
        return total;
    };

    double step = cfg.step_size;
    std::array<double, 4> terms{};
    std::vector<Eigen::VectorXd> grads(static_cast<std::size_t>(window));
    for (int it = 0; it < cfg.iterations; ++it) {
        for (auto& g : grads) {
            g = Eigen::VectorXd::Zero(kPoseDim);
        }
        const double current = energy(frames, &grads, &terms);
        if (trace != nullptr) {
            trace->total.push_back(current);
            trace->terms.push_back(terms);
        }
        double grad_norm = 0.0;
        for (int i = 0; i < window; ++i) {
            for (const int p : opt_params) {
                const double g = grads[static_cast<std::size_t>(i)][p];
                grad_norm += g * g;
            }
        }
        if (grad_norm < 1e-24) {
            break;  // converged: nothing active
        }
        // fixed-step descent, halving on any increase
        bool accepted = false;
        for (int attempt = 0; attempt < 24 && !accepted; ++attempt) {
            std::vector<Pose> candidate = frames;
            for (int i = 0; i < window; ++i) {
                for (const int p : opt_params) {
                    candidate[static_cast<std::size_t>(i)].x[p] -= step * grads[static_cast<std::size_t>(i)][p];
                }
            }
            if (energy(candidate, nullptr, nullptr) <= current) {
                frames = std::move(candidate);
                accepted = true;
            } else {
                step *= 0.5;
            }
        }
        if (!accepted) {
            break;  // no further progress at representable step sizes
        }
    }
    for (int i = 0; i < window; ++i) {
        out.frames[static_cast<std::size_t>(window_start + i)] = frames[static_cast<std::size_t>(i)];
    }

    // 3) endpoint-preserving mean filter on every changed angle channel
    auto filter_channel = [&out, n](int joint, int first_changed) {
        const int lo = std::max(0, first_changed - 1);
        if (n - lo < 3) {
            return;
        }
        std::vector<Eigen::VectorXd> sub;
        for (int f = lo; f < n; ++f) {
            sub.emplace_back(out.frames[static_cast<std::size_t>(f)].joint_block(joint));
        }
        const auto smoothed = mean_filter3(sub);
        for (int f = lo; f < n; ++f) {
            out.frames[static_cast<std::size_t>(f)].joint_block(joint) = smoothed[static_cast<std::size_t>(f - lo)];
        }
    };
    if (cone.active && arm_first_changed < n) {
        filter_channel(map.shoulder[1], arm_first_changed);
        filter_channel(map.elbow[1], arm_first_changed);
    }
    if (cfg.iterations > 0) {
        for (int f = 0; f < 4; ++f) {
            for (int k = 0; k < 3; ++k) {
                filter_channel(map.finger[f][k], window_start);
            }
        }
    }
    return out;
}

}  // namespace grasp
