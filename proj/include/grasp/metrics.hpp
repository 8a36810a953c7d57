#pragma once

#include <climits>
#include <complex>
#include <deque>
#include <unordered_set>

#include "grasp/hand_surface.hpp"
#include "grasp/point_cloud.hpp"
#include "grasp/sequence.hpp"

namespace grasp {

struct MetricsReport {
    double end_mjd_body_mm = 0.0;
    double end_mjd_rhand_mm = 0.0;
    double pskl_pred_gt = 0.0;
    double pskl_gt_pred = 0.0;
    double inter_v1_cm3 = 0.0;
    double inter_v5_cm3 = 0.0;
    double inter_v10_cm3 = 0.0;
    double skating_cm_per_s = 0.0;
    double wall_time_s = 0.0;
};

/// Mean joint distance between the generated end pose and the target,
/// in millimeters, split into body (22 joints) and right hand (15).
inline std::pair<double, double> end_mjd(const Skeleton& skel, const Pose& generated_final, const Pose& target) {
    const FkResult a = forward_kinematics(skel, generated_final);
    const FkResult b = forward_kinematics(skel, target);
    double body = 0.0, hand = 0.0;
    for (int j = 0; j < kBodyJointCount; ++j) {
        body += (a.pos[static_cast<std::size_t>(j)] - b.pos[static_cast<std::size_t>(j)]).norm();
    }
    for (int j = kBodyJointCount; j < kJointCount; ++j) {
        hand += (a.pos[static_cast<std::size_t>(j)] - b.pos[static_cast<std::size_t>(j)]).norm();
    }
    return {1000.0 * body / kBodyJointCount, 1000.0 * hand / kHandJointCount};
}

/// Joint-coordinate series of a sequence: one row per frame, 3 columns
/// per joint.
inline Eigen::MatrixXd joint_series(const Skeleton& skel, const MotionSequence& seq) {
    Eigen::MatrixXd m(seq.frame_count(), 3 * skel.joint_count());
    for (int i = 0; i < seq.frame_count(); ++i) {
        m.row(i) = forward_kinematics(skel, seq.frames[static_cast<std::size_t>(i)]).positions_flat().transpose();
    }
    return m;
}

namespace detail {

/// Power spectrum (non-redundant bins) of a real series by direct DFT.
inline Eigen::VectorXd power_spectrum(const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    const Eigen::Index bins = n / 2 + 1;
    Eigen::VectorXd power(bins);
    for (Eigen::Index k = 0; k < bins; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (Eigen::Index t = 0; t < n; ++t) {
            const double phase = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(t) / static_cast<double>(n);
            acc += x[t] * std::complex<double>(std::cos(phase), std::sin(phase));
        }
        power[k] = std::norm(acc);
    }
    return power;
}

inline Eigen::MatrixXd accelerations(const Eigen::MatrixXd& series, double fps) {
    if (series.rows() < 3) {
        throw ValidationError("pskl_j: sequences need at least 3 frames");
    }
    Eigen::MatrixXd acc(series.rows() - 2, series.cols());
    for (Eigen::Index i = 1; i + 1 < series.rows(); ++i) {
        acc.row(i - 1) = (series.row(i + 1) - 2.0 * series.row(i) + series.row(i - 1)) * fps * fps;
    }
    return acc;
}

}  // namespace detail

/// Power-spectrum KL divergence between the joint-acceleration
/// distributions of two corpora, both directions. Per joint axis:
/// second-order difference accelerations, corpus-averaged DFT power
/// spectra, floored by 1e-8 and bin-normalized; the per-axis KL values
/// are averaged.
inline std::pair<double, double> pskl_j(const std::vector<Eigen::MatrixXd>& corpus_a,
                                        const std::vector<Eigen::MatrixXd>& corpus_b, double fps) {
    if (corpus_a.empty() || corpus_b.empty()) {
        throw ValidationError("pskl_j: empty corpus");
    }
    constexpr double kFloor = 1e-8;
    auto mean_spectra = [fps](const std::vector<Eigen::MatrixXd>& corpus) {
        Eigen::MatrixXd sum;
        for (const auto& series : corpus) {
            const Eigen::MatrixXd acc = detail::accelerations(series, fps);
            Eigen::MatrixXd spectra(acc.rows() / 2 + 1, acc.cols());
            for (Eigen::Index c = 0; c < acc.cols(); ++c) {
                spectra.col(c) = detail::power_spectrum(acc.col(c));
            }
            if (sum.size() == 0) {
                sum = spectra;
            } else {
                if (sum.rows() != spectra.rows() || sum.cols() != spectra.cols()) {
                    throw ValidationError("pskl_j: corpus sequences must share length and joint count");
                }
                sum += spectra;
            }
        }
        return Eigen::MatrixXd(sum / static_cast<double>(corpus.size()));
    };
    const Eigen::MatrixXd sa = mean_spectra(corpus_a);
    const Eigen::MatrixXd sb = mean_spectra(corpus_b);
    if (sa.rows() != sb.rows() || sa.cols() != sb.cols()) {
        throw ValidationError("pskl_j: corpora must share sequence length and joint count");
    }
    double kl_ab = 0.0, kl_ba = 0.0;
    for (Eigen::Index c = 0; c < sa.cols(); ++c) {
        Eigen::VectorXd p = sa.col(c).array() + kFloor;
        Eigen::VectorXd q = sb.col(c).array() + kFloor;
        p /= p.sum();
        q /= q.sum();
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            kl_ab += p[k] * std::log(p[k] / q[k]);
            kl_ba += q[k] * std::log(q[k] / p[k]);
        }
    }
    return {kl_ab / static_cast<double>(sa.cols()), kl_ba / static_cast<double>(sa.cols())};
}

/// Occupancy set on a world-anchored cubic lattice (0.5 cm default step);
/// a shared lattice makes intersection a set operation.
struct VoxelGrid {
    double step = 0.005;
    std::unordered_set<int64_t> cells;

    static int64_t key(int x, int y, int z) {
        auto pack = [](int v) { return static_cast<int64_t>(v & 0x1FFFFF); };
        return pack(x) | (pack(y) << 21) | (pack(z) << 42);
    }

    Eigen::Vector3i cell_of(const Vec3& p) const {
        return {static_cast<int>(std::floor(p.x() / step)), static_cast<int>(std::floor(p.y() / step)),
                static_cast<int>(std::floor(p.z() / step))};
    }

    void insert(const Vec3& p) {
        const Eigen::Vector3i c = cell_of(p);
        cells.insert(key(c.x(), c.y(), c.z()));
    }

    double volume_cm3() const {
        const double cell_cm3 = std::pow(step * 100.0, 3);
        return static_cast<double>(cells.size()) * cell_cm3;
    }
};

/// Cells touched by a point set.
inline VoxelGrid voxelize_points(const Eigen::MatrixX3d& pts, double step = 0.005) {
    VoxelGrid g;
    g.step = step;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        g.insert(pts.row(i).transpose());
    }
    return g;
}

/// Solid voxelization of a closed surface sampling: surface cells plus
/// the interior, found by flood-filling the exterior of a padded bounding
/// box and taking the complement.
inline VoxelGrid voxelize_solid(const Eigen::MatrixX3d& surface_pts, double step = 0.005) {
    VoxelGrid surface = voxelize_points(surface_pts, step);
    if (surface.cells.empty()) {
        return surface;
    }
    Eigen::Vector3i lo(INT_MAX, INT_MAX, INT_MAX), hi(INT_MIN, INT_MIN, INT_MIN);
    for (Eigen::Index i = 0; i < surface_pts.rows(); ++i) {
        const Eigen::Vector3i c = surface.cell_of(surface_pts.row(i).transpose());
        lo = lo.cwiseMin(c);
        hi = hi.cwiseMax(c);
    }
    lo.array() -= 1;
    hi.array() += 1;
    const Eigen::Vector3i dim = hi - lo + Eigen::Vector3i::Ones();
    auto flat = [&dim, &lo](const Eigen::Vector3i& c) {
        const Eigen::Vector3i r = c - lo;
        return (r.x() * dim.y() + r.y()) * dim.z() + r.z();
    };
    std::vector<char> exterior(static_cast<std::size_t>(dim.prod()), 0);
    std::deque<Eigen::Vector3i> queue;
    queue.push_back(lo);
    exterior[static_cast<std::size_t>(flat(lo))] = 1;
    const std::array<Eigen::Vector3i, 6> steps = {Eigen::Vector3i{1, 0, 0},  Eigen::Vector3i{-1, 0, 0},
                                                  Eigen::Vector3i{0, 1, 0},  Eigen::Vector3i{0, -1, 0},
                                                  Eigen::Vector3i{0, 0, 1},  Eigen::Vector3i{0, 0, -1}};
    while (!queue.empty()) {
        const Eigen::Vector3i c = queue.front();
        queue.pop_front();
        for (const auto& d : steps) {
            const Eigen::Vector3i nb = c + d;
            if ((nb.array() < lo.array()).any() || (nb.array() > hi.array()).any()) {
                continue;
            }
            auto& mark = exterior[static_cast<std::size_t>(flat(nb))];
            if (mark || surface.cells.count(VoxelGrid::key(nb.x(), nb.y(), nb.z())) != 0) {
                continue;
            }
            mark = 1;
            queue.push_back(nb);
        }
    }
    VoxelGrid solid;
    solid.step = step;
    for (int x = lo.x(); x <= hi.x(); ++x) {
        for (int y = lo.y(); y <= hi.y(); ++y) {
            for (int z = lo.z(); z <= hi.z(); ++z) {
                if (!exterior[static_cast<std::size_t>(flat({x, y, z}))]) {
                    solid.cells.insert(VoxelGrid::key(x, y, z));
                }
            }
        }
    }
    return solid;
}

/// Solid hand occupancy: analytic rasterization of the per-bone capsules.
inline VoxelGrid voxelize_hand(const Skeleton& skel, const Pose& pose, const HandSurface& hs,
                               double step = 0.005) {
    const FkResult fk = forward_kinematics(skel, pose);
    VoxelGrid g;
    g.step = step;
    for (const auto& cap : hs.capsules) {
        const auto o = static_cast<std::size_t>(cap.owner);
        const Vec3 a = fk.rot[o] * cap.a + fk.pos[o];
        const Vec3 b = fk.rot[o] * cap.b + fk.pos[o];
        const Vec3 lo_w = a.cwiseMin(b).array() - cap.radius;
        const Vec3 hi_w = a.cwiseMax(b).array() + cap.radius;
        const Eigen::Vector3i lo = g.cell_of(lo_w);
        const Eigen::Vector3i hi = g.cell_of(hi_w);
        const Vec3 ab = b - a;
        const double len2 = ab.squaredNorm();
        for (int x = lo.x(); x <= hi.x(); ++x) {
            for (int y = lo.y(); y <= hi.y(); ++y) {
                for (int z = lo.z(); z <= hi.z(); ++z) {
                    const Vec3 c((x + 0.5) * step, (y + 0.5) * step, (z + 0.5) * step);
                    const double t = len2 > 0.0 ? std::clamp((c - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
                    if ((c - (a + t * ab)).norm() <= cap.radius) {
                        g.cells.insert(VoxelGrid::key(x, y, z));
                    }
                }
            }
        }
    }
    return g;
}

inline double intersection_volume_cm3(const VoxelGrid& a, const VoxelGrid& b) {
    const VoxelGrid& small = a.cells.size() <= b.cells.size() ? a : b;
    const VoxelGrid& large = a.cells.size() <= b.cells.size() ? b : a;
    std::size_t shared = 0;
    for (const auto c : small.cells) {
        shared += large.cells.count(c);
    }
    const double cell_cm3 = std::pow(small.step * 100.0, 3);
    return static_cast<double>(shared) * cell_cm3;
}

/// Max hand/object intersection volume over the last `last_n` frames.
inline double inter_volume(const std::vector<VoxelGrid>& hand_per_frame, const VoxelGrid& object, int last_n) {
    if (hand_per_frame.empty()) {
        throw ValidationError("inter_volume: no hand frames");
    }
    const int n = static_cast<int>(hand_per_frame.size());
    double worst = 0.0;
    for (int i = std::max(0, n - last_n); i < n; ++i) {
        worst = std::max(worst, intersection_volume_cm3(hand_per_frame[static_cast<std::size_t>(i)], object));
    }
    return worst;
}

/// Foot-skating index: per frame, the smaller of the two foot-joint
/// speeds; aggregated as the per-frame mean (or the plain sum), cm/s.
inline double skating(const MotionSequence& seq, const Skeleton& skel, bool mean = true) {
    if (seq.frame_count() < 2) {
        throw ValidationError("skating: needs at least two frames");
    }
    const BodyMap map = BodyMap::resolve(skel);
    double total = 0.0;
    Vec3 prev_left, prev_right;
    for (int i = 0; i < seq.frame_count(); ++i) {
        const FkResult fk = forward_kinematics(skel, seq.frames[static_cast<std::size_t>(i)]);
        const Vec3 left = fk.pos[static_cast<std::size_t>(map.foot[0])];
        const Vec3 right = fk.pos[static_cast<std::size_t>(map.foot[1])];
        if (i > 0) {
            const double v_left = (left - prev_left).norm() * seq.fps;
            const double v_right = (right - prev_right).norm() * seq.fps;
            total += std::min(v_left, v_right) * 100.0;  // m/s -> cm/s
        }
        prev_left = left;
        prev_right = right;
    }
    return mean ? total / static_cast<double>(seq.frame_count() - 1) : total;
}

}  // namespace grasp
