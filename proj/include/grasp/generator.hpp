#pragma once

#include "grasp/nn.hpp"
#include "grasp/sequence.hpp"

namespace grasp {

/// Weights of the four-term training loss. The first five apply inside
/// the reconstruction term; the last three gate the smoothness, joint
/// and finger terms.
struct LossWeights {
    double t = 1.0;
    double rg = 1.0;
    double rb = 1.0;
    double rh = 1.0;
    double fc = 1.0;
    double w2 = 1.0;
    double w3 = 5.0;
    double w4 = 20.0;
};

struct GeneratorConfig {
    int layers = 2;
    int model_dim = 64;
    int heads = 2;
    int seq_len = 30;  // T: frames = T + 1
    double learning_rate = 1e-4;
    LossWeights loss_weights;
    int train_steps = 5000;

    void validate() const {
        if (layers < 1 || model_dim < 1 || heads < 1 || seq_len < 1) {
            throw ValidationError("generator config: sizes must be positive");
        }
        if (model_dim % heads != 0) {
            throw ValidationError("generator config: model_dim must be divisible by heads");
        }
        if (!(learning_rate > 0.0)) {
            throw ValidationError("generator config: learning rate must be positive");
        }
        const LossWeights& w = loss_weights;
        for (const double v : {w.t, w.rg, w.rb, w.rh, w.fc, w.w2, w.w3, w.w4}) {
            if (v < 0.0) {
                throw ValidationError("generator config: loss weights must be >= 0");
            }
        }
    }
};

/// Paper-scale configuration (8 layers, 512 dims, 4 heads, lr 1e-4).
inline GeneratorConfig paper_generator_config() {
    GeneratorConfig c;
    c.layers = 8;
    c.model_dim = 512;
    c.heads = 4;
    c.learning_rate = 1e-4;
    c.train_steps = 100000;
    return c;
}

/// Per-frame network outputs.
struct GeneratorOutput {
    Eigen::MatrixXd delta_x;  // (frames, 225)
    Eigen::MatrixXd contact;  // (frames, 2), sigmoid-squashed
};

/// Transformer encoder over [Z_i, m_i] frame tokens plus one skeleton
/// token; per-frame heads emit the pose deviation and foot-contact
/// probabilities. The deviation head starts at zero so an untrained
/// network reproduces the seeded interpolation.
class GeneratorNet {
public:
    GeneratorNet() = default;

    GeneratorNet(const GeneratorConfig& cfg, int skeleton_dim, uint64_t seed)
        : cfg_(cfg), skeleton_dim_(skeleton_dim) {
        cfg.validate();
        std::mt19937_64 g(seed);
        embed_frame_ = nn::Linear(kExtendedDim + 1, cfg.model_dim);
        embed_skel_ = nn::Linear(skeleton_dim, cfg.model_dim);
        embed_frame_.init_xavier(g);
        embed_skel_.init_xavier(g);
        layers_.clear();
        for (int l = 0; l < cfg.layers; ++l) {
            layers_.emplace_back(cfg.model_dim, cfg.heads, 4 * cfg.model_dim);
            layers_.back().init_xavier(g);
        }
        head_dx_ = nn::Linear(cfg.model_dim, kPoseDim);    // zero-initialized
        head_contact_ = nn::Linear(cfg.model_dim, 2);      // zero-initialized
    }

    const GeneratorConfig& config() const { return cfg_; }
    int skeleton_dim() const { return skeleton_dim_; }

    /// Frame tokens followed by the skeleton token; the skeleton token
    /// carries no positional encoding.
    GeneratorOutput forward(const std::vector<ExtendedFrame>& frames, const Eigen::VectorXd& skeleton_k) {
        const int n = static_cast<int>(frames.size());
        if (skeleton_k.size() != skeleton_dim_) {
            throw ValidationError("generator: skeleton vector length mismatch");
        }
        Eigen::MatrixXd token_in(n, kExtendedDim + 1);
        for (int i = 0; i < n; ++i) {
            token_in.row(i).head(kExtendedDim) = frames[static_cast<std::size_t>(i)].z.transpose();
            token_in(i, kExtendedDim) = frames[static_cast<std::size_t>(i)].flag;
        }
        Eigen::MatrixXd x(n + 1, cfg_.model_dim);
        x.topRows(n) = embed_frame_.forward(token_in) + positional_encoding(n, cfg_.model_dim);
        x.bottomRows(1) = embed_skel_.forward(skeleton_k.transpose());
        for (auto& layer : layers_) {
            x = layer.forward(x);
        }
        encoded_ = x;
        GeneratorOutput out;
        out.delta_x = head_dx_.forward(x.topRows(n));
        contact_logits_ = head_contact_.forward(x.topRows(n));
        out.contact = contact_logits_.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
        contact_probs_ = out.contact;
        return out;
    }

    /// Backpropagates loss gradients w.r.t. delta_x and the squashed
    /// contact probabilities into the parameter gradients.
    void backward(const Eigen::MatrixXd& d_delta_x, const Eigen::MatrixXd& d_contact) {
        const Eigen::Index n = d_delta_x.rows();
        const Eigen::MatrixXd d_logits =
            d_contact.cwiseProduct(contact_probs_.cwiseProduct(Eigen::MatrixXd::Ones(n, 2) - contact_probs_));
        Eigen::MatrixXd dx(n + 1, cfg_.model_dim);
        dx.setZero();
        dx.topRows(n) = head_dx_.backward(d_delta_x) + head_contact_.backward(d_logits);
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
            dx = it->backward(dx);
        }
        embed_frame_.backward(dx.topRows(n));
        embed_skel_.backward(dx.bottomRows(1));
    }

    void zero_grad() {
        embed_frame_.zero_grad();
        embed_skel_.zero_grad();
        for (auto& layer : layers_) {
            layer.zero_grad();
        }
        head_dx_.zero_grad();
        head_contact_.zero_grad();
    }

    std::vector<nn::ParamRef> parameters() {
        std::vector<nn::ParamRef> out;
        embed_frame_.collect("embed_frame", out);
        embed_skel_.collect("embed_skel", out);
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            layers_[l].collect("layer" + std::to_string(l), out);
        }
        head_dx_.collect("head_dx", out);
        head_contact_.collect("head_contact", out);
        return out;
    }

    static Eigen::MatrixXd positional_encoding(int positions, int dim) {
        Eigen::MatrixXd pe(positions, dim);
        for (int p = 0; p < positions; ++p) {
            for (int i = 0; i < dim; i += 2) {
                const double rate = std::pow(10000.0, -static_cast<double>(i) / dim);
                pe(p, i) = std::sin(p * rate);
                if (i + 1 < dim) {
                    pe(p, i + 1) = std::cos(p * rate);
                }
            }
        }
        return pe;
    }

private:
    GeneratorConfig cfg_;
    int skeleton_dim_ = 0;
    nn::Linear embed_frame_, embed_skel_;
    std::vector<nn::EncoderLayer> layers_;
    nn::Linear head_dx_, head_contact_;
    Eigen::MatrixXd encoded_, contact_logits_, contact_probs_;
};

/// Inference: refined pose X_i = seeded X-block + delta, with the given
/// endpoint frames written back verbatim (their flag is zero).
inline MotionSequence generate(GeneratorNet& net, const std::vector<ExtendedFrame>& seeded,
                               const Eigen::VectorXd& skeleton_k, double fps, GeneratorOutput* raw = nullptr,
                               bool clamp_endpoints = true) {
    const GeneratorOutput out = net.forward(seeded, skeleton_k);
    MotionSequence seq;
    seq.fps = fps;
    seq.contact_probs.emplace();
    for (std::size_t i = 0; i < seeded.size(); ++i) {
        Eigen::VectorXd x = seeded[i].z.head(kPoseDim) + out.delta_x.row(static_cast<Eigen::Index>(i)).transpose();
        if (clamp_endpoints && seeded[i].flag == 0.0) {
            x = seeded[i].z.head(kPoseDim);
        }
        seq.frames.emplace_back(x);
        seq.contact_probs->push_back(out.contact.row(static_cast<Eigen::Index>(i)).transpose());
    }
    if (raw != nullptr) {
        *raw = out;
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Training losses. Each returns its value and, when requested, accumulates
// the gradient w.r.t. the predicted pose rows (and contact probabilities).

/// Reconstruction loss: weighted 1-norms of the pose blocks plus the
/// 2-norm of the per-frame contact error.
inline double loss_l1(const Eigen::MatrixXd& pred_x, const Eigen::MatrixXd& pred_contact,
                      const MotionSequence& truth, const LossWeights& w, Eigen::MatrixXd* d_pred_x = nullptr,
                      Eigen::MatrixXd* d_pred_contact = nullptr) {
    const int n = truth.frame_count();
    if (pred_x.rows() != n || (pred_contact.size() > 0 && pred_contact.rows() != n)) {
        throw ValidationError("loss_l1: frame count mismatch");
    }
    if (!truth.contact_probs) {
        throw ValidationError("loss_l1: ground truth carries no contact labels");
    }
    auto block_weight = [&w](int col) {
        if (col < 3) {
            return w.t;
        }
        if (col < 9) {
            return w.rg;
        }
        if (col < 9 + 6 * (kBodyJointCount - 1)) {
            return w.rb;
        }
        return w.rh;
    };
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd diff = pred_x.row(i).transpose() - truth.frames[static_cast<std::size_t>(i)].x;
        for (int c = 0; c < kPoseDim; ++c) {
            total += block_weight(c) * std::abs(diff[c]);
            if (d_pred_x != nullptr && diff[c] != 0.0) {
                (*d_pred_x)(i, c) += block_weight(c) * (diff[c] > 0.0 ? 1.0 : -1.0);
            }
        }
        if (pred_contact.size() > 0) {
            const Vec2 cdiff = pred_contact.row(i).transpose() - (*truth.contact_probs)[static_cast<std::size_t>(i)];
            const double norm = cdiff.norm();
            total += w.fc * norm;
            if (d_pred_contact != nullptr && norm > 1e-12) {
                d_pred_contact->row(i) += (w.fc / norm) * cdiff.transpose();
            }
        }
    }
    return total;
}

/// Smoothness loss: 1-norms of the frame-difference mismatch of the
/// rotation blocks (translation excluded).
inline double loss_l2(const Eigen::MatrixXd& pred_x, const MotionSequence& truth,
                      Eigen::MatrixXd* d_pred_x = nullptr) {
    const int n = truth.frame_count();
    if (pred_x.rows() != n || n < 2) {
        throw ValidationError("loss_l2: needs matching frame counts (>= 2)");
    }
    double total = 0.0;
    for (int i = 1; i < n; ++i) {
        for (int c = 3; c < kPoseDim; ++c) {  // every 6D block, no translation
            const double pd = pred_x(i, c) - pred_x(i - 1, c);
            const double td = truth.frames[static_cast<std::size_t>(i)].x[c] -
                              truth.frames[static_cast<std::size_t>(i - 1)].x[c];
            const double diff = pd - td;
            total += std::abs(diff);
            if (d_pred_x != nullptr && diff != 0.0) {
                const double s = diff > 0.0 ? 1.0 : -1.0;
                (*d_pred_x)(i, c) += s;
                (*d_pred_x)(i - 1, c) -= s;
            }
        }
    }
    return total;
}

/// Joint-position loss through differentiable FK: position, velocity and
/// acceleration mismatches in world space.
inline double loss_l3(const Eigen::MatrixXd& pred_x, const MotionSequence& truth, const Skeleton& skel,
                      Eigen::MatrixXd* d_pred_x = nullptr) {
    const int n = truth.frame_count();
    if (pred_x.rows() != n || n < 3) {
        throw ValidationError("loss_l3: needs matching frame counts (>= 3)");
    }
    const int dim = 3 * kJointCount;
    Eigen::MatrixXd pred_j(n, dim), true_j(n, dim);
    std::vector<Pose> pred_poses;
    std::vector<FkResult> pred_fk;
    pred_poses.reserve(static_cast<std::size_t>(n));
    pred_fk.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        pred_poses.emplace_back(Eigen::VectorXd(pred_x.row(i).transpose()));
        pred_fk.push_back(forward_kinematics(skel, pred_poses.back()));
        pred_j.row(i) = pred_fk.back().positions_flat().transpose();
        true_j.row(i) =
            forward_kinematics(skel, truth.frames[static_cast<std::size_t>(i)]).positions_flat().transpose();
    }

    double total = 0.0;
    Eigen::MatrixXd d_j = Eigen::MatrixXd::Zero(n, dim);
    // position
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < dim; ++c) {
            const double diff = pred_j(i, c) - true_j(i, c);
            total += std::abs(diff);
            if (diff != 0.0) {
                d_j(i, c) += diff > 0.0 ? 1.0 : -1.0;
            }
        }
    }
    // velocity
    for (int i = 1; i < n; ++i) {
        for (int c = 0; c < dim; ++c) {
            const double diff = (pred_j(i, c) - pred_j(i - 1, c)) - (true_j(i, c) - true_j(i - 1, c));
            total += std::abs(diff);
            if (diff != 0.0) {
                const double s = diff > 0.0 ? 1.0 : -1.0;
                d_j(i, c) += s;
                d_j(i - 1, c) -= s;
            }
        }
    }
    // acceleration
    for (int i = 2; i < n; ++i) {
        for (int c = 0; c < dim; ++c) {
            const double pd = pred_j(i, c) - 2.0 * pred_j(i - 1, c) + pred_j(i - 2, c);
            const double td = true_j(i, c) - 2.0 * true_j(i - 1, c) + true_j(i - 2, c);
            const double diff = pd - td;
            total += std::abs(diff);
            if (diff != 0.0) {
                const double s = diff > 0.0 ? 1.0 : -1.0;
                d_j(i, c) += s;
                d_j(i - 1, c) -= 2.0 * s;
                d_j(i - 2, c) += s;
            }
        }
    }
    if (d_pred_x != nullptr) {
        for (int i = 0; i < n; ++i) {
            FkAdjoint adj(kJointCount);
            for (int j = 0; j < kJointCount; ++j) {
                adj.d_pos[static_cast<std::size_t>(j)] = d_j.row(i).segment<3>(3 * j).transpose();
            }
            d_pred_x->row(i) +=
                fk_backward(skel, pred_poses[static_cast<std::size_t>(i)], pred_fk[static_cast<std::size_t>(i)],
                            std::move(adj))
                    .transpose();
        }
    }
    return total;
}

/// Finger loss: 1-norm mismatch of wrist-local finger joint positions.
inline double loss_l4(const Eigen::MatrixXd& pred_x, const MotionSequence& truth, const Skeleton& skel,
                      const BodyMap& map, Eigen::MatrixXd* d_pred_x = nullptr) {
    const int n = truth.frame_count();
    if (pred_x.rows() != n) {
        throw ValidationError("loss_l4: frame count mismatch");
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const Pose pred_pose{Eigen::VectorXd(pred_x.row(i).transpose())};
        const Eigen::MatrixX3d pred_h = wrist_local_finger_positions(skel, pred_pose, map);
        const Eigen::MatrixX3d true_h =
            wrist_local_finger_positions(skel, truth.frames[static_cast<std::size_t>(i)], map);
        Eigen::MatrixX3d d_h = Eigen::MatrixX3d::Zero(kHandJointCount, 3);
        for (int r = 0; r < pred_h.rows(); ++r) {
            for (int c = 0; c < 3; ++c) {
                const double diff = pred_h(r, c) - true_h(r, c);
                total += std::abs(diff);
                if (diff != 0.0) {
                    d_h(r, c) = diff > 0.0 ? 1.0 : -1.0;
                }
            }
        }
        if (d_pred_x != nullptr) {
            const FkResult fk = forward_kinematics(skel, pred_pose);
            FkAdjoint adj(kJointCount);
            wrist_local_backward(fk, map, d_h, adj);
            d_pred_x->row(i) += fk_backward(skel, pred_pose, fk, std::move(adj)).transpose();
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Training

struct TrainingSample {
    MotionSequence gt;  // with contact labels in contact_probs
};

struct TraceRow {
    int step;
    double l1, l2, l3, l4, total;
};

/// Full-corpus Adam training, deterministic for a fixed seed. Throws
/// NumericalError (with the trace preserved) if the loss leaves the reals.
inline GeneratorNet train(const GeneratorConfig& cfg, const std::vector<TrainingSample>& corpus,
                          const Skeleton& skel, uint64_t seed, std::vector<TraceRow>* trace = nullptr) {
    cfg.validate();
    if (corpus.empty()) {
        throw ValidationError("train: empty corpus");
    }
    for (const auto& sample : corpus) {
        sample.gt.validate();
        if (!sample.gt.contact_probs) {
            throw ValidationError("train: samples need contact labels");
        }
        if (sample.gt.frame_count() != cfg.seq_len + 1) {
            throw ValidationError("train: sample length must equal T + 1");
        }
    }
    const BodyMap map = BodyMap::resolve(skel);
    const Eigen::VectorXd k = skel.length_vector();
    GeneratorNet net(cfg, static_cast<int>(k.size()), seed);
    auto params = net.parameters();
    nn::Adam adam(cfg.learning_rate);

    // seeds depend only on the ground-truth endpoints; build once
    std::vector<std::vector<ExtendedFrame>> seeds;
    seeds.reserve(corpus.size());
    for (const auto& sample : corpus) {
        seeds.push_back(seed_interpolation(extend_with_joints(skel, sample.gt.frames.front()),
                                           extend_with_joints(skel, sample.gt.frames.back()), cfg.seq_len));
    }

    const double batch = static_cast<double>(corpus.size());
    for (int step = 1; step <= cfg.train_steps; ++step) {
        net.zero_grad();
        double l1 = 0.0, l2 = 0.0, l3 = 0.0, l4 = 0.0;
        for (std::size_t s = 0; s < corpus.size(); ++s) {
            const auto& sample = corpus[s];
            const int n = sample.gt.frame_count();
            const GeneratorOutput out = net.forward(seeds[s], k);
            Eigen::MatrixXd pred_x(n, kPoseDim);
            for (int i = 0; i < n; ++i) {
                pred_x.row(i) = seeds[s][static_cast<std::size_t>(i)].z.head(kPoseDim).transpose() +
                                out.delta_x.row(i);
            }
            Eigen::MatrixXd d_x = Eigen::MatrixXd::Zero(n, kPoseDim);
            Eigen::MatrixXd d_c = Eigen::MatrixXd::Zero(n, 2);
            l1 += loss_l1(pred_x, out.contact, sample.gt, cfg.loss_weights, &d_x, &d_c);
            {
                Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, kPoseDim);
                l2 += cfg.loss_weights.w2 * loss_l2(pred_x, sample.gt, &d);
                d_x += cfg.loss_weights.w2 * d;
            }
            {
                Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, kPoseDim);
                l3 += cfg.loss_weights.w3 * loss_l3(pred_x, sample.gt, skel, &d);
                d_x += cfg.loss_weights.w3 * d;
            }
            {
                Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, kPoseDim);
                l4 += cfg.loss_weights.w4 * loss_l4(pred_x, sample.gt, skel, map, &d);
                d_x += cfg.loss_weights.w4 * d;
            }
            net.backward(d_x / batch, d_c / batch);
        }
        l1 /= batch;
        l2 /= batch;
        l3 /= batch;
        l4 /= batch;
        const double total = l1 + l2 + l3 + l4;
        if (trace != nullptr) {
            trace->push_back({step, l1, l2, l3, l4, total});
        }
        if (!std::isfinite(total)) {
            throw NumericalError("train: loss diverged at step " + std::to_string(step));
        }
        adam.step(params);
    }
    return net;
}

}  // namespace grasp
