#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "grasp/rotation.hpp"

namespace grasp::nn {

/// Uniform double in [0,1) from the top 53 bits of the generator,
/// identical across platforms for a given seed.
inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

struct ParamRef {
    std::string name;
    Eigen::MatrixXd* value;
    Eigen::MatrixXd* grad;
};

/// Dense layer y = x W + b over row-major token matrices.
class Linear {
public:
    Linear() = default;
    Linear(int in, int out) : w_(Eigen::MatrixXd::Zero(in, out)), b_(Eigen::MatrixXd::Zero(1, out)) {
        zero_grad();
    }

    void init_xavier(std::mt19937_64& g) {
        const double a = std::sqrt(6.0 / static_cast<double>(w_.rows() + w_.cols()));
        for (Eigen::Index i = 0; i < w_.rows(); ++i) {
            for (Eigen::Index j = 0; j < w_.cols(); ++j) {
                w_(i, j) = a * (2.0 * uniform01(g) - 1.0);
            }
        }
        b_.setZero();
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) {
        x_ = x;
        return (x * w_).rowwise() + b_.row(0);
    }

    Eigen::MatrixXd backward(const Eigen::MatrixXd& dy) {
        gw_ += x_.transpose() * dy;
        gb_.row(0) += dy.colwise().sum();
        return dy * w_.transpose();
    }

    void zero_grad() {
        gw_ = Eigen::MatrixXd::Zero(w_.rows(), w_.cols());
        gb_ = Eigen::MatrixXd::Zero(1, b_.cols());
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".w", &w_, &gw_});
        out.push_back({prefix + ".b", &b_, &gb_});
    }

    Eigen::MatrixXd& weights() { return w_; }
    Eigen::MatrixXd& bias() { return b_; }

private:
    Eigen::MatrixXd w_, b_;
    Eigen::MatrixXd gw_, gb_;
    Eigen::MatrixXd x_;
};

/// Per-row layer normalization with learned gain and bias.
class LayerNorm {
public:
    LayerNorm() = default;
    explicit LayerNorm(int dim)
        : gamma_(Eigen::MatrixXd::Ones(1, dim)), beta_(Eigen::MatrixXd::Zero(1, dim)) {
        zero_grad();
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) {
        xhat_.resizeLike(x);
        inv_sigma_.resize(x.rows());
        Eigen::MatrixXd y(x.rows(), x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const double mu = x.row(r).mean();
            const double var = (x.row(r).array() - mu).square().mean();
            const double inv = 1.0 / std::sqrt(var + 1e-5);
            inv_sigma_[r] = inv;
            xhat_.row(r) = (x.row(r).array() - mu) * inv;
            y.row(r) = xhat_.row(r).cwiseProduct(gamma_.row(0)) + beta_.row(0);
        }
        return y;
    }

    Eigen::MatrixXd backward(const Eigen::MatrixXd& dy) {
        Eigen::MatrixXd dx(dy.rows(), dy.cols());
        for (Eigen::Index r = 0; r < dy.rows(); ++r) {
            const Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(gamma_.row(0));
            const double m1 = dxhat.mean();
            const double m2 = dxhat.cwiseProduct(xhat_.row(r)).mean();
            dx.row(r) = inv_sigma_[r] * (dxhat.array() - m1 - xhat_.row(r).array() * m2);
        }
        ggamma_.row(0) += dy.cwiseProduct(xhat_).colwise().sum();
        gbeta_.row(0) += dy.colwise().sum();
        return dx;
    }

    void zero_grad() {
        ggamma_ = Eigen::MatrixXd::Zero(1, gamma_.cols());
        gbeta_ = Eigen::MatrixXd::Zero(1, beta_.cols());
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + ".gamma", &gamma_, &ggamma_});
        out.push_back({prefix + ".beta", &beta_, &gbeta_});
    }

private:
    Eigen::MatrixXd gamma_, beta_;
    Eigen::MatrixXd ggamma_, gbeta_;
    Eigen::MatrixXd xhat_;
    Eigen::VectorXd inv_sigma_;
};

/// Full bidirectional multi-head self-attention.
class MultiHeadSelfAttention {
public:
    MultiHeadSelfAttention() = default;
    MultiHeadSelfAttention(int dim, int heads)
        : dim_(dim), heads_(heads), head_dim_(dim / heads), q_(dim, dim), k_(dim, dim), v_(dim, dim),
          o_(dim, dim) {
        if (dim % heads != 0) {
            throw ValidationError("attention: model_dim must be divisible by heads");
        }
    }

    void init_xavier(std::mt19937_64& g) {
        q_.init_xavier(g);
        k_.init_xavier(g);
        v_.init_xavier(g);
        o_.init_xavier(g);
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) {
        const Eigen::Index n = x.rows();
        q_all_ = q_.forward(x);
        k_all_ = k_.forward(x);
        v_all_ = v_.forward(x);
        probs_.assign(static_cast<std::size_t>(heads_), Eigen::MatrixXd());
        Eigen::MatrixXd concat(n, dim_);
        const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
        for (int h = 0; h < heads_; ++h) {
            const auto qh = q_all_.middleCols(h * head_dim_, head_dim_);
            const auto kh = k_all_.middleCols(h * head_dim_, head_dim_);
            const auto vh = v_all_.middleCols(h * head_dim_, head_dim_);
            Eigen::MatrixXd scores = scale * (qh * kh.transpose());
            for (Eigen::Index r = 0; r < n; ++r) {
                const double mx = scores.row(r).maxCoeff();
                scores.row(r) = (scores.row(r).array() - mx).exp();
                scores.row(r) /= scores.row(r).sum();
            }
            probs_[static_cast<std::size_t>(h)] = scores;
            concat.middleCols(h * head_dim_, head_dim_) = scores * vh;
        }
        return o_.forward(concat);
    }

    Eigen::MatrixXd backward(const Eigen::MatrixXd& dy) {
        const Eigen::Index n = dy.rows();
        const Eigen::MatrixXd d_concat = o_.backward(dy);
        Eigen::MatrixXd dq(n, dim_), dk(n, dim_), dv(n, dim_);
        const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
        for (int h = 0; h < heads_; ++h) {
            const auto qh = q_all_.middleCols(h * head_dim_, head_dim_);
            const auto kh = k_all_.middleCols(h * head_dim_, head_dim_);
            const auto vh = v_all_.middleCols(h * head_dim_, head_dim_);
            const Eigen::MatrixXd& p = probs_[static_cast<std::size_t>(h)];
            const auto d_out = d_concat.middleCols(h * head_dim_, head_dim_);
            dv.middleCols(h * head_dim_, head_dim_) = p.transpose() * d_out;
            Eigen::MatrixXd dp = d_out * vh.transpose();
            // softmax backward per row
            Eigen::MatrixXd ds(n, n);
            for (Eigen::Index r = 0; r < n; ++r) {
                const double dot = dp.row(r).dot(p.row(r));
                ds.row(r) = (p.row(r).array() * (dp.row(r).array() - dot)).matrix();
            }
            dq.middleCols(h * head_dim_, head_dim_) = scale * (ds * kh);
            dk.middleCols(h * head_dim_, head_dim_) = scale * (ds.transpose() * qh);
        }
        return q_.backward(dq) + k_.backward(dk) + v_.backward(dv);
    }

    void zero_grad() {
        q_.zero_grad();
        k_.zero_grad();
        v_.zero_grad();
        o_.zero_grad();
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        q_.collect(prefix + ".q", out);
        k_.collect(prefix + ".k", out);
        v_.collect(prefix + ".v", out);
        o_.collect(prefix + ".o", out);
    }

private:
    int dim_ = 0, heads_ = 0, head_dim_ = 0;
    Linear q_, k_, v_, o_;
    Eigen::MatrixXd q_all_, k_all_, v_all_;
    std::vector<Eigen::MatrixXd> probs_;
};

/// Position-wise feed-forward block with ReLU.
class FeedForward {
public:
    FeedForward() = default;
    FeedForward(int dim, int hidden) : fc1_(dim, hidden), fc2_(hidden, dim) {}

    void init_xavier(std::mt19937_64& g) {
        fc1_.init_xavier(g);
        fc2_.init_xavier(g);
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) {
        pre_ = fc1_.forward(x);
        return fc2_.forward(pre_.cwiseMax(0.0));
    }

    Eigen::MatrixXd backward(const Eigen::MatrixXd& dy) {
        Eigen::MatrixXd dh = fc2_.backward(dy);
        dh = (pre_.array() > 0.0).select(dh, 0.0);
        return fc1_.backward(dh);
    }

    void zero_grad() {
        fc1_.zero_grad();
        fc2_.zero_grad();
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        fc1_.collect(prefix + ".fc1", out);
        fc2_.collect(prefix + ".fc2", out);
    }

private:
    Linear fc1_, fc2_;
    Eigen::MatrixXd pre_;
};

/// Post-norm encoder layer: attention and feed-forward sublayers with
/// residual connections.
class EncoderLayer {
public:
    EncoderLayer() = default;
    EncoderLayer(int dim, int heads, int ffn_hidden)
        : mha_(dim, heads), ln1_(dim), ffn_(dim, ffn_hidden), ln2_(dim) {}

    void init_xavier(std::mt19937_64& g) {
        mha_.init_xavier(g);
        ffn_.init_xavier(g);
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) {
        const Eigen::MatrixXd a = ln1_.forward(x + mha_.forward(x));
        return ln2_.forward(a + ffn_.forward(a));
    }

    Eigen::MatrixXd backward(const Eigen::MatrixXd& dy) {
        const Eigen::MatrixXd d2 = ln2_.backward(dy);
        const Eigen::MatrixXd da = d2 + ffn_.backward(d2);
        const Eigen::MatrixXd d1 = ln1_.backward(da);
        return d1 + mha_.backward(d1);
    }

    void zero_grad() {
        mha_.zero_grad();
        ln1_.zero_grad();
        ffn_.zero_grad();
        ln2_.zero_grad();
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        mha_.collect(prefix + ".mha", out);
        ln1_.collect(prefix + ".ln1", out);
        ffn_.collect(prefix + ".ffn", out);
        ln2_.collect(prefix + ".ln2", out);
    }

private:
    MultiHeadSelfAttention mha_;
    LayerNorm ln1_;
    FeedForward ffn_;
    LayerNorm ln2_;
};

/// Adam with bias correction; state keyed by parameter order.
class Adam {
public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<ParamRef>& params) {
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.push_back(Eigen::MatrixXd::Zero(p.value->rows(), p.value->cols()));
                v_.push_back(Eigen::MatrixXd::Zero(p.value->rows(), p.value->cols()));
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Eigen::MatrixXd& g = *params[i].grad;
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
            const Eigen::ArrayXXd mhat = m_[i].array() / bc1;
            const Eigen::ArrayXXd vhat = v_[i].array() / bc2;
            params[i].value->array() -= lr_ * mhat / (vhat.sqrt() + eps_);
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<Eigen::MatrixXd> m_, v_;
};

}  // namespace grasp::nn
