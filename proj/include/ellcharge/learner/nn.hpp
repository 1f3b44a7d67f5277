#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ellcharge/errors.hpp"

namespace ellcharge::learner {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { tanh, relu };

struct DenseLayer {
    Matrix w;  // out x in
    Vector b;  // out
};

/// Intermediate values of one batched forward pass; columns are samples.
struct MlpCache {
    std::vector<Matrix> inputs;  // input of every layer
    std::vector<Matrix> pre;     // pre-activation of every layer
};

/// Parameter-shaped gradient accumulator.
struct MlpGrads {
    std::vector<DenseLayer> layers;
};

/// Fully connected network with a shared hidden activation and a linear output
/// layer. Gradients are computed by hand in reverse mode.
class Mlp {
public:
    Mlp() = default;

    Mlp(std::vector<int> sizes, Activation act) : sizes_(std::move(sizes)), act_(act)
    {
        if (sizes_.size() < 2) throw DomainError("an MLP needs at least an input and an output size");
        for (std::size_t i = 0; i + 1 < sizes_.size(); ++i)
            layers_.push_back({Matrix::Zero(sizes_[i + 1], sizes_[i]), Vector::Zero(sizes_[i + 1])});
    }

    /// Uniform fan-in initialisation; the last layer is scaled by `out_scale`.
    void init(std::mt19937_64& rng, double out_scale = 1.0)
    {
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            auto& layer = layers_[l];
            const double bound = 1.0 / std::sqrt(static_cast<double>(layer.w.cols()));
            const double scale = l + 1 == layers_.size() ? out_scale : 1.0;
            std::uniform_real_distribution<double> u(-bound * scale, bound * scale);
            for (Eigen::Index i = 0; i < layer.w.size(); ++i) layer.w.data()[i] = u(rng);
            for (Eigen::Index i = 0; i < layer.b.size(); ++i) layer.b[i] = u(rng);
        }
    }

    [[nodiscard]] Matrix forward(const Matrix& x, MlpCache* cache = nullptr) const
    {
        if (cache) {
            cache->inputs.clear();
            cache->pre.clear();
        }
        Matrix h = x;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Matrix z = layers_[l].w * h;
            z.colwise() += layers_[l].b;
            if (cache) {
                cache->inputs.push_back(h);
                cache->pre.push_back(z);
            }
            h = l + 1 == layers_.size() ? z : activate(z);
        }
        return h;
    }

    /// Back-propagates `grad_out` (same shape as the output). Parameter gradients
    /// are added into `grads` when given; returns the gradient w.r.t. the input.
    Matrix backward(const MlpCache& cache, const Matrix& grad_out, MlpGrads* grads) const
    {
        Matrix g = grad_out;
        for (std::size_t l = layers_.size(); l-- > 0;) {
            if (l + 1 != layers_.size()) g = g.cwiseProduct(activate_derivative(cache.pre[l]));
            if (grads) {
                grads->layers[l].w.noalias() += g * cache.inputs[l].transpose();
                grads->layers[l].b.noalias() += g.rowwise().sum();
            }
            g = layers_[l].w.transpose() * g;
        }
        return g;
    }

    [[nodiscard]] MlpGrads zero_grads() const
    {
        MlpGrads g;
        for (const auto& l : layers_) g.layers.push_back({Matrix::Zero(l.w.rows(), l.w.cols()), Vector::Zero(l.b.size())});
        return g;
    }

    /// Polyak averaging: this <- (1 - tau) this + tau other.
    void soft_update(const Mlp& other, double tau)
    {
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            layers_[l].w = (1.0 - tau) * layers_[l].w + tau * other.layers_[l].w;
            layers_[l].b = (1.0 - tau) * layers_[l].b + tau * other.layers_[l].b;
        }
    }

    [[nodiscard]] bool finite() const
    {
        for (const auto& l : layers_)
            if (!l.w.allFinite() || !l.b.allFinite()) return false;
        return true;
    }

    [[nodiscard]] std::vector<DenseLayer>& layers() noexcept { return layers_; }
    [[nodiscard]] const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    [[nodiscard]] const std::vector<int>& sizes() const noexcept { return sizes_; }
    [[nodiscard]] Activation activation() const noexcept { return act_; }
    [[nodiscard]] int input_size() const noexcept { return sizes_.front(); }
    [[nodiscard]] int output_size() const noexcept { return sizes_.back(); }

    friend bool operator==(const Mlp& a, const Mlp& b)
    {
        if (a.sizes_ != b.sizes_ || a.act_ != b.act_) return false;
        for (std::size_t l = 0; l < a.layers_.size(); ++l)
            if (a.layers_[l].w != b.layers_[l].w || a.layers_[l].b != b.layers_[l].b) return false;
        return true;
    }

private:
    [[nodiscard]] Matrix activate(const Matrix& z) const
    {
        if (act_ == Activation::tanh) return z.array().tanh().matrix();
        return z.cwiseMax(0.0);
    }

    [[nodiscard]] Matrix activate_derivative(const Matrix& z) const
    {
        if (act_ == Activation::tanh) return (1.0 - z.array().tanh().square()).matrix();
        return (z.array() > 0.0).cast<double>().matrix();
    }

    std::vector<int> sizes_;
    Activation act_ = Activation::tanh;
    std::vector<DenseLayer> layers_;
};

/// Adam with per-layer moment buffers.
class Adam {
public:
    Adam() = default;
    Adam(const Mlp& net, double lr) : lr_(lr), m_(net.zero_grads()), v_(net.zero_grads()) {}

    void step(Mlp& net, const MlpGrads& g)
    {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            update(net.layers()[l].w, g.layers[l].w, m_.layers[l].w, v_.layers[l].w, c1, c2);
            update(net.layers()[l].b, g.layers[l].b, m_.layers[l].b, v_.layers[l].b, c1, c2);
        }
    }

private:
    template <typename P, typename G>
    void update(P& param, const G& grad, P& m, P& v, double c1, double c2)
    {
        m = beta1_ * m + (1.0 - beta1_) * grad;
        v = beta2_ * v + (1.0 - beta2_) * grad.cwiseProduct(grad);
        param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    }

    double lr_ = 3e-4;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long t_ = 0;
    MlpGrads m_;
    MlpGrads v_;
};

/// Scalar Adam for the entropy temperature.
class ScalarAdam {
public:
    explicit ScalarAdam(double lr = 3e-4) : lr_(lr) {}
    void step(double& param, double grad)
    {
        ++t_;
        m_ = 0.9 * m_ + 0.1 * grad;
        v_ = 0.999 * v_ + 0.001 * grad * grad;
        const double mh = m_ / (1.0 - std::pow(0.9, static_cast<double>(t_)));
        const double vh = v_ / (1.0 - std::pow(0.999, static_cast<double>(t_)));
        param -= lr_ * mh / (std::sqrt(vh) + 1e-8);
    }

private:
    double lr_;
    double m_ = 0.0;
    double v_ = 0.0;
    long t_ = 0;
};

}  // namespace ellcharge::learner
