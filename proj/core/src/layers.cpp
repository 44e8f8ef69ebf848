#include "caada/layers.hpp"

#include <cmath>

#include "caada/errors.hpp"

namespace caada {

namespace {

Matrix init_weight(std::size_t in_dim, std::size_t out_dim, Rng& rng,
                   WeightInit init, double stddev) {
    Matrix w(in_dim, out_dim);
    if (init == WeightInit::ScaledUniform) {
        const double bound =
            std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : w.values()) v = dist(rng);
    } else {
        std::normal_distribution<double> dist(0.0, stddev);
        for (double& v : w.values()) v = dist(rng);
    }
    return w;
}

}  // namespace

AffineLayer::AffineLayer(std::size_t in_dim, std::size_t out_dim, Rng& rng,
                         WeightInit init, double gaussian_stddev)
    : in_dim_(in_dim),
      out_dim_(out_dim),
      weight_("weight", init_weight(in_dim, out_dim, rng, init, gaussian_stddev)),
      bias_("bias", Matrix(1, out_dim)) {
    if (in_dim == 0 || out_dim == 0) {
        throw ConfigError("affine layer dimensions must be positive");
    }
}

Matrix AffineLayer::forward(const Matrix& x) {
    if (x.cols() != in_dim_) {
        throw DimensionError("affine forward: input " + x.shape_str() +
                             " does not match weight " + weight_.value.shape_str());
    }
    cached_input_ = x;
    return add_row_broadcast(matmul(x, weight_.value), bias_.value);
}

Matrix AffineLayer::backward(const Matrix& grad_out) {
    if (!cached_input_) {
        throw StateError("affine backward called before forward");
    }
    if (grad_out.rows() != cached_input_->rows() || grad_out.cols() != out_dim_) {
        throw DimensionError("affine backward: gradient " + grad_out.shape_str() +
                             " does not match output (" +
                             std::to_string(cached_input_->rows()) + "x" +
                             std::to_string(out_dim_) + ")");
    }
    weight_.grad = add(weight_.grad, matmul(transpose(*cached_input_), grad_out));
    bias_.grad = add(bias_.grad, col_sum(grad_out));
    Matrix grad_in = matmul(grad_out, transpose(weight_.value));
    cached_input_.reset();
    return grad_in;
}

Matrix ReluLayer::forward(const Matrix& x) {
    cached_input_ = x;
    Matrix out = x;
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return out;
}

Matrix ReluLayer::backward(const Matrix& grad_out) {
    if (!cached_input_) {
        throw StateError("relu backward called before forward");
    }
    if (!grad_out.same_shape(*cached_input_)) {
        throw DimensionError("relu backward: gradient " + grad_out.shape_str() +
                             " vs cached input " + cached_input_->shape_str());
    }
    Matrix grad_in = grad_out;
    auto gi = grad_in.values();
    auto ci = cached_input_->values();
    for (std::size_t i = 0; i < gi.size(); ++i) {
        if (ci[i] <= 0.0) gi[i] = 0.0;
    }
    cached_input_.reset();
    return grad_in;
}

GradientReversalLayer::GradientReversalLayer(double lambda) : lambda_(lambda) {
    set_lambda(lambda);
}

void GradientReversalLayer::set_lambda(double lambda) {
    if (!(lambda >= 0.0)) {
        throw ConfigError("gradient reversal strength must be >= 0");
    }
    lambda_ = lambda;
}

Matrix GradientReversalLayer::backward(const Matrix& grad_out) {
    return scale(grad_out, -lambda_);
}

void LayerStack::push(std::unique_ptr<Layer> layer) {
    if (const auto in = layer->input_dim()) {
        if (last_known_dim_ && *last_known_dim_ != *in) {
            throw DimensionError(
                "layer stack: layer expects input dim " + std::to_string(*in) +
                " but previous layer produces " + std::to_string(*last_known_dim_));
        }
        if (!input_dim_ && layers_.empty()) input_dim_ = in;
    }
    if (const auto out = layer->output_dim()) last_known_dim_ = out;
    layers_.push_back(std::move(layer));
}

Matrix LayerStack::forward(const Matrix& x) {
    Matrix h = x;
    for (auto& layer : layers_) h = layer->forward(h);
    return h;
}

Matrix LayerStack::backward(const Matrix& grad_out) {
    Matrix g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        g = (*it)->backward(g);
    }
    return g;
}

std::vector<Parameter*> LayerStack::parameters() {
    std::vector<Parameter*> params;
    for (auto& layer : layers_) {
        for (Parameter* p : layer->parameters()) params.push_back(p);
    }
    return params;
}

void LayerStack::zero_grads() {
    for (Parameter* p : parameters()) p->zero_grad();
}

SgdOptimizer::SgdOptimizer(double learning_rate, double momentum,
                           double weight_decay)
    : learning_rate_(learning_rate),
      momentum_(momentum),
      weight_decay_(weight_decay) {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0)
        throw ConfigError("momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
}

void SgdOptimizer::register_parameters(std::span<Parameter* const> params) {
    for (Parameter* p : params) {
        slots_.push_back(Slot{p, Matrix(p->value.rows(), p->value.cols())});
    }
}

void SgdOptimizer::step() {
    for (Slot& slot : slots_) {
        Parameter& p = *slot.param;
        if (!p.grad.same_shape(p.value)) {
            throw DimensionError("sgd step: gradient " + p.grad.shape_str() +
                                 " vs parameter " + p.value.shape_str());
        }
        auto v = slot.velocity.values();
        auto val = p.value.values();
        auto g = p.grad.values();
        for (std::size_t i = 0; i < val.size(); ++i) {
            v[i] = momentum_ * v[i] + (g[i] + weight_decay_ * val[i]);
            val[i] -= learning_rate_ * v[i];
        }
        ensure_finite(p.value, "sgd step");
    }
}

}  // namespace caada
