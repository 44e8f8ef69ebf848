#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "caada/matrix.hpp"
#include "caada/rng.hpp"

namespace caada {

// A trainable tensor with its gradient accumulator. Gradient buffers always
// match the value shape.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter(std::string n, Matrix v)
        : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

    void zero_grad() {
        for (double& g : grad.values()) g = 0.0;
    }
};

// Differentiable layer with a manual forward/backward pair. A layer caches
// whatever forward state its backward needs; backward consumes that cache,
// so it may only run once per forward and raises StateError otherwise.
class Layer {
public:
    virtual ~Layer() = default;

    virtual Matrix forward(const Matrix& x) = 0;
    virtual Matrix backward(const Matrix& grad_out) = 0;
    virtual std::vector<Parameter*> parameters() { return {}; }

    // Fixed dimensions where the layer has them; nullopt = shape-preserving.
    virtual std::optional<std::size_t> input_dim() const { return std::nullopt; }
    virtual std::optional<std::size_t> output_dim() const { return std::nullopt; }
};

enum class WeightInit {
    ScaledUniform,  // uniform in +-sqrt(6 / (fan_in + fan_out))
    Gaussian,       // N(0, stddev)
};

// y = x W + b with W of shape (in_dim x out_dim) and b of shape (1 x out_dim).
class AffineLayer : public Layer {
public:
    AffineLayer(std::size_t in_dim, std::size_t out_dim, Rng& rng,
                WeightInit init = WeightInit::ScaledUniform,
                double gaussian_stddev = 0.005);

    Matrix forward(const Matrix& x) override;
    Matrix backward(const Matrix& grad_out) override;
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

    std::optional<std::size_t> input_dim() const override { return in_dim_; }
    std::optional<std::size_t> output_dim() const override { return out_dim_; }

    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }

private:
    std::size_t in_dim_;
    std::size_t out_dim_;
    Parameter weight_;
    Parameter bias_;
    std::optional<Matrix> cached_input_;
};

// max(0, x) elementwise; the subgradient at exactly 0 is 0.
class ReluLayer : public Layer {
public:
    Matrix forward(const Matrix& x) override;
    Matrix backward(const Matrix& grad_out) override;

private:
    std::optional<Matrix> cached_input_;
};

// Identity in the forward pass; backward multiplies the upstream gradient
// by -lambda. Carries the adversarial weight of the combined objective.
class GradientReversalLayer : public Layer {
public:
    explicit GradientReversalLayer(double lambda);

    Matrix forward(const Matrix& x) override { return x; }
    Matrix backward(const Matrix& grad_out) override;

    double lambda() const { return lambda_; }
    void set_lambda(double lambda);

private:
    double lambda_;
};

// Ordered pipeline of layers. Adjacent dimensions are validated as layers
// are appended.
class LayerStack {
public:
    LayerStack() = default;
    LayerStack(LayerStack&&) = default;
    LayerStack& operator=(LayerStack&&) = default;

    void push(std::unique_ptr<Layer> layer);

    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& grad_out);

    std::vector<Parameter*> parameters();
    void zero_grads();

    std::size_t depth() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }

    std::optional<std::size_t> input_dim() const { return input_dim_; }
    std::optional<std::size_t> output_dim() const { return last_known_dim_; }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    std::optional<std::size_t> input_dim_;
    std::optional<std::size_t> last_known_dim_;
};

// Momentum SGD with coupled L2 weight decay:
//   v <- momentum * v + (grad + weight_decay * param)
//   param <- param - learning_rate * v
// Deterministic: identical (state, grads) give bit-identical updates.
class SgdOptimizer {
public:
    SgdOptimizer(double learning_rate, double momentum, double weight_decay);

    void register_parameters(std::span<Parameter* const> params);
    void step();

    double learning_rate() const { return learning_rate_; }

private:
    struct Slot {
        Parameter* param;
        Matrix velocity;
    };

    double learning_rate_;
    double momentum_;
    double weight_decay_;
    std::vector<Slot> slots_;
};

}  // namespace caada
