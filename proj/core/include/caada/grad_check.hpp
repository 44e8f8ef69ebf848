#pragma once

#include <functional>

#include "caada/layers.hpp"
#include "caada/matrix.hpp"

namespace caada {

// Scalar loss of a stack output together with its gradient w.r.t. that output.
struct LossValue {
    double value;
    Matrix grad;
};

using LossFn = std::function<LossValue(const Matrix& output)>;

// Central-difference check of every parameter in `stack` against the analytic
// backward pass. Each parameter element is perturbed by +-eps and the numeric
// derivative compared as |a - n| / max(|a|, |n|, 1e-8). Returns the maximum
// relative error over all elements; a stack without parameters returns 0.
double grad_check(LayerStack& stack, const LossFn& loss, const Matrix& x, double eps);

// Half squared error against a fixed reference, a convenient loss for checks.
LossFn squared_loss(Matrix reference);

}  // namespace caada
