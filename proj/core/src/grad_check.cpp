#include "caada/grad_check.hpp"

#include <cmath>

#include "caada/errors.hpp"

namespace caada {

double grad_check(LayerStack& stack, const LossFn& loss, const Matrix& x,
                  double eps) {
    if (!(eps > 0.0)) throw ConfigError("grad_check: eps must be > 0");

    auto params = stack.parameters();

    const LossValue base = loss(stack.forward(x));
    if (!std::isfinite(base.value)) {
        throw NumericError("grad_check: non-finite loss");
    }
    if (params.empty()) return 0.0;

    stack.zero_grads();
    stack.backward(base.grad);
    std::vector<Matrix> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) analytic.push_back(p->grad);

    double max_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto vals = params[pi]->value.values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double original = vals[i];
            vals[i] = original + eps;
            const double up = loss(stack.forward(x)).value;
            vals[i] = original - eps;
            const double down = loss(stack.forward(x)).value;
            vals[i] = original;

            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[pi].values()[i];
            const double rel = std::fabs(a - numeric) /
                               std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            if (rel > max_rel) max_rel = rel;
        }
    }
    return max_rel;
}

LossFn squared_loss(Matrix reference) {
    return [reference = std::move(reference)](const Matrix& y) {
        if (!y.same_shape(reference)) {
            throw DimensionError("squared_loss: output " + y.shape_str() +
                                 " vs reference " + reference.shape_str());
        }
        Matrix diff = sub(y, reference);
        return LossValue{0.5 * frobenius_sq(diff), diff};
    };
}

}  // namespace caada
