#include "caada/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "caada/errors.hpp"
#include "caada/grad_check.hpp"
#include "caada/losses.hpp"
#include "caada/model.hpp"
#include "caada/rng.hpp"

namespace caada {

namespace {

double rel_error(double analytic, double numeric) {
    return std::fabs(analytic - numeric) /
           std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo,
                     double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = dist(rng);
    return m;
}

double check_affine(double eps) {
    Rng rng = make_rng(derive_seed(11, "verify.affine"));
    LayerStack stack;
    stack.push(std::make_unique<AffineLayer>(3, 2, rng));
    const Matrix x = random_matrix(4, 3, rng, -1.0, 1.0);
    const Matrix target = random_matrix(4, 2, rng, -1.0, 1.0);
    return grad_check(stack, squared_loss(target), x, eps);
}

double check_relu(double eps) {
    // Bias the preactivations away from the kink so the finite difference
    // never straddles it.
    Rng rng = make_rng(derive_seed(12, "verify.relu"));
    LayerStack stack;
    stack.push(std::make_unique<AffineLayer>(3, 4, rng));
    stack.push(std::make_unique<ReluLayer>());
    stack.push(std::make_unique<AffineLayer>(4, 2, rng));
    const Matrix x = random_matrix(5, 3, rng, 0.5, 1.5);
    const Matrix target = random_matrix(5, 2, rng, -1.0, 1.0);
    return grad_check(stack, squared_loss(target), x, eps);
}

double check_cross_entropy(double eps) {
    Rng rng = make_rng(derive_seed(13, "verify.cross_entropy"));
    LayerStack stack;
    stack.push(std::make_unique<AffineLayer>(3, 3, rng));
    const Matrix x = random_matrix(4, 3, rng, -1.0, 1.0);
    const std::vector<int> labels = {0, 2, 1, 2};
    LossFn loss = [labels](const Matrix& logits) {
        auto [value, grad] = cross_entropy(logits, labels);
        return LossValue{value, std::move(grad)};
    };
    return grad_check(stack, loss, x, eps);
}

double check_coral(double eps, bool corrupt) {
    Rng rng = make_rng(derive_seed(14, "verify.coral"));
    Matrix f_s = random_matrix(8, 3, rng, -2.0, 2.0);
    Matrix f_t = random_matrix(6, 3, rng, -2.0, 2.0);

    CoralResult analytic = coral_loss(f_s, f_t);
    if (corrupt) {
        // Fixture for harness sanity tests: a plausibly wrong chain rule.
        analytic.grad_source = scale(analytic.grad_source, 2.0);
    }

    double max_rel = 0.0;
    auto check_input = [&](Matrix& f, const Matrix& grad) {
        for (std::size_t r = 0; r < f.rows(); ++r) {
            for (std::size_t c = 0; c < f.cols(); ++c) {
                const double original = f(r, c);
                f(r, c) = original + eps;
                const double up = coral_loss(f_s, f_t).loss;
                f(r, c) = original - eps;
                const double down = coral_loss(f_s, f_t).loss;
                f(r, c) = original;
                max_rel = std::max(max_rel,
                                   rel_error(grad(r, c), (up - down) / (2.0 * eps)));
            }
        }
    };
    check_input(f_s, analytic.grad_source);
    check_input(f_t, analytic.grad_target);
    return max_rel;
}

// The GRL contributes no parameters; its contract is about the input
// gradient. The analytic input gradient through (GRL, affine, loss) must be
// exactly -lambda times the true derivative measured on the input itself.
double check_grl(double eps) {
    Rng rng = make_rng(derive_seed(15, "verify.grl"));
    const double lambda = 0.5;
    LayerStack stack;
    stack.push(std::make_unique<GradientReversalLayer>(lambda));
    stack.push(std::make_unique<AffineLayer>(3, 2, rng));
    Matrix x = random_matrix(4, 3, rng, -1.0, 1.0);
    const Matrix target = random_matrix(4, 2, rng, -1.0, 1.0);
    const LossFn loss = squared_loss(target);

    const LossValue base = loss(stack.forward(x));
    stack.zero_grads();
    const Matrix analytic_grad_x = stack.backward(base.grad);

    double max_rel = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double original = x(r, c);
            x(r, c) = original + eps;
            const double up = loss(stack.forward(x)).value;
            x(r, c) = original - eps;
            const double down = loss(stack.forward(x)).value;
            x(r, c) = original;
            const double numeric = (up - down) / (2.0 * eps);
            max_rel = std::max(max_rel,
                               rel_error(analytic_grad_x(r, c), -lambda * numeric));
        }
    }
    return max_rel;
}

// Smallest |preactivation| feeding a relu anywhere in the stack, to keep the
// finite difference from straddling the kink.
double min_relu_margin(LayerStack& stack, const Matrix& input) {
    double margin = std::numeric_limits<double>::infinity();
    Matrix h = input;
    for (std::size_t i = 0; i < stack.depth(); ++i) {
        Matrix out = stack.layer(i).forward(h);
        const bool feeds_relu =
            i + 1 < stack.depth() &&
            dynamic_cast<ReluLayer*>(&stack.layer(i + 1)) != nullptr;
        if (feeds_relu) {
            for (double v : out.values()) margin = std::min(margin, std::fabs(v));
        }
        h = std::move(out);
    }
    return margin;
}

// Composite objective on a tiny model. The analytic parameter gradients come
// from one forward_da + backward; the numeric side perturbs each parameter
// and re-evaluates the matching scalar: for extractors and the shared head
// that is L_c + sigma * L_dm - gamma * L_adv (the reversed sign the GRL
// realizes), for the discriminator its own unweighted loss.
double check_composite(double eps) {
    TrainConfig config;
    config.gamma = 0.1;
    config.sigma = 0.1;
    config.bottleneck_dim = 3;
    config.extractor_hidden_dims = {4};
    config.discriminator_hidden_dim = 4;
    config.seed = 21;

    const std::vector<int> y_s = {0, 1, 1};
    CaadaModel model = CaadaModel::build(config, 3, 2);
    // The head init is deliberately tiny; scale it up so the discrepancy term
    // has a well-conditioned gradient to certify.
    for (Parameter* p : model.classifier_head().parameters()) {
        p->value = scale(p->value, 200.0);
    }

    // Deterministic search for a batch whose relu preactivations all sit
    // clear of the kink (margin well above eps).
    Matrix x_s, x_t;
    for (std::uint64_t attempt = 0;; ++attempt) {
        if (attempt == 64) throw NumericError("composite check: no kink-free batch");
        Rng rng = make_rng(derive_seed(22 + attempt, "verify.composite"));
        x_s = random_matrix(3, 3, rng, 0.2, 1.4);
        x_t = random_matrix(3, 3, rng, 0.2, 1.4);
        const Matrix h_s = model.source_extractor().forward(x_s);
        const Matrix h_t = model.target_extractor().forward(x_t);
        double margin = std::min(min_relu_margin(model.source_extractor(), x_s),
                                 min_relu_margin(model.target_extractor(), x_t));
        margin = std::min(margin,
                          min_relu_margin(model.discriminator(), vstack(h_s, h_t)));
        if (margin > 1e-3) break;
    }

    StepOutput step = model.forward_da(x_s, y_s, x_t);
    model.backward(step);

    std::vector<Parameter*> feature_side;
    for (Parameter* p : model.source_extractor().parameters()) feature_side.push_back(p);
    for (Parameter* p : model.target_extractor().parameters()) feature_side.push_back(p);
    for (Parameter* p : model.classifier_head().parameters()) feature_side.push_back(p);
    std::vector<Parameter*> disc_side = model.discriminator().parameters();

    std::vector<Matrix> analytic;
    for (Parameter* p : feature_side) analytic.push_back(p->grad);
    for (Parameter* p : disc_side) analytic.push_back(p->grad);

    auto feature_scalar = [&]() {
        const StepOutput s = model.forward_da(x_s, y_s, x_t);
        return s.losses.classification + config.sigma * s.losses.discrepancy -
               config.gamma * s.losses.adversarial;
    };
    auto disc_scalar = [&]() {
        return model.forward_da(x_s, y_s, x_t).losses.adversarial;
    };

    double max_rel = 0.0;
    std::size_t analytic_index = 0;
    auto run_group = [&](const std::vector<Parameter*>& group, auto&& scalar) {
        for (Parameter* p : group) {
            const Matrix& grads = analytic[analytic_index++];
            auto vals = p->value.values();
            for (std::size_t i = 0; i < vals.size(); ++i) {
                const double original = vals[i];
                vals[i] = original + eps;
                const double up = scalar();
                vals[i] = original - eps;
                const double down = scalar();
                vals[i] = original;
                max_rel = std::max(
                    max_rel, rel_error(grads.values()[i], (up - down) / (2.0 * eps)));
            }
        }
    };
    run_group(feature_side, feature_scalar);
    run_group(disc_side, disc_scalar);
    return max_rel;
}

}  // namespace

std::vector<ComponentCheck> run_gradient_suite(const GradCheckOptions& options) {
    if (!(options.eps > 0.0)) throw ConfigError("gradcheck: eps must be > 0");
    if (options.tolerance && !(*options.tolerance > 0.0))
        throw ConfigError("gradcheck: tol must be > 0");

    const double kernel_threshold = options.tolerance.value_or(1e-5);
    const double composite_threshold = options.tolerance.value_or(1e-4);

    std::vector<ComponentCheck> checks;
    auto record = [&](std::string name, double err, double threshold) {
        checks.push_back(ComponentCheck{std::move(name), err, threshold,
                                        err < threshold});
    };
    record("affine", check_affine(options.eps), kernel_threshold);
    record("relu", check_relu(options.eps), kernel_threshold);
    record("cross_entropy", check_cross_entropy(options.eps), kernel_threshold);
    record("coral", check_coral(options.eps, options.corrupt_coral), kernel_threshold);
    record("grl", check_grl(options.eps), kernel_threshold);
    record("composite", check_composite(options.eps), composite_threshold);
    return checks;
}

bool all_passed(const std::vector<ComponentCheck>& checks) {
    return std::all_of(checks.begin(), checks.end(),
                       [](const ComponentCheck& c) { return c.passed; });
}

}  // namespace caada
