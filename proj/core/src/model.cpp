#include "caada/model.hpp"

#include <memory>

#include "caada/errors.hpp"
#include "caada/rng.hpp"

namespace caada {

namespace {

void validate_arch(const ArchSpec& arch) {
    if (arch.input_dim == 0) throw ConfigError("model: input_dim must be positive");
    if (arch.num_classes < 2) throw ConfigError("model: need at least 2 classes");
    if (arch.bottleneck_dim == 0)
        throw ConfigError("model: bottleneck_dim must be positive");
    if (arch.discriminator_hidden_dim == 0)
        throw ConfigError("model: discriminator_hidden_dim must be positive");
    for (std::size_t h : arch.extractor_hidden_dims) {
        if (h == 0) throw ConfigError("model: extractor hidden dims must be positive");
    }
    if (arch.gamma < 0.0 || arch.sigma < 0.0)
        throw ConfigError("model: gamma and sigma must be >= 0");
}

LayerStack make_extractor(const ArchSpec& arch, Rng& rng) {
    LayerStack stack;
    std::size_t prev = arch.input_dim;
    for (std::size_t h : arch.extractor_hidden_dims) {
        stack.push(std::make_unique<AffineLayer>(prev, h, rng));
        stack.push(std::make_unique<ReluLayer>());
        prev = h;
    }
    stack.push(std::make_unique<AffineLayer>(prev, arch.bottleneck_dim, rng));
    stack.push(std::make_unique<ReluLayer>());
    return stack;
}

}  // namespace

CaadaModel::CaadaModel(ArchSpec arch, bool initialize, std::uint64_t seed)
    : arch_(std::move(arch)) {
    validate_arch(arch_);

    auto rng_for = [&](const char* tag) {
        return make_rng(initialize ? derive_seed(seed, tag) : 0);
    };

    // Both streams start from the same draw (the stand-in for two streams
    // initialized from one pretrained backbone) and diverge during training;
    // storage stays disjoint.
    {
        Rng rng = rng_for("init.extractor");
        source_extractor_ = make_extractor(arch_, rng);
    }
    {
        Rng rng = rng_for("init.extractor");
        target_extractor_ = make_extractor(arch_, rng);
    }
    {
        Rng rng = rng_for("init.classifier_head");
        classifier_head_.push(std::make_unique<AffineLayer>(
            arch_.bottleneck_dim, arch_.num_classes, rng, WeightInit::Gaussian, 0.005));
    }
    {
        Rng rng = rng_for("init.discriminator");
        auto grl = std::make_unique<GradientReversalLayer>(arch_.gamma);
        grl_ = grl.get();
        discriminator_.push(std::move(grl));
        discriminator_.push(std::make_unique<AffineLayer>(
            arch_.bottleneck_dim, arch_.discriminator_hidden_dim, rng));
        discriminator_.push(std::make_unique<ReluLayer>());
        discriminator_.push(std::make_unique<AffineLayer>(
            arch_.discriminator_hidden_dim, arch_.discriminator_hidden_dim, rng));
        discriminator_.push(std::make_unique<ReluLayer>());
        discriminator_.push(std::make_unique<AffineLayer>(
            arch_.discriminator_hidden_dim, 2, rng));
    }

    if (!initialize) {
        for (Parameter* p : parameters()) {
            for (double& v : p->value.values()) v = 0.0;
        }
    }
}

CaadaModel CaadaModel::build(const TrainConfig& config, std::size_t input_dim,
                             std::size_t num_classes) {
    config.validate();
    ArchSpec arch;
    arch.mode = config.mode;
    arch.input_dim = input_dim;
    arch.num_classes = num_classes;
    arch.bottleneck_dim = config.bottleneck_dim;
    arch.extractor_hidden_dims = config.extractor_hidden_dims;
    arch.discriminator_hidden_dim = config.discriminator_hidden_dim;
    arch.gamma = config.gamma;
    arch.sigma = config.sigma;
    return CaadaModel(std::move(arch), true, config.seed);
}

CaadaModel CaadaModel::with_zero_parameters(const ArchSpec& arch) {
    return CaadaModel(arch, false, 0);
}

StepOutput CaadaModel::forward_impl(const Matrix& x_a, std::span<const int> y_a,
                                    const Matrix& x_b,
                                    const std::span<const int>* y_b) {
    if (x_a.cols() != arch_.input_dim || x_b.cols() != arch_.input_dim) {
        throw DimensionError("forward: inputs " + x_a.shape_str() + " / " +
                             x_b.shape_str() + " do not match input_dim " +
                             std::to_string(arch_.input_dim));
    }
    if (x_a.rows() < 2 || x_b.rows() < 2) {
        throw DegenerateBatchError("forward: both streams need at least 2 rows");
    }

    const std::size_t n_a = x_a.rows();
    const std::size_t n_b = x_b.rows();

    Matrix h_a = source_extractor_.forward(x_a);
    Matrix h_b = target_extractor_.forward(x_b);

    // One forward through the shared head on the stacked activations keeps a
    // single coherent cache for the single backward pass.
    Matrix h_cat = vstack(h_a, h_b);
    Matrix logits_cat = classifier_head_.forward(h_cat);
    Matrix logits_a = slice_rows(logits_cat, 0, n_a);
    Matrix logits_b = slice_rows(logits_cat, n_a, n_a + n_b);

    const CrossEntropyResult ce_a = cross_entropy(logits_a, y_a);
    const CoralResult coral = coral_loss(logits_a, logits_b);

    StepOutput out;
    out.losses.classification = ce_a.loss;
    out.losses.discrepancy = coral.loss;
    out.grad_source_logits = add(ce_a.grad_logits, scale(coral.grad_source, arch_.sigma));
    out.grad_target_logits = scale(coral.grad_target, arch_.sigma);

    if (y_b != nullptr) {
        const CrossEntropyResult ce_b = cross_entropy(logits_b, *y_b);
        out.losses.classification += ce_b.loss;
        out.grad_target_logits = add(out.grad_target_logits, ce_b.grad_logits);
    }

    if (adversarial_enabled_) {
        Matrix disc_logits = discriminator_.forward(h_cat);
        std::vector<int> domain_labels(n_a + n_b, 0);
        for (std::size_t i = n_a; i < n_a + n_b; ++i) domain_labels[i] = 1;
        CrossEntropyResult adv = domain_bce(disc_logits, domain_labels);
        out.losses.adversarial = adv.loss;
        out.grad_disc_logits = std::move(adv.grad_logits);
    }

    out.losses.combined = combine(out.losses.classification, out.losses.adversarial,
                                  out.losses.discrepancy, arch_.gamma, arch_.sigma);
    out.source_logits = std::move(logits_a);
    out.target_logits = std::move(logits_b);
    out.source_bottleneck = std::move(h_a);
    out.target_bottleneck = std::move(h_b);
    out.step_id = ++forward_counter_;
    pending_backward_ = out.step_id;
    return out;
}

StepOutput CaadaModel::forward_da(const Matrix& x_s, std::span<const int> y_s,
                                  const Matrix& x_t) {
    return forward_impl(x_s, y_s, x_t, nullptr);
}

StepOutput CaadaModel::forward_dg(const Matrix& x_a, std::span<const int> y_a,
                                  const Matrix& x_b, std::span<const int> y_b) {
    return forward_impl(x_a, y_a, x_b, &y_b);
}

void CaadaModel::backward(const StepOutput& step) {
    if (step.step_id == 0 || step.step_id != pending_backward_) {
        throw StateError("backward: no matching forward pass for this step");
    }
    pending_backward_ = 0;
    zero_grads();

    const std::size_t n_a = step.grad_source_logits.rows();
    const std::size_t n_b = step.grad_target_logits.rows();

    Matrix grad_logits = vstack(step.grad_source_logits, step.grad_target_logits);
    Matrix grad_h = classifier_head_.backward(grad_logits);

    // The discriminator trains on its own unweighted loss; the gradient
    // reversal layer hands -gamma times that gradient to the extractors.
    // With gamma = 0 the branch contributes nothing and is skipped, which
    // also freezes a discriminator that could not influence anything.
    if (adversarial_enabled_ && arch_.gamma > 0.0) {
        grad_h = add(grad_h, discriminator_.backward(step.grad_disc_logits));
    }

    source_extractor_.backward(slice_rows(grad_h, 0, n_a));
    target_extractor_.backward(slice_rows(grad_h, n_a, n_a + n_b));
}

void CaadaModel::backward_and_step(const StepOutput& step, SgdOptimizer& optimizer) {
    backward(step);
    optimizer.step();
    zero_grads();
}

Stream CaadaModel::eval_stream() const {
    if (arch_.mode == Mode::Dg) return Stream::Source;
    return (arch_.gamma > 0.0 || arch_.sigma > 0.0) ? Stream::Target : Stream::Source;
}

Matrix CaadaModel::eval_bottleneck(const Matrix& x, Stream stream) {
    if (x.cols() != arch_.input_dim) {
        throw DimensionError("eval: input " + x.shape_str() +
                             " does not match input_dim " +
                             std::to_string(arch_.input_dim));
    }
    LayerStack& extractor =
        stream == Stream::Source ? source_extractor_ : target_extractor_;
    return extractor.forward(x);
}

Matrix CaadaModel::eval_logits(const Matrix& x, Stream stream) {
    return classifier_head_.forward(eval_bottleneck(x, stream));
}

std::vector<int> CaadaModel::predict(const Matrix& x) {
    const Matrix logits = eval_logits(x, eval_stream());
    std::vector<int> out(logits.rows(), 0);
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.cols(); ++j) {
            if (logits(i, j) > logits(i, best)) best = j;
        }
        out[i] = static_cast<int>(best);
    }
    return out;
}

std::vector<Parameter*> CaadaModel::parameters() {
    std::vector<Parameter*> all;
    for (LayerStack* stack : {&source_extractor_, &target_extractor_,
                              &classifier_head_, &discriminator_}) {
        for (Parameter* p : stack->parameters()) all.push_back(p);
    }
    return all;
}

std::vector<Parameter*> CaadaModel::trainable_parameters() {
    std::vector<Parameter*> params;
    for (Parameter* p : source_extractor_.parameters()) params.push_back(p);
    const bool target_reachable =
        arch_.mode == Mode::Dg || arch_.gamma > 0.0 || arch_.sigma > 0.0;
    if (target_reachable) {
        for (Parameter* p : target_extractor_.parameters()) params.push_back(p);
    }
    for (Parameter* p : classifier_head_.parameters()) params.push_back(p);
    if (arch_.gamma > 0.0) {
        for (Parameter* p : discriminator_.parameters()) params.push_back(p);
    }
    return params;
}

std::vector<std::pair<std::string, Parameter*>> CaadaModel::named_parameters() {
    std::vector<std::pair<std::string, Parameter*>> named;
    const std::pair<const char*, LayerStack*> stacks[] = {
        {"source_extractor", &source_extractor_},
        {"target_extractor", &target_extractor_},
        {"classifier_head", &classifier_head_},
        {"discriminator", &discriminator_},
    };
    for (const auto& [prefix, stack] : stacks) {
        for (std::size_t i = 0; i < stack->depth(); ++i) {
            for (Parameter* p : stack->layer(i).parameters()) {
                named.emplace_back(std::string(prefix) + ".layer" +
                                       std::to_string(i) + "." + p->name,
                                   p);
            }
        }
    }
    return named;
}

void CaadaModel::zero_grads() {
    for (Parameter* p : parameters()) p->zero_grad();
}

void CaadaModel::set_grl_lambda(double lambda) { grl_->set_lambda(lambda); }

double CaadaModel::grl_lambda() const { return grl_->lambda(); }

}  // namespace caada
