#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "caada/config.hpp"
#include "caada/layers.hpp"
#include "caada/losses.hpp"

namespace caada {

enum class Stream { Source, Target };

// Architecture facts needed to rebuild a model, e.g. from a checkpoint.
struct ArchSpec {
    Mode mode = Mode::Da;
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;
    std::size_t bottleneck_dim = 0;
    std::vector<std::size_t> extractor_hidden_dims;
    std::size_t discriminator_hidden_dim = 0;
    double gamma = 0.0;
    double sigma = 0.0;
};

// Result of one two-stream forward pass. Carries the activations of interest
// plus the loss gradients the matching backward pass consumes; a StepOutput
// is only valid for the forward that produced it.
struct StepOutput {
    LossTerms losses;
    Matrix source_logits;
    Matrix target_logits;
    Matrix source_bottleneck;
    Matrix target_bottleneck;

    std::uint64_t step_id = 0;
    Matrix grad_source_logits;  // d combined / d source logits
    Matrix grad_target_logits;
    Matrix grad_disc_logits;    // unweighted; the GRL applies -gamma
};

// The two-stream network: unshared source/target feature extractors ending in
// a bottleneck layer, one shared classifier head producing class logits, and
// a domain discriminator reading the bottleneck through a gradient reversal
// layer. The discrepancy loss compares the two streams' class logits; the
// adversarial loss separates their bottleneck activations.
class CaadaModel {
public:
    // Fresh model with parameters drawn from seeds derived from config.seed.
    // The classifier head is N(0, 0.005)-initialized; all other affine layers
    // use scaled-uniform fan-based initialization with zero bias.
    static CaadaModel build(const TrainConfig& config, std::size_t input_dim,
                            std::size_t num_classes);

    // Model with the given architecture and all-zero parameters, to be filled
    // by a checkpoint loader.
    static CaadaModel with_zero_parameters(const ArchSpec& arch);

    // Source batch through the source stream (classified against y_s), target
    // batch through the target stream; both streams meet in the shared head
    // and the discriminator. Both batches need at least 2 rows.
    StepOutput forward_da(const Matrix& x_s, std::span<const int> y_s,
                          const Matrix& x_t);

    // Same wiring with two labeled streams: classification loss is the sum of
    // both streams' cross-entropies and the adversarial labels distinguish
    // stream a (0) from stream b (1).
    StepOutput forward_dg(const Matrix& x_a, std::span<const int> y_a,
                          const Matrix& x_b, std::span<const int> y_b);

    // Accumulates the combined-objective gradients into all parameter buffers
    // (cleared first). Raises StateError unless `step` came from the
    // immediately preceding forward on this model.
    void backward(const StepOutput& step);

    // backward + one optimizer step; gradient buffers are cleared afterwards.
    void backward_and_step(const StepOutput& step, SgdOptimizer& optimizer);

    // Argmax class per row through the evaluation stream (ties break to the
    // lowest index). DA evaluates through the target stream when that stream
    // received any training signal (gamma > 0 or sigma > 0), otherwise the
    // plain source-trained path; DG always evaluates the source path.
    std::vector<int> predict(const Matrix& x);

    Stream eval_stream() const;
    Matrix eval_logits(const Matrix& x, Stream stream);
    Matrix eval_bottleneck(const Matrix& x, Stream stream);

    std::vector<Parameter*> parameters();
    // Parameter groups that can receive a training signal under the current
    // weights: the target extractor is excluded when nothing ever reaches it
    // (DA with gamma = sigma = 0) and the discriminator when gamma = 0.
    std::vector<Parameter*> trainable_parameters();
    std::vector<std::pair<std::string, Parameter*>> named_parameters();
    void zero_grads();

    LayerStack& source_extractor() { return source_extractor_; }
    LayerStack& target_extractor() { return target_extractor_; }
    LayerStack& classifier_head() { return classifier_head_; }
    LayerStack& discriminator() { return discriminator_; }

    const ArchSpec& arch() const { return arch_; }
    double gamma() const { return arch_.gamma; }
    double sigma() const { return arch_.sigma; }
    Mode mode() const { return arch_.mode; }

    // Current reversal strength (differs from gamma only while ramping).
    void set_grl_lambda(double lambda);
    double grl_lambda() const;

    // Skips the discriminator branch entirely; used to verify that gamma = 0
    // behaves identically to a detached discriminator.
    void set_adversarial_enabled(bool enabled) { adversarial_enabled_ = enabled; }
    bool adversarial_enabled() const { return adversarial_enabled_; }

private:
    CaadaModel(ArchSpec arch, bool initialize, std::uint64_t seed);

    StepOutput forward_impl(const Matrix& x_a, std::span<const int> y_a,
                            const Matrix& x_b, const std::span<const int>* y_b);

    ArchSpec arch_;
    LayerStack source_extractor_;
    LayerStack target_extractor_;
    LayerStack classifier_head_;
    LayerStack discriminator_;
    GradientReversalLayer* grl_ = nullptr;  // owned by discriminator_
    bool adversarial_enabled_ = true;
    std::uint64_t forward_counter_ = 0;
    std::uint64_t pending_backward_ = 0;  // step_id awaiting its backward
};

}  // namespace caada
