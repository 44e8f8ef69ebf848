#pragma once

#include <cstdint>
#include <vector>

namespace caada {

// Training regime: DA adapts to an unlabeled target domain available during
// training; DG trains on multiple labeled source domains with the target
// entirely unseen.
enum class Mode { Da, Dg };

// Every tunable of a run in one validated record. Defaults are the reference
// values the method was tuned with; desk-scale experiments typically shrink
// the network dimensions and batch size explicitly.
struct TrainConfig {
    double gamma = 0.1;   // adversarial loss weight (gradient reversal strength)
    double sigma = 0.1;   // correlation alignment loss weight
    double learning_rate = 0.001;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::size_t batch_size = 128;
    std::size_t epochs = 30;
    std::size_t bottleneck_dim = 256;
    std::vector<std::size_t> extractor_hidden_dims = {64, 64};
    std::size_t discriminator_hidden_dim = 1024;
    std::uint64_t seed = 0;
    Mode mode = Mode::Da;
    double target_fraction = 1.0;   // stratified share of target data used (DA)
    bool grl_ramp = false;          // linear 0 -> gamma ramp over training
    bool per_step_metrics = false;  // record per step instead of per epoch

    void validate() const;  // throws ConfigError on any invalid field
};

}  // namespace caada
