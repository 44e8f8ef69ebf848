#include "caada/config.hpp"

#include "caada/errors.hpp"

namespace caada {

void TrainConfig::validate() const {
    if (gamma < 0.0) throw ConfigError("gamma must be >= 0");
    if (sigma < 0.0) throw ConfigError("sigma must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0)
        throw ConfigError("momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (batch_size < 2)
        throw ConfigError("batch_size must be >= 2 (covariance needs 2 samples)");
    if (epochs == 0) throw ConfigError("epochs must be >= 1");
    if (bottleneck_dim == 0) throw ConfigError("bottleneck_dim must be positive");
    if (discriminator_hidden_dim == 0)
        throw ConfigError("discriminator_hidden_dim must be positive");
    for (std::size_t h : extractor_hidden_dims) {
        if (h == 0) throw ConfigError("extractor_hidden_dims must be positive");
    }
    if (!(target_fraction > 0.0) || target_fraction > 1.0)
        throw ConfigError("target_fraction must be in (0, 1]");
}

}  // namespace caada
