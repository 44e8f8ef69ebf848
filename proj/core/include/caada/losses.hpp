#pragma once

#include <span>

#include "caada/matrix.hpp"

namespace caada {

// The three loss terms of one training step plus their weighted total:
//   combined = classification + gamma * adversarial + sigma * discrepancy
// All terms are batch-mean losses and therefore nonnegative; the adversarial
// min-max sign is realized structurally by the gradient reversal layer.
struct LossTerms {
    double classification = 0.0;
    double discrepancy = 0.0;
    double adversarial = 0.0;
    double combined = 0.0;
};

struct CrossEntropyResult {
    double loss;
    Matrix grad_logits;  // (softmax - one_hot) / N
};

// Mean softmax cross-entropy over the batch, computed in log-sum-exp form so
// extreme logits cannot overflow.
CrossEntropyResult cross_entropy(const Matrix& logits, std::span<const int> labels);

struct CoralResult {
    double loss;
    Matrix grad_source;
    Matrix grad_target;
};

// Correlation alignment discrepancy between two activation batches:
//   L = ||C_s - C_t||_F^2 / (4 d^2)
// with unbiased covariances C_s, C_t. Gradients follow the chain rule through
// the covariance estimator:
//   dL/dF_s =  centered(F_s) (C_s - C_t) / (d^2 (N_s - 1))
//   dL/dF_t = -centered(F_t) (C_s - C_t) / (d^2 (N_t - 1))
CoralResult coral_loss(const Matrix& f_s, const Matrix& f_t);

// Two-class domain classification loss over raw discriminator logits.
// Domain labels are 0 (first stream) and 1 (second stream).
CrossEntropyResult domain_bce(const Matrix& disc_logits,
                              std::span<const int> domain_labels);

// combined = l_c + gamma * l_adv + sigma * l_dm; negative weights are rejected.
double combine(double l_c, double l_adv, double l_dm, double gamma, double sigma);

}  // namespace caada
