#include "caada/losses.hpp"

#include <cmath>
#include <string>

#include "caada/errors.hpp"

namespace caada {

CrossEntropyResult cross_entropy(const Matrix& logits,
                                 std::span<const int> labels) {
    const std::size_t n = logits.rows();
    const std::size_t k = logits.cols();
    if (n == 0) throw DataError("cross_entropy: empty batch");
    if (labels.size() != n) {
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(n) + " rows");
    }

    Matrix grad(n, k);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= k) {
            throw DataError("cross_entropy: label " + std::to_string(y) +
                            " out of range [0, " + std::to_string(k) + ")");
        }
        double row_max = logits(i, 0);
        for (std::size_t j = 1; j < k; ++j) row_max = std::max(row_max, logits(i, j));
        double sum_exp = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum_exp += std::exp(logits(i, j) - row_max);
        const double log_sum_exp = row_max + std::log(sum_exp);

        total += log_sum_exp - logits(i, static_cast<std::size_t>(y));
        for (std::size_t j = 0; j < k; ++j) {
            grad(i, j) = std::exp(logits(i, j) - row_max) / sum_exp;
        }
        grad(i, static_cast<std::size_t>(y)) -= 1.0;
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& g : grad.values()) g *= inv_n;
    ensure_finite(grad, "cross_entropy");
    return CrossEntropyResult{total * inv_n, std::move(grad)};
}

namespace {

Matrix centered(const Matrix& f) {
    return add_row_broadcast(f, scale(col_mean(f), -1.0));
}

}  // namespace

CoralResult coral_loss(const Matrix& f_s, const Matrix& f_t) {
    if (f_s.cols() != f_t.cols()) {
        throw DimensionError("coral_loss: feature dims differ, " + f_s.shape_str() +
                             " vs " + f_t.shape_str());
    }
    const std::size_t d = f_s.cols();
    const Matrix c_s = covariance(f_s);  // rejects N < 2
    const Matrix c_t = covariance(f_t);
    const Matrix diff = sub(c_s, c_t);

    const double d2 = static_cast<double>(d) * static_cast<double>(d);
    const double loss = frobenius_sq(diff) / (4.0 * d2);

    const double coef_s = 1.0 / (d2 * static_cast<double>(f_s.rows() - 1));
    const double coef_t = -1.0 / (d2 * static_cast<double>(f_t.rows() - 1));
    Matrix grad_s = scale(matmul(centered(f_s), diff), coef_s);
    Matrix grad_t = scale(matmul(centered(f_t), diff), coef_t);
    return CoralResult{loss, std::move(grad_s), std::move(grad_t)};
}

CrossEntropyResult domain_bce(const Matrix& disc_logits,
                              std::span<const int> domain_labels) {
    if (disc_logits.cols() != 2) {
        throw DimensionError("domain_bce: expected 2 logits per row, got " +
                             disc_logits.shape_str());
    }
    return cross_entropy(disc_logits, domain_labels);
}

double combine(double l_c, double l_adv, double l_dm, double gamma, double sigma) {
    if (gamma < 0.0 || sigma < 0.0) {
        throw ConfigError("combine: loss weights must be >= 0");
    }
    return l_c + gamma * l_adv + sigma * l_dm;
}

}  // namespace caada
