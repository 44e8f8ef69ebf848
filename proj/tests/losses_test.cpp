#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "caada/errors.hpp"
#include "caada/losses.hpp"
#include "caada/matrix.hpp"
#include "caada/rng.hpp"

using namespace caada;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                     double lo = -2.0, double hi = 2.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = dist(rng);
    return m;
}

double rel_error(double a, double n) {
    return std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-8});
}

// Brute-force coral oracle over plain vectors, independent of the Matrix ops.
double coral_oracle(const Matrix& f_s, const Matrix& f_t) {
    const std::size_t d = f_s.cols();
    auto cov = [d](const Matrix& f) {
        const std::size_t n = f.rows();
        std::vector<double> mean(d, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) mean[j] += f(i, j) / double(n);
        std::vector<double> c(d * d, 0.0);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    acc += (f(i, a) - mean[a]) * (f(i, b) - mean[b]);
                c[a * d + b] = acc / double(n - 1);
            }
        return c;
    };
    const auto cs = cov(f_s);
    const auto ct = cov(f_t);
    double sum = 0.0;
    for (std::size_t i = 0; i < cs.size(); ++i)
        sum += (cs[i] - ct[i]) * (cs[i] - ct[i]);
    return sum / (4.0 * double(d) * double(d));
}

}  // namespace

TEST_CASE("cross entropy on a uniform prediction") {
    const Matrix logits = Matrix::from_rows({{0.0, 0.0}});
    const std::vector<int> labels = {0};
    const auto [loss, grad] = cross_entropy(logits, labels);
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(grad(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(grad(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("cross entropy is stable under extreme logits") {
    const Matrix logits = Matrix::from_rows({{1000.0, 0.0}});
    const std::vector<int> labels = {0};
    const auto [loss, grad] = cross_entropy(logits, labels);
    CHECK(std::isfinite(loss));
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::isfinite(grad(0, 0)));
}

TEST_CASE("cross entropy gradient matches finite differences") {
    Rng rng = make_rng(51);
    Matrix logits = random_matrix(4, 3, rng);
    const std::vector<int> labels = {2, 0, 1, 1};
    const auto [loss, grad] = cross_entropy(logits, labels);
    const double eps = 1e-6;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            const double original = logits(i, j);
            logits(i, j) = original + eps;
            const double up = cross_entropy(logits, labels).loss;
            logits(i, j) = original - eps;
            const double down = cross_entropy(logits, labels).loss;
            logits(i, j) = original;
            CHECK(rel_error(grad(i, j), (up - down) / (2 * eps)) < 1e-6);
        }
    }
}

TEST_CASE("cross entropy error cases") {
    const std::vector<int> bad_label = {5};
    CHECK_THROWS_AS(cross_entropy(Matrix::from_rows({{0.0, 0.0}}), bad_label),
                    DataError);
    const std::vector<int> no_labels;
    CHECK_THROWS_AS(cross_entropy(Matrix(0, 2), no_labels), DataError);
    const std::vector<int> wrong_count = {0, 1};
    CHECK_THROWS_AS(cross_entropy(Matrix::from_rows({{0.0, 0.0}}), wrong_count),
                    DimensionError);
}

TEST_CASE("cross entropy is invariant to per-row constant shifts") {
    Rng rng = make_rng(53);
    const Matrix logits = random_matrix(5, 4, rng);
    const std::vector<int> labels = {0, 3, 2, 1, 0};
    Matrix shifted = logits;
    std::uniform_real_distribution<double> shift_dist(-30.0, 30.0);
    for (std::size_t i = 0; i < shifted.rows(); ++i) {
        const double c = shift_dist(rng);
        for (std::size_t j = 0; j < shifted.cols(); ++j) shifted(i, j) += c;
    }
    CHECK(std::fabs(cross_entropy(logits, labels).loss -
                    cross_entropy(shifted, labels).loss) < 1e-10);
}

TEST_CASE("coral loss of identical batches is zero with zero gradients") {
    Rng rng = make_rng(59);
    const Matrix f = random_matrix(5, 3, rng);
    const auto result = coral_loss(f, f);
    CHECK(result.loss == 0.0);
    CHECK(frobenius_sq(result.grad_source) == 0.0);
    CHECK(frobenius_sq(result.grad_target) == 0.0);
}

TEST_CASE("coral loss on the closed-form fixture") {
    const Matrix f_s = Matrix::from_rows({{1, 2}, {3, 4}});
    const Matrix f_t = Matrix::from_rows({{5, 5}, {5, 5}});
    // C_s = [[2,2],[2,2]], C_t = 0, so L = 16 / (4 * 4) = 1.
    CHECK(coral_loss(f_s, f_t).loss == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(coral_loss(f_s, f_t).loss ==
          doctest::Approx(coral_oracle(f_s, f_t)).epsilon(1e-12));
}

TEST_CASE("coral gradients match finite differences on random shapes") {
    Rng rng = make_rng(61);
    Matrix f_s = random_matrix(8, 3, rng);
    Matrix f_t = random_matrix(6, 3, rng);
    const auto analytic = coral_loss(f_s, f_t);
    const double eps = 1e-5;

    auto check = [&](Matrix& f, const Matrix& grad) {
        for (std::size_t i = 0; i < f.rows(); ++i)
            for (std::size_t j = 0; j < f.cols(); ++j) {
                const double original = f(i, j);
                f(i, j) = original + eps;
                const double up = coral_loss(f_s, f_t).loss;
                f(i, j) = original - eps;
                const double down = coral_loss(f_s, f_t).loss;
                f(i, j) = original;
                CHECK(rel_error(grad(i, j), (up - down) / (2 * eps)) < 1e-5);
            }
    };
    check(f_s, analytic.grad_source);
    check(f_t, analytic.grad_target);
}

TEST_CASE("coral loss symmetry, permutation invariance, nonnegativity") {
    Rng rng = make_rng(67);
    const Matrix f_s = random_matrix(7, 4, rng);
    const Matrix f_t = random_matrix(5, 4, rng);

    const double forward_loss = coral_loss(f_s, f_t).loss;
    CHECK(forward_loss >= 0.0);
    CHECK(std::fabs(forward_loss - coral_loss(f_t, f_s).loss) < 1e-12);

    std::vector<std::size_t> perm(f_s.rows());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    CHECK(std::fabs(coral_loss(take_rows(f_s, perm), f_t).loss - forward_loss) <
          1e-10);
}

TEST_CASE("coral loss error cases") {
    CHECK_THROWS_AS(coral_loss(Matrix(3, 2), Matrix(3, 3)), DimensionError);
    CHECK_THROWS_AS(coral_loss(Matrix::from_rows({{1.0, 2.0}}), Matrix(3, 2)),
                    DegenerateBatchError);
    CHECK_THROWS_AS(coral_loss(Matrix(3, 2), Matrix::from_rows({{1.0, 2.0}})),
                    DegenerateBatchError);
}

TEST_CASE("domain bce equals cross entropy over domain labels") {
    const Matrix uniform = Matrix::from_rows({{0.0, 0.0}, {0.0, 0.0}});
    const std::vector<int> labels = {0, 1};
    CHECK(domain_bce(uniform, labels).loss ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    const Matrix confident = Matrix::from_rows({{10.0, -10.0}});
    const std::vector<int> source_label = {0};
    CHECK(domain_bce(confident, source_label).loss < 1e-8);

    Rng rng = make_rng(71);
    const Matrix logits = random_matrix(4, 2, rng);
    const std::vector<int> mixed = {0, 1, 1, 0};
    const auto bce = domain_bce(logits, mixed);
    const auto ce = cross_entropy(logits, mixed);
    CHECK(bce.loss == ce.loss);
    for (std::size_t i = 0; i < bce.grad_logits.size(); ++i)
        CHECK(bce.grad_logits.values()[i] == ce.grad_logits.values()[i]);

    CHECK_THROWS_AS(domain_bce(Matrix(2, 3), mixed), DimensionError);
}

TEST_CASE("combine weights the three terms") {
    CHECK(combine(1.0, 0.5, 0.2, 0.1, 0.1) == doctest::Approx(1.07).epsilon(1e-12));
    CHECK(combine(0.9, 123.0, 456.0, 0.0, 0.0) == 0.9);        // source-only
    CHECK(combine(1.0, 2.0, 999.0, 0.5, 0.0) == 2.0);          // adversarial-only
    CHECK_THROWS_AS(combine(1.0, 1.0, 1.0, -0.1, 0.0), ConfigError);
    CHECK_THROWS_AS(combine(1.0, 1.0, 1.0, 0.0, -0.1), ConfigError);
}
