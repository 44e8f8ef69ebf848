#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "caada/errors.hpp"
#include "caada/matrix.hpp"
#include "caada/rng.hpp"

using namespace caada;

namespace {

// Independent triple-loop product, the oracle for matmul.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    return out;
}

// Centered-definition covariance oracle: subtract each column mean, then
// form centered' * centered / (N - 1).
Matrix covariance_oracle(const Matrix& f) {
    const std::size_t n = f.rows();
    const std::size_t d = f.cols();
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += f(i, j);
    for (double& m : mean) m /= static_cast<double>(n);

    Matrix out(d, d);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                acc += (f(i, a) - mean[a]) * (f(i, b) - mean[b]);
            out(a, b) = acc / static_cast<double>(n - 1);
        }
    return out;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = dist(rng);
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    REQUIRE(a.same_shape(b));
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::fabs(a.values()[i] - b.values()[i]));
    return worst;
}

}  // namespace

TEST_CASE("matmul identity and zero") {
    const Matrix m = Matrix::from_rows({{1, 2}, {3, 4}});
    CHECK(max_abs_diff(matmul(Matrix::identity(2), m), m) == 0.0);

    const Matrix zero(2, 2);
    CHECK(max_abs_diff(matmul(m, zero), zero) == 0.0);
}

TEST_CASE("matmul hand-expanded product matches the triple-loop oracle") {
    const Matrix m = Matrix::from_rows({{1, 2}, {3, 4}});
    const Matrix product = matmul(transpose(m), m);
    const Matrix expected = Matrix::from_rows({{10, 14}, {14, 20}});
    CHECK(max_abs_diff(product, expected) < 1e-12);
    CHECK(max_abs_diff(product, naive_matmul(transpose(m), m)) < 1e-12);
}

TEST_CASE("matmul rejects mismatched shapes naming both") {
    const Matrix a(2, 3);
    const Matrix b(2, 2);
    bool threw = false;
    try {
        matmul(a, b);
    } catch (const DimensionError& e) {
        threw = true;
        const std::string message = e.what();
        CHECK(message.find("2x3") != std::string::npos);
        CHECK(message.find("2x2") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("matmul associativity on random matrices") {
    Rng rng = make_rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = random_matrix(3, 4, rng);
        const Matrix b = random_matrix(4, 2, rng);
        const Matrix c = random_matrix(2, 5, rng);
        const Matrix left = matmul(matmul(a, b), c);
        const Matrix right = matmul(a, matmul(b, c));
        for (std::size_t i = 0; i < left.size(); ++i) {
            const double l = left.values()[i];
            const double r = right.values()[i];
            CHECK(std::fabs(l - r) <=
                  1e-9 * std::max({std::fabs(l), std::fabs(r), 1.0}));
        }
    }
}

TEST_CASE("covariance matches the centered-definition oracle on the fixtures") {
    const Matrix f1 = Matrix::from_rows({{1, 2}, {3, 4}});
    CHECK(max_abs_diff(covariance(f1), Matrix::from_rows({{2, 2}, {2, 2}})) < 1e-12);

    const Matrix identical_rows = Matrix::from_rows({{5, 5}, {5, 5}});
    CHECK(max_abs_diff(covariance(identical_rows), Matrix(2, 2)) == 0.0);

    const Matrix cross = Matrix::from_rows({{1, 0}, {0, 1}, {-1, 0}, {0, -1}});
    const Matrix expected =
        Matrix::from_rows({{2.0 / 3.0, 0.0}, {0.0, 2.0 / 3.0}});
    CHECK(max_abs_diff(covariance(cross), expected) < 1e-12);
}

TEST_CASE("covariance equals the oracle on random inputs") {
    Rng rng = make_rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<std::size_t> nd(2, 12), dd(1, 6);
        const Matrix f = random_matrix(nd(rng), dd(rng), rng);
        CHECK(max_abs_diff(covariance(f), covariance_oracle(f)) < 1e-10);
    }
}

TEST_CASE("covariance is exactly symmetric and row-permutation invariant") {
    Rng rng = make_rng(13);
    const Matrix f = random_matrix(9, 4, rng);
    const Matrix c = covariance(f);
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j)
            CHECK(c(i, j) == c(j, i));

    std::vector<std::size_t> perm(f.rows());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const Matrix permuted = take_rows(f, perm);
    CHECK(max_abs_diff(covariance(permuted), c) < 1e-10);
}

TEST_CASE("covariance rejects degenerate single-row batches") {
    const Matrix one_row = Matrix::from_rows({{1.0, 2.0}});
    CHECK_THROWS_AS(covariance(one_row), DegenerateBatchError);
}

TEST_CASE("frobenius_sq fixtures and nonnegativity") {
    CHECK(frobenius_sq(Matrix::identity(2)) == 2.0);
    CHECK(frobenius_sq(Matrix(3, 3)) == 0.0);
    CHECK(frobenius_sq(Matrix::from_rows({{2, 2}, {2, 2}})) == 16.0);

    Rng rng = make_rng(17);
    const Matrix m = random_matrix(4, 4, rng);
    CHECK(frobenius_sq(m) >= 0.0);
    CHECK((frobenius_sq(m) == 0.0) == std::all_of(m.values().begin(),
                                                  m.values().end(),
                                                  [](double v) { return v == 0.0; }));
}

TEST_CASE("elementwise plumbing") {
    const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    const Matrix b = Matrix::from_rows({{10, 20}, {30, 40}});
    CHECK(max_abs_diff(add(a, b), Matrix::from_rows({{11, 22}, {33, 44}})) == 0.0);
    CHECK(max_abs_diff(sub(b, a), Matrix::from_rows({{9, 18}, {27, 36}})) == 0.0);
    CHECK(max_abs_diff(scale(a, 2.0), Matrix::from_rows({{2, 4}, {6, 8}})) == 0.0);
    CHECK(max_abs_diff(hadamard(a, b), Matrix::from_rows({{10, 40}, {90, 160}})) == 0.0);
    CHECK(max_abs_diff(transpose(a), Matrix::from_rows({{1, 3}, {2, 4}})) == 0.0);
    CHECK(max_abs_diff(add_row_broadcast(a, Matrix::from_rows({{1, -1}})),
                       Matrix::from_rows({{2, 1}, {4, 3}})) == 0.0);
    CHECK(max_abs_diff(col_mean(a), Matrix::from_rows({{2, 3}})) == 0.0);
    CHECK(max_abs_diff(col_sum(a), Matrix::from_rows({{4, 6}})) == 0.0);
    CHECK_THROWS_AS(add(a, Matrix(1, 2)), DimensionError);
    CHECK_THROWS_AS(hadamard(a, Matrix(3, 3)), DimensionError);
    CHECK_THROWS_AS(add_row_broadcast(a, Matrix(1, 3)), DimensionError);
}

TEST_CASE("stacking and slicing") {
    const Matrix a = Matrix::from_rows({{1, 2}});
    const Matrix b = Matrix::from_rows({{3, 4}, {5, 6}});
    const Matrix stacked = vstack(a, b);
    CHECK(stacked.rows() == 3);
    CHECK(max_abs_diff(slice_rows(stacked, 0, 1), a) == 0.0);
    CHECK(max_abs_diff(slice_rows(stacked, 1, 3), b) == 0.0);
    CHECK_THROWS_AS(vstack(a, Matrix(1, 3)), DimensionError);
    CHECK_THROWS_AS(slice_rows(a, 0, 2), DimensionError);
}

TEST_CASE("non-finite values are rejected, never stored") {
    CHECK_THROWS_AS(Matrix(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()}),
                    NumericError);
    const Matrix big(1, 1, {1e308});
    CHECK_THROWS_AS(scale(big, 1e10), NumericError);
    CHECK_THROWS_AS(add(big, big), NumericError);
}
