#include "caada/matrix.hpp"

#include <cmath>
#include <stdexcept>

#include "caada/errors.hpp"

namespace caada {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " +
                             a.shape_str() + " vs " + b.shape_str());
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
        throw DimensionError("matrix: " + std::to_string(values_.size()) +
                             " values for shape " + shape_str());
    }
    ensure_finite(*this, "matrix construction");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) {
            throw DimensionError("from_rows: ragged row lengths");
        }
        values.insert(values.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(values));
}

std::string Matrix::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void ensure_finite(const Matrix& m, const char* op) {
    for (double v : m.values()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + ": non-finite value produced");
        }
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions differ, " + a.shape_str() +
                             " x " + b.shape_str());
    }
    Matrix out(a.rows(), b.cols());
    // i-k-j order keeps the inner loop contiguous for row-major storage.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out(i, j) += aik * b(k, j);
            }
        }
    }
    ensure_finite(out, "matmul");
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    auto vb = b.values();
    auto vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] += vb[i];
    ensure_finite(out, "add");
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix out = a;
    auto vb = b.values();
    auto vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] -= vb[i];
    ensure_finite(out, "sub");
    return out;
}

Matrix scale(const Matrix& a, double s) {
    Matrix out = a;
    for (double& v : out.values()) v *= s;
    ensure_finite(out, "scale");
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out = a;
    auto vb = b.values();
    auto vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] *= vb[i];
    ensure_finite(out, "hadamard");
    return out;
}

Matrix add_row_broadcast(const Matrix& a, const Matrix& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw DimensionError("add_row_broadcast: row " + row.shape_str() +
                             " does not broadcast over " + a.shape_str());
    }
    Matrix out = a;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += row(0, j);
    ensure_finite(out, "add_row_broadcast");
    return out;
}

Matrix col_sum(const Matrix& a) {
    Matrix out(1, a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(0, j) += a(i, j);
    ensure_finite(out, "col_sum");
    return out;
}

Matrix col_mean(const Matrix& a) {
    if (a.rows() == 0) throw DimensionError("col_mean: empty matrix");
    return scale(col_sum(a), 1.0 / static_cast<double>(a.rows()));
}

Matrix vstack(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("vstack: column counts differ, " + a.shape_str() +
                             " vs " + b.shape_str());
    }
    Matrix out(a.rows() + b.rows(), a.cols());
    auto vo = out.values();
    auto va = a.values();
    auto vb = b.values();
    std::copy(va.begin(), va.end(), vo.begin());
    std::copy(vb.begin(), vb.end(), vo.begin() + static_cast<std::ptrdiff_t>(va.size()));
    return out;
}

Matrix slice_rows(const Matrix& a, std::size_t begin, std::size_t end) {
    if (begin > end || end > a.rows()) {
        throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," +
                             std::to_string(end) + ") out of " + a.shape_str());
    }
    Matrix out(end - begin, a.cols());
    for (std::size_t i = begin; i < end; ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i - begin, j) = a(i, j);
    return out;
}

Matrix take_rows(const Matrix& a, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), a.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= a.rows()) {
            throw DimensionError("take_rows: index " + std::to_string(rows[i]) +
                                 " out of " + a.shape_str());
        }
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(rows[i], j);
    }
    return out;
}

Matrix covariance(const Matrix& f) {
    const std::size_t n = f.rows();
    const std::size_t d = f.cols();
    if (n < 2) {
        throw DegenerateBatchError("covariance: needs at least 2 samples, got " +
                                   std::to_string(n));
    }
    const Matrix s = col_sum(f);
    Matrix out(d, d);
    // Fill the upper triangle and mirror it, so symmetry is exact.
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            double dot = 0.0;
            for (std::size_t r = 0; r < n; ++r) dot += f(r, i) * f(r, j);
            const double c =
                (dot - s(0, i) * s(0, j) / static_cast<double>(n)) /
                static_cast<double>(n - 1);
            out(i, j) = c;
            out(j, i) = c;
        }
    }
    ensure_finite(out, "covariance");
    return out;
}

double frobenius_sq(const Matrix& a) {
    double total = 0.0;
    for (double v : a.values()) total += v * v;
    return total;
}

}  // namespace caada
