#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace caada {

// Dense row-major matrix of doubles. Orientation across the codebase is
// (rows = samples, cols = features). Values are guaranteed finite after
// any public operation; producing NaN/Inf raises NumericError instead of
// storing it.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);  // zero-filled
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double operator()(std::size_t r, std::size_t c) const {
        return values_[r * cols_ + c];
    }
    double& operator()(std::size_t r, std::size_t c) {
        return values_[r * cols_ + c];
    }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    std::string shape_str() const;  // e.g. "3x4"

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

// Throws NumericError naming `op` if any element is NaN or Inf.
void ensure_finite(const Matrix& m, const char* op);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Matrix hadamard(const Matrix& a, const Matrix& b);

// Adds the 1 x cols `row` to every row of `a`.
Matrix add_row_broadcast(const Matrix& a, const Matrix& row);

Matrix col_mean(const Matrix& a);  // 1 x cols
Matrix col_sum(const Matrix& a);   // 1 x cols

Matrix vstack(const Matrix& a, const Matrix& b);
Matrix slice_rows(const Matrix& a, std::size_t begin, std::size_t end);
Matrix take_rows(const Matrix& a, std::span<const std::size_t> rows);

// Unbiased feature covariance of an (N x d) sample matrix:
//   C = (F'F - (1'F)'(1'F)/N) / (N - 1)
// Result is exactly symmetric. N < 2 raises DegenerateBatchError.
Matrix covariance(const Matrix& f);

double frobenius_sq(const Matrix& a);

}  // namespace caada
