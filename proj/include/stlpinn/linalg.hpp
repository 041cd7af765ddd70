#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace stlpinn {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    const std::vector<double>& values() const noexcept { return data_; }

    DenseMatrix transpose() const;
    double max_abs() const;
    double norm_inf() const;  // max row sum
    double norm_frobenius() const;
    bool all_finite() const;

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator*(double s, const DenseMatrix& a);
Vector operator*(const DenseMatrix& a, std::span<const double> x);

double norm_inf(std::span<const double> x);

enum class FactorKind { LU, Cholesky };

/// Packed LU (unit lower + upper, partial pivoting) or Cholesky (lower) factors.
struct Factorization {
    FactorKind kind = FactorKind::LU;
    DenseMatrix factors;
    std::vector<std::size_t> perm;  // row i of PA is row perm[i] of A (LU only)

    std::size_t size() const noexcept { return factors.rows(); }

    /// Rebuilds the factored matrix (P^T L U or L L^T).
    DenseMatrix reconstruct() const;
};

/// Throws SingularMatrix, NotSymmetric or NotPositiveDefinite. Never switches kind.
Factorization factorize(const DenseMatrix& m, FactorKind kind = FactorKind::LU);

Vector solve(const Factorization& f, std::span<const double> b);

/// Eigenvalues of a 2x2 matrix, largest magnitude first.
std::array<std::complex<double>, 2> eig2x2(const DenseMatrix& m);

}  // namespace stlpinn
