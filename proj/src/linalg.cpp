#include "stlpinn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "stlpinn/error.hpp"

namespace stlpinn {

namespace {

constexpr double kPivotFloor = 1e-14;
constexpr double kSymmetryTol = 1e-10;

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw Error(Errc::DimensionMismatch, "matrix shapes differ");
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw Error(Errc::DimensionMismatch, "data length " + std::to_string(data_.size()) +
                                                 " != " + std::to_string(rows_ * cols_));
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw Error(Errc::DimensionMismatch, "ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

double DenseMatrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

double DenseMatrix::norm_inf() const {
    double m = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
        double s = 0.0;
        for (double v : row(r)) s += std::abs(v);
        m = std::max(m, s);
    }
    return m;
}

double DenseMatrix::norm_frobenius() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
}

bool DenseMatrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw Error(Errc::DimensionMismatch, "matmul inner dimensions");
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b);
    std::vector<double> out(a.values());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.values()[i];
    return DenseMatrix(a.rows(), a.cols(), std::move(out));
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b);
    std::vector<double> out(a.values());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.values()[i];
    return DenseMatrix(a.rows(), a.cols(), std::move(out));
}

DenseMatrix operator*(double s, const DenseMatrix& a) {
    std::vector<double> out(a.values());
    for (double& v : out) v *= s;
    return DenseMatrix(a.rows(), a.cols(), std::move(out));
}

Vector operator*(const DenseMatrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw Error(Errc::DimensionMismatch, "matvec dimensions");
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        y[i] = std::inner_product(r.begin(), r.end(), x.begin(), 0.0);
    }
    return y;
}

double norm_inf(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

DenseMatrix Factorization::reconstruct() const {
    const std::size_t n = size();
    DenseMatrix lower(n, n), upper(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (kind == FactorKind::Cholesky) {
                if (j <= i) lower(i, j) = factors(i, j);
            } else {
                if (j < i) lower(i, j) = factors(i, j);
                else upper(i, j) = factors(i, j);
                if (i == j) lower(i, i) = 1.0;
            }
        }
    if (kind == FactorKind::Cholesky) return lower * lower.transpose();
    const DenseMatrix pa = lower * upper;
    DenseMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(perm[i], j) = pa(i, j);
    return a;
}

Factorization factorize(const DenseMatrix& m, FactorKind kind) {
    if (!m.square()) throw Error(Errc::DimensionMismatch, "factorize needs a square matrix");
    if (!m.all_finite()) throw Error(Errc::SingularMatrix, "matrix has non-finite entries");
    const std::size_t n = m.rows();
    const double scale = m.max_abs();
    Factorization f{kind, m, {}};
    DenseMatrix& a = f.factors;

    if (kind == FactorKind::Cholesky) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (std::abs(m(i, j) - m(j, i)) > kSymmetryTol * scale)
                    throw Error(Errc::NotSymmetric, "entry (" + std::to_string(i) + "," +
                                                        std::to_string(j) + ") asymmetric");
        for (std::size_t j = 0; j < n; ++j) {
            double d = a(j, j);
            for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
            if (!(d > kPivotFloor * scale))
                throw Error(Errc::NotPositiveDefinite,
                            "non-positive pivot at column " + std::to_string(j));
            const double ljj = std::sqrt(d);
            a(j, j) = ljj;
            for (std::size_t i = j + 1; i < n; ++i) {
                double s = a(i, j);
                for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
                a(i, j) = s / ljj;
            }
            for (std::size_t i = 0; i < j; ++i) a(i, j) = 0.0;
        }
        return f;
    }

    f.perm.resize(n);
    std::iota(f.perm.begin(), f.perm.end(), std::size_t{0});
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
        if (std::abs(a(p, k)) < kPivotFloor * scale || scale == 0.0)
            throw Error(Errc::SingularMatrix, "pivot below threshold at column " + std::to_string(k));
        if (p != k) {
            std::swap_ranges(a.row(k).begin(), a.row(k).end(), a.row(p).begin());
            std::swap(f.perm[k], f.perm[p]);
        }
        const double pivot = a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double l = a(i, k) / pivot;
            a(i, k) = l;
            if (l == 0.0) continue;
            double* ri = a.row(i).data();
            const double* rk = a.row(k).data();
            for (std::size_t j = k + 1; j < n; ++j) ri[j] -= l * rk[j];
        }
    }
    return f;
}

Vector solve(const Factorization& f, std::span<const double> b) {
    const std::size_t n = f.size();
    if (b.size() != n) throw Error(Errc::DimensionMismatch, "rhs length mismatch");
    const DenseMatrix& a = f.factors;
    Vector x(n);
    if (f.kind == FactorKind::Cholesky) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = b[i];
            const double* ri = a.row(i).data();
            for (std::size_t k = 0; k < i; ++k) s -= ri[k] * x[k];
            x[i] = s / ri[i];
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x[i];
            for (std::size_t k = i + 1; k < n; ++k) s -= a(k, i) * x[k];
            x[i] = s / a(i, i);
        }
        return x;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[f.perm[i]];
        const double* ri = a.row(i).data();
        for (std::size_t k = 0; k < i; ++k) s -= ri[k] * x[k];
        x[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        const double* ri = a.row(i).data();
        for (std::size_t k = i + 1; k < n; ++k) s -= ri[k] * x[k];
        x[i] = s / ri[i];
    }
    return x;
}

std::array<std::complex<double>, 2> eig2x2(const DenseMatrix& m) {
    if (m.rows() != 2 || m.cols() != 2) throw Error(Errc::DimensionMismatch, "eig2x2 needs 2x2");
    const double tr = m(0, 0) + m(1, 1);
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const double disc = tr * tr / 4.0 - det;
    std::complex<double> l1, l2;
    if (disc >= 0.0) {
        // Avoid cancellation: compute the larger root first, the other from det.
        const double s = std::sqrt(disc);
        const double big = tr / 2.0 + (tr >= 0.0 ? s : -s);
        l1 = big;
        l2 = big != 0.0 ? det / big : tr / 2.0 - (tr >= 0.0 ? s : -s);
    } else {
        const double s = std::sqrt(-disc);
        l1 = {tr / 2.0, s};
        l2 = {tr / 2.0, -s};
    }
    if (std::abs(l2) > std::abs(l1)) std::swap(l1, l2);
    return {l1, l2};
}

}  // namespace stlpinn
