#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace sst {

using Complex = std::complex<double>;

/// Dense row-major complex matrix. Sizes here stay small (qutrit pairs are 9x9).
class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols);

    static ComplexMatrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols}; }
    static ComplexMatrix identity(std::size_t n);
    /// Rank-one projector |v><v|.
    static ComplexMatrix outer(std::span<const Complex> v);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    Complex &operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const Complex &operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const Complex> data() const noexcept { return data_; }
    std::span<Complex> data() noexcept { return data_; }

    ComplexMatrix adjoint() const;
    Complex trace() const;
    double frobenius_norm() const;
    /// Largest |H_ij - conj(H_ji)|.
    double hermiticity_error() const;
    /// (H + H^dagger) / 2
    ComplexMatrix hermitized() const;
    bool all_finite() const;

    ComplexMatrix &operator+=(const ComplexMatrix &other);
    ComplexMatrix &operator-=(const ComplexMatrix &other);
    ComplexMatrix &operator*=(Complex s);

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix &b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix &b) { return a -= b; }
    friend ComplexMatrix operator*(ComplexMatrix a, Complex s) { return a *= s; }
    friend ComplexMatrix operator*(Complex s, ComplexMatrix a) { return a *= s; }
    friend ComplexMatrix operator*(const ComplexMatrix &a, const ComplexMatrix &b);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Complex> data_;
};

/// Dense row-major real matrix, used for design matrices.
class RealMatrix {
public:
    RealMatrix() = default;
    RealMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double &operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::vector<double> multiply(std::span<const double> x) const;
    std::vector<double> multiply_transposed(std::span<const double> y) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

ComplexMatrix multiply(const ComplexMatrix &a, const ComplexMatrix &b);
Complex inner_product(std::span<const Complex> a, std::span<const Complex> b); // <a|b>
ComplexMatrix apply_unitary_conjugation(const ComplexMatrix &u, const ComplexMatrix &m); // U M U^dagger

struct EigenDecomposition {
    std::vector<double> values; ///< ascending
    ComplexMatrix vectors;      ///< column k is the eigenvector for values[k]
};

/// Cyclic complex Jacobi. The input is Hermitized first; throws NumericalError
/// if the off-diagonal mass is still above tolerance after 100 sweeps.
EigenDecomposition hermitian_eig(const ComplexMatrix &h);

/// V diag(values) V^dagger
ComplexMatrix reassemble(const EigenDecomposition &eig);

double min_eigenvalue(const ComplexMatrix &h);

/// Householder QR with column pivoting of an m x n real matrix (m >= n).
class PivotedQr {
public:
    explicit PivotedQr(const RealMatrix &a, double rank_tolerance = 1e-10);

    std::size_t rows() const noexcept { return m_; }
    std::size_t cols() const noexcept { return n_; }
    /// Number of pivots with |R_kk| > tol * |R_00|.
    std::size_t rank() const noexcept { return rank_; }
    const std::vector<std::size_t> &permutation() const noexcept { return perm_; }
    double r(std::size_t i, std::size_t j) const { return qr_(i, j); }

    /// Least-squares minimizer; requires full column rank.
    std::vector<double> solve(std::span<const double> y) const;
    /// 2-norm condition number of A from the singular values of R.
    double condition() const;
    /// A unit vector spanning part of the null space (rank < cols only).
    std::vector<double> null_vector() const;

private:
    std::size_t m_;
    std::size_t n_;
    RealMatrix qr_;
    std::vector<double> tau_;
    std::vector<std::size_t> perm_;
    std::size_t rank_ = 0;
};

struct LsqResult {
    std::vector<double> x;
    std::size_t rank = 0;
    double condition = 0.0;
    double residual_ss = 0.0;
};

/// argmin ||Ax - y||^2. Throws IdentifiabilityError carrying the numerical
/// rank when A is column-rank deficient.
LsqResult lsq_solve(const RealMatrix &a, std::span<const double> y);

/// Tensor product; composite index = ia * dim(B) + ib (arm A major).
ComplexMatrix kron(const ComplexMatrix &a, const ComplexMatrix &b);
/// Trace out the second factor of a (da*db) x (da*db) matrix.
ComplexMatrix partial_trace_b(const ComplexMatrix &c, std::size_t da, std::size_t db);
ComplexMatrix partial_trace_a(const ComplexMatrix &c, std::size_t da, std::size_t db);
inline ComplexMatrix partial_trace_b(const ComplexMatrix &c, std::size_t d) { return partial_trace_b(c, d, d); }

} // namespace sst
