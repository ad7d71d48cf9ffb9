#include "sst/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sst/errors.hpp"

namespace sst {

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, Complex{0.0, 0.0})
{
}

ComplexMatrix ComplexMatrix::identity(std::size_t n)
{
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        m(i, i) = 1.0;
    return m;
}

ComplexMatrix ComplexMatrix::outer(std::span<const Complex> v)
{
    ComplexMatrix m(v.size(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j)
            m(i, j) = v[i] * std::conj(v[j]);
    return m;
}

ComplexMatrix ComplexMatrix::adjoint() const
{
    ComplexMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j)
            t(j, i) = std::conj((*this)(i, j));
    return t;
}

Complex ComplexMatrix::trace() const
{
    Complex t{};
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i)
        t += (*this)(i, i);
    return t;
}

double ComplexMatrix::frobenius_norm() const
{
    double s = 0.0;
    for (const auto &z : data_)
        s += std::norm(z);
    return std::sqrt(s);
}

double ComplexMatrix::hermiticity_error() const
{
    if (!square())
        throw DimensionError("hermiticity_error: matrix is not square");
    double e = 0.0;
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = i; j < cols_; ++j)
            e = std::max(e, std::abs((*this)(i, j) - std::conj((*this)(j, i))));
    return e;
}

ComplexMatrix ComplexMatrix::hermitized() const
{
    if (!square())
        throw DimensionError("hermitized: matrix is not square");
    ComplexMatrix h(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i) {
        h(i, i) = (*this)(i, i).real();
        for (std::size_t j = i + 1; j < cols_; ++j) {
            h(i, j) = 0.5 * ((*this)(i, j) + std::conj((*this)(j, i)));
            h(j, i) = std::conj(h(i, j));
        }
    }
    return h;
}

bool ComplexMatrix::all_finite() const
{
    return std::all_of(data_.begin(), data_.end(), [](const Complex &z) {
        return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
}

ComplexMatrix &ComplexMatrix::operator+=(const ComplexMatrix &other)
{
    if (rows_ != other.rows_ || cols_ != other.cols_)
        throw DimensionError("matrix addition: shape mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k)
        data_[k] += other.data_[k];
    return *this;
}

ComplexMatrix &ComplexMatrix::operator-=(const ComplexMatrix &other)
{
    if (rows_ != other.rows_ || cols_ != other.cols_)
        throw DimensionError("matrix subtraction: shape mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k)
        data_[k] -= other.data_[k];
    return *this;
}

ComplexMatrix &ComplexMatrix::operator*=(Complex s)
{
    for (auto &z : data_)
        z *= s;
    return *this;
}

ComplexMatrix operator*(const ComplexMatrix &a, const ComplexMatrix &b)
{
    return multiply(a, b);
}

ComplexMatrix multiply(const ComplexMatrix &a, const ComplexMatrix &b)
{
    if (a.cols() != b.rows())
        throw DimensionError("matrix product: inner dimensions differ");
    ComplexMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const Complex aik = a(i, k);
            if (aik == Complex{})
                continue;
            for (std::size_t j = 0; j < b.cols(); ++j)
                c(i, j) += aik * b(k, j);
        }
    return c;
}

Complex inner_product(std::span<const Complex> a, std::span<const Complex> b)
{
    if (a.size() != b.size())
        throw DimensionError("inner_product: length mismatch");
    Complex s{};
    for (std::size_t i = 0; i < a.size(); ++i)
        s += std::conj(a[i]) * b[i];
    return s;
}

ComplexMatrix apply_unitary_conjugation(const ComplexMatrix &u, const ComplexMatrix &m)
{
    return multiply(multiply(u, m), u.adjoint());
}

std::vector<double> RealMatrix::multiply(std::span<const double> x) const
{
    if (x.size() != cols_)
        throw DimensionError("RealMatrix::multiply: length mismatch");
    std::vector<double> y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        const auto r = row(i);
        y[i] = std::inner_product(r.begin(), r.end(), x.begin(), 0.0);
    }
    return y;
}

std::vector<double> RealMatrix::multiply_transposed(std::span<const double> y) const
{
    if (y.size() != rows_)
        throw DimensionError("RealMatrix::multiply_transposed: length mismatch");
    std::vector<double> x(cols_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j)
            x[j] += (*this)(i, j) * y[i];
    return x;
}

// ---------------------------------------------------------------------------
// Hermitian eigenproblem

namespace {

double off_diagonal_norm(const ComplexMatrix &a)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j)
                s += std::norm(a(i, j));
    return std::sqrt(s);
}

} // namespace

EigenDecomposition hermitian_eig(const ComplexMatrix &h)
{
    if (!h.square())
        throw DimensionError("hermitian_eig: matrix is not square");
    if (!h.all_finite())
        throw NumericalError("hermitian_eig: non-finite entries");

    const std::size_t n = h.rows();
    ComplexMatrix a = h.hermitized();
    ComplexMatrix v = ComplexMatrix::identity(n);

    const double scale = std::max(a.frobenius_norm(), 1e-300);
    const double tol = 1e-15 * scale;

    int sweep = 0;
    for (; sweep < 100; ++sweep) {
        if (off_diagonal_norm(a) <= tol)
            break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const Complex apq = a(p, q);
                const double g = std::abs(apq);
                if (g <= 1e-300 || g < 1e-18 * scale)
                    continue;

                // Phase step: column q *= e^{-i alpha}, row q *= e^{i alpha}
                // makes a(p,q) real and positive.
                const Complex ph = std::conj(apq) / g;
                for (std::size_t k = 0; k < n; ++k) {
                    a(k, q) *= ph;
                    v(k, q) *= ph;
                }
                for (std::size_t k = 0; k < n; ++k)
                    a(q, k) *= std::conj(ph);

                // Real symmetric Schur rotation on the (p,q) plane.
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double theta = (aqq - app) / (2.0 * g);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const Complex akp = a(k, p);
                    const Complex akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                    const Complex vkp = v(k, p);
                    const Complex vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const Complex apk = a(p, k);
                    const Complex aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
            }
        }
    }
    if (sweep == 100 && off_diagonal_norm(a) > 1e-10 * scale)
        throw NumericalError("hermitian_eig: no convergence after 100 sweeps");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return a(x, x).real() < a(y, y).real(); });

    EigenDecomposition out{std::vector<double>(n), ComplexMatrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]).real();
        for (std::size_t i = 0; i < n; ++i)
            out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

ComplexMatrix reassemble(const EigenDecomposition &eig)
{
    const std::size_t n = eig.values.size();
    ComplexMatrix m(n, n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i) {
            const Complex vik = eig.vectors(i, k) * eig.values[k];
            for (std::size_t j = 0; j < n; ++j)
                m(i, j) += vik * std::conj(eig.vectors(j, k));
        }
    return m;
}

double min_eigenvalue(const ComplexMatrix &h)
{
    return hermitian_eig(h).values.front();
}

// ---------------------------------------------------------------------------
// Least squares

PivotedQr::PivotedQr(const RealMatrix &a, double rank_tolerance)
    : m_(a.rows()), n_(a.cols()), qr_(a), tau_(a.cols(), 0.0), perm_(a.cols())
{
    if (m_ < n_)
        throw DimensionError("PivotedQr: need rows >= cols, got " + std::to_string(m_) + "x" + std::to_string(n_));
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});

    std::vector<double> colnorm(n_, 0.0);
    for (std::size_t j = 0; j < n_; ++j)
        for (std::size_t i = 0; i < m_; ++i)
            colnorm[j] += qr_(i, j) * qr_(i, j);

    for (std::size_t k = 0; k < n_; ++k) {
        // Pivot: remaining column with the largest trailing norm.
        std::size_t best = k;
        for (std::size_t j = k + 1; j < n_; ++j)
            if (colnorm[j] > colnorm[best])
                best = j;
        if (best != k) {
            for (std::size_t i = 0; i < m_; ++i)
                std::swap(qr_(i, k), qr_(i, best));
            std::swap(colnorm[k], colnorm[best]);
            std::swap(perm_[k], perm_[best]);
        }

        double norm = 0.0;
        for (std::size_t i = k; i < m_; ++i)
            norm += qr_(i, k) * qr_(i, k);
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            tau_[k] = 0.0;
            continue;
        }
        const double alpha = qr_(k, k) > 0 ? -norm : norm;
        const double v0 = qr_(k, k) - alpha;
        // Householder vector v = (1, x_{k+1}/v0, ...), H = I - tau v v^T.
        for (std::size_t i = k + 1; i < m_; ++i)
            qr_(i, k) /= v0;
        tau_[k] = -v0 / alpha;
        qr_(k, k) = alpha;

        for (std::size_t j = k + 1; j < n_; ++j) {
            double dot = qr_(k, j);
            for (std::size_t i = k + 1; i < m_; ++i)
                dot += qr_(i, k) * qr_(i, j);
            dot *= tau_[k];
            qr_(k, j) -= dot;
            for (std::size_t i = k + 1; i < m_; ++i)
                qr_(i, j) -= dot * qr_(i, k);
            // Recomputed rather than downdated: downdating loses the small
            // trailing norms that decide the numerical rank.
            colnorm[j] = 0.0;
            for (std::size_t i = k + 1; i < m_; ++i)
                colnorm[j] += qr_(i, j) * qr_(i, j);
        }
    }

    const double r00 = n_ > 0 ? std::abs(qr_(0, 0)) : 0.0;
    rank_ = 0;
    for (std::size_t k = 0; k < n_; ++k) {
        if (r00 > 0.0 && std::abs(qr_(k, k)) > rank_tolerance * r00)
            ++rank_;
        else
            break;
    }
}

std::vector<double> PivotedQr::solve(std::span<const double> y) const
{
    if (y.size() != m_)
        throw DimensionError("PivotedQr::solve: rhs length mismatch");
    if (rank_ < n_)
        throw IdentifiabilityError("least squares: rank " + std::to_string(rank_) + " < " + std::to_string(n_) + " columns",
                                   static_cast<int>(rank_));

    std::vector<double> b(y.begin(), y.end());
    for (std::size_t k = 0; k < n_; ++k) {
        if (tau_[k] == 0.0)
            continue;
        double dot = b[k];
        for (std::size_t i = k + 1; i < m_; ++i)
            dot += qr_(i, k) * b[i];
        dot *= tau_[k];
        b[k] -= dot;
        for (std::size_t i = k + 1; i < m_; ++i)
            b[i] -= dot * qr_(i, k);
    }
    std::vector<double> z(n_, 0.0);
    for (std::size_t k = n_; k-- > 0;) {
        double s = b[k];
        for (std::size_t j = k + 1; j < n_; ++j)
            s -= qr_(k, j) * z[j];
        z[k] = s / qr_(k, k);
    }
    std::vector<double> x(n_, 0.0);
    for (std::size_t k = 0; k < n_; ++k)
        x[perm_[k]] = z[k];
    return x;
}

double PivotedQr::condition() const
{
    if (rank_ < n_)
        return std::numeric_limits<double>::infinity();
    // Singular values of R are those of A; R^T R is small (n x n).
    ComplexMatrix rtr(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k <= std::min(i, j); ++k)
                s += qr_(k, i) * qr_(k, j);
            rtr(i, j) = s;
        }
    const auto eig = hermitian_eig(rtr);
    const double lo = eig.values.front();
    const double hi = eig.values.back();
    if (lo <= 0.0)
        return std::numeric_limits<double>::infinity();
    return std::sqrt(hi / lo);
}

std::vector<double> PivotedQr::null_vector() const
{
    if (rank_ >= n_)
        return {};
    // Solve R11 z = -R12 e_0 for the first trailing pivot column.
    const std::size_t r = rank_;
    std::vector<double> z(n_, 0.0);
    z[r] = 1.0;
    for (std::size_t k = r; k-- > 0;) {
        double s = -qr_(k, r);
        for (std::size_t j = k + 1; j < r; ++j)
            s -= qr_(k, j) * z[j];
        z[k] = s / qr_(k, k);
    }
    double norm = 0.0;
    for (double v : z)
        norm += v * v;
    norm = std::sqrt(norm);
    std::vector<double> x(n_, 0.0);
    for (std::size_t k = 0; k < n_; ++k)
        x[perm_[k]] = z[k] / norm;
    return x;
}

LsqResult lsq_solve(const RealMatrix &a, std::span<const double> y)
{
    PivotedQr qr(a);
    LsqResult out;
    out.rank = qr.rank();
    out.x = qr.solve(y);
    out.condition = qr.condition();
    const auto fit = a.multiply(out.x);
    for (std::size_t i = 0; i < fit.size(); ++i)
        out.residual_ss += (y[i] - fit[i]) * (y[i] - fit[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Tensor products

ComplexMatrix kron(const ComplexMatrix &a, const ComplexMatrix &b)
{
    ComplexMatrix c(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const Complex aij = a(i, j);
            for (std::size_t k = 0; k < b.rows(); ++k)
                for (std::size_t l = 0; l < b.cols(); ++l)
                    c(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
        }
    return c;
}

ComplexMatrix partial_trace_b(const ComplexMatrix &c, std::size_t da, std::size_t db)
{
    if (c.rows() != da * db || c.cols() != da * db)
        throw DimensionError("partial_trace_b: matrix is not (da*db) square");
    ComplexMatrix r(da, da);
    for (std::size_t i = 0; i < da; ++i)
        for (std::size_t j = 0; j < da; ++j)
            for (std::size_t k = 0; k < db; ++k)
                r(i, j) += c(i * db + k, j * db + k);
    return r;
}

ComplexMatrix partial_trace_a(const ComplexMatrix &c, std::size_t da, std::size_t db)
{
    if (c.rows() != da * db || c.cols() != da * db)
        throw DimensionError("partial_trace_a: matrix is not (da*db) square");
    ComplexMatrix r(db, db);
    for (std::size_t k = 0; k < db; ++k)
        for (std::size_t l = 0; l < db; ++l)
            for (std::size_t i = 0; i < da; ++i)
                r(k, l) += c(i * db + k, i * db + l);
    return r;
}

} // namespace sst
