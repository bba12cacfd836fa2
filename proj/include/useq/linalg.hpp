#pragma once

// Dense complex linear algebra for small sequence models: Kronecker products,
// column-first vectorization, a cyclic Jacobi eigensolver for Hermitian
// matrices, power iteration for the dominant left eigenpair of a transfer
// operator, Hermitian matrix square roots, and the Choi reshuffle.
//
// All types are plain values; all operations are pure. Matrices are stored
// row-major. Iteration starting vectors come from a fixed-seed generator so
// results are identical across runs and platforms.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "useq/errors.hpp"

namespace useq {

using Complex = std::complex<double>;

// Absolute + relative comparison used throughout: |a-b| <= atol + rtol*max(|a|,|b|).
inline bool close(double a, double b, double atol = 1e-10, double rtol = 1e-9) {
    return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

inline bool close(Complex a, Complex b, double atol = 1e-10, double rtol = 1e-9) {
    return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

class ComplexVector {
public:
    ComplexVector() = default;
    explicit ComplexVector(std::size_t dim) : data_(dim, Complex(0.0, 0.0)) {}
    ComplexVector(std::initializer_list<Complex> init) : data_(init) {}
    explicit ComplexVector(std::vector<Complex> data) : data_(std::move(data)) {}

    std::size_t dim() const { return data_.size(); }

    Complex& operator[](std::size_t i) { return data_[i]; }
    const Complex& operator[](std::size_t i) const { return data_[i]; }

    const std::vector<Complex>& data() const { return data_; }

    double norm2() const {
        double s = 0.0;
        for (const auto& z : data_) s += std::norm(z);
        return std::sqrt(s);
    }

    double norm1() const {
        double s = 0.0;
        for (const auto& z : data_) s += std::abs(z);
        return s;
    }

    Complex sum() const {
        Complex s(0.0, 0.0);
        for (const auto& z : data_) s += z;
        return s;
    }

    ComplexVector conj() const {
        ComplexVector out(*this);
        for (auto& z : out.data_) z = std::conj(z);
        return out;
    }

    bool is_finite() const {
        for (const auto& z : data_)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        return true;
    }

    ComplexVector& operator*=(Complex c) {
        for (auto& z : data_) z *= c;
        return *this;
    }
    ComplexVector& operator/=(Complex c) {
        for (auto& z : data_) z /= c;
        return *this;
    }
    ComplexVector& operator+=(const ComplexVector& o) {
        check_same_dim(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    ComplexVector& operator-=(const ComplexVector& o) {
        check_same_dim(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }

    friend ComplexVector operator*(Complex c, ComplexVector v) { return v *= c; }
    friend ComplexVector operator*(ComplexVector v, Complex c) { return v *= c; }
    friend ComplexVector operator/(ComplexVector v, Complex c) { return v /= c; }
    friend ComplexVector operator+(ComplexVector a, const ComplexVector& b) { return a += b; }
    friend ComplexVector operator-(ComplexVector a, const ComplexVector& b) { return a -= b; }

private:
    void check_same_dim(const ComplexVector& o) const {
        if (o.dim() != dim())
            throw Error(ErrorKind::DimensionMismatch,
                        "vector dims " + std::to_string(dim()) + " vs " + std::to_string(o.dim()));
    }

    std::vector<Complex> data_;
};

// Conjugating inner product: sum_i conj(a_i) * b_i.
inline Complex dot(const ComplexVector& a, const ComplexVector& b) {
    if (a.dim() != b.dim())
        throw Error(ErrorKind::DimensionMismatch,
                    "dot of dims " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    Complex s(0.0, 0.0);
    for (std::size_t i = 0; i < a.dim(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

class ComplexMatrix {
public:
    ComplexMatrix() : rows_(0), cols_(0) {}
    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, Complex(0.0, 0.0)) {}

    // Row-wise construction, mainly for literals in tests and the gallery.
    ComplexMatrix(std::initializer_list<std::initializer_list<Complex>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_)
                throw Error(ErrorKind::DimensionMismatch, "ragged row in matrix literal");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static ComplexMatrix identity(std::size_t n) {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static ComplexMatrix diagonal(const std::vector<Complex>& d) {
        ComplexMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }

    Complex& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const Complex& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<Complex>& data() const { return data_; }

    ComplexMatrix adjoint() const {
        ComplexMatrix out(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) out(j, i) = std::conj((*this)(i, j));
        return out;
    }

    ComplexMatrix transpose() const {
        ComplexMatrix out(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
        return out;
    }

    ComplexMatrix conj() const {
        ComplexMatrix out(rows_, cols_);
        for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = std::conj(data_[i]);
        return out;
    }

    Complex trace() const {
        if (!square()) throw Error(ErrorKind::DimensionMismatch, "trace of non-square matrix");
        Complex s(0.0, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) s += (*this)(i, i);
        return s;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (const auto& z : data_) s += std::norm(z);
        return std::sqrt(s);
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& z : data_) m = std::max(m, std::abs(z));
        return m;
    }

    bool is_finite() const {
        for (const auto& z : data_)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        return true;
    }

    ComplexMatrix& operator+=(const ComplexMatrix& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    ComplexMatrix& operator-=(const ComplexMatrix& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    ComplexMatrix& operator*=(Complex c) {
        for (auto& z : data_) z *= c;
        return *this;
    }
    ComplexMatrix& operator/=(Complex c) {
        for (auto& z : data_) z /= c;
        return *this;
    }

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
    friend ComplexMatrix operator*(Complex c, ComplexMatrix m) { return m *= c; }
    friend ComplexMatrix operator*(ComplexMatrix m, Complex c) { return m *= c; }
    friend ComplexMatrix operator/(ComplexMatrix m, Complex c) { return m /= c; }

    friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
        if (a.cols_ != b.rows_)
            throw Error(ErrorKind::DimensionMismatch,
                        "matmul " + std::to_string(a.rows_) + "x" + std::to_string(a.cols_) +
                            " by " + std::to_string(b.rows_) + "x" + std::to_string(b.cols_));
        ComplexMatrix out(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const Complex aik = a(i, k);
                if (aik == Complex(0.0, 0.0)) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
            }
        return out;
    }

    friend ComplexVector operator*(const ComplexMatrix& m, const ComplexVector& v) {
        if (m.cols_ != v.dim())
            throw Error(ErrorKind::DimensionMismatch,
                        "matvec " + std::to_string(m.rows_) + "x" + std::to_string(m.cols_) +
                            " by vector of dim " + std::to_string(v.dim()));
        ComplexVector out(m.rows_);
        for (std::size_t i = 0; i < m.rows_; ++i) {
            Complex s(0.0, 0.0);
            for (std::size_t j = 0; j < m.cols_; ++j) s += m(i, j) * v[j];
            out[i] = s;
        }
        return out;
    }

private:
    void check_same_shape(const ComplexMatrix& o) const {
        if (o.rows_ != rows_ || o.cols_ != cols_)
            throw Error(ErrorKind::DimensionMismatch, "matrix shape mismatch");
    }

    std::size_t rows_, cols_;
    std::vector<Complex> data_;
};

// m^dagger * v without materializing the adjoint.
inline ComplexVector adjoint_apply(const ComplexMatrix& m, const ComplexVector& v) {
    if (m.rows() != v.dim())
        throw Error(ErrorKind::DimensionMismatch, "adjoint_apply dimension mismatch");
    ComplexVector out(m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const Complex vi = v[i];
        if (vi == Complex(0.0, 0.0)) continue;
        for (std::size_t j = 0; j < m.cols(); ++j) out[j] += std::conj(m(i, j)) * vi;
    }
    return out;
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i1 = 0; i1 < a.rows(); ++i1)
        for (std::size_t j1 = 0; j1 < a.cols(); ++j1) {
            const Complex aij = a(i1, j1);
            if (aij == Complex(0.0, 0.0)) continue;
            for (std::size_t i2 = 0; i2 < b.rows(); ++i2)
                for (std::size_t j2 = 0; j2 < b.cols(); ++j2)
                    out(i1 * b.rows() + i2, j1 * b.cols() + j2) = aij * b(i2, j2);
        }
    return out;
}

inline ComplexVector kron(const ComplexVector& a, const ComplexVector& b) {
    ComplexVector out(a.dim() * b.dim());
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = 0; j < b.dim(); ++j) out[i * b.dim() + j] = a[i] * b[j];
    return out;
}

// Column-first stacking: vectorize(m)[i + rows*j] = m(i, j).
inline ComplexVector vectorize(const ComplexMatrix& m) {
    ComplexVector out(m.rows() * m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j)
        for (std::size_t i = 0; i < m.rows(); ++i) out[i + m.rows() * j] = m(i, j);
    return out;
}

inline ComplexMatrix unvectorize(const ComplexVector& v, std::size_t rows, std::size_t cols) {
    if (v.dim() != rows * cols)
        throw Error(ErrorKind::DimensionMismatch,
                    "unvectorize: dim " + std::to_string(v.dim()) + " != " +
                        std::to_string(rows) + "x" + std::to_string(cols));
    ComplexMatrix out(rows, cols);
    for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t i = 0; i < rows; ++i) out(i, j) = v[i + rows * j];
    return out;
}

inline ComplexVector vec_identity(std::size_t n) {
    ComplexVector out(n * n);
    for (std::size_t i = 0; i < n; ++i) out[i + n * i] = 1.0;
    return out;
}

// Rotate so the largest-magnitude component is real positive; ties broken by
// lowest index. Makes every eigenvector and iterate deterministic.
inline ComplexVector canonical_phase(ComplexVector v) {
    std::size_t best = 0;
    double best_mag = 0.0;
    for (std::size_t i = 0; i < v.dim(); ++i) {
        const double m = std::abs(v[i]);
        if (m > best_mag) {
            best_mag = m;
            best = i;
        }
    }
    if (best_mag == 0.0) return v;
    const Complex phase = v[best] / best_mag;
    v *= std::conj(phase);
    v[best] = Complex(std::abs(v[best]), 0.0);  // scrub residual imaginary noise at the anchor
    return v;
}

namespace detail {

// SplitMix64: the library's named deterministic generator. Also used by the
// oracle's sampler and the gallery; reference outputs for seed 0 are pinned
// in the test suite and README.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 bits.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

inline ComplexVector power_start(std::size_t n, std::uint64_t seed) {
    SplitMix64 rng(seed);
    ComplexVector v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = Complex(rng.next_double() - 0.5, rng.next_double() - 0.5);
    const double nrm = v.norm2();
    if (nrm == 0.0) v[0] = 1.0;  // cannot happen for SplitMix64, but keep total
    return v / Complex(v.norm2(), 0.0);
}

// |lambda_2| of m_adj via Brauer deflation: m_adj - mu * v v^dagger has
// spectrum {0, lambda_2, ...} when m_adj v = mu v with unit v. The magnitude
// is read off the per-step norm growth of the deflated power iterates; the
// geometric mean over a trailing window also handles complex pairs, whose
// step norms oscillate around |lambda_2|.
inline double second_eigenvalue_magnitude(const ComplexMatrix& m_adj, const ComplexVector& v,
                                          Complex mu, std::size_t max_steps) {
    const std::size_t n = v.dim();
    if (n <= 1) return 0.0;

    ComplexVector u = power_start(n, 0x2545f4914f6cdd1dull);
    u -= dot(v, u) * v;
    double nu = u.norm2();
    if (nu < 1e-12) {
        u = power_start(n, 0x9e3779b97f4a7c15ull);
        u -= dot(v, u) * v;
        nu = u.norm2();
        if (nu < 1e-12) return 0.0;
    }
    u /= Complex(nu, 0.0);

    const std::size_t window = 48;
    std::vector<double> log_norms;
    log_norms.reserve(max_steps);
    double prev_est = -1.0;
    for (std::size_t k = 0; k < max_steps; ++k) {
        ComplexVector w = m_adj * u;
        w -= (mu * dot(v, u)) * v;
        w -= dot(v, w) * v;  // re-project: keeps roundoff from reintroducing the dominant direction
        const double nw = w.norm2();
        if (nw < 1e-300) return 0.0;
        log_norms.push_back(std::log(nw));
        u = w / Complex(nw, 0.0);
        if (log_norms.size() >= window && log_norms.size() % window == 0) {
            const double mean = std::accumulate(log_norms.end() - window, log_norms.end(), 0.0) /
                                static_cast<double>(window);
            const double est = std::exp(mean);
            if (prev_est >= 0.0 && std::abs(est - prev_est) <= 1e-6 * std::max(est, prev_est))
                return est;
            prev_est = est;
        }
    }
    const std::size_t w = std::min<std::size_t>(window, log_norms.size());
    if (w == 0) return 0.0;
    const double mean =
        std::accumulate(log_norms.end() - static_cast<std::ptrdiff_t>(w), log_norms.end(), 0.0) /
        static_cast<double>(w);
    return std::exp(mean);
}

}  // namespace detail

// The library's one random generator, exposed for seeding samplers and the
// gallery's random constructors.
using Rng = detail::SplitMix64;

struct FixedPointResult {
    Complex eigenvalue;        // dominant eigenvalue lambda_* of the operator
    ComplexVector fixed_point; // sigma_*, unit 2-norm, phase-canonicalized
    double gap;                // |lambda_2| / |lambda_1| estimate, in [0, 1)
    std::size_t iterations;
};

// Dominant left eigenpair of m: returns (lambda_*, sigma_*) with
// sigma_*^dagger m = lambda_* sigma_*^dagger to residual < tol. Power
// iteration on m^dagger with 2-norm renormalization; degeneracy is declared
// when the estimated |lambda_2|/|lambda_1| exceeds 1 - degeneracy_threshold.
inline FixedPointResult dominant_left_eigenpair(const ComplexMatrix& m, double tol = 1e-12,
                                                std::size_t max_iter = 100000,
                                                double degeneracy_threshold = 1e-8) {
    if (!m.square()) throw Error(ErrorKind::DimensionMismatch, "dominant_left_eigenpair: non-square");
    if (max_iter < 1) throw Error(ErrorKind::DimensionMismatch, "max_iter must be >= 1");
    const std::size_t n = m.rows();
    if (n == 1) {
        ComplexVector sigma(1);
        sigma[0] = 1.0;
        return {m(0, 0), sigma, 0.0, 1};
    }

    const ComplexMatrix m_adj = m.adjoint();
    ComplexVector v = detail::power_start(n, 0x853c49e6748fea9bull);
    Complex mu(0.0, 0.0);
    double residual = std::numeric_limits<double>::infinity();
    std::size_t it = 0;
    for (it = 1; it <= max_iter; ++it) {
        ComplexVector w = m_adj * v;
        mu = dot(v, w);
        residual = (w - mu * v).norm2();
        if (residual < tol) break;
        const double nw = w.norm2();
        if (nw < 1e-300)
            throw Error(ErrorKind::DegenerateSpectrum,
                        "operator annihilates the iterate; spectrum numerically zero");
        v = w / Complex(nw, 0.0);
    }
    if (residual >= tol)
        throw Error(ErrorKind::NonConvergence,
                    "power iteration residual " + std::to_string(residual) + " after " +
                        std::to_string(max_iter) +
                        " iterations (spectral gap absent or too small)");

    const double lam1 = std::abs(mu);
    if (lam1 < 1e-300)
        throw Error(ErrorKind::DegenerateSpectrum, "dominant eigenvalue numerically zero");

    const std::size_t probe_steps = std::min<std::size_t>(std::max<std::size_t>(max_iter, 512), 8192);
    const double lam2 = detail::second_eigenvalue_magnitude(m_adj, v, mu, probe_steps);
    double gap = lam2 / lam1;
    if (gap > 1.0 - degeneracy_threshold)
        throw Error(ErrorKind::DegenerateSpectrum,
                    "two largest eigenvalue magnitudes within threshold: |l2|/|l1| = " +
                        std::to_string(gap));
    gap = std::clamp(gap, 0.0, 1.0 - degeneracy_threshold);

    return {std::conj(mu), canonical_phase(v), gap, it};
}

struct HermitianEigen {
    std::vector<double> eigenvalues;  // ascending
    ComplexMatrix eigenvectors;       // columns, phase-canonicalized
};

// Cyclic Jacobi sweeps on the Hermitized input. Converges when the
// off-diagonal Frobenius norm falls below 1e-13 * ||m||_F.
inline HermitianEigen hermitian_eigen(const ComplexMatrix& m, double herm_tol = 1e-9) {
    if (!m.square()) throw Error(ErrorKind::DimensionMismatch, "hermitian_eigen: non-square");
    const std::size_t n = m.rows();

    double herm_residual = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            herm_residual = std::max(herm_residual, std::abs(m(i, j) - std::conj(m(j, i))));
    if (herm_residual > herm_tol)
        throw Error(ErrorKind::NotHermitian,
                    "max |m - m^dagger| entry = " + std::to_string(herm_residual));

    ComplexMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (m(i, j) + std::conj(m(j, i)));
    ComplexMatrix vmat = ComplexMatrix::identity(n);

    const double scale = std::max(a.frobenius_norm(), 1e-300);
    const double target = 1e-13 * scale;
    const std::size_t max_sweeps = 64;
    bool converged = false;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * std::norm(a(p, q));
        if (std::sqrt(off) < target) {
            converged = true;
            break;
        }

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const Complex apq = a(p, q);
                const double r = std::abs(apq);
                if (r < 1e-300) continue;
                const Complex phase = apq / r;
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                // annihilation condition: r(c^2 - s^2) + (aqq - app) s c = 0,
                // i.e. t^2 - 2 tau t - 1 = 0 for t = s/c; take the small root
                const double tau = (aqq - app) / (2.0 * r);
                const double t = (tau >= 0.0) ? -1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                              : 1.0 / (-tau + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                // Rows: a <- U^dagger a, with U(p,p)=c, U(p,q)=-s*phase, U(q,p)=s*conj(phase), U(q,q)=c.
                for (std::size_t j = 0; j < n; ++j) {
                    const Complex hp = a(p, j), hq = a(q, j);
                    a(p, j) = c * hp + s * phase * hq;
                    a(q, j) = -s * std::conj(phase) * hp + c * hq;
                }
                // Columns: a <- a U, and accumulate V <- V U.
                for (std::size_t i = 0; i < n; ++i) {
                    const Complex hp = a(i, p), hq = a(i, q);
                    a(i, p) = hp * c + hq * s * std::conj(phase);
                    a(i, q) = -hp * s * phase + hq * c;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const Complex hp = vmat(i, p), hq = vmat(i, q);
                    vmat(i, p) = hp * c + hq * s * std::conj(phase);
                    vmat(i, q) = -hp * s * phase + hq * c;
                }
                a(p, q) = Complex(0.0, 0.0);
                a(q, p) = Complex(0.0, 0.0);
            }
        }
    }
    if (!converged)
        throw Error(ErrorKind::NonConvergence, "Jacobi sweeps did not reach the off-diagonal target");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i).real();
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return diag[x] < diag[y]; });

    HermitianEigen out;
    out.eigenvalues.resize(n);
    out.eigenvectors = ComplexMatrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.eigenvalues[k] = diag[order[k]];
        ComplexVector col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = vmat(i, order[k]);
        col = canonical_phase(col);
        for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = col[i];
    }
    return out;
}

namespace detail {

inline ComplexMatrix herm_function(const HermitianEigen& eig,
                                   const std::vector<double>& mapped) {
    const std::size_t n = eig.eigenvalues.size();
    ComplexMatrix out(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        if (mapped[k] == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const Complex vik = eig.eigenvectors(i, k);
            if (vik == Complex(0.0, 0.0)) continue;
            for (std::size_t j = 0; j < n; ++j)
                out(i, j) += mapped[k] * vik * std::conj(eig.eigenvectors(j, k));
        }
    }
    return out;
}

}  // namespace detail

// Hermitian PSD square root. Eigenvalues below -tol are rejected; small
// negative roundoff in [-tol, 0] is clamped to zero.
inline ComplexMatrix herm_sqrt(const ComplexMatrix& p, double tol = 1e-9) {
    const HermitianEigen eig = hermitian_eigen(p, tol);
    std::vector<double> mapped(eig.eigenvalues.size());
    for (std::size_t k = 0; k < eig.eigenvalues.size(); ++k) {
        const double ev = eig.eigenvalues[k];
        if (ev < -tol)
            throw Error(ErrorKind::NotPositiveDefinite,
                        "herm_sqrt: eigenvalue " + std::to_string(ev) + " below -tol");
        mapped[k] = ev > 0.0 ? std::sqrt(ev) : 0.0;
    }
    return detail::herm_function(eig, mapped);
}

inline ComplexMatrix herm_inv_sqrt(const ComplexMatrix& p, double tol = 1e-9) {
    const HermitianEigen eig = hermitian_eigen(p, tol);
    std::vector<double> mapped(eig.eigenvalues.size());
    for (std::size_t k = 0; k < eig.eigenvalues.size(); ++k) {
        const double ev = eig.eigenvalues[k];
        if (ev <= tol)
            throw Error(ErrorKind::NotPositiveDefinite,
                        "herm_inv_sqrt: eigenvalue " + std::to_string(ev) + " not above tol");
        mapped[k] = 1.0 / std::sqrt(ev);
    }
    return detail::herm_function(eig, mapped);
}

// Reshuffle a Liouville operator L = sum_b conj(K_b) (x) K_b into the Choi
// matrix sum_b vec(K_b) vec(K_b)^dagger. Self-inverse.
inline ComplexMatrix choi_reshuffle(const ComplexMatrix& l, std::size_t n) {
    if (l.rows() != n * n || l.cols() != n * n)
        throw Error(ErrorKind::DimensionMismatch,
                    "choi_reshuffle: expected " + std::to_string(n * n) + "x" +
                        std::to_string(n * n));
    ComplexMatrix out(n * n, n * n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < n; ++c)
                for (std::size_t d = 0; d < n; ++d)
                    out(b + n * d, a + n * c) = l(a * n + b, c * n + d);
    return out;
}

inline bool is_psd(const ComplexMatrix& m, double tol = 1e-9) {
    if (!m.square()) throw Error(ErrorKind::DimensionMismatch, "is_psd: non-square");
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i; j < m.cols(); ++j)
            if (std::abs(m(i, j) - std::conj(m(j, i))) > tol) return false;
    const HermitianEigen eig = hermitian_eigen(m, std::max(tol, 1e-9));
    return eig.eigenvalues.empty() || eig.eigenvalues.front() >= -tol;
}

}  // namespace useq
