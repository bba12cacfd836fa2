#pragma once

// Joint scores, recursive filtering, and non-terminating-limit conditional
// probabilities. Products are always evaluated right-to-left as matrix-vector
// (or channel) applications: the earliest observation acts first, and no
// operator product is ever materialized.

#include <cmath>
#include <vector>

#include "useq/errors.hpp"
#include "useq/linalg.hpp"
#include "useq/models.hpp"

namespace useq {

using Sequence = std::vector<std::size_t>;

namespace detail {

inline void check_sequence(const Sequence& seq, std::size_t obs, bool allow_empty = false) {
    if (seq.empty() && !allow_empty) throw Error(ErrorKind::InvalidModel, "empty sequence");
    for (std::size_t y : seq)
        if (y >= obs)
            throw Error(ErrorKind::InvalidModel,
                        "symbol " + std::to_string(y) + " out of range [0, " + std::to_string(obs) + ")");
}

inline ComplexMatrix kraus_apply(const KrausSet& ks, const ComplexMatrix& rho) {
    ComplexMatrix out(ks.rows(), ks.rows());
    for (const auto& k : ks.ops) out += k * rho * k.adjoint();
    return out;
}

}  // namespace detail

// Raw joint score. PSR/uMPS scores are complex in general: the real part is
// returned, and imag_suspect is set when |imag| > 1e-9 * |real| (a large
// imaginary part means the model is not a sensible probability model and
// must be surfaced, not dropped).
struct JointResult {
    double value = 0.0;
    double imag_magnitude = 0.0;
    bool imag_suspect = false;
};

namespace detail {

inline JointResult from_scalar(Complex z) {
    JointResult r;
    r.value = z.real();
    r.imag_magnitude = std::abs(z.imag());
    r.imag_suspect = r.imag_magnitude > 1e-9 * std::abs(r.value);
    return r;
}

inline JointResult from_real(double x) { return JointResult{x, 0.0, false}; }

}  // namespace detail

inline JointResult joint(const Umps& m, const Sequence& seq) {
    detail::check_sequence(seq, m.obs_count());
    ComplexVector v = m.rho0;
    for (std::size_t y : seq) v = m.cores[y] * v;
    return detail::from_scalar(dot(m.sigma, v));
}

inline JointResult joint(const Psr& m, const Sequence& seq) {
    detail::check_sequence(seq, m.obs_count());
    ComplexVector v = m.x0;
    for (std::size_t y : seq) v = m.ops[y] * v;
    return detail::from_scalar(dot(m.sigma, v));
}

inline JointResult joint(const MpsChain& m, const Sequence& seq) {
    detail::check_sequence(seq, m.obs_count());
    if (seq.size() != m.length())
        throw Error(ErrorKind::InvalidModel, "sequence length must equal chain length " +
                                                 std::to_string(m.length()));
    ComplexVector v(1);
    v[0] = 1.0;
    for (std::size_t t = 0; t < seq.size(); ++t) v = m.site_cores[t][seq[t]] * v;
    return detail::from_scalar(v[0]);
}

inline JointResult joint(const Hmm& m, const Sequence& seq) {
    detail::check_sequence(seq, m.obs_count());
    ComplexVector v = m.x0;
    for (std::size_t y : seq) v = m.observable_operator(y) * v;
    return detail::from_scalar(v.sum());
}

inline JointResult joint(const Ubm& m, const Sequence& seq) {
    detail::check_sequence(seq, m.obs_count());
    ComplexVector v = m.omega0;
    for (std::size_t y : seq) v = m.cores[y] * v;
    const Complex amp = dot(m.alpha, v);
    return detail::from_real(std::norm(amp));
}

inline JointResult joint(const Noom& m, const Sequence& seq) {
    detail::check_sequence(seq, m.obs_count());
    ComplexVector v = m.psi0;
    for (std::size_t y : seq) v = m.phis[y] * v;
    const double n = v.norm2();
    return detail::from_real(n * n);
}

inline JointResult joint(const Hqmm& m, const Sequence& seq) {
    detail::check_sequence(seq, m.obs_count());
    const std::size_t n = m.state_dim();
    ComplexMatrix rho = unvectorize(m.rho0, n, n);
    for (std::size_t y : seq) rho = detail::kraus_apply(m.kraus_by_obs[y], rho);
    return detail::from_scalar(rho.trace());
}

inline JointResult joint(const Ulps& m, const Sequence& seq) {
    detail::check_sequence(seq, m.obs_count());
    ComplexMatrix rho = m.right_kraus.gram();
    for (std::size_t y : seq) rho = detail::kraus_apply(m.core_kraus[y], rho);
    return detail::from_scalar((m.left_kraus.gram() * rho).trace());
}

inline JointResult joint(const Model& m, const Sequence& seq) {
    return std::visit([&seq](const auto& v) { return joint(v, seq); }, m);
}

// ---------------------------------------------------------------------------
// Recursive filtering for the model classes with built-in normalization
// (PSR, HMM, NOOM, HQMM). Raw uMPS/uBM/uLPS have no intrinsic state update;
// convert them first or use conditional_nonterminating.

struct FilterState {
    ModelKind kind;
    ComplexVector state;
    double log_prob = 0.0;       // log |P(prefix)| accumulated over steps
    bool nonpositive = false;    // a step normalizer had non-positive real part
};

inline FilterState filter_init(const Psr& m) { return {ModelKind::Psr, m.x0, 0.0, false}; }
inline FilterState filter_init(const Hmm& m) { return {ModelKind::Hmm, m.x0, 0.0, false}; }
inline FilterState filter_init(const Noom& m) { return {ModelKind::Noom, m.psi0, 0.0, false}; }
inline FilterState filter_init(const Hqmm& m) { return {ModelKind::Hqmm, m.rho0, 0.0, false}; }

namespace detail {

inline void check_state(const FilterState& st, ModelKind expected, std::size_t dim) {
    if (st.kind != expected)
        throw Error(ErrorKind::InvalidModel, "filter state belongs to a different model kind");
    if (st.state.dim() != dim)
        throw Error(ErrorKind::DimensionMismatch, "filter state dimension mismatch");
}

inline void check_normalizer(Complex z) {
    if (std::abs(z) < 1e-300)
        throw Error(ErrorKind::ZeroProbabilityPrefix, "prefix has numerically zero probability");
}

}  // namespace detail

inline FilterState filter_step(const Psr& m, const FilterState& st, std::size_t y) {
    detail::check_sequence({y}, m.obs_count());
    detail::check_state(st, ModelKind::Psr, m.dim());
    ComplexVector w = m.ops[y] * st.state;
    const Complex norm = dot(m.sigma, w);
    detail::check_normalizer(norm);
    return {ModelKind::Psr, w / norm, st.log_prob + std::log(std::abs(norm)),
            st.nonpositive || norm.real() <= 0.0};
}

inline FilterState filter_step(const Hmm& m, const FilterState& st, std::size_t y) {
    detail::check_sequence({y}, m.obs_count());
    detail::check_state(st, ModelKind::Hmm, m.state_dim());
    ComplexVector w = m.observable_operator(y) * st.state;
    const Complex norm = w.sum();
    detail::check_normalizer(norm);
    return {ModelKind::Hmm, w / norm, st.log_prob + std::log(std::abs(norm)),
            st.nonpositive || norm.real() <= 0.0};
}

inline FilterState filter_step(const Noom& m, const FilterState& st, std::size_t y) {
    detail::check_sequence({y}, m.obs_count());
    detail::check_state(st, ModelKind::Noom, m.dim());
    ComplexVector w = m.phis[y] * st.state;
    const double nrm = w.norm2();
    detail::check_normalizer(Complex(nrm * nrm, 0.0));
    return {ModelKind::Noom, w / Complex(nrm, 0.0), st.log_prob + 2.0 * std::log(nrm), st.nonpositive};
}

inline FilterState filter_step(const Hqmm& m, const FilterState& st, std::size_t y) {
    detail::check_sequence({y}, m.obs_count());
    detail::check_state(st, ModelKind::Hqmm, m.state_dim_sq());
    const std::size_t n = m.state_dim();
    const ComplexMatrix rho = detail::kraus_apply(m.kraus_by_obs[y], unvectorize(st.state, n, n));
    const Complex tr = rho.trace();
    detail::check_normalizer(tr);
    return {ModelKind::Hqmm, vectorize(rho) / tr, st.log_prob + std::log(std::abs(tr)),
            st.nonpositive || tr.real() <= 0.0};
}

inline std::vector<double> predict(const Psr& m, const FilterState& st) {
    detail::check_state(st, ModelKind::Psr, m.dim());
    std::vector<double> out(m.obs_count());
    for (std::size_t y = 0; y < m.obs_count(); ++y)
        out[y] = dot(m.sigma, m.ops[y] * st.state).real();
    return out;
}

inline std::vector<double> predict(const Hmm& m, const FilterState& st) {
    detail::check_state(st, ModelKind::Hmm, m.state_dim());
    std::vector<double> out(m.obs_count());
    for (std::size_t y = 0; y < m.obs_count(); ++y)
        out[y] = (m.observable_operator(y) * st.state).sum().real();
    return out;
}

inline std::vector<double> predict(const Noom& m, const FilterState& st) {
    detail::check_state(st, ModelKind::Noom, m.dim());
    std::vector<double> out(m.obs_count());
    for (std::size_t y = 0; y < m.obs_count(); ++y) {
        const double n = (m.phis[y] * st.state).norm2();
        out[y] = n * n;
    }
    return out;
}

inline std::vector<double> predict(const Hqmm& m, const FilterState& st) {
    detail::check_state(st, ModelKind::Hqmm, m.state_dim_sq());
    const std::size_t n = m.state_dim();
    const ComplexMatrix rho = unvectorize(st.state, n, n);
    std::vector<double> out(m.obs_count());
    for (std::size_t y = 0; y < m.obs_count(); ++y)
        out[y] = detail::kraus_apply(m.kraus_by_obs[y], rho).trace().real();
    return out;
}

// Variant dispatch; only the normalized model classes are filterable.
inline FilterState filter_init(const Model& m) {
    return std::visit(
        [](const auto& v) -> FilterState {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Psr> || std::is_same_v<T, Hmm> ||
                          std::is_same_v<T, Noom> || std::is_same_v<T, Hqmm>)
                return filter_init(v);
            else
                throw Error(ErrorKind::InvalidModel,
                            "model class has no recursive filter; convert it first");
        },
        m);
}

inline FilterState filter_step(const Model& m, const FilterState& st, std::size_t y) {
    return std::visit(
        [&](const auto& v) -> FilterState {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Psr> || std::is_same_v<T, Hmm> ||
                          std::is_same_v<T, Noom> || std::is_same_v<T, Hqmm>)
                return filter_step(v, st, y);
            else
                throw Error(ErrorKind::InvalidModel,
                            "model class has no recursive filter; convert it first");
        },
        m);
}

inline std::vector<double> predict(const Model& m, const FilterState& st) {
    return std::visit(
        [&](const auto& v) -> std::vector<double> {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Psr> || std::is_same_v<T, Hmm> ||
                          std::is_same_v<T, Noom> || std::is_same_v<T, Hqmm>)
                return predict(v, st);
            else
                throw Error(ErrorKind::InvalidModel,
                            "model class has no recursive filter; convert it first");
        },
        m);
}

// ---------------------------------------------------------------------------
// Non-terminating limit conditionals. The caller supplies the dominant left
// eigenpair of the (lifted) transfer operator once and reuses it across
// queries; substituting the fixed point for the effective evaluation
// functional gives
//   P(next | prefix) = sigma_*^dagger tau_next v / (lambda_* sigma_*^dagger v).

namespace detail {

// Flat/lifted PSR-shaped view of a model: observation operators, right
// boundary state, and left evaluation functional.
struct LinearView {
    std::vector<ComplexMatrix> ops;
    ComplexVector start;
    ComplexVector functional;
};

inline LinearView linear_view(const Umps& m) { return {m.cores, m.rho0, m.sigma}; }

inline LinearView linear_view(const Ubm& m) {
    LinearView lv;
    for (const auto& c : m.cores) lv.ops.push_back(kron(c.conj(), c));
    lv.start = kron(m.omega0.conj(), m.omega0);
    lv.functional = kron(m.alpha.conj(), m.alpha);
    return lv;
}

inline LinearView linear_view(const Ulps& m) {
    LinearView lv;
    for (const auto& ks : m.core_kraus) lv.ops.push_back(ks.liouville());
    lv.start = vectorize(m.right_kraus.gram());
    lv.functional = vectorize(m.left_kraus.gram());
    return lv;
}

inline double conditional_from_view(const LinearView& lv, const Sequence& prefix, std::size_t next,
                                    const FixedPointResult& fp) {
    if (next >= lv.ops.size())
        throw Error(ErrorKind::InvalidModel, "symbol out of range");
    for (std::size_t y : prefix)
        if (y >= lv.ops.size()) throw Error(ErrorKind::InvalidModel, "symbol out of range");
    if (fp.fixed_point.dim() != lv.start.dim())
        throw Error(ErrorKind::DimensionMismatch,
                    "fixed point does not match the (lifted) transfer operator of this model");

    ComplexVector v = lv.start;
    double nv = v.norm2();
    if (nv < 1e-300) throw Error(ErrorKind::ZeroProbabilityPrefix, "zero boundary state");
    v /= Complex(nv, 0.0);
    for (std::size_t y : prefix) {
        v = lv.ops[y] * v;
        nv = v.norm2();
        if (nv < 1e-300)
            throw Error(ErrorKind::ZeroProbabilityPrefix, "prefix has numerically zero probability");
        v /= Complex(nv, 0.0);
    }
    const Complex num = dot(fp.fixed_point, lv.ops[next] * v);
    const Complex den = fp.eigenvalue * dot(fp.fixed_point, v);
    if (std::abs(den) < 1e-300)
        throw Error(ErrorKind::ZeroProbabilityPrefix, "prefix has numerically zero probability");
    return (num / den).real();
}

}  // namespace detail

inline double conditional_nonterminating(const Umps& m, const Sequence& prefix, std::size_t next,
                                         const FixedPointResult& fp) {
    return detail::conditional_from_view(detail::linear_view(m), prefix, next, fp);
}

inline double conditional_nonterminating(const Ubm& m, const Sequence& prefix, std::size_t next,
                                         const FixedPointResult& fp) {
    return detail::conditional_from_view(detail::linear_view(m), prefix, next, fp);
}

inline double conditional_nonterminating(const Ulps& m, const Sequence& prefix, std::size_t next,
                                         const FixedPointResult& fp) {
    return detail::conditional_from_view(detail::linear_view(m), prefix, next, fp);
}

// Trajectory of the effective evaluation functional: (tau^dagger)^steps sigma
// with tau rescaled by 1/lambda_*, renormalized to unit 2-norm each step.
// The result is phase-canonicalized so trajectories are comparable against
// the canonicalized fixed point.
inline ComplexVector effective_functional(const Umps& m, std::size_t steps, double tol = 1e-12,
                                          std::size_t max_iter = 100000) {
    const ComplexMatrix tau = transfer_operator(m);
    const FixedPointResult fp = dominant_left_eigenpair(tau, tol, max_iter);
    ComplexVector w = m.sigma;
    const double n0 = w.norm2();
    if (n0 < 1e-300) throw Error(ErrorKind::InvalidModel, "zero evaluation functional");
    w /= Complex(n0, 0.0);
    for (std::size_t s = 0; s < steps; ++s) {
        w = adjoint_apply(tau, w);
        w /= std::conj(fp.eigenvalue);
        const double nw = w.norm2();
        if (nw < 1e-300)
            throw Error(ErrorKind::ZeroProbabilityPrefix, "functional collapsed to zero");
        w /= Complex(nw, 0.0);
    }
    return canonical_phase(w);
}

}  // namespace useq
