#pragma once

// Controlled extensions: POMDPs, input-output HQMMs, and quantum observable
// MDPs, with action-conditioned evaluation and filtering and the
// QOMDP -> IO-HQMM embedding. Operators apply earliest pair first, matching
// the uncontrolled convention. Policies are open-loop action lists; rewards,
// planning, and goal-reachability are out of scope (perfect goal-state
// reachability is undecidable for these classes).

#include <optional>
#include <vector>

#include "useq/convert.hpp"
#include "useq/errors.hpp"
#include "useq/evaluate.hpp"
#include "useq/linalg.hpp"
#include "useq/models.hpp"

namespace useq {

struct Pomdp {
    std::vector<ComplexMatrix> transitions;  // one n x n column-stochastic matrix per action
    std::vector<ComplexMatrix> emissions;    // one |O| x n column-stochastic matrix per action
    ComplexVector x0;

    Pomdp(std::vector<ComplexMatrix> transitions_, std::vector<ComplexMatrix> emissions_,
          ComplexVector x0_)
        : transitions(std::move(transitions_)), emissions(std::move(emissions_)), x0(std::move(x0_)) {
        detail::require(!transitions.empty(), "Pomdp needs at least one action");
        detail::require(transitions.size() == emissions.size(),
                        "Pomdp per-action matrix counts disagree");
        const std::size_t n = transitions.front().rows();
        const std::size_t obs = emissions.front().rows();
        for (const auto& a : transitions)
            detail::require(a.rows() == n && a.cols() == n, "Pomdp transition shape mismatch");
        for (const auto& c : emissions)
            detail::require(c.rows() == obs && c.cols() == n, "Pomdp emission shape mismatch");
        detail::require(x0.dim() == n, "Pomdp x0 dimension mismatch");
    }

    std::size_t state_dim() const { return transitions.front().rows(); }
    std::size_t action_count() const { return transitions.size(); }
    std::size_t obs_count() const { return emissions.front().rows(); }

    // T^a_y = diag(emission^a row y) * transition^a
    ComplexMatrix observable_operator(std::size_t a, std::size_t y) const {
        const std::size_t n = state_dim();
        ComplexMatrix t(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) t(i, j) = emissions[a](y, i) * transitions[a](i, j);
        return t;
    }

    Hmm action_hmm(std::size_t a) const { return Hmm(transitions[a], emissions[a], x0); }
};

struct IoHqmm {
    std::vector<std::vector<KrausSet>> kraus;  // [action][observation]
    ComplexVector rho0;                        // vectorized density matrix

    IoHqmm(std::vector<std::vector<KrausSet>> kraus_, ComplexVector rho0_)
        : kraus(std::move(kraus_)), rho0(std::move(rho0_)) {
        detail::require(!kraus.empty(), "IoHqmm needs at least one action");
        const std::size_t obs = kraus.front().size();
        detail::require(obs >= 1, "IoHqmm needs at least one observation");
        const std::size_t n = kraus.front().front().rows();
        for (const auto& per_action : kraus) {
            detail::require(per_action.size() == obs, "IoHqmm ragged observation count");
            for (const auto& ks : per_action)
                detail::require(ks.rows() == n && ks.cols() == n, "IoHqmm Kraus shape mismatch");
        }
        detail::require(rho0.dim() == n * n, "IoHqmm rho0 must have dim n^2");
    }

    std::size_t state_dim() const { return kraus.front().front().rows(); }
    std::size_t action_count() const { return kraus.size(); }
    std::size_t obs_count() const { return kraus.front().size(); }

    Hqmm action_hqmm(std::size_t a) const { return Hqmm(kraus[a], rho0); }
};

// Unit-Kraus-rank controlled quantum model; the initial state is kept in
// density-matrix form and the joint is the trace formula.
struct Qomdp {
    std::vector<std::vector<ComplexMatrix>> kraus;  // [action][observation], single operator each
    ComplexMatrix rho0;                             // n x n density matrix

    Qomdp(std::vector<std::vector<ComplexMatrix>> kraus_, ComplexMatrix rho0_)
        : kraus(std::move(kraus_)), rho0(std::move(rho0_)) {
        detail::require(!kraus.empty(), "Qomdp needs at least one action");
        const std::size_t obs = kraus.front().size();
        detail::require(obs >= 1, "Qomdp needs at least one observation");
        const std::size_t n = kraus.front().front().rows();
        for (const auto& per_action : kraus) {
            detail::require(per_action.size() == obs, "Qomdp ragged observation count");
            for (const auto& k : per_action)
                detail::require(k.rows() == n && k.cols() == n, "Qomdp Kraus shape mismatch");
        }
        detail::require(rho0.rows() == n && rho0.cols() == n, "Qomdp rho0 shape mismatch");
    }

    std::size_t state_dim() const { return kraus.front().front().rows(); }
    std::size_t action_count() const { return kraus.size(); }
    std::size_t obs_count() const { return kraus.front().size(); }
};

using ControlledModel = std::variant<Pomdp, IoHqmm, Qomdp>;

struct AoPair {
    std::size_t action;
    std::size_t obs;
};
using AoSequence = std::vector<AoPair>;

namespace detail {

template <typename M>
inline void check_ao(const M& m, const AoSequence& seq) {
    if (seq.empty()) throw Error(ErrorKind::InvalidModel, "empty action-observation sequence");
    for (const auto& [a, y] : seq) {
        if (a >= m.action_count()) throw Error(ErrorKind::InvalidModel, "action index out of range");
        if (y >= m.obs_count()) throw Error(ErrorKind::InvalidModel, "symbol out of range");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Validation

inline ValidationReport validate(const Pomdp& m, double tol = 1e-9) {
    ValidationReport rep;
    for (std::size_t a = 0; a < m.action_count(); ++a) {
        const ValidationReport sub = validate(m.action_hmm(a), tol);
        for (const auto& v : sub.violations)
            rep.violations.push_back({"action " + std::to_string(a) + ": " + v.invariant, v.residual});
    }
    return rep;
}

inline ValidationReport validate(const IoHqmm& m, double tol = 1e-9) {
    ValidationReport rep;
    for (std::size_t a = 0; a < m.action_count(); ++a) {
        const ValidationReport sub = validate(m.action_hqmm(a), tol);
        for (const auto& v : sub.violations)
            rep.violations.push_back({"action " + std::to_string(a) + ": " + v.invariant, v.residual});
    }
    return rep;
}

inline ValidationReport validate(const Qomdp& m, double tol = 1e-9) {
    ValidationReport rep;
    const std::size_t n = m.state_dim();
    for (std::size_t a = 0; a < m.action_count(); ++a) {
        ComplexMatrix total(n, n);
        for (const auto& k : m.kraus[a]) total += k.adjoint() * k;
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                worst = std::max(worst, std::abs(total(i, j) -
                                                 (i == j ? Complex(1.0, 0.0) : Complex(0.0, 0.0))));
        if (worst > tol)
            rep.violations.push_back(
                {"action " + std::to_string(a) + ": channel not trace-preserving", worst});
    }
    double herm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            herm = std::max(herm, std::abs(m.rho0(i, j) - std::conj(m.rho0(j, i))));
    if (herm > tol) rep.violations.push_back({"initial density matrix not Hermitian", herm});
    const double tr = std::abs(m.rho0.trace() - Complex(1.0, 0.0));
    if (tr > tol) rep.violations.push_back({"initial density matrix trace != 1", tr});
    if (herm <= tol && !is_psd(m.rho0, tol))
        rep.violations.push_back({"initial density matrix not PSD", 0.0});
    return rep;
}

inline ValidationReport validate(const ControlledModel& m, double tol = 1e-9) {
    return std::visit([tol](const auto& v) { return validate(v, tol); }, m);
}

// ---------------------------------------------------------------------------
// Joint probabilities under open-loop action choices

inline double controlled_joint(const Pomdp& m, const AoSequence& seq) {
    detail::check_ao(m, seq);
    ComplexVector v = m.x0;
    for (const auto& [a, y] : seq) v = m.observable_operator(a, y) * v;
    return v.sum().real();
}

inline double controlled_joint(const IoHqmm& m, const AoSequence& seq) {
    detail::check_ao(m, seq);
    const std::size_t n = m.state_dim();
    ComplexMatrix rho = unvectorize(m.rho0, n, n);
    for (const auto& [a, y] : seq) rho = detail::kraus_apply(m.kraus[a][y], rho);
    return rho.trace().real();
}

// Density-matrix trace formula: tr(K ... rho ... K^dagger).
inline double controlled_joint(const Qomdp& m, const AoSequence& seq) {
    detail::check_ao(m, seq);
    ComplexMatrix rho = m.rho0;
    for (const auto& [a, y] : seq) {
        const ComplexMatrix& k = m.kraus[a][y];
        rho = k * rho * k.adjoint();
    }
    return rho.trace().real();
}

inline double controlled_joint(const ControlledModel& m, const AoSequence& seq) {
    return std::visit([&seq](const auto& v) { return controlled_joint(v, seq); }, m);
}

// Independent route for the same quantity: explicit vectorized Liouville
// operators conj(K) (x) K applied to vec(rho0), contracted with vec(I).
// Exists so the trace and superoperator forms can be checked against each
// other.
inline double controlled_joint_vectorized(const Qomdp& m, const AoSequence& seq) {
    detail::check_ao(m, seq);
    const std::size_t n = m.state_dim();
    ComplexVector v = vectorize(m.rho0);
    for (const auto& [a, y] : seq) {
        const ComplexMatrix l = kron(m.kraus[a][y].conj(), m.kraus[a][y]);
        v = l * v;
    }
    return dot(vec_identity(n), v).real();
}

// ---------------------------------------------------------------------------
// Filtering: action chosen, then observation conditioned on.

inline FilterState controlled_filter_init(const Pomdp& m) {
    return {ModelKind::Pomdp, m.x0, 0.0, false};
}
inline FilterState controlled_filter_init(const IoHqmm& m) {
    return {ModelKind::IoHqmm, m.rho0, 0.0, false};
}
inline FilterState controlled_filter_init(const Qomdp& m) {
    return {ModelKind::Qomdp, vectorize(m.rho0), 0.0, false};
}

inline FilterState controlled_filter(const Pomdp& m, const FilterState& st, std::size_t a,
                                     std::size_t y) {
    detail::check_ao(m, {{a, y}});
    detail::check_state(st, ModelKind::Pomdp, m.state_dim());
    ComplexVector w = m.observable_operator(a, y) * st.state;
    const Complex norm = w.sum();
    detail::check_normalizer(norm);
    return {ModelKind::Pomdp, w / norm, st.log_prob + std::log(std::abs(norm)),
            st.nonpositive || norm.real() <= 0.0};
}

inline FilterState controlled_filter(const IoHqmm& m, const FilterState& st, std::size_t a,
                                     std::size_t y) {
    detail::check_ao(m, {{a, y}});
    detail::check_state(st, ModelKind::IoHqmm, m.state_dim() * m.state_dim());
    const std::size_t n = m.state_dim();
    const ComplexMatrix rho = detail::kraus_apply(m.kraus[a][y], unvectorize(st.state, n, n));
    const Complex tr = rho.trace();
    detail::check_normalizer(tr);
    return {ModelKind::IoHqmm, vectorize(rho) / tr, st.log_prob + std::log(std::abs(tr)),
            st.nonpositive || tr.real() <= 0.0};
}

// Matrix route, kept independent of the vectorized form.
inline FilterState controlled_filter(const Qomdp& m, const FilterState& st, std::size_t a,
                                     std::size_t y) {
    detail::check_ao(m, {{a, y}});
    detail::check_state(st, ModelKind::Qomdp, m.state_dim() * m.state_dim());
    const std::size_t n = m.state_dim();
    const ComplexMatrix& k = m.kraus[a][y];
    const ComplexMatrix rho = k * unvectorize(st.state, n, n) * k.adjoint();
    const Complex tr = rho.trace();
    detail::check_normalizer(tr);
    return {ModelKind::Qomdp, vectorize(rho) / tr, st.log_prob + std::log(std::abs(tr)),
            st.nonpositive || tr.real() <= 0.0};
}

inline FilterState controlled_filter(const ControlledModel& m, const FilterState& st, std::size_t a,
                                     std::size_t y) {
    return std::visit([&](const auto& v) { return controlled_filter(v, st, a, y); }, m);
}

inline FilterState controlled_filter_init(const ControlledModel& m) {
    return std::visit([](const auto& v) { return controlled_filter_init(v); }, m);
}

// P(y | action, state) for each observation.
inline std::vector<double> controlled_predict(const ControlledModel& m, const FilterState& st,
                                              std::size_t a) {
    return std::visit(
        [&](const auto& v) -> std::vector<double> {
            std::vector<double> out(v.obs_count());
            for (std::size_t y = 0; y < v.obs_count(); ++y) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, Pomdp>) {
                    out[y] = (v.observable_operator(a, y) * st.state).sum().real();
                } else if constexpr (std::is_same_v<T, IoHqmm>) {
                    const std::size_t n = v.state_dim();
                    out[y] =
                        detail::kraus_apply(v.kraus[a][y], unvectorize(st.state, n, n)).trace().real();
                } else {
                    const std::size_t n = v.state_dim();
                    const ComplexMatrix& k = v.kraus[a][y];
                    out[y] = (k * unvectorize(st.state, n, n) * k.adjoint()).trace().real();
                }
            }
            return out;
        },
        m);
}

// ---------------------------------------------------------------------------
// Embeddings

// QOMDP -> IO-HQMM: singleton Kraus sets, vectorized initial state. Joints
// and filtered states are identical.
inline IoHqmm qomdp_to_iohqmm(const Qomdp& q, double tol = 1e-9) {
    detail::require_valid(validate(q, tol), "qomdp_to_iohqmm");
    std::vector<std::vector<KrausSet>> kraus;
    kraus.reserve(q.action_count());
    for (const auto& per_action : q.kraus) {
        std::vector<KrausSet> row;
        row.reserve(per_action.size());
        for (const auto& k : per_action) row.emplace_back(std::vector<ComplexMatrix>{k});
        kraus.push_back(std::move(row));
    }
    return IoHqmm(std::move(kraus), vectorize(q.rho0));
}

// Fixed open-loop action sequence over a POMDP. The induced evaluation is a
// per-step bank of observable operators; when the policy repeats one action
// it collapses to a stationary PSR.
struct PolicyInducedPsr {
    std::vector<std::vector<ComplexMatrix>> banks;  // banks[t][y] = T^{a_t}_y
    ComplexVector x0;
    std::optional<Psr> stationary;  // set when all actions are equal

    double joint(const Sequence& obs_seq) const {
        if (obs_seq.size() != banks.size())
            throw Error(ErrorKind::InvalidModel, "observation sequence length must match the policy");
        ComplexVector v = x0;
        for (std::size_t t = 0; t < obs_seq.size(); ++t) {
            if (obs_seq[t] >= banks[t].size())
                throw Error(ErrorKind::InvalidModel, "symbol out of range");
            v = banks[t][obs_seq[t]] * v;
        }
        return v.sum().real();
    }
};

inline PolicyInducedPsr pomdp_to_psr_per_policy(const Pomdp& p, const std::vector<std::size_t>& actions,
                                                double tol = 1e-9) {
    if (actions.empty()) throw Error(ErrorKind::InvalidModel, "empty action list");
    for (std::size_t a : actions)
        if (a >= p.action_count()) throw Error(ErrorKind::InvalidModel, "action index out of range");
    detail::require_valid(validate(p, tol), "pomdp_to_psr_per_policy");

    PolicyInducedPsr out;
    out.x0 = p.x0;
    out.banks.reserve(actions.size());
    for (std::size_t a : actions) {
        std::vector<ComplexMatrix> bank;
        bank.reserve(p.obs_count());
        for (std::size_t y = 0; y < p.obs_count(); ++y) bank.push_back(p.observable_operator(a, y));
        out.banks.push_back(std::move(bank));
    }
    const bool constant =
        std::all_of(actions.begin(), actions.end(), [&](std::size_t a) { return a == actions[0]; });
    if (constant) out.stationary = hmm_to_psr(p.action_hmm(actions[0]), tol);
    return out;
}

}  // namespace useq
