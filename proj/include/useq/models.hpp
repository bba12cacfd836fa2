#pragma once

// Model classes for probabilistic sequence modeling: uniform MPS and Born
// machines, locally purified states, HMMs, predictive state representations,
// norm-observable operator models, and hidden quantum Markov models. Each
// type enforces structural (dimension) consistency at construction; numeric
// invariants are checked by validate(), which reports violations as data.

#include <string>
#include <variant>
#include <vector>

#include "useq/errors.hpp"
#include "useq/linalg.hpp"

namespace useq {

namespace detail {

inline void require(bool cond, const std::string& what) {
    if (!cond) throw Error(ErrorKind::InvalidModel, what);
}

}  // namespace detail

// Uniform MPS: joint score sigma^dagger A^{y_N} ... A^{y_1} rho0. The left
// boundary need not be a fixed point of the transfer operator.
struct Umps {
    ComplexVector sigma;               // left boundary, dim D
    std::vector<ComplexMatrix> cores;  // one D x D core slice per observation
    ComplexVector rho0;                // right boundary, dim D

    Umps(ComplexVector sigma_, std::vector<ComplexMatrix> cores_, ComplexVector rho0_)
        : sigma(std::move(sigma_)), cores(std::move(cores_)), rho0(std::move(rho0_)) {
        detail::require(!cores.empty(), "Umps needs at least one observation core");
        const std::size_t d = sigma.dim();
        for (const auto& c : cores)
            detail::require(c.rows() == d && c.cols() == d, "Umps core dimension mismatch");
        detail::require(rho0.dim() == d, "Umps rho0 dimension mismatch");
    }

    std::size_t obs_count() const { return cores.size(); }
    std::size_t bond_dim() const { return sigma.dim(); }
};

// Non-uniform MPS chain with open boundaries: site_cores[t][y] maps the bond
// space at time t to the one at t+1; the first core has one column, the last
// one row.
struct MpsChain {
    std::vector<std::vector<ComplexMatrix>> site_cores;  // [site][observation]

    explicit MpsChain(std::vector<std::vector<ComplexMatrix>> site_cores_)
        : site_cores(std::move(site_cores_)) {
        detail::require(!site_cores.empty(), "MpsChain needs at least one site");
        const std::size_t obs = site_cores.front().size();
        detail::require(obs >= 1, "MpsChain needs at least one observation");
        std::size_t carry = 1;
        for (std::size_t t = 0; t < site_cores.size(); ++t) {
            detail::require(site_cores[t].size() == obs, "MpsChain ragged observation count");
            const std::size_t rows = site_cores[t].front().rows();
            for (const auto& c : site_cores[t]) {
                detail::require(c.cols() == carry, "MpsChain adjacent core dims do not chain");
                detail::require(c.rows() == rows, "MpsChain cores at one site differ in shape");
            }
            carry = rows;
        }
        detail::require(carry == 1, "MpsChain last core must have one row");
    }

    std::size_t obs_count() const { return site_cores.front().size(); }
    std::size_t length() const { return site_cores.size(); }
};

// Predictive state representation: same shape as Umps, but sigma is required
// (by validation) to be a fixed point of the transfer operator and to
// normalize x0.
struct Psr {
    ComplexVector sigma;
    std::vector<ComplexMatrix> ops;  // observable operators tau_y
    ComplexVector x0;

    Psr(ComplexVector sigma_, std::vector<ComplexMatrix> ops_, ComplexVector x0_)
        : sigma(std::move(sigma_)), ops(std::move(ops_)), x0(std::move(x0_)) {
        detail::require(!ops.empty(), "Psr needs at least one observable operator");
        const std::size_t d = sigma.dim();
        for (const auto& t : ops)
            detail::require(t.rows() == d && t.cols() == d, "Psr operator dimension mismatch");
        detail::require(x0.dim() == d, "Psr x0 dimension mismatch");
    }

    std::size_t obs_count() const { return ops.size(); }
    std::size_t dim() const { return sigma.dim(); }
};

// Hidden Markov model with column-stochastic transition and emission.
// Stored on the complex substrate; validation enforces realness.
struct Hmm {
    ComplexMatrix transition;  // n x n
    ComplexMatrix emission;    // |O| x n
    ComplexVector x0;          // dim n

    Hmm(ComplexMatrix transition_, ComplexMatrix emission_, ComplexVector x0_)
        : transition(std::move(transition_)), emission(std::move(emission_)), x0(std::move(x0_)) {
        detail::require(transition.square(), "Hmm transition must be square");
        detail::require(emission.cols() == transition.rows(), "Hmm emission column mismatch");
        detail::require(emission.rows() >= 1, "Hmm needs at least one observation");
        detail::require(x0.dim() == transition.rows(), "Hmm x0 dimension mismatch");
    }

    std::size_t state_dim() const { return transition.rows(); }
    std::size_t obs_count() const { return emission.rows(); }

    // Observable-operator form: T_y = diag(emission row y) * transition.
    ComplexMatrix observable_operator(std::size_t y) const {
        ComplexMatrix t(state_dim(), state_dim());
        for (std::size_t i = 0; i < state_dim(); ++i)
            for (std::size_t j = 0; j < state_dim(); ++j)
                t(i, j) = emission(y, i) * transition(i, j);
        return t;
    }
};

// Uniform Born machine: joint is |alpha^dagger A^{y_N} ... A^{y_1} omega0|^2.
struct Ubm {
    ComplexVector alpha;
    std::vector<ComplexMatrix> cores;
    ComplexVector omega0;

    Ubm(ComplexVector alpha_, std::vector<ComplexMatrix> cores_, ComplexVector omega0_)
        : alpha(std::move(alpha_)), cores(std::move(cores_)), omega0(std::move(omega0_)) {
        detail::require(!cores.empty(), "Ubm needs at least one observation core");
        const std::size_t d = alpha.dim();
        for (const auto& c : cores)
            detail::require(c.rows() == d && c.cols() == d, "Ubm core dimension mismatch");
        detail::require(omega0.dim() == d, "Ubm omega0 dimension mismatch");
    }

    std::size_t obs_count() const { return cores.size(); }
    std::size_t bond_dim() const { return alpha.dim(); }
};

// Norm-observable operator model: joint is ||phi_{y_N} ... phi_{y_1} psi0||^2
// with sum_y phi_y^dagger phi_y = I and unit-norm psi0.
struct Noom {
    std::vector<ComplexMatrix> phis;
    ComplexVector psi0;

    Noom(std::vector<ComplexMatrix> phis_, ComplexVector psi0_)
        : phis(std::move(phis_)), psi0(std::move(psi0_)) {
        detail::require(!phis.empty(), "Noom needs at least one operator");
        const std::size_t d = psi0.dim();
        for (const auto& p : phis)
            detail::require(p.rows() == d && p.cols() == d, "Noom operator dimension mismatch");
    }

    std::size_t obs_count() const { return phis.size(); }
    std::size_t dim() const { return psi0.dim(); }
};

// A set of Kraus operators sharing one shape. Square for channel cores;
// boundary sets of a uLPS may be rectangular.
struct KrausSet {
    std::vector<ComplexMatrix> ops;

    explicit KrausSet(std::vector<ComplexMatrix> ops_) : ops(std::move(ops_)) {
        detail::require(!ops.empty(), "KrausSet must be nonempty");
        const std::size_t r = ops.front().rows();
        const std::size_t c = ops.front().cols();
        for (const auto& k : ops)
            detail::require(k.rows() == r && k.cols() == c, "KrausSet mixed shapes");
    }

    std::size_t kraus_rank() const { return ops.size(); }
    std::size_t rows() const { return ops.front().rows(); }
    std::size_t cols() const { return ops.front().cols(); }

    // Liouville form: sum_b conj(K_b) (x) K_b.
    ComplexMatrix liouville() const {
        ComplexMatrix l(rows() * rows(), cols() * cols());
        for (const auto& k : ops) l += kron(k.conj(), k);
        return l;
    }

    // Gram form: sum_b K_b K_b^dagger.
    ComplexMatrix gram() const {
        ComplexMatrix g(rows(), rows());
        for (const auto& k : ops) g += k * k.adjoint();
        return g;
    }

    // sum_b K_b^dagger K_b, the trace-preservation witness.
    ComplexMatrix completeness() const {
        ComplexMatrix g(cols(), cols());
        for (const auto& k : ops) g += k.adjoint() * k;
        return g;
    }
};

// Hidden quantum Markov model, stored in Kraus form (complete positivity is
// structural); Liouville and Choi forms are derived views.
struct Hqmm {
    std::vector<KrausSet> kraus_by_obs;  // one set {K_{b,y}} per observation
    ComplexVector rho0;                  // vectorized n x n density matrix

    Hqmm(std::vector<KrausSet> kraus_by_obs_, ComplexVector rho0_)
        : kraus_by_obs(std::move(kraus_by_obs_)), rho0(std::move(rho0_)) {
        detail::require(!kraus_by_obs.empty(), "Hqmm needs at least one observation");
        const std::size_t n = kraus_by_obs.front().rows();
        for (const auto& ks : kraus_by_obs)
            detail::require(ks.rows() == n && ks.cols() == n, "Hqmm Kraus dimension mismatch");
        detail::require(rho0.dim() == n * n, "Hqmm rho0 must have dim n^2");
    }

    std::size_t obs_count() const { return kraus_by_obs.size(); }
    std::size_t state_dim() const { return kraus_by_obs.front().rows(); }
    std::size_t state_dim_sq() const { return state_dim() * state_dim(); }

    ComplexMatrix liouville(std::size_t y) const { return kraus_by_obs[y].liouville(); }
};

// Uniform locally purified state. Boundary Kraus sets define PSD Gram
// matrices P_L = sum K K^dagger (left functional) and P_R (right state); the
// joint is tr(P_L * channel_{y_N} ... channel_{y_1}(P_R)).
struct Ulps {
    KrausSet left_kraus;
    std::vector<KrausSet> core_kraus;  // one set per observation, square D x D
    KrausSet right_kraus;

    Ulps(KrausSet left_kraus_, std::vector<KrausSet> core_kraus_, KrausSet right_kraus_)
        : left_kraus(std::move(left_kraus_)),
          core_kraus(std::move(core_kraus_)),
          right_kraus(std::move(right_kraus_)) {
        detail::require(!core_kraus.empty(), "Ulps needs at least one observation");
        const std::size_t d = core_kraus.front().rows();
        for (const auto& ks : core_kraus)
            detail::require(ks.rows() == d && ks.cols() == d, "Ulps core Kraus must be D x D");
        detail::require(left_kraus.rows() == d, "Ulps left boundary row mismatch");
        detail::require(right_kraus.rows() == d, "Ulps right boundary row mismatch");
    }

    std::size_t obs_count() const { return core_kraus.size(); }
    std::size_t bond_dim() const { return core_kraus.front().rows(); }
};

using Model = std::variant<Umps, MpsChain, Psr, Hmm, Ubm, Noom, Hqmm, Ulps>;

enum class ModelKind { Umps, MpsChain, Psr, Hmm, Ubm, Noom, Hqmm, Ulps, Pomdp, IoHqmm, Qomdp };

inline const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Umps:     return "umps";
        case ModelKind::MpsChain: return "mps_chain";
        case ModelKind::Psr:      return "psr";
        case ModelKind::Hmm:      return "hmm";
        case ModelKind::Ubm:      return "ubm";
        case ModelKind::Noom:     return "noom";
        case ModelKind::Hqmm:     return "hqmm";
        case ModelKind::Ulps:     return "ulps";
        case ModelKind::Pomdp:    return "pomdp";
        case ModelKind::IoHqmm:   return "io_hqmm";
        case ModelKind::Qomdp:    return "qomdp";
    }
    return "unknown";
}

inline ModelKind kind_of(const Model& m) {
    return std::visit(
        [](const auto& v) -> ModelKind {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Umps>) return ModelKind::Umps;
            else if constexpr (std::is_same_v<T, MpsChain>) return ModelKind::MpsChain;
            else if constexpr (std::is_same_v<T, Psr>) return ModelKind::Psr;
            else if constexpr (std::is_same_v<T, Hmm>) return ModelKind::Hmm;
            else if constexpr (std::is_same_v<T, Ubm>) return ModelKind::Ubm;
            else if constexpr (std::is_same_v<T, Noom>) return ModelKind::Noom;
            else if constexpr (std::is_same_v<T, Hqmm>) return ModelKind::Hqmm;
            else return ModelKind::Ulps;
        },
        m);
}

inline std::size_t obs_count(const Model& m) {
    return std::visit([](const auto& v) { return v.obs_count(); }, m);
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
    std::string invariant;
    double residual;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool valid() const { return violations.empty(); }

    std::string to_string() const {
        if (violations.empty()) return "valid";
        std::string s;
        for (const auto& v : violations) {
            if (!s.empty()) s += "; ";
            s += v.invariant + " (residual " + std::to_string(v.residual) + ")";
        }
        return s;
    }
};

namespace detail {

inline void check_finite(ValidationReport& rep, bool finite, const char* what) {
    if (!finite) rep.violations.push_back({std::string(what) + " has non-finite entries", 0.0});
}

inline double max_imag(const ComplexMatrix& m) {
    double v = 0.0;
    for (const auto& z : m.data()) v = std::max(v, std::abs(z.imag()));
    return v;
}

inline double max_imag(const ComplexVector& v) {
    double out = 0.0;
    for (std::size_t i = 0; i < v.dim(); ++i) out = std::max(out, std::abs(v[i].imag()));
    return out;
}

inline double min_real(const ComplexMatrix& m) {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& z : m.data()) v = std::min(v, z.real());
    return v;
}

inline double column_sum_residual(const ComplexMatrix& m) {
    double worst = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        Complex s(0.0, 0.0);
        for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, j);
        worst = std::max(worst, std::abs(s - Complex(1.0, 0.0)));
    }
    return worst;
}

inline double identity_residual(const ComplexMatrix& m) {
    double worst = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            worst = std::max(worst, std::abs(m(i, j) - (i == j ? Complex(1.0, 0.0) : Complex(0.0, 0.0))));
    return worst;
}

}  // namespace detail

inline ValidationReport validate(const Umps& m, double tol = 1e-9) {
    (void)tol;
    ValidationReport rep;
    detail::check_finite(rep, m.sigma.is_finite() && m.rho0.is_finite(), "boundary");
    for (const auto& c : m.cores) detail::check_finite(rep, c.is_finite(), "core");
    return rep;
}

inline ValidationReport validate(const MpsChain& m, double tol = 1e-9) {
    (void)tol;
    ValidationReport rep;
    for (const auto& site : m.site_cores)
        for (const auto& c : site) detail::check_finite(rep, c.is_finite(), "core");
    return rep;
}

inline ValidationReport validate(const Psr& m, double tol = 1e-9) {
    ValidationReport rep;
    detail::check_finite(rep, m.sigma.is_finite() && m.x0.is_finite(), "boundary");
    for (const auto& t : m.ops) detail::check_finite(rep, t.is_finite(), "operator");
    if (!rep.valid()) return rep;

    const Complex overlap = dot(m.sigma, m.x0);
    if (std::abs(overlap - Complex(1.0, 0.0)) > tol)
        rep.violations.push_back(
            {"initial state not normalized: sigma^dagger x0 != 1", std::abs(overlap - Complex(1.0, 0.0))});

    ComplexMatrix transfer(m.dim(), m.dim());
    for (const auto& t : m.ops) transfer += t;
    const ComplexVector lhs = adjoint_apply(transfer, m.sigma);
    double worst = 0.0;
    for (std::size_t i = 0; i < m.dim(); ++i) worst = std::max(worst, std::abs(lhs[i] - m.sigma[i]));
    if (worst > tol)
        rep.violations.push_back({"sigma is not a fixed point of the transfer operator", worst});
    return rep;
}

inline ValidationReport validate(const Hmm& m, double tol = 1e-9) {
    ValidationReport rep;
    detail::check_finite(rep, m.transition.is_finite() && m.emission.is_finite() && m.x0.is_finite(),
                         "parameters");
    if (!rep.valid()) return rep;

    const double imag = std::max({detail::max_imag(m.transition), detail::max_imag(m.emission),
                                  detail::max_imag(m.x0)});
    if (imag > tol) rep.violations.push_back({"parameters must be real", imag});

    const double min_entry = std::min(detail::min_real(m.transition), detail::min_real(m.emission));
    if (min_entry < -tol) rep.violations.push_back({"negative entries", -min_entry});
    double min_x0 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m.x0.dim(); ++i) min_x0 = std::min(min_x0, m.x0[i].real());
    if (min_x0 < -tol) rep.violations.push_back({"negative initial-state entries", -min_x0});

    const double at = detail::column_sum_residual(m.transition);
    if (at > tol) rep.violations.push_back({"transition not column-stochastic", at});
    const double ct = detail::column_sum_residual(m.emission);
    if (ct > tol) rep.violations.push_back({"emission not column-stochastic", ct});

    const double x0_norm = std::abs(m.x0.sum() - Complex(1.0, 0.0));
    if (x0_norm > tol) rep.violations.push_back({"initial state not normalized in l1", x0_norm});
    return rep;
}

inline ValidationReport validate(const Ubm& m, double tol = 1e-9) {
    (void)tol;
    ValidationReport rep;
    detail::check_finite(rep, m.alpha.is_finite() && m.omega0.is_finite(), "boundary");
    for (const auto& c : m.cores) detail::check_finite(rep, c.is_finite(), "core");
    return rep;
}

inline ValidationReport validate(const Noom& m, double tol = 1e-9, bool strict_real = false) {
    ValidationReport rep;
    detail::check_finite(rep, m.psi0.is_finite(), "psi0");
    for (const auto& p : m.phis) detail::check_finite(rep, p.is_finite(), "operator");
    if (!rep.valid()) return rep;

    ComplexMatrix completeness(m.dim(), m.dim());
    for (const auto& p : m.phis) completeness += p.adjoint() * p;
    const double comp = detail::identity_residual(completeness);
    if (comp > tol) rep.violations.push_back({"completeness residual", comp});

    const double nrm = std::abs(m.psi0.norm2() - 1.0);
    if (nrm > tol) rep.violations.push_back({"initial state not unit 2-norm", nrm});

    if (strict_real) {
        double imag = detail::max_imag(m.psi0);
        for (const auto& p : m.phis) imag = std::max(imag, detail::max_imag(p));
        if (imag > tol) rep.violations.push_back({"strict-real: imaginary parts present", imag});
    }
    return rep;
}

inline ValidationReport validate(const Hqmm& m, double tol = 1e-9, bool strict_real = false) {
    ValidationReport rep;
    detail::check_finite(rep, m.rho0.is_finite(), "rho0");
    for (const auto& ks : m.kraus_by_obs)
        for (const auto& k : ks.ops) detail::check_finite(rep, k.is_finite(), "Kraus operator");
    if (!rep.valid()) return rep;

    if (strict_real) {
        double imag = detail::max_imag(m.rho0);
        for (const auto& ks : m.kraus_by_obs)
            for (const auto& k : ks.ops) imag = std::max(imag, detail::max_imag(k));
        if (imag > tol) rep.violations.push_back({"strict-real: imaginary parts present", imag});
    }

    const std::size_t n = m.state_dim();
    const ComplexMatrix rho = unvectorize(m.rho0, n, n);
    double herm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            herm = std::max(herm, std::abs(rho(i, j) - std::conj(rho(j, i))));
    if (herm > tol) rep.violations.push_back({"initial density matrix not Hermitian", herm});

    const double tr = std::abs(rho.trace() - Complex(1.0, 0.0));
    if (tr > tol) rep.violations.push_back({"initial density matrix trace != 1", tr});

    if (herm <= tol) {
        ComplexMatrix h(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) h(i, j) = 0.5 * (rho(i, j) + std::conj(rho(j, i)));
        const HermitianEigen eig = hermitian_eigen(h, std::max(tol, 1e-9));
        if (!eig.eigenvalues.empty() && eig.eigenvalues.front() < -tol)
            rep.violations.push_back({"initial density matrix not PSD", -eig.eigenvalues.front()});
    }

    ComplexMatrix total(n, n);
    for (const auto& ks : m.kraus_by_obs) total += ks.completeness();
    const double tp = detail::identity_residual(total);
    if (tp > tol) rep.violations.push_back({"trace preservation residual", tp});
    return rep;
}

inline ValidationReport validate(const Ulps& m, double tol = 1e-9) {
    (void)tol;
    ValidationReport rep;
    for (const auto& k : m.left_kraus.ops) detail::check_finite(rep, k.is_finite(), "left boundary");
    for (const auto& ks : m.core_kraus)
        for (const auto& k : ks.ops) detail::check_finite(rep, k.is_finite(), "core Kraus");
    for (const auto& k : m.right_kraus.ops) detail::check_finite(rep, k.is_finite(), "right boundary");
    return rep;
}

inline ValidationReport validate(const Model& m, double tol = 1e-9) {
    return std::visit([tol](const auto& v) { return validate(v, tol); }, m);
}

// ---------------------------------------------------------------------------
// Transfer operators

inline ComplexMatrix transfer_operator(const Umps& m) {
    ComplexMatrix t(m.bond_dim(), m.bond_dim());
    for (const auto& c : m.cores) t += c;
    return t;
}

inline ComplexMatrix transfer_operator(const Psr& m) {
    ComplexMatrix t(m.dim(), m.dim());
    for (const auto& o : m.ops) t += o;
    return t;
}

// Lifted (n^2-dimensional) transfer operators for the quadratic model classes.
inline ComplexMatrix transfer_operator_lifted(const Ubm& m) {
    const std::size_t d = m.bond_dim();
    ComplexMatrix t(d * d, d * d);
    for (const auto& c : m.cores) t += kron(c.conj(), c);
    return t;
}

inline ComplexMatrix transfer_operator_lifted(const Noom& m) {
    const std::size_t d = m.dim();
    ComplexMatrix t(d * d, d * d);
    for (const auto& p : m.phis) t += kron(p.conj(), p);
    return t;
}

inline ComplexMatrix transfer_operator_lifted(const Hqmm& m) {
    const std::size_t n2 = m.state_dim_sq();
    ComplexMatrix t(n2, n2);
    for (const auto& ks : m.kraus_by_obs) t += ks.liouville();
    return t;
}

inline ComplexMatrix transfer_operator_lifted(const Ulps& m) {
    const std::size_t d = m.bond_dim();
    ComplexMatrix t(d * d, d * d);
    for (const auto& ks : m.core_kraus) t += ks.liouville();
    return t;
}

}  // namespace useq
