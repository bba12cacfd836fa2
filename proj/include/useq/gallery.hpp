#pragma once

// Canonical instances and seeded random model constructors used by tests,
// fixtures, and documentation. Every named instance carries machine-checkable
// expected facts; random constructors are deterministic given the seed and
// produce valid models by construction.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "useq/controlled.hpp"
#include "useq/convert.hpp"
#include "useq/errors.hpp"
#include "useq/evaluate.hpp"
#include "useq/linalg.hpp"
#include "useq/models.hpp"

namespace useq {

struct ExpectedFact {
    std::string description;
    std::function<double(const Model&)> residual;  // 0 when the fact holds exactly
    double tolerance;
};

struct NamedInstance {
    std::string name;
    Model model;
    std::string provenance;
    std::vector<ExpectedFact> expected_facts;
};

// Two-state Markov chain, in observable-operator (PSR) form, whose filtering
// trajectory re-enters the convex hull of earlier states: x2 = 0.6 x0 + 0.4 x1
// along the all-zeros observation sequence. That convex re-entry is what
// rules out any unit-rank (pure-state) quadratic model reproducing it.
inline NamedInstance appendix_hmm() {
    ComplexVector ones{Complex(1.0, 0.0), Complex(1.0, 0.0)};
    std::vector<ComplexMatrix> ops;
    ops.push_back(ComplexMatrix{{0.25, 0.5}, {0.75, 0.0}});
    ops.push_back(ComplexMatrix{{0.0, 0.0}, {0.0, 0.5}});
    ComplexVector x0{Complex(1.0, 0.0), Complex(0.0, 0.0)};
    Model model = Psr(std::move(ones), std::move(ops), std::move(x0));

    auto state_after = [](const Model& m, const Sequence& seq) {
        const Psr& p = std::get<Psr>(m);
        FilterState st = filter_init(p);
        for (std::size_t y : seq) st = filter_step(p, st, y);
        return st.state;
    };

    std::vector<ExpectedFact> facts = {
        {"filter state after observing 0 is [0.25, 0.75]",
         [state_after](const Model& m) {
             const ComplexVector x1 = state_after(m, {0});
             return std::max(std::abs(x1[0] - Complex(0.25, 0.0)),
                             std::abs(x1[1] - Complex(0.75, 0.0)));
         },
         1e-12},
        {"filter state after observing (0, 0) is [0.7, 0.3]",
         [state_after](const Model& m) {
             const ComplexVector x2 = state_after(m, {0, 0});
             return std::max(std::abs(x2[0] - Complex(0.7, 0.0)),
                             std::abs(x2[1] - Complex(0.3, 0.0)));
         },
         1e-12},
        {"x2 equals 0.6 x0 + 0.4 x1",
         [state_after](const Model& m) {
             const Psr& p = std::get<Psr>(m);
             const ComplexVector x1 = state_after(m, {0});
             const ComplexVector x2 = state_after(m, {0, 0});
             return (x2 - (Complex(0.6, 0.0) * p.x0 + Complex(0.4, 0.0) * x1)).norm2();
         },
         1e-12},
        {"joint probability of (0, 0) is 0.625",
         [](const Model& m) { return std::abs(joint(m, {0, 0}).value - 0.625); }, 1e-12},
        {"x0 and x1 are linearly independent: 2x2 determinant is 0.75",
         [state_after](const Model& m) {
             const Psr& p = std::get<Psr>(m);
             const ComplexVector x1 = state_after(m, {0});
             const Complex det = p.x0[0] * x1[1] - p.x0[1] * x1[0];
             return std::abs(det - Complex(0.75, 0.0));
         },
         1e-12},
        {"passes PSR validation",
         [](const Model& m) {
             const ValidationReport rep = validate(m, 1e-12);
             double worst = 0.0;
             for (const auto& v : rep.violations) worst = std::max(worst, std::max(v.residual, 1e-6));
             return worst;
         },
         1e-12},
    };
    return NamedInstance{"appendix_hmm", std::move(model),
                         "constructed witness: HMM whose filtered state is a convex combination of "
                         "two linearly independent earlier states",
                         std::move(facts)};
}

// Rotation-damping NOOM family: phi_0 = R(theta) diag(sqrt(d1), sqrt(d2))
// with d1 = damping, d2 = damping/4, and phi_1 the diagonal completion, so
// sum phi^dagger phi = I by construction. The anisotropic contraction
// composed with rotation gives the observation operators complex eigenvalues
// and makes P(0 | 0^t) oscillate rather than settle monotonically.
inline NamedInstance oscillating_noom(double theta, double damping) {
    if (!(theta > 0.0 && theta < 3.141592653589793) || !(damping > 0.0 && damping <= 1.0))
        throw Error(ErrorKind::InvalidModel,
                    "oscillating_noom requires theta in (0, pi) and damping in (0, 1]");
    const double d1 = damping;
    const double d2 = damping / 4.0;
    const double c = std::cos(theta), s = std::sin(theta);
    ComplexMatrix phi0{{c * std::sqrt(d1), -s * std::sqrt(d2)}, {s * std::sqrt(d1), c * std::sqrt(d2)}};
    ComplexMatrix phi1{{std::sqrt(1.0 - d1), 0.0}, {0.0, std::sqrt(1.0 - d2)}};
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    ComplexVector psi0{Complex(inv_sqrt2, 0.0), Complex(inv_sqrt2, 0.0)};
    Model model = Noom({phi0, phi1}, psi0);

    std::vector<ExpectedFact> facts = {
        {"passes NOOM validation",
         [](const Model& m) {
             const ValidationReport rep = validate(m, 1e-9);
             double worst = 0.0;
             for (const auto& v : rep.violations) worst = std::max(worst, std::max(v.residual, 1e-6));
             return worst;
         },
         1e-9},
        {"P(0 | 0^t) has a local minimum for t in [0, 20]",
         [](const Model& m) {
             const Noom& noom = std::get<Noom>(m);
             std::vector<double> p;
             FilterState st = filter_init(noom);
             for (int t = 0; t <= 20; ++t) {
                 p.push_back(predict(noom, st)[0]);
                 st = filter_step(noom, st, 0);
             }
             for (std::size_t i = 1; i + 1 < p.size(); ++i)
                 if (p[i] < p[i - 1] - 1e-12 && p[i] < p[i + 1] - 1e-12) return 0.0;
             return 1.0;
         },
         0.5},
    };
    return NamedInstance{"oscillating_noom", std::move(model),
                         "parameterized rotation-damping Kraus pair with complex operator spectrum",
                         std::move(facts)};
}

// ---------------------------------------------------------------------------
// Seeded random model constructors

namespace detail {

inline double exp_draw(Rng& rng) {
    double u;
    do {
        u = rng.next_double();
    } while (u <= 0.0);
    return -std::log(u);
}

// Box-Muller standard normal pair; consumes two uniforms.
inline double normal_draw(Rng& rng) {
    double u1;
    do {
        u1 = rng.next_double();
    } while (u1 <= 0.0);
    const double u2 = rng.next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

inline Complex complex_normal(Rng& rng) {
    const double re = normal_draw(rng);
    const double im = normal_draw(rng);
    return Complex(re, im) * (1.0 / std::sqrt(2.0));
}

inline ComplexMatrix gaussian_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
    ComplexMatrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = scale * complex_normal(rng);
    return m;
}

inline ComplexVector gaussian_unit_vector(std::size_t dim, Rng& rng) {
    ComplexVector v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = complex_normal(rng);
    const double n = v.norm2();
    if (n < 1e-12) {
        v[0] = 1.0;
        return v;
    }
    return v / Complex(n, 0.0);
}

// Orthonormalize the columns of a tall matrix (modified Gram-Schmidt, two
// passes). Gaussian input makes rank deficiency a non-event, but fail loudly
// if it happens.
inline ComplexMatrix orthonormal_columns(ComplexMatrix g) {
    const std::size_t rows = g.rows(), cols = g.cols();
    for (std::size_t j = 0; j < cols; ++j) {
        ComplexVector v(rows);
        for (std::size_t i = 0; i < rows; ++i) v[i] = g(i, j);
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < j; ++k) {
                ComplexVector q(rows);
                for (std::size_t i = 0; i < rows; ++i) q[i] = g(i, k);
                v -= dot(q, v) * q;
            }
        }
        const double n = v.norm2();
        if (n < 1e-12)
            throw Error(ErrorKind::NonConvergence, "random draw was numerically rank-deficient");
        v /= Complex(n, 0.0);
        for (std::size_t i = 0; i < rows; ++i) g(i, j) = v[i];
    }
    return g;
}

// Stack of r square Kraus blocks whose completeness sum is exactly the
// identity: slice an orthonormal (n*r) x n matrix.
inline std::vector<ComplexMatrix> random_kraus_stack(std::size_t n, std::size_t r, Rng& rng) {
    const ComplexMatrix q = orthonormal_columns(gaussian_matrix(n * r, n, 1.0, rng));
    std::vector<ComplexMatrix> blocks;
    blocks.reserve(r);
    for (std::size_t b = 0; b < r; ++b) {
        ComplexMatrix k(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) k(i, j) = q(b * n + i, j);
        blocks.push_back(std::move(k));
    }
    return blocks;
}

inline ComplexMatrix random_density_matrix(std::size_t n, Rng& rng) {
    const ComplexMatrix g = gaussian_matrix(n, n, 1.0, rng);
    ComplexMatrix rho = g.adjoint() * g;
    return rho / rho.trace();
}

inline ComplexMatrix dirichlet_columns(std::size_t rows, std::size_t cols, Rng& rng) {
    ComplexMatrix m(rows, cols);
    for (std::size_t j = 0; j < cols; ++j) {
        double total = 0.0;
        std::vector<double> raw(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            raw[i] = exp_draw(rng);
            total += raw[i];
        }
        for (std::size_t i = 0; i < rows; ++i) m(i, j) = raw[i] / total;
    }
    return m;
}

}  // namespace detail

inline Hmm random_hmm(std::size_t dim, std::size_t obs, Rng& rng) {
    ComplexMatrix a = detail::dirichlet_columns(dim, dim, rng);
    ComplexMatrix c = detail::dirichlet_columns(obs, dim, rng);
    ComplexMatrix x = detail::dirichlet_columns(dim, 1, rng);
    ComplexVector x0(dim);
    for (std::size_t i = 0; i < dim; ++i) x0[i] = x(i, 0);
    return Hmm(std::move(a), std::move(c), std::move(x0));
}

// Gaussian cores scaled so the transfer operator's spectral radius stays
// near one; keeps finite-N marginalization at horizons of hundreds of steps
// inside double range.
inline Umps random_umps(std::size_t dim, std::size_t obs, Rng& rng) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim * obs));
    std::vector<ComplexMatrix> cores;
    cores.reserve(obs);
    for (std::size_t y = 0; y < obs; ++y) cores.push_back(detail::gaussian_matrix(dim, dim, scale, rng));
    ComplexVector sigma = detail::gaussian_unit_vector(dim, rng);
    ComplexVector rho0 = detail::gaussian_unit_vector(dim, rng);
    return Umps(std::move(sigma), std::move(cores), std::move(rho0));
}

inline Ubm random_ubm(std::size_t dim, std::size_t obs, Rng& rng) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim * obs));
    std::vector<ComplexMatrix> cores;
    cores.reserve(obs);
    for (std::size_t y = 0; y < obs; ++y) cores.push_back(detail::gaussian_matrix(dim, dim, scale, rng));
    ComplexVector alpha = detail::gaussian_unit_vector(dim, rng);
    ComplexVector omega0 = detail::gaussian_unit_vector(dim, rng);
    return Ubm(std::move(alpha), std::move(cores), std::move(omega0));
}

inline Noom random_noom(std::size_t dim, std::size_t obs, Rng& rng) {
    std::vector<ComplexMatrix> phis = detail::random_kraus_stack(dim, obs, rng);
    return Noom(std::move(phis), detail::gaussian_unit_vector(dim, rng));
}

inline Hqmm random_hqmm(std::size_t dim, std::size_t obs, Rng& rng, std::size_t kraus_rank = 2) {
    const std::vector<ComplexMatrix> stack = detail::random_kraus_stack(dim, obs * kraus_rank, rng);
    std::vector<KrausSet> by_obs;
    by_obs.reserve(obs);
    for (std::size_t y = 0; y < obs; ++y) {
        std::vector<ComplexMatrix> ops(stack.begin() + y * kraus_rank,
                                       stack.begin() + (y + 1) * kraus_rank);
        by_obs.emplace_back(std::move(ops));
    }
    return Hqmm(std::move(by_obs), vectorize(detail::random_density_matrix(dim, rng)));
}

inline Ulps random_ulps(std::size_t dim, std::size_t obs, Rng& rng, std::size_t core_rank = 2,
                        std::size_t boundary_rank = 1) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim * obs * core_rank));
    std::vector<KrausSet> cores;
    cores.reserve(obs);
    for (std::size_t y = 0; y < obs; ++y) {
        std::vector<ComplexMatrix> ops;
        ops.reserve(core_rank);
        for (std::size_t b = 0; b < core_rank; ++b)
            ops.push_back(detail::gaussian_matrix(dim, dim, scale, rng));
        cores.emplace_back(std::move(ops));
    }
    auto boundary = [&](std::size_t count) {
        std::vector<ComplexMatrix> ops;
        ops.reserve(count);
        for (std::size_t b = 0; b < count; ++b) ops.push_back(detail::gaussian_matrix(dim, 1, 1.0, rng));
        return KrausSet(std::move(ops));
    };
    KrausSet left = boundary(boundary_rank);
    KrausSet right = boundary(boundary_rank);
    return Ulps(std::move(left), std::move(cores), std::move(right));
}

inline MpsChain random_mps_chain(std::size_t sites, std::size_t bond, std::size_t obs, Rng& rng) {
    std::vector<std::vector<ComplexMatrix>> site_cores;
    site_cores.reserve(sites);
    for (std::size_t t = 0; t < sites; ++t) {
        const std::size_t in = (t == 0) ? 1 : bond;
        const std::size_t out = (t + 1 == sites) ? 1 : bond;
        std::vector<ComplexMatrix> per_obs;
        per_obs.reserve(obs);
        const double scale = 1.0 / std::sqrt(static_cast<double>(bond * obs));
        for (std::size_t y = 0; y < obs; ++y)
            per_obs.push_back(detail::gaussian_matrix(out, in, scale, rng));
        site_cores.push_back(std::move(per_obs));
    }
    return MpsChain(std::move(site_cores));
}

// Valid random instance of the requested class; deterministic given the
// seed. Psr instances come from hmm_to_psr of a random HMM (exactly valid by
// construction).
inline Model random_model(ModelKind kind, std::size_t dim, std::size_t obs, std::uint64_t seed) {
    if (dim < 1 || obs < 1) throw Error(ErrorKind::InvalidModel, "dim and obs must be >= 1");
    Rng rng(seed);
    switch (kind) {
        case ModelKind::Hmm:      return random_hmm(dim, obs, rng);
        case ModelKind::Psr:      return hmm_to_psr(random_hmm(dim, obs, rng));
        case ModelKind::Umps:     return random_umps(dim, obs, rng);
        case ModelKind::Ubm:      return random_ubm(dim, obs, rng);
        case ModelKind::Noom:     return random_noom(dim, obs, rng);
        case ModelKind::Hqmm:     return random_hqmm(dim, obs, rng);
        case ModelKind::Ulps:     return random_ulps(dim, obs, rng);
        case ModelKind::MpsChain: return random_mps_chain(4, dim, obs, rng);
        default:
            throw Error(ErrorKind::InvalidModel, "random_model: unsupported model kind");
    }
}

inline Pomdp random_pomdp(std::size_t dim, std::size_t actions, std::size_t obs, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ComplexMatrix> trans, emis;
    for (std::size_t a = 0; a < actions; ++a) {
        trans.push_back(detail::dirichlet_columns(dim, dim, rng));
        emis.push_back(detail::dirichlet_columns(obs, dim, rng));
    }
    const ComplexMatrix x = detail::dirichlet_columns(dim, 1, rng);
    ComplexVector x0(dim);
    for (std::size_t i = 0; i < dim; ++i) x0[i] = x(i, 0);
    return Pomdp(std::move(trans), std::move(emis), std::move(x0));
}

inline Qomdp random_qomdp(std::size_t dim, std::size_t actions, std::size_t obs, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<ComplexMatrix>> kraus;
    kraus.reserve(actions);
    for (std::size_t a = 0; a < actions; ++a) kraus.push_back(detail::random_kraus_stack(dim, obs, rng));
    return Qomdp(std::move(kraus), detail::random_density_matrix(dim, rng));
}

inline IoHqmm random_io_hqmm(std::size_t dim, std::size_t actions, std::size_t obs, std::uint64_t seed,
                             std::size_t kraus_rank = 2) {
    Rng rng(seed);
    std::vector<std::vector<KrausSet>> kraus;
    kraus.reserve(actions);
    for (std::size_t a = 0; a < actions; ++a) {
        const std::vector<ComplexMatrix> stack = detail::random_kraus_stack(dim, obs * kraus_rank, rng);
        std::vector<KrausSet> row;
        row.reserve(obs);
        for (std::size_t y = 0; y < obs; ++y) {
            std::vector<ComplexMatrix> ops(stack.begin() + y * kraus_rank,
                                           stack.begin() + (y + 1) * kraus_rank);
            row.emplace_back(std::move(ops));
        }
        kraus.push_back(std::move(row));
    }
    return IoHqmm(std::move(kraus), vectorize(detail::random_density_matrix(dim, rng)));
}

}  // namespace useq
