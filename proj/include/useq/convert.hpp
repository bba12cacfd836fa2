#pragma once

// Constructive conversions between the model classes. The fixed-point
// conversions follow one recipe: rescale the observation operators by the
// dominant eigenvalue of the transfer operator, then (for the quadratic
// classes) conjugate by the Hermitian square root of the fixed-point matrix
// so the new transfer operator is trace-preserving. All conversions are
// deterministic: eigenvector phases are canonicalized in linalg.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "useq/errors.hpp"
#include "useq/linalg.hpp"
#include "useq/models.hpp"

namespace useq {

struct ConversionReport {
    Complex rescale_factor{1.0, 0.0};       // lambda_* or sqrt(lambda_*)
    std::optional<ComplexMatrix> similarity;  // S, when a similarity transform was applied
    std::vector<std::pair<std::string, double>> residuals;

    double residual(const std::string& name) const {
        for (const auto& [k, v] : residuals)
            if (k == name) return v;
        return 0.0;
    }
};

namespace detail {

inline void require_valid(const ValidationReport& rep, const char* what) {
    if (!rep.valid())
        throw Error(ErrorKind::InvalidModel, std::string(what) + ": " + rep.to_string());
}

// Principal square root of lambda_*; the transfer operator of a CP map has a
// real positive dominant eigenvalue, so a significant imaginary part means
// the premise is violated.
inline Complex principal_sqrt_checked(Complex lambda) {
    if (std::abs(lambda.imag()) > 1e-8 * std::abs(lambda))
        throw Error(ErrorKind::DegenerateSpectrum,
                    "dominant eigenvalue of a CP transfer operator is not numerically real");
    return std::sqrt(lambda);
}

// Unvectorize the fixed point of a lifted transfer operator and scrub the
// roundoff-level anti-Hermitian part. Phase canonicalization in linalg
// anchors a diagonal entry real positive, so for a PSD fixed point the
// global phase is already fixed.
inline ComplexMatrix fixed_point_matrix(const ComplexVector& sigma_star, std::size_t n) {
    const ComplexMatrix m = unvectorize(sigma_star, n, n);
    ComplexMatrix h(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) h(i, j) = 0.5 * (m(i, j) + std::conj(m(j, i)));
    return h;
}

inline double identity_residual_of(const ComplexMatrix& m) {
    double worst = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            worst = std::max(worst,
                             std::abs(m(i, j) - (i == j ? Complex(1.0, 0.0) : Complex(0.0, 0.0))));
    return worst;
}

}  // namespace detail

// HMM -> PSR via observable operators T_y = diag(emission row) * transition,
// evaluation functional all-ones, initial state x0. Exact: no spectral
// machinery involved.
inline Psr hmm_to_psr(const Hmm& h, double tol = 1e-9) {
    detail::require_valid(validate(h, tol), "hmm_to_psr");
    std::vector<ComplexMatrix> ops;
    ops.reserve(h.obs_count());
    for (std::size_t y = 0; y < h.obs_count(); ++y) ops.push_back(h.observable_operator(y));
    ComplexVector ones(h.state_dim());
    for (std::size_t i = 0; i < h.state_dim(); ++i) ones[i] = 1.0;
    return Psr(std::move(ones), std::move(ops), h.x0);
}

// NOOM -> PSR Kronecker lift: tau_y = conj(phi_y) (x) phi_y, sigma = vec(I),
// x0 = conj(psi0) (x) psi0. Joints agree exactly.
inline Psr noom_to_psr(const Noom& m, double tol = 1e-9) {
    detail::require_valid(validate(m, tol), "noom_to_psr");
    std::vector<ComplexMatrix> ops;
    ops.reserve(m.obs_count());
    for (const auto& p : m.phis) ops.push_back(kron(p.conj(), p));
    return Psr(vec_identity(m.dim()), std::move(ops), kron(m.psi0.conj(), m.psi0));
}

// uBM -> uMPS Kronecker lift: sigma = conj(alpha) (x) alpha. The result is a
// uMPS, not a PSR: the lifted functional is not a transfer-operator fixed
// point in general.
inline Umps ubm_to_psr(const Ubm& b) {
    std::vector<ComplexMatrix> cores;
    cores.reserve(b.obs_count());
    for (const auto& c : b.cores) cores.push_back(kron(c.conj(), c));
    return Umps(kron(b.alpha.conj(), b.alpha), std::move(cores), kron(b.omega0.conj(), b.omega0));
}

// uMPS -> PSR: rescale operators by 1/lambda_*, replace the evaluation
// functional by the fixed point sigma_*, and rescale rho0 so
// sigma_*^dagger rho0 = 1. Conditionals equal the source's non-terminating
// conditionals.
inline std::pair<Psr, ConversionReport> umps_to_psr(const Umps& u, double tol = 1e-9,
                                                    std::size_t max_iter = 100000) {
    const FixedPointResult fp = dominant_left_eigenpair(transfer_operator(u), 1e-12, max_iter);
    const Complex overlap = dot(fp.fixed_point, u.rho0);
    // the fixed point itself carries O(1e-12) eigenvector noise, so overlaps
    // below 1e-9 * ||rho0|| cannot be distinguished from roundoff
    if (std::abs(overlap) < 1e-9 * std::max(1e-300, u.rho0.norm2()))
        throw Error(ErrorKind::OrthogonalBoundary,
                    "right boundary is numerically orthogonal to the fixed point");

    std::vector<ComplexMatrix> ops;
    ops.reserve(u.obs_count());
    for (const auto& c : u.cores) ops.push_back(c / fp.eigenvalue);
    Psr psr(fp.fixed_point, std::move(ops), u.rho0 / overlap);

    ConversionReport rep;
    rep.rescale_factor = fp.eigenvalue;
    const ComplexVector back = adjoint_apply(transfer_operator(psr), psr.sigma);
    double fp_resid = 0.0;
    for (std::size_t i = 0; i < back.dim(); ++i)
        fp_resid = std::max(fp_resid, std::abs(back[i] - psr.sigma[i]));
    rep.residuals.emplace_back("fixed_point_residual", fp_resid);
    rep.residuals.emplace_back("normalization_residual",
                               std::abs(dot(psr.sigma, psr.x0) - Complex(1.0, 0.0)));
    detail::require_valid(validate(psr, tol), "umps_to_psr produced an invalid PSR");
    return {std::move(psr), std::move(rep)};
}

// uBM -> NOOM: with S the Hermitian square root of the fixed-point matrix of
// the lifted transfer operator, phi'_y = S (A^y / sqrt(lambda_*)) S^{-1}
// satisfies sum phi'^dagger phi' = I, and psi'_0 = S omega0 / ||S omega0||.
inline std::pair<Noom, ConversionReport> ubm_to_noom(const Ubm& b, double tol = 1e-9,
                                                     std::size_t max_iter = 100000) {
    const std::size_t n = b.bond_dim();
    const FixedPointResult fp = dominant_left_eigenpair(transfer_operator_lifted(b), 1e-12, max_iter);
    const Complex root = detail::principal_sqrt_checked(fp.eigenvalue);

    const ComplexMatrix sigma_mat = detail::fixed_point_matrix(fp.fixed_point, n);
    const ComplexMatrix s = herm_sqrt(sigma_mat, tol);
    const ComplexMatrix s_inv = herm_inv_sqrt(sigma_mat, 1e-12);

    std::vector<ComplexMatrix> phis;
    phis.reserve(b.obs_count());
    for (const auto& c : b.cores) phis.push_back(s * (c / root) * s_inv);

    ComplexVector psi0 = s * b.omega0;
    const double nrm = psi0.norm2();
    if (nrm < 1e-300)
        throw Error(ErrorKind::OrthogonalBoundary, "S omega0 vanished; boundary in the null space");
    psi0 /= Complex(nrm, 0.0);

    Noom noom(std::move(phis), std::move(psi0));
    ComplexMatrix completeness(n, n);
    for (const auto& p : noom.phis) completeness += p.adjoint() * p;

    ConversionReport rep;
    rep.rescale_factor = root;
    rep.similarity = s;
    rep.residuals.emplace_back("trace_preservation_residual",
                               detail::identity_residual_of(completeness));
    const ComplexVector back = adjoint_apply(transfer_operator_lifted(noom), vec_identity(n));
    double fp_resid = 0.0;
    for (std::size_t i = 0; i < back.dim(); ++i)
        fp_resid = std::max(fp_resid, std::abs(back[i] - vec_identity(n)[i]));
    rep.residuals.emplace_back("fixed_point_residual", fp_resid);
    detail::require_valid(validate(noom, tol), "ubm_to_noom produced an invalid NOOM");
    return {std::move(noom), std::move(rep)};
}

// Kraus set -> Liouville operator, and back via the Choi eigendecomposition.
// Kraus operators are recoverable only up to unitary mixing, so round trips
// compare Liouville matrices.
inline ComplexMatrix kraus_to_liouville(const KrausSet& k) { return k.liouville(); }

inline KrausSet liouville_to_kraus(const ComplexMatrix& l, double tol = 1e-9) {
    if (!l.square()) throw Error(ErrorKind::DimensionMismatch, "liouville_to_kraus: non-square");
    const std::size_t n2 = l.rows();
    const std::size_t n = static_cast<std::size_t>(std::llround(std::sqrt(double(n2))));
    if (n * n != n2)
        throw Error(ErrorKind::DimensionMismatch, "liouville_to_kraus: dimension is not a square");

    const ComplexMatrix choi = choi_reshuffle(l, n);
    double herm = 0.0;
    for (std::size_t i = 0; i < n2; ++i)
        for (std::size_t j = i; j < n2; ++j)
            herm = std::max(herm, std::abs(choi(i, j) - std::conj(choi(j, i))));
    if (herm > tol)
        throw Error(ErrorKind::NotCompletelyPositive, "Choi matrix not Hermitian: residual " +
                                                          std::to_string(herm));
    const HermitianEigen eig = hermitian_eigen(choi, tol);
    if (!eig.eigenvalues.empty() && eig.eigenvalues.front() < -tol)
        throw Error(ErrorKind::NotCompletelyPositive,
                    "Choi matrix has eigenvalue " + std::to_string(eig.eigenvalues.front()));

    std::vector<ComplexMatrix> ops;
    for (std::size_t k = eig.eigenvalues.size(); k-- > 0;) {  // descending eigenvalues
        const double ev = eig.eigenvalues[k];
        if (ev <= tol) break;
        ComplexVector col(n2);
        for (std::size_t i = 0; i < n2; ++i) col[i] = eig.eigenvectors(i, k);
        ops.push_back(unvectorize(col * Complex(std::sqrt(ev), 0.0), n, n));
    }
    if (ops.empty())
        throw Error(ErrorKind::NotCompletelyPositive, "no Choi eigenvalue above tol; map is zero");
    return KrausSet(std::move(ops));
}

// HQMM -> uLPS: boundary Kraus sets become singletons — the identity on the
// left (so the Gram matrix is I and the functional is vec(I)) and the
// Hermitian square root of the initial density matrix on the right.
inline Ulps hqmm_to_ulps(const Hqmm& h, double tol = 1e-9) {
    detail::require_valid(validate(h, tol), "hqmm_to_ulps");
    const std::size_t n = h.state_dim();
    const ComplexMatrix rho = detail::fixed_point_matrix(h.rho0, n);
    KrausSet left(std::vector<ComplexMatrix>{ComplexMatrix::identity(n)});
    KrausSet right(std::vector<ComplexMatrix>{herm_sqrt(rho, tol)});
    return Ulps(std::move(left), h.kraus_by_obs, std::move(right));
}

// uLPS -> HQMM (fixed-point normalization applied Kraus-operator-wise):
// K'_{b,y} = S (K_{b,y} / sqrt(lambda_*)) S^{-1}, initial density matrix
// S P_R S^dagger Hermitized and trace-normalized.
inline std::pair<Hqmm, ConversionReport> ulps_to_hqmm(const Ulps& u, double tol = 1e-9,
                                                      std::size_t max_iter = 100000) {
    const std::size_t n = u.bond_dim();
    const FixedPointResult fp = dominant_left_eigenpair(transfer_operator_lifted(u), 1e-12, max_iter);
    const Complex root = detail::principal_sqrt_checked(fp.eigenvalue);

    const ComplexMatrix sigma_mat = detail::fixed_point_matrix(fp.fixed_point, n);
    const ComplexMatrix s = herm_sqrt(sigma_mat, tol);
    const ComplexMatrix s_inv = herm_inv_sqrt(sigma_mat, 1e-12);

    std::vector<KrausSet> kraus_by_obs;
    kraus_by_obs.reserve(u.obs_count());
    for (const auto& ks : u.core_kraus) {
        std::vector<ComplexMatrix> ops;
        ops.reserve(ks.ops.size());
        for (const auto& k : ks.ops) ops.push_back(s * (k / root) * s_inv);
        kraus_by_obs.emplace_back(std::move(ops));
    }

    ComplexMatrix rho = s * u.right_kraus.gram() * s.adjoint();
    ComplexMatrix herm(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) herm(i, j) = 0.5 * (rho(i, j) + std::conj(rho(j, i)));
    const Complex tr = herm.trace();
    if (std::abs(tr) < 1e-300)
        throw Error(ErrorKind::OrthogonalBoundary, "right boundary Gram matrix has zero trace");
    herm /= tr;

    Hqmm hqmm(std::move(kraus_by_obs), vectorize(herm));

    ConversionReport rep;
    rep.rescale_factor = root;
    rep.similarity = s;
    ComplexMatrix total(n, n);
    for (const auto& ks : hqmm.kraus_by_obs) total += ks.completeness();
    rep.residuals.emplace_back("trace_preservation_residual", detail::identity_residual_of(total));
    const ComplexVector back = adjoint_apply(transfer_operator_lifted(hqmm), vec_identity(n));
    double fp_resid = 0.0;
    for (std::size_t i = 0; i < back.dim(); ++i)
        fp_resid = std::max(fp_resid, std::abs(back[i] - vec_identity(n)[i]));
    rep.residuals.emplace_back("fixed_point_residual", fp_resid);
    detail::require_valid(validate(hqmm, tol), "ulps_to_hqmm produced an invalid HQMM");
    return {std::move(hqmm), std::move(rep)};
}

// NOOM -> HQMM embedding: singleton Kraus sets, pure initial state.
inline Hqmm noom_to_hqmm(const Noom& m, double tol = 1e-9) {
    detail::require_valid(validate(m, tol), "noom_to_hqmm");
    std::vector<KrausSet> kraus;
    kraus.reserve(m.obs_count());
    for (const auto& p : m.phis) kraus.emplace_back(std::vector<ComplexMatrix>{p});
    const std::size_t n = m.dim();
    ComplexMatrix pure(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) pure(i, j) = m.psi0[i] * std::conj(m.psi0[j]);
    return Hqmm(std::move(kraus), vectorize(pure));
}

// Similarity-equivalence verifier for two PSRs of equal dimension: checks,
// in multiplied form, x0 = S x0', tau_y S = S tau'_y, and sigma' = S^dagger
// sigma. Only verification is provided; recovering S is out of scope.
struct SimilarityCheck {
    bool equivalent = false;
    double max_residual = 0.0;
};

inline SimilarityCheck verify_similarity(const Psr& a, const Psr& b, const ComplexMatrix& s,
                                         double tol = 1e-9) {
    if (a.dim() != b.dim() || a.obs_count() != b.obs_count() || !s.square() || s.rows() != a.dim())
        throw Error(ErrorKind::DimensionMismatch, "verify_similarity: incompatible shapes");
    double worst = 0.0;
    const ComplexVector x = s * b.x0;
    for (std::size_t i = 0; i < a.dim(); ++i) worst = std::max(worst, std::abs(x[i] - a.x0[i]));
    for (std::size_t y = 0; y < a.obs_count(); ++y) {
        const ComplexMatrix lhs = a.ops[y] * s;
        const ComplexMatrix rhs = s * b.ops[y];
        for (std::size_t i = 0; i < a.dim(); ++i)
            for (std::size_t j = 0; j < a.dim(); ++j)
                worst = std::max(worst, std::abs(lhs(i, j) - rhs(i, j)));
    }
    const ComplexVector sig = adjoint_apply(s, a.sigma);
    for (std::size_t i = 0; i < a.dim(); ++i) worst = std::max(worst, std::abs(sig[i] - b.sigma[i]));
    return {worst <= tol, worst};
}

}  // namespace useq
