#pragma once

// Test-only full-spectrum oracle, independent of the library's power
// iteration: characteristic polynomial via Faddeev-LeVerrier, roots via
// Durand-Kerner. Adequate for the small well-scaled matrices the tests use;
// never linked into the library.

#include <algorithm>
#include <complex>
#include <vector>

#include <useq/linalg.hpp>

namespace testutil {

using useq::Complex;
using useq::ComplexMatrix;

// Monic characteristic polynomial coefficients: p(z) = z^n + c[0] z^{n-1} + ... + c[n-1].
inline std::vector<Complex> char_poly(const ComplexMatrix& a) {
    const std::size_t n = a.rows();
    std::vector<Complex> c(n);
    ComplexMatrix m = a;
    c[0] = -m.trace();
    for (std::size_t k = 1; k < n; ++k) {
        ComplexMatrix shifted = m;
        for (std::size_t i = 0; i < n; ++i) shifted(i, i) += c[k - 1];
        m = a * shifted;
        c[k] = -m.trace() / Complex(static_cast<double>(k + 1), 0.0);
    }
    return c;
}

inline Complex eval_poly(const std::vector<Complex>& c, Complex z) {
    Complex v(1.0, 0.0);
    for (const Complex& ck : c) v = v * z + ck;
    return v;
}

// All eigenvalues, via Durand-Kerner; magnitudes returned descending.
inline std::vector<double> eigenvalue_magnitudes(const ComplexMatrix& a) {
    const std::size_t n = a.rows();
    if (n == 0) return {};
    if (n == 1) return {std::abs(a(0, 0))};
    const std::vector<Complex> c = char_poly(a);
    std::vector<Complex> z(n);
    const Complex seed(0.4, 0.9);
    Complex p(1.0, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        p *= seed;
        z[i] = p;
    }
    for (int iter = 0; iter < 600; ++iter) {
        double moved = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            Complex denom(1.0, 0.0);
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) denom *= (z[i] - z[j]);
            if (std::abs(denom) < 1e-300) denom = Complex(1e-300, 0.0);
            const Complex delta = eval_poly(c, z[i]) / denom;
            z[i] -= delta;
            moved = std::max(moved, std::abs(delta));
        }
        if (moved < 1e-14) break;
    }
    std::vector<double> mags(n);
    for (std::size_t i = 0; i < n; ++i) mags[i] = std::abs(z[i]);
    std::sort(mags.rbegin(), mags.rend());
    return mags;
}

}  // namespace testutil
