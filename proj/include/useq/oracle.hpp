#pragma once

// Brute-force reference computations: exhaustive joint enumeration, finite-N
// marginalization of the non-terminating limit, distribution-equivalence
// checking, and ancestral sampling. Everything here is the ground truth the
// test suites compare against, so implementations stay as direct as possible.

#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "useq/errors.hpp"
#include "useq/evaluate.hpp"
#include "useq/linalg.hpp"
#include "useq/models.hpp"

namespace useq {

// All |O|^length joint scores of one length, in lexicographic sequence order.
struct Distribution {
    std::size_t length = 0;
    std::size_t obs = 0;
    std::vector<double> entries;

    static std::size_t index_of(const Sequence& seq, std::size_t obs) {
        std::size_t idx = 0;
        for (std::size_t y : seq) idx = idx * obs + y;
        return idx;
    }

    static Sequence sequence_at(std::size_t idx, std::size_t obs, std::size_t length) {
        Sequence seq(length, 0);
        for (std::size_t t = length; t-- > 0;) {
            seq[t] = idx % obs;
            idx /= obs;
        }
        return seq;
    }

    double prob(const Sequence& seq) const { return entries[index_of(seq, obs)]; }

    double sum() const {
        double s = 0.0;
        for (double v : entries) s += v;
        return s;
    }

    double min_entry() const {
        double m = std::numeric_limits<double>::infinity();
        for (double v : entries) m = std::min(m, v);
        return m;
    }
};

namespace detail {

inline std::size_t sequence_space(std::size_t obs, std::size_t length) {
    if (obs == 0) throw Error(ErrorKind::InvalidModel, "model has no observations");
    double approx = 1.0;
    std::size_t count = 1;
    for (std::size_t t = 0; t < length; ++t) {
        approx *= static_cast<double>(obs);
        if (approx > 1e7)
            throw Error(ErrorKind::TooLarge, "sequence space exceeds the 1e7 enumeration guard");
        count *= obs;
    }
    return count;
}

}  // namespace detail

// Joint score of every sequence of the given length. Entries are independent,
// so the work may be split across threads; the result is identical for any
// thread count.
inline Distribution enumerate_joint(const Model& m, std::size_t length, unsigned threads = 1) {
    const std::size_t obs = obs_count(m);
    const std::size_t total = detail::sequence_space(obs, length);
    Distribution dist;
    dist.length = length;
    dist.obs = obs;
    dist.entries.assign(total, 0.0);

    if (length == 0) {
        dist.entries.assign(1, 1.0);
        return dist;
    }

    auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx)
            dist.entries[idx] = joint(m, Distribution::sequence_at(idx, obs, length)).value;
    };

    if (threads <= 1 || total < 256) {
        worker(0, total);
    } else {
        const unsigned n_threads = std::min<unsigned>(threads, std::thread::hardware_concurrency());
        std::vector<std::thread> pool;
        const std::size_t chunk = (total + n_threads - 1) / n_threads;
        for (unsigned t = 0; t < n_threads; ++t) {
            const std::size_t begin = t * chunk;
            if (begin >= total) break;
            pool.emplace_back(worker, begin, std::min(total, begin + chunk));
        }
        for (auto& th : pool) th.join();
    }
    return dist;
}

// Exact finite-N marginal of a prefix: sigma^dagger tau^(total_len - T)
// tau_{prefix} rho0, with the summed transfer operator applied iteratively.
// May overflow to +/-inf for operators with large spectral radius; use
// finite_conditional for ratios at long horizons.
template <typename ModelT>
inline double finite_marginal(const ModelT& m, const Sequence& prefix, std::size_t total_len) {
    static_assert(std::is_same_v<ModelT, Umps> || std::is_same_v<ModelT, Ubm> ||
                      std::is_same_v<ModelT, Ulps>,
                  "finite_marginal applies to the un-normalized classes");
    if (total_len < prefix.size())
        throw Error(ErrorKind::InvalidModel, "total_len shorter than the prefix");
    const detail::LinearView lv = detail::linear_view(m);
    for (std::size_t y : prefix)
        if (y >= lv.ops.size()) throw Error(ErrorKind::InvalidModel, "symbol out of range");

    ComplexMatrix tau(lv.start.dim(), lv.start.dim());
    for (const auto& op : lv.ops) tau += op;

    ComplexVector v = lv.start;
    for (std::size_t y : prefix) v = lv.ops[y] * v;
    for (std::size_t k = prefix.size(); k < total_len; ++k) v = tau * v;
    return dot(lv.functional, v).real();
}

// Ratio finite_marginal(prefix + next, total_len) / finite_marginal(prefix,
// total_len) with shared per-step renormalization, so horizons of hundreds of
// steps stay in range. This is the reference the non-terminating conditionals
// converge to.
template <typename ModelT>
inline double finite_conditional(const ModelT& m, const Sequence& prefix, std::size_t next,
                                 std::size_t total_len) {
    static_assert(std::is_same_v<ModelT, Umps> || std::is_same_v<ModelT, Ubm> ||
                      std::is_same_v<ModelT, Ulps>,
                  "finite_conditional applies to the un-normalized classes");
    if (total_len < prefix.size() + 1)
        throw Error(ErrorKind::InvalidModel, "total_len must cover prefix plus one step");
    const detail::LinearView lv = detail::linear_view(m);
    if (next >= lv.ops.size()) throw Error(ErrorKind::InvalidModel, "symbol out of range");
    for (std::size_t y : prefix)
        if (y >= lv.ops.size()) throw Error(ErrorKind::InvalidModel, "symbol out of range");

    ComplexMatrix tau(lv.start.dim(), lv.start.dim());
    for (const auto& op : lv.ops) tau += op;

    // effective functional after total_len - T - 1 future marginalizations
    ComplexVector g = lv.functional;
    double ng = g.norm2();
    if (ng < 1e-300) throw Error(ErrorKind::ZeroProbabilityPrefix, "zero evaluation functional");
    g /= Complex(ng, 0.0);
    for (std::size_t k = prefix.size() + 1; k < total_len; ++k) {
        g = adjoint_apply(tau, g);
        ng = g.norm2();
        if (ng < 1e-300)
            throw Error(ErrorKind::ZeroProbabilityPrefix, "effective functional collapsed");
        g /= Complex(ng, 0.0);
    }

    ComplexVector w = lv.start;
    double nw = w.norm2();
    if (nw < 1e-300) throw Error(ErrorKind::ZeroProbabilityPrefix, "zero boundary state");
    w /= Complex(nw, 0.0);
    for (std::size_t y : prefix) {
        w = lv.ops[y] * w;
        nw = w.norm2();
        if (nw < 1e-300)
            throw Error(ErrorKind::ZeroProbabilityPrefix, "prefix has numerically zero probability");
        w /= Complex(nw, 0.0);
    }

    const Complex num = dot(g, lv.ops[next] * w);
    const Complex den = dot(g, tau * w);
    if (std::abs(den) < 1e-300)
        throw Error(ErrorKind::ZeroProbabilityPrefix, "prefix has numerically zero probability");
    return (num / den).real();
}

// ---------------------------------------------------------------------------
// Distribution-equivalence checking

enum class CompareSemantics { Joint, Conditional };

struct EquivalenceReport {
    double max_abs_deviation = 0.0;
    Sequence witness;                  // shortest, then lexicographically smallest maximizer
    bool equivalent = false;           // max deviation <= tol
    std::vector<double> per_length;    // max deviation at each compared length (joint semantics)
};

namespace detail {

// Conditional distribution P(. | prefix) under either semantics a model
// supports: recursive filtering for the normalized classes, finite-N ratios
// for raw uMPS/uBM/uLPS. Returns nullopt when the prefix has (numerically)
// zero probability and conditioning is undefined.
inline std::optional<std::vector<double>> conditional_distribution(const Model& m,
                                                                   const Sequence& prefix,
                                                                   std::size_t horizon) {
    const std::size_t obs = obs_count(m);
    try {
        return std::visit(
            [&](const auto& v) -> std::vector<double> {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, Psr> || std::is_same_v<T, Hmm> ||
                              std::is_same_v<T, Noom> || std::is_same_v<T, Hqmm>) {
                    FilterState st = filter_init(v);
                    for (std::size_t y : prefix) st = filter_step(v, st, y);
                    return predict(v, st);
                } else if constexpr (std::is_same_v<T, Umps> || std::is_same_v<T, Ubm> ||
                                     std::is_same_v<T, Ulps>) {
                    std::vector<double> out(obs);
                    for (std::size_t y = 0; y < obs; ++y)
                        out[y] = finite_conditional(v, prefix, y, prefix.size() + horizon);
                    return out;
                } else {
                    throw Error(ErrorKind::InvalidModel,
                                "conditional semantics undefined for fixed-length chains");
                }
            },
            m);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ZeroProbabilityPrefix) return std::nullopt;
        throw;
    }
}

}  // namespace detail

// Compare two models over every sequence of length <= max_len. Joint
// semantics compares enumerate_joint tables; conditional semantics compares
// next-symbol distributions for every prefix of length < max_len (skipping
// prefixes either model assigns zero probability).
inline EquivalenceReport equivalent(const Model& m1, const Model& m2, std::size_t max_len,
                                    double tol, CompareSemantics semantics = CompareSemantics::Joint,
                                    unsigned threads = 1, std::size_t horizon = 300) {
    const std::size_t obs = obs_count(m1);
    if (obs != obs_count(m2))
        throw Error(ErrorKind::InvalidModel, "models have different observation alphabets");

    EquivalenceReport rep;
    if (semantics == CompareSemantics::Joint) {
        for (std::size_t len = 1; len <= max_len; ++len) {
            const Distribution d1 = enumerate_joint(m1, len, threads);
            const Distribution d2 = enumerate_joint(m2, len, threads);
            double worst = 0.0;
            for (std::size_t idx = 0; idx < d1.entries.size(); ++idx) {
                const double dev = std::abs(d1.entries[idx] - d2.entries[idx]);
                worst = std::max(worst, dev);
                if (dev > rep.max_abs_deviation) {
                    rep.max_abs_deviation = dev;
                    rep.witness = Distribution::sequence_at(idx, obs, len);
                }
            }
            rep.per_length.push_back(worst);
        }
    } else {
        for (std::size_t plen = 0; plen < max_len; ++plen) {
            const std::size_t total = detail::sequence_space(obs, plen);
            double worst = 0.0;
            for (std::size_t idx = 0; idx < total; ++idx) {
                const Sequence prefix = Distribution::sequence_at(idx, obs, plen);
                const auto c1 = detail::conditional_distribution(m1, prefix, horizon);
                const auto c2 = detail::conditional_distribution(m2, prefix, horizon);
                if (!c1 || !c2) continue;
                for (std::size_t y = 0; y < obs; ++y) {
                    const double dev = std::abs((*c1)[y] - (*c2)[y]);
                    worst = std::max(worst, dev);
                    if (dev > rep.max_abs_deviation) {
                        rep.max_abs_deviation = dev;
                        rep.witness = prefix;
                        rep.witness.push_back(y);
                    }
                }
            }
            rep.per_length.push_back(worst);
        }
    }
    rep.equivalent = rep.max_abs_deviation <= tol;
    return rep;
}

// Ancestral sampling through the recursive filter. Deterministic given the
// seed; the generator is SplitMix64 (reference draws documented in the
// README and pinned in tests).
inline Sequence sample(const Model& m, std::size_t length, std::uint64_t seed,
                       double negative_tol = 1e-9) {
    Rng rng(seed);
    Sequence out;
    out.reserve(length);
    FilterState st = filter_init(m);
    for (std::size_t t = 0; t < length; ++t) {
        std::vector<double> p = predict(m, st);
        double total = 0.0;
        for (double& v : p) {
            if (v < -negative_tol)
                throw Error(ErrorKind::NegativeConditional,
                            "conditional probability " + std::to_string(v) + " is negative");
            if (v < 0.0) v = 0.0;
            total += v;
        }
        if (total < 1e-300)
            throw Error(ErrorKind::ZeroProbabilityPrefix, "all conditionals vanished");
        const double u = rng.next_double() * total;
        double acc = 0.0;
        std::size_t pick = p.size() - 1;
        for (std::size_t y = 0; y < p.size(); ++y) {
            acc += p[y];
            if (u < acc) {
                pick = y;
                break;
            }
        }
        out.push_back(pick);
        st = filter_step(m, st, pick);
    }
    return out;
}

}  // namespace useq
