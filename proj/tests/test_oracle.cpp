#include <doctest.h>

#include <useq/convert.hpp>
#include <useq/gallery.hpp>
#include <useq/oracle.hpp>

#include "test_helpers.hpp"

using namespace useq;

TEST_CASE("enumerate_joint of the deterministic single-symbol HMM") {
    const Hmm h(ComplexMatrix::identity(2), ComplexMatrix{{1.0, 1.0}},
                ComplexVector{Complex(1.0, 0.0), Complex(0.0, 0.0)});
    const Distribution d = enumerate_joint(Model(h), 3);
    CHECK(d.entries.size() == 1);
    CHECK(d.prob({0, 0, 0}) == doctest::Approx(1.0));
}

TEST_CASE("enumerate_joint on the appendix instance puts 0.625 on (0,0)") {
    const NamedInstance inst = appendix_hmm();
    const Distribution d = enumerate_joint(inst.model, 2);
    CHECK(d.prob({0, 0}) == doctest::Approx(0.625).epsilon(1e-15));
    CHECK(d.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("valid model distributions sum to one with non-negative entries") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        for (ModelKind kind : {ModelKind::Hmm, ModelKind::Psr, ModelKind::Noom, ModelKind::Hqmm}) {
            const Model m = random_model(kind, 2, 3, seed);
            for (std::size_t len = 1; len <= 5; ++len) {
                const Distribution d = enumerate_joint(m, len);
                CHECK(d.sum() == doctest::Approx(1.0).epsilon(1e-9));
                CHECK(d.min_entry() >= -1e-9);
            }
        }
    }
}

TEST_CASE("enumeration guard rejects oversized spaces") {
    const Model m = random_model(ModelKind::Hmm, 2, 3, 0);
    CHECK_THROWS_AS(enumerate_joint(m, 20), Error);
}

TEST_CASE("enumerate_joint is independent of the thread count") {
    const Model m = random_model(ModelKind::Noom, 2, 3, 7);
    const Distribution a = enumerate_joint(m, 6, 1);
    const Distribution b = enumerate_joint(m, 6, 2);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) CHECK(a.entries[i] == b.entries[i]);
}

TEST_CASE("finite_marginal at total_len = prefix length is the joint") {
    const Model m = random_model(ModelKind::Umps, 3, 2, 2);
    const Umps& u = std::get<Umps>(m);
    const Sequence prefix = {0, 1, 0};
    CHECK(finite_marginal(u, prefix, 3) == doctest::Approx(joint(u, prefix).value).epsilon(1e-12));
}

TEST_CASE("finite_marginal of a valid PSR-as-uMPS is independent of total_len") {
    const NamedInstance inst = appendix_hmm();
    const Psr& p = std::get<Psr>(inst.model);
    const Umps u(p.sigma, p.ops, p.x0);
    const double at2 = finite_marginal(u, {0, 0}, 2);
    const double at10 = finite_marginal(u, {0, 0}, 10);
    const double at50 = finite_marginal(u, {0, 0}, 50);
    CHECK(at2 == doctest::Approx(0.625).epsilon(1e-12));
    CHECK(at10 == doctest::Approx(at2).epsilon(1e-12));
    CHECK(at50 == doctest::Approx(at2).epsilon(1e-12));
}

TEST_CASE("marginal consistency: summing one more symbol matches the longer marginal") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const Model m = random_model(ModelKind::Umps, 2, 2, seed);
        const Umps& u = std::get<Umps>(m);
        const Distribution d3 = enumerate_joint(m, 3);
        for (std::size_t idx = 0; idx < 4; ++idx) {
            const Sequence s = Distribution::sequence_at(idx, 2, 2);
            double summed = 0.0;
            double enumerated = 0.0;
            for (std::size_t y = 0; y < 2; ++y) {
                Sequence extended = s;
                extended.push_back(y);
                summed += finite_marginal(u, extended, 3);
                enumerated += d3.prob(extended);
            }
            const double direct = finite_marginal(u, s, 3);
            CHECK(summed == doctest::Approx(direct).epsilon(1e-10));
            CHECK(enumerated == doctest::Approx(direct).epsilon(1e-10));
        }
    }
}

TEST_CASE("finite_conditional converges to conditional_nonterminating at the spectral rate") {
    int checked = 0;
    for (std::uint64_t seed = 0; checked < 4 && seed < 30; ++seed) {
        const Model m = random_model(ModelKind::Umps, 2, 2, seed);
        const Umps& u = std::get<Umps>(m);
        FixedPointResult fp;
        try {
            fp = dominant_left_eigenpair(transfer_operator(u));
        } catch (const Error&) {
            continue;
        }
        if (fp.gap > 0.85) continue;
        const Sequence prefix = {0, 1};
        double limit;
        try {
            limit = conditional_nonterminating(u, prefix, 0, fp);
        } catch (const Error&) {
            continue;
        }
        ++checked;
        double prev_err = -1.0;
        for (std::size_t horizon : {10, 20, 40}) {
            const double got = finite_conditional(u, prefix, 0, prefix.size() + horizon);
            const double err = std::abs(got - limit);
            // check the contraction only while both errors sit above the
            // floating-point noise floor
            if (prev_err > 1e-10 && err > 1e-13) {
                const double expected_factor = std::pow(fp.gap, 10.0);  // gap^10 per 10 steps
                const double factor = err / prev_err;
                CHECK(factor < std::max(expected_factor * 8.0, 1e-10));
            }
            prev_err = err;
        }
        CHECK(std::abs(finite_conditional(u, prefix, 0, prefix.size() + 200) - limit) < 1e-8);
    }
    CHECK(checked >= 2);
}

TEST_CASE("equivalent: a model equals itself with zero deviation") {
    const Model m = random_model(ModelKind::Noom, 2, 2, 4);
    const EquivalenceReport rep = equivalent(m, m, 4, 1e-12);
    CHECK(rep.max_abs_deviation == 0.0);
    CHECK(rep.equivalent);
}

TEST_CASE("equivalent: NOOM vs its lifted PSR deviates below 1e-12 at all lengths <= 4") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Rng rng(seed);
        const Noom m = random_noom(2, 3, rng);
        const EquivalenceReport rep = equivalent(Model(m), Model(noom_to_psr(m)), 4, 1e-12);
        CHECK(rep.equivalent);
        CHECK(rep.max_abs_deviation < 1e-12);
    }
}

TEST_CASE("equivalent reports a reproducible maximizing witness") {
    const NamedInstance inst = appendix_hmm();
    Psr p = std::get<Psr>(inst.model);
    Psr q = p;
    q.ops[0](0, 0) += 0.01;
    const EquivalenceReport rep = equivalent(Model(p), Model(q), 3, 1e-12);
    CHECK_FALSE(rep.equivalent);
    REQUIRE(!rep.witness.empty());
    CHECK(rep.max_abs_deviation > 0.005);
    // the witness reproduces the reported deviation
    const double dev = std::abs(joint(p, rep.witness).value - joint(q, rep.witness).value);
    CHECK(dev == doctest::Approx(rep.max_abs_deviation).epsilon(1e-12));
    // deterministic across calls
    const EquivalenceReport again = equivalent(Model(p), Model(q), 3, 1e-12);
    CHECK(again.witness == rep.witness);
}

TEST_CASE("equivalent with conditional semantics matches filter-based models") {
    const NamedInstance inst = appendix_hmm();
    const Psr& p = std::get<Psr>(inst.model);
    const Umps u(p.sigma, p.ops, p.x0);
    const EquivalenceReport rep =
        equivalent(Model(u), inst.model, 3, 1e-8, CompareSemantics::Conditional, 1, 300);
    CHECK(rep.equivalent);
}

TEST_CASE("appendix HMM random-search evidence: no 2-dim NOOM matches at length 2") {
    // bounded random-search evidence only; the nonexistence claim itself is
    // not machine-checkable
    const NamedInstance inst = appendix_hmm();
    const Distribution want = enumerate_joint(inst.model, 2);
    double best = 1.0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        const Noom candidate = random_noom(2, 2, rng);
        const Distribution got = enumerate_joint(Model(candidate), 2);
        double dev = 0.0;
        for (std::size_t i = 0; i < got.entries.size(); ++i)
            dev = std::max(dev, std::abs(got.entries[i] - want.entries[i]));
        best = std::min(best, dev);
    }
    CHECK(best > 1e-3);
}

TEST_CASE("sample: deterministic single-symbol HMM yields all-zero sequences") {
    const Hmm h(ComplexMatrix::identity(2), ComplexMatrix{{1.0, 1.0}},
                ComplexVector{Complex(1.0, 0.0), Complex(0.0, 0.0)});
    const Sequence s = sample(Model(h), 5, 123);
    for (std::size_t y : s) CHECK(y == 0);
}

TEST_CASE("sample is deterministic given the seed") {
    const Model m = random_model(ModelKind::Hmm, 3, 3, 17);
    CHECK(sample(m, 12, 42) == sample(m, 12, 42));
    CHECK(sample(m, 12, 42) != sample(m, 12, 43));
}

TEST_CASE("sampling frequencies converge to the enumerated distribution (4 sigma)") {
    const NamedInstance inst = appendix_hmm();
    const std::size_t trials = 100000;
    std::size_t hits = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const Sequence s = sample(inst.model, 2, 1000 + t);
        if (s[0] == 0 && s[1] == 0) ++hits;
    }
    const double p = 0.625;
    const double sigma = std::sqrt(p * (1.0 - p) / trials);
    CHECK(std::abs(double(hits) / trials - p) < 4.0 * sigma);
}

TEST_CASE("sampling a raw PSR with negative conditionals raises NegativeConditional") {
    Psr p(ComplexVector{Complex(1.0, 0.0), Complex(1.0, 0.0)},
          {ComplexMatrix{{0.9, 0.0}, {0.0, -0.4}}, ComplexMatrix{{0.1, 0.0}, {0.0, 1.4}}},
          ComplexVector{Complex(0.0, 0.0), Complex(1.0, 0.0)});
    try {
        sample(Model(p), 3, 7);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NegativeConditional);
    }
}
