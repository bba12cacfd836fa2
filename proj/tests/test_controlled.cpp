#include <doctest.h>

#include <useq/controlled.hpp>
#include <useq/gallery.hpp>
#include <useq/oracle.hpp>

#include "test_helpers.hpp"

using namespace useq;

namespace {

AoSequence interleave(const Sequence& actions, const Sequence& obs) {
    AoSequence seq;
    for (std::size_t t = 0; t < actions.size(); ++t) seq.push_back({actions[t], obs[t]});
    return seq;
}

}  // namespace

TEST_CASE("single-action POMDP reduces to the underlying HMM joint") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const Pomdp p = random_pomdp(2, 1, 2, seed);
        const Hmm h = p.action_hmm(0);
        for (std::size_t idx = 0; idx < 8; ++idx) {
            const Sequence obs = Distribution::sequence_at(idx, 2, 3);
            const AoSequence seq = interleave({0, 0, 0}, obs);
            CHECK(controlled_joint(p, seq) == doctest::Approx(joint(h, obs).value).epsilon(1e-12));
        }
    }
}

TEST_CASE("single-action IO-HQMM reduces to the HQMM joint") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const IoHqmm m = random_io_hqmm(2, 1, 2, seed);
        const Hqmm h = m.action_hqmm(0);
        for (std::size_t idx = 0; idx < 8; ++idx) {
            const Sequence obs = Distribution::sequence_at(idx, 2, 3);
            const AoSequence seq = interleave({0, 0, 0}, obs);
            CHECK(controlled_joint(m, seq) == doctest::Approx(joint(h, obs).value).epsilon(1e-12));
        }
    }
}

TEST_CASE("QOMDP trace formula equals the vectorized Liouville formula") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Qomdp q = random_qomdp(2, 2, 2, seed);
        for (std::size_t aidx = 0; aidx < 8; ++aidx) {
            const Sequence actions = Distribution::sequence_at(aidx, 2, 3);
            for (std::size_t oidx = 0; oidx < 8; ++oidx) {
                const Sequence obs = Distribution::sequence_at(oidx, 2, 3);
                const AoSequence seq = interleave(actions, obs);
                CHECK(std::abs(controlled_joint(q, seq) - controlled_joint_vectorized(q, seq)) < 1e-10);
            }
        }
    }
}

TEST_CASE("controlled joints sum to one over observation sequences for fixed actions") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Pomdp p = random_pomdp(3, 2, 2, seed);
        const IoHqmm m = random_io_hqmm(2, 2, 2, seed);
        const Qomdp q = random_qomdp(2, 2, 2, seed);
        for (std::size_t aidx = 0; aidx < 4; ++aidx) {
            const Sequence actions = Distribution::sequence_at(aidx, 2, 2);
            double sp = 0.0, sm = 0.0, sq = 0.0;
            for (std::size_t oidx = 0; oidx < 4; ++oidx) {
                const Sequence obs = Distribution::sequence_at(oidx, 2, 2);
                const AoSequence seq = interleave(actions, obs);
                sp += controlled_joint(p, seq);
                sm += controlled_joint(m, seq);
                sq += controlled_joint(q, seq);
            }
            CHECK(sp == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(sm == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(sq == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("POMDP with identity transitions filters on emissions only") {
    // two actions sharing the identity transition and one emission matrix:
    // the action index is inert
    const ComplexMatrix emis{{0.7, 0.2}, {0.3, 0.8}};
    const Pomdp p({ComplexMatrix::identity(2), ComplexMatrix::identity(2)}, {emis, emis},
                  ComplexVector{Complex(0.5, 0.0), Complex(0.5, 0.0)});
    FilterState a = controlled_filter_init(p);
    FilterState b = controlled_filter_init(p);
    a = controlled_filter(p, a, 0, 1);
    b = controlled_filter(p, b, 1, 1);
    CHECK(testutil::max_abs_diff(a.state, b.state) == 0.0);
}

TEST_CASE("unitary QOMDP channels preserve purity along trajectories") {
    // one Kraus op per (a, y) built from a 1-observation orthonormal stack is
    // unitary
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        std::vector<std::vector<ComplexMatrix>> kraus;
        for (std::size_t a = 0; a < 2; ++a) kraus.push_back(detail::random_kraus_stack(2, 1, rng));
        // pure initial state
        const ComplexVector psi = detail::gaussian_unit_vector(2, rng);
        ComplexMatrix rho(2, 2);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) rho(i, j) = psi[i] * std::conj(psi[j]);
        const Qomdp q({{kraus[0]}, {kraus[1]}}, rho);

        FilterState st = controlled_filter_init(q);
        Rng walk(seed + 100);
        for (int t = 0; t < 6; ++t) {
            const std::size_t a = walk.next() % 2;
            st = controlled_filter(q, st, a, 0);
            const HermitianEigen eig = hermitian_eigen(unvectorize(st.state, 2, 2), 1e-8);
            CHECK(eig.eigenvalues.front() < 1e-9);  // second eigenvalue vanishes: rank 1
            CHECK(eig.eigenvalues.back() == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("qomdp_to_iohqmm preserves joints and filtering trajectories") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const Qomdp q = random_qomdp(2, 2, 2, seed);
        const IoHqmm m = qomdp_to_iohqmm(q);
        // joints over all interleaved sequences of length <= 3
        for (std::size_t len = 1; len <= 3; ++len) {
            const std::size_t n_actions = 1ull << len, n_obs = 1ull << len;
            for (std::size_t aidx = 0; aidx < n_actions; ++aidx)
                for (std::size_t oidx = 0; oidx < n_obs; ++oidx) {
                    const AoSequence seq = interleave(Distribution::sequence_at(aidx, 2, len),
                                                      Distribution::sequence_at(oidx, 2, len));
                    CHECK(std::abs(controlled_joint(q, seq) - controlled_joint(m, seq)) < 1e-12);
                }
        }
        // filtered density matrices along a random trajectory
        FilterState sq = controlled_filter_init(q);
        FilterState sm = controlled_filter_init(m);
        Rng walk(seed + 31);
        for (int t = 0; t < 5; ++t) {
            const std::size_t a = walk.next() % 2;
            std::size_t y = walk.next() % 2;
            try {
                sq = controlled_filter(q, sq, a, y);
            } catch (const Error&) {
                y = 1 - y;
                sq = controlled_filter(q, sq, a, y);
            }
            sm = controlled_filter(m, sm, a, y);
            CHECK(testutil::max_abs_diff(sq.state, sm.state) < 1e-11);
        }
    }
}

TEST_CASE("identity-channel QOMDP embeds to the identity IO-HQMM") {
    const Qomdp q({{ComplexMatrix::identity(2)}}, ComplexMatrix{{0.5, 0.0}, {0.0, 0.5}});
    const IoHqmm m = qomdp_to_iohqmm(q);
    CHECK(controlled_joint(m, {{0, 0}, {0, 0}}) == doctest::Approx(1.0));
}

TEST_CASE("pomdp_to_psr_per_policy: constant action equals hmm_to_psr") {
    const Pomdp p = random_pomdp(2, 2, 2, 5);
    const PolicyInducedPsr lift = pomdp_to_psr_per_policy(p, {1, 1, 1});
    REQUIRE(lift.stationary.has_value());
    const Psr direct = hmm_to_psr(p.action_hmm(1));
    for (std::size_t y = 0; y < 2; ++y)
        CHECK(testutil::max_abs_diff(lift.stationary->ops[y], direct.ops[y]) == 0.0);
    // and the banks agree with controlled_joint
    for (std::size_t idx = 0; idx < 8; ++idx) {
        const Sequence obs = Distribution::sequence_at(idx, 2, 3);
        CHECK(lift.joint(obs) ==
              doctest::Approx(controlled_joint(p, interleave({1, 1, 1}, obs))).epsilon(1e-12));
    }
}

TEST_CASE("pomdp_to_psr_per_policy: alternating actions match controlled_joint") {
    const Pomdp p = random_pomdp(2, 2, 2, 8);
    const std::vector<std::size_t> actions = {0, 1, 0};
    const PolicyInducedPsr lift = pomdp_to_psr_per_policy(p, actions);
    CHECK_FALSE(lift.stationary.has_value());
    for (std::size_t idx = 0; idx < 8; ++idx) {
        const Sequence obs = Distribution::sequence_at(idx, 2, 3);
        CHECK(lift.joint(obs) ==
              doctest::Approx(controlled_joint(p, interleave({0, 1, 0}, obs))).epsilon(1e-12));
    }
}

TEST_CASE("pomdp_to_psr_per_policy rejects an empty action list") {
    const Pomdp p = random_pomdp(2, 2, 2, 1);
    CHECK_THROWS_AS(pomdp_to_psr_per_policy(p, {}), Error);
}

TEST_CASE("single-action QOMDP matches the HQMM filter of the embedded model") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Qomdp q = random_qomdp(2, 1, 2, seed);
        const IoHqmm io = qomdp_to_iohqmm(q);
        const Hqmm h = io.action_hqmm(0);
        FilterState sq = controlled_filter_init(q);
        FilterState sh = filter_init(h);
        Rng walk(seed);
        for (int t = 0; t < 5; ++t) {
            std::size_t y = walk.next() % 2;
            try {
                sq = controlled_filter(q, sq, 0, y);
            } catch (const Error&) {
                y = 1 - y;
                sq = controlled_filter(q, sq, 0, y);
            }
            sh = filter_step(h, sh, y);
            CHECK(testutil::max_abs_diff(sq.state, sh.state) < 1e-11);
        }
    }
}
