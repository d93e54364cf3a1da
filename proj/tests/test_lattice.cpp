#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "uldyn/lattice.hpp"

using namespace uldyn;

namespace {

std::uint64_t binom(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) /
                                      static_cast<std::uint64_t>(i);
    return r;
}

}  // namespace

TEST_CASE("queried cells complete deterministically to a size-N index set") {
    const double Cx = 0.1;
    const int N = 4;                    // cells -4..3, width Cx/(2N) = 0.0125
    const std::vector<double> qs{0.001, -0.02, 0.5};  // cells 0, -2, (outside)
    const IntervalIndexSet J = complete_intervals(qs, Cx, N);
    CHECK(J.N == N);
    CHECK(J.Cx == Cx);
    CHECK(J.cells == std::vector<int>{-2, 0, 2, 3});  // filled from the top
    CHECK(J.contains(0));
    CHECK(J.contains(-2));
    CHECK_FALSE(J.contains(1));
    CHECK(J.free_cells() == std::vector<int>{-4, -3, -1, 1});

    // Domain edges: -Cx/2 falls in the lowest cell, +Cx/2 in the highest
    // (closed), just outside selects nothing.
    const IntervalIndexSet E =
        complete_intervals(std::vector<double>{-Cx / 2, Cx / 2, Cx / 2 + 1e-9}, Cx, N);
    CHECK(E.contains(-N));
    CHECK(E.contains(N - 1));

    // More than N distinct queried cells is a budget violation.
    CHECK_THROWS(complete_intervals(std::vector<double>{-0.04, 0.001, 0.03}, Cx, 2));
}

TEST_CASE("free-cell bit packing round trips") {
    const IntervalIndexSet J = complete_intervals(std::vector<double>{0.001, -0.02},
                                                  0.1, 4);
    REQUIRE(J.free_cells() == std::vector<int>{-4, -3, -1, 1});
    // Free cells -4,-3,-1,1 live at beta slots 0,1,3,5.
    BetaIndex beta(8, 0);
    beta[0] = 1;
    beta[3] = 1;
    beta[5] = 1;
    CHECK(reduce_index(beta, J) == 0b1101u);

    std::mt19937_64 rng(42);
    for (int it = 0; it < 50; ++it) {
        BetaIndex base(8);
        for (auto& b : base) b = static_cast<std::uint8_t>(rng() & 1u);
        const auto red = static_cast<std::uint32_t>(rng() & 0xFu);
        const BetaIndex full = embed_index(base, J, red);
        CHECK(reduce_index(full, J) == red);
        // Bits on J's own cells come from base (cells -2,0,2,3 = slots 2,4,6,7).
        for (int slot : {2, 4, 6, 7}) CHECK(full[static_cast<std::size_t>(slot)] ==
                                            base[static_cast<std::size_t>(slot)]);
    }
}

TEST_CASE("chain decomposition partitions the cube into symmetric chains") {
    for (int N = 1; N <= 10; ++N) {
        const ChainDecomposition dec = scd(N);
        CHECK(dec.N == N);
        CHECK(dec.chains.size() == binom(N, N / 2));

        std::set<std::uint32_t> seen;
        for (const auto& ch : dec.chains) {
            REQUIRE(!ch.empty());
            const int k = std::popcount(ch.front());
            const int top = std::popcount(ch.back());
            CHECK(top == N - k);                       // symmetric about N/2
            CHECK(ch.size() == static_cast<std::size_t>(N - 2 * k + 1));
            for (std::size_t i = 0; i < ch.size(); ++i) {
                CHECK(std::popcount(ch[i]) == k + static_cast<int>(i));
                if (i > 0) CHECK((ch[i] & ch[i - 1]) == ch[i - 1]);  // adds one bit
                CHECK(seen.insert(ch[i]).second);       // no mask twice
            }
        }
        CHECK(seen.size() == (1ull << N));              // every mask covered

        // chain_of reproduces the containing chain without enumeration.
        for (const auto& ch : dec.chains)
            for (const std::uint32_t m : ch) CHECK(chain_of(m, N) == ch);
    }
    CHECK_THROWS(scd(0));
    CHECK_THROWS(scd(25));
}

TEST_CASE("level mirror on chains: dominance, involution, fixed points") {
    for (int N = 2; N <= 10; ++N) {
        for (std::uint32_t m = 0; m < (1u << N); ++m) {
            const int k = std::popcount(m);
            const std::uint32_t up = upsilon(m, N);
            CHECK(std::popcount(up) == N - k);
            CHECK(upsilon(up, N) == m);  // involution across mirrored levels
            if (k <= N - k) {
                CHECK((up & m) == m);    // top completion dominates
                CHECK(std::popcount(up & ~m) == N - 2 * k);
            } else {
                CHECK((up & m) == up);
            }
            if (2 * k == N) CHECK(up == m);
            // Same chain.
            const auto ch = chain_of(m, N);
            CHECK(std::find(ch.begin(), ch.end(), up) != ch.end());
        }
    }
}

TEST_CASE("squared level offsets sum to N 2^N at every N up to 30") {
    for (int N = 1; N <= 30; ++N) CHECK(level_variance_identity_holds(N));
}

TEST_CASE("class experiment: rerun equivalence and in-class separation") {
    ClassExperimentConfig cfg;
    cfg.solver = "rmm";
    cfg.N = 4;
    cfg.trials = 60;
    cfg.Ns_fine = 256;
    cfg.seed = 2;
    const ClassExperimentReport rep = class_experiment(cfg);
    CHECK(rep.pairs_checked == cfg.trials);
    CHECK(rep.equiv_failures == 0);
    CHECK(rep.event_hits > 0);  // T = 2 default keeps the event a few percent
    CHECK(rep.sep_violations == 0);
    if (rep.sep_checked > 0) CHECK(rep.min_sep_ratio >= 0.9);
    CHECK(rep.spread_floor ==
          doctest::Approx(std::pow(cfg.Cx, 4) * rep.cbar_value * rep.cbar_value *
                          cfg.xi * cfg.xi / std::pow(cfg.N, 3))
              .epsilon(1e-12));
    if (rep.event_hits > 0) {
        CHECK(rep.spread_mean > 0.0);
        CHECK(rep.spread_const == doctest::Approx(rep.spread_mean / rep.spread_floor)
                                      .epsilon(1e-12));
    }

    ClassExperimentConfig em = cfg;
    em.solver = "em";
    em.trials = 30;
    const ClassExperimentReport rep2 = class_experiment(em);
    CHECK(rep2.equiv_failures == 0);
    CHECK(rep2.pairs_checked == em.trials);
}
