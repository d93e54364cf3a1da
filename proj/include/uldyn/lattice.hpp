#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uldyn/potentials.hpp"

namespace uldyn {

// ---------------------------------------------------------------------------
// Queried-cell bookkeeping
// ---------------------------------------------------------------------------

// The N cells an algorithm's gradient queries pin down, completed
// deterministically to measure Cx/2 (exactly N of the 2N cells).
struct IntervalIndexSet {
    int N = 0;
    double Cx = 0.0;
    std::vector<int> cells;  // sorted ascending, each in [-N, N-1], size N

    bool contains(int j) const;
    // Free cells (complement within [-N, N-1]), ascending; size N.
    std::vector<int> free_cells() const;
};

// Collects the distinct cells hit by the query positions (positions outside
// [-Cx/2, Cx/2] select nothing), then adds unused cells with the largest
// index until N cells are selected. Throws if the queries already span more
// than N distinct cells (budget violation).
IntervalIndexSet complete_intervals(std::span<const double> query_xs, double Cx,
                                    int N);

// Bits of beta on the free cells (ascending cell order) packed into a mask:
// bit i of the result = beta on the i-th free cell. beta.size() == 2N.
std::uint32_t reduce_index(const BetaIndex& beta, const IntervalIndexSet& J);

// Rebuilds a full bump pattern: bits on J's cells copied from `base`, bits
// on free cells taken from `reduced` (bit i -> i-th free cell).
BetaIndex embed_index(const BetaIndex& base, const IntervalIndexSet& J,
                      std::uint32_t reduced);

// ---------------------------------------------------------------------------
// Symmetric chain decomposition of {0,1}^N
// ---------------------------------------------------------------------------

struct ChainDecomposition {
    int N = 0;
    // Each chain lists masks bottom-up; consecutive elements differ by one
    // set bit, weights run k .. N-k for some k <= N/2.
    std::vector<std::vector<std::uint32_t>> chains;
};

// Bracket-matching construction (1 = opener, 0 = closer): a chain fixes the
// matched pairs and sweeps the unmatched suffix of ones. Exhaustive over all
// 2^N vectors; requires 1 <= N <= 24.
ChainDecomposition scd(int N);

// The full chain through `mask`, bottom-up, via the same matching rule
// (no enumeration).
std::vector<std::uint32_t> chain_of(std::uint32_t mask, int N);

// Chain partner at weight N - k for a mask of weight k: the unique element
// of the same chain with k's mirrored level. For k <= N/2 this is the
// "top completion" (it dominates mask, with N - 2k extra ones); at k = N/2
// it is the identity.
std::uint32_t upsilon(std::uint32_t mask, int N);

// sum_k binom(N,k) (N - 2k)^2 == N 2^N, exact in 64-bit for N <= 30; the
// squared level offsets that weight the per-chain separations. Verified by
// exact integer arithmetic.
bool level_variance_identity_holds(int N);

// ---------------------------------------------------------------------------
// Class experiment: information-equivalence and separation inside a class
// ---------------------------------------------------------------------------

struct ClassExperimentConfig {
    std::string solver = "rmm";  // "em" | "rmm"
    double u = 2.0, ell = 1.0, L = 4.0;
    double Cx = 0.1, Cv = 4.0;
    double xi = 1.0;
    int N = 8;          // query budget; cells = 2N (rmm needs N even)
    // T = 2: the two-sided crossing event has probability ~4% here vs ~5e-5
    // at T = 1, so default-size runs actually exercise the separation leg.
    double T = 2.0;
    int trials = 200;
    int Ns_fine = 1024;  // fine reference resolution
    int spread_samples = 16;
    std::uint64_t seed = 1;
};

struct ClassExperimentReport {
    long pairs_checked = 0;     // equivalence reruns
    long equiv_failures = 0;    // outputs or traces differing bitwise
    long event_hits = 0;        // trials passing the two-sided crossing filter
    long sep_checked = 0;       // separation comparisons on event paths
    long sep_violations = 0;    // |X_T(U1)-X_T(U2)| below 0.9 * floor
    double min_sep_ratio = 0.0; // min observed separation / floor
    double spread_mean = 0.0;   // class-spread statistic over event paths
    double spread_floor = 0.0;  // Cx^4 Cbar^2 xi^2 / N^3
    double spread_const = 0.0;  // spread_mean / spread_floor
    double cbar_value = 0.0;
    double eps_value = 0.0;
};

ClassExperimentReport class_experiment(const ClassExperimentConfig& cfg);

}  // namespace uldyn
