#include "uldyn/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "uldyn/analysis.hpp"
#include "uldyn/dynamics.hpp"
#include "uldyn/noise.hpp"
#include "uldyn/rng.hpp"

namespace uldyn {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

// ---------------------------------------------------------------------------
// IntervalIndexSet
// ---------------------------------------------------------------------------

bool IntervalIndexSet::contains(int j) const {
    return std::binary_search(cells.begin(), cells.end(), j);
}

std::vector<int> IntervalIndexSet::free_cells() const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(N));
    for (int j = -N; j < N; ++j)
        if (!contains(j)) out.push_back(j);
    return out;
}

IntervalIndexSet complete_intervals(std::span<const double> query_xs, double Cx,
                                    int N) {
    require(Cx > 0.0 && N >= 1, "complete_intervals: need Cx > 0, N >= 1");
    std::vector<char> used(static_cast<std::size_t>(2 * N), 0);
    int count = 0;
    for (double x : query_xs) {
        const int j = cell_of(x, Cx, N);
        if (j < -N) continue;  // query outside the family's support: no cell pinned
        if (!used[static_cast<std::size_t>(j + N)]) {
            used[static_cast<std::size_t>(j + N)] = 1;
            ++count;
        }
    }
    require(count <= N, "complete_intervals: queries span more than N cells");
    // Deterministic completion: unused cell with the largest index first.
    for (int j = N - 1; j >= -N && count < N; --j) {
        if (!used[static_cast<std::size_t>(j + N)]) {
            used[static_cast<std::size_t>(j + N)] = 1;
            ++count;
        }
    }
    IntervalIndexSet J;
    J.N = N;
    J.Cx = Cx;
    J.cells.reserve(static_cast<std::size_t>(N));
    for (int j = -N; j < N; ++j)
        if (used[static_cast<std::size_t>(j + N)]) J.cells.push_back(j);
    return J;
}

std::uint32_t reduce_index(const BetaIndex& beta, const IntervalIndexSet& J) {
    require(beta.size() == static_cast<std::size_t>(2 * J.N),
            "reduce_index: beta size must be 2N");
    const auto free = J.free_cells();
    std::uint32_t mask = 0;
    for (std::size_t i = 0; i < free.size(); ++i)
        if (beta[static_cast<std::size_t>(free[i] + J.N)]) mask |= (1u << i);
    return mask;
}

BetaIndex embed_index(const BetaIndex& base, const IntervalIndexSet& J,
                      std::uint32_t reduced) {
    require(base.size() == static_cast<std::size_t>(2 * J.N),
            "embed_index: base size must be 2N");
    BetaIndex out = base;
    const auto free = J.free_cells();
    for (std::size_t i = 0; i < free.size(); ++i)
        out[static_cast<std::size_t>(free[i] + J.N)] =
            (reduced >> i) & 1u ? 1 : 0;
    return out;
}

// ---------------------------------------------------------------------------
// Symmetric chain decomposition
// ---------------------------------------------------------------------------

namespace {

// Bracket matching: bit i of mask read left (i=0) to right (i=N-1), 1 opens,
// 0 closes. Returns the unmatched positions, ascending; within `mask` these
// always read as a block of zeros followed by a block of ones.
std::vector<int> unmatched_positions(std::uint32_t mask, int N) {
    std::vector<int> stack, zeros;
    for (int i = 0; i < N; ++i) {
        if ((mask >> i) & 1u) {
            stack.push_back(i);
        } else if (!stack.empty()) {
            stack.pop_back();
        } else {
            zeros.push_back(i);
        }
    }
    zeros.insert(zeros.end(), stack.begin(), stack.end());
    return zeros;  // unmatched zeros (ascending) then unmatched ones (ascending)
}

std::uint32_t clear_positions(std::uint32_t mask, const std::vector<int>& pos) {
    for (int i : pos) mask &= ~(1u << i);
    return mask;
}

}  // namespace

std::vector<std::uint32_t> chain_of(std::uint32_t mask, int N) {
    require(N >= 1 && N <= 24, "chain_of: need 1 <= N <= 24");
    require(N == 32 || mask < (1u << N), "chain_of: mask has bits above N");
    const auto un = unmatched_positions(mask, N);
    const std::uint32_t base = clear_positions(mask, un);
    std::vector<std::uint32_t> chain;
    chain.reserve(un.size() + 1);
    std::uint32_t cur = base;
    chain.push_back(cur);
    // Raise the unmatched suffix one position at a time, last position first.
    for (std::size_t c = 0; c < un.size(); ++c) {
        cur |= (1u << un[un.size() - 1 - c]);
        chain.push_back(cur);
    }
    return chain;
}

ChainDecomposition scd(int N) {
    require(N >= 1 && N <= 24, "scd: need 1 <= N <= 24 (exhaustive regime)");
    ChainDecomposition dec;
    dec.N = N;
    const std::uint32_t total = 1u << N;
    for (std::uint32_t m = 0; m < total; ++m) {
        const auto un = unmatched_positions(m, N);
        if (clear_positions(m, un) == m)  // m is its chain's bottom element
            dec.chains.push_back(chain_of(m, N));
    }
    return dec;
}

std::uint32_t upsilon(std::uint32_t mask, int N) {
    require(N >= 1 && N <= 24, "upsilon: need 1 <= N <= 24");
    const auto un = unmatched_positions(mask, N);
    const std::uint32_t base = clear_positions(mask, un);
    const int m = static_cast<int>(un.size());
    const int ones = std::popcount(mask) - std::popcount(base);
    // Chain partner at the weight mirrored about N/2: carries m - ones
    // unmatched ones (for weight k <= N/2 this dominates `mask`).
    std::uint32_t out = base;
    for (int c = 0; c < m - ones; ++c) out |= (1u << un[static_cast<std::size_t>(m - 1 - c)]);
    return out;
}

bool level_variance_identity_holds(int N) {
    require(N >= 1 && N <= 30, "level_variance_identity_holds: need 1 <= N <= 30");
    // Pascal row in exact 64-bit arithmetic.
    std::vector<std::uint64_t> binom(static_cast<std::size_t>(N) + 1, 0);
    binom[0] = 1;
    for (int n = 1; n <= N; ++n)
        for (int k = n; k >= 1; --k) binom[static_cast<std::size_t>(k)] += binom[static_cast<std::size_t>(k - 1)];
    std::uint64_t lhs = 0;
    for (int k = 0; k <= N; ++k) {
        const std::int64_t off = static_cast<std::int64_t>(N) - 2 * k;
        lhs += binom[static_cast<std::size_t>(k)] * static_cast<std::uint64_t>(off * off);
    }
    const std::uint64_t rhs = static_cast<std::uint64_t>(N) << N;
    return lhs == rhs;
}

// ---------------------------------------------------------------------------
// Class experiment
// ---------------------------------------------------------------------------

ClassExperimentReport class_experiment(const ClassExperimentConfig& cfg) {
    require(cfg.N >= 1 && cfg.N <= 24, "class_experiment: need 1 <= N <= 24");
    const bool use_rmm = cfg.solver == "rmm";
    require(use_rmm || cfg.solver == "em", "class_experiment: solver must be em or rmm");
    require(!use_rmm || cfg.N % 2 == 0,
            "class_experiment: rmm issues two queries per step, N must be even");
    const int Ns = use_rmm ? cfg.N / 2 : cfg.N;
    require(cfg.Ns_fine >= 4 * Ns, "class_experiment: Ns_fine too coarse");

    const double eps = cfg.Cx * cfg.xi / (8.0 * cfg.N);
    const double ebar = epsilon_bar(cfg.Cx, cfg.Cv, cfg.u, cfg.L);
    require(eps < ebar,
            "class_experiment: bump amplitude exceeds the event-stability budget");
    const double uR = cfg.u + cfg.xi;  // certified upper curvature of every member
    const double cb = cbar(cfg.Cx, cfg.Cv, uR, cfg.L, cfg.T);

    ClassExperimentReport rep;
    rep.cbar_value = cb;
    rep.eps_value = eps;
    rep.min_sep_ratio = std::numeric_limits<double>::infinity();

    const double s = std::sqrt(1.0 - cfg.u / cfg.L);
    ExponentSet thetas{1.0 - s, 1.0 + s};

    const int cells = 2 * cfg.N;
    double spread_sum = 0.0;
    long spread_trials = 0;

    for (int trial = 0; trial < cfg.trials; ++trial) {
        // Randomness for this trial: bump pattern bits, then the partner's
        // free bits, then the spread sample masks — one stream, fixed order.
        auto idx_eng = make_engine(RngSpec{cfg.seed, static_cast<std::uint64_t>(trial),
                                           stream::index});
        std::bernoulli_distribution coin(0.5);
        BetaIndex beta(static_cast<std::size_t>(cells), 0);
        for (auto& b : beta) b = coin(idx_eng) ? 1 : 0;

        std::vector<double> etas;
        if (use_rmm)
            etas = draw_midpoints(Ns, RngSpec{cfg.seed, static_cast<std::uint64_t>(trial),
                                              stream::midpoint});
        const auto etas_ref = draw_midpoints(
            cfg.Ns_fine,
            RngSpec{cfg.seed, static_cast<std::uint64_t>(trial), stream::ref_midpoint});

        GridBuilder gb(cfg.T);
        gb.nodes(Ns).nodes(cfg.Ns_fine).midpoints(cfg.Ns_fine, etas_ref);
        if (use_rmm) gb.midpoints(Ns, etas);
        const TimeGrid grid = gb.build();
        const NoiseRealization nr = sample_noise(
            grid, thetas, 1,
            RngSpec{cfg.seed, static_cast<std::uint64_t>(trial), stream::noise});

        const Potential U1 = adversarial(cfg.u, cfg.Cx, cfg.N, cfg.xi, beta,
                                         cfg.ell, cfg.L);
        SolveOptions topt;
        topt.record_trace = true;
        const SolverRun run1 = use_rmm
                                   ? rmm_integrate(U1, cfg.L, Ns, nr, etas, topt)
                                   : em_integrate(U1, cfg.L, Ns, nr, topt);

        std::vector<double> qs;
        qs.reserve(run1.trace.size());
        for (const auto& q : run1.trace) qs.push_back(q.x(0));
        const IntervalIndexSet J = complete_intervals(qs, cfg.Cx, cfg.N);

        // Equivalent member: same bits on J, fresh bits elsewhere.
        std::uint32_t free_bits = 0;
        for (int i = 0; i < cfg.N; ++i)
            if (coin(idx_eng)) free_bits |= (1u << i);
        const BetaIndex beta2 = embed_index(beta, J, free_bits);
        const Potential U2 = adversarial(cfg.u, cfg.Cx, cfg.N, cfg.xi, beta2,
                                         cfg.ell, cfg.L);
        const SolverRun run2 = use_rmm
                                   ? rmm_integrate(U2, cfg.L, Ns, nr, etas, topt)
                                   : em_integrate(U2, cfg.L, Ns, nr, topt);
        ++rep.pairs_checked;
        bool same = run1.state.x(0) == run2.state.x(0) &&
                    run1.state.v(0) == run2.state.v(0) &&
                    run1.trace.size() == run2.trace.size();
        if (same)
            for (std::size_t i = 0; i < run1.trace.size(); ++i)
                if (run1.trace[i].x(0) != run2.trace[i].x(0) ||
                    run1.trace[i].t != run2.trace[i].t) {
                    same = false;
                    break;
                }
        if (!same) ++rep.equiv_failures;

        // Two-sided crossing filter through the exact quadratic proxy.
        double supx = -std::numeric_limits<double>::infinity();
        double infx = std::numeric_limits<double>::infinity();
        double supv = 0.0;
        SolveOptions eopt;
        eopt.observer = [&](double, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
            supx = std::max(supx, x(0));
            infx = std::min(infx, x(0));
            supv = std::max(supv, std::abs(v(0)));
        };
        exact_quadratic(cfg.u, cfg.L, nr, {}, eopt);
        const bool hit = supx >= 2.0 * cfg.Cx && infx <= -2.0 * cfg.Cx &&
                         supv <= cfg.Cv / 2.0;
        if (!hit) continue;
        ++rep.event_hits;

        const std::uint32_t red = reduce_index(beta, J);
        const std::uint32_t mirror = upsilon(red, cfg.N);
        const auto fine = [&](std::uint32_t reduced) {
            const BetaIndex bb = embed_index(beta, J, reduced);
            const Potential UU = adversarial(cfg.u, cfg.Cx, cfg.N, cfg.xi, bb,
                                             cfg.ell, cfg.L);
            return rmm_integrate(UU, cfg.L, cfg.Ns_fine, nr, etas_ref).state.x(0);
        };
        if (mirror != red) {
            const bool red_low = std::popcount(red) < std::popcount(mirror);
            const std::uint32_t small = red_low ? red : mirror;
            const std::uint32_t big = red_low ? mirror : red;
            const int diff = std::popcount(big) - std::popcount(small);
            const double floor = cb * eps * diff * cfg.Cx / (4.0 * cfg.N);
            const double sep = fine(small) - fine(big);  // more bumps push left
            ++rep.sep_checked;
            const double ratio = sep / floor;
            rep.min_sep_ratio = std::min(rep.min_sep_ratio, ratio);
            if (ratio < 0.9) ++rep.sep_violations;
        }

        // Class-spread statistic around the (common) solver output.
        const double A = run1.state.x(0);
        double acc = 0.0;
        int m = 0;
        const std::uint32_t full = cfg.N == 32 ? ~0u : ((1u << cfg.N) - 1u);
        for (int i = 0; i < cfg.spread_samples; ++i) {
            std::uint32_t r = 0;
            for (int b = 0; b < cfg.N; ++b)
                if (coin(idx_eng)) r |= (1u << b);
            r &= full;
            const double xT = fine(r);
            acc += (xT - A) * (xT - A);
            ++m;
        }
        spread_sum += acc / m;
        ++spread_trials;
    }

    if (spread_trials > 0) rep.spread_mean = spread_sum / spread_trials;
    rep.spread_floor = std::pow(cfg.Cx, 4) * cb * cb * cfg.xi * cfg.xi /
                       std::pow(static_cast<double>(cfg.N), 3);
    rep.spread_const = rep.spread_floor > 0.0 ? rep.spread_mean / rep.spread_floor : 0.0;
    if (!std::isfinite(rep.min_sep_ratio)) rep.min_sep_ratio = 0.0;
    return rep;
}

}  // namespace uldyn
