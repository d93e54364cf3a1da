#include <doctest.h>

#include <atomic>
#include <cmath>
#include <numeric>
#include <vector>

#include "uldyn/analysis.hpp"

using namespace uldyn;

TEST_CASE("solver names parse and round trip") {
    CHECK(parse_solver("em") == SolverKind::em);
    CHECK(parse_solver("rmm") == SolverKind::rmm);
    CHECK_THROWS(parse_solver("heun"));
    CHECK(parse_solver(solver_name(SolverKind::em)) == SolverKind::em);
    CHECK(parse_solver(solver_name(SolverKind::rmm)) == SolverKind::rmm);
}

TEST_CASE("parallel trial driver covers every slot once, any worker count") {
    const int trials = 101;
    for (int workers : {1, 3, 8}) {
        std::vector<int> slot(trials, -1);
        std::atomic<int> calls{0};
        parallel_trials(trials, workers, [&](int t) {
            slot[static_cast<std::size_t>(t)] = t * t;
            ++calls;
        });
        CHECK(calls.load() == trials);
        for (int t = 0; t < trials; ++t) CHECK(slot[static_cast<std::size_t>(t)] == t * t);
    }
}

TEST_CASE("log-log fit recovers a synthetic power law") {
    ErrorCurve c;
    for (int Ns : {8, 16, 32, 64}) {
        ErrorPoint p;
        p.Ns = Ns;
        const double rmse = 3.0 * std::pow(Ns, -1.5);
        p.mse = rmse * rmse;
        p.se = 0.0;
        c.pts.push_back(p);
    }
    FitResult f = fit_order(c);
    CHECK(f.n_used == 4);
    CHECK(f.slope == doctest::Approx(-1.5).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));

    // Points within 10x of the reference floor are contaminated (> 1% of the
    // mse) and must be dropped from the fit.
    c.ref_floor = 0.2 * 3.0 * std::pow(64, -1.5);
    f = fit_order(c);
    CHECK(f.n_used == 3);
    CHECK(f.slope == doctest::Approx(-1.5).epsilon(1e-12));

    // Zero-mse points never enter.
    c.ref_floor = 0.0;
    ErrorPoint z;
    z.Ns = 128;
    z.mse = 0.0;
    c.pts.push_back(z);
    f = fit_order(c);
    CHECK(f.n_used == 4);
}

TEST_CASE("strong error shrinks under refinement for both integrators") {
    for (SolverKind s : {SolverKind::em, SolverKind::rmm}) {
        StrongErrorConfig cfg;
        cfg.solver = s;
        cfg.L = 4.0;
        cfg.T = 1.0;
        cfg.Ns_list = {8, 16, 32};
        cfg.trials = 60;
        cfg.seed = 7;
        const ErrorCurve c = strong_error(cfg, quadratic(1.0));
        REQUIRE(c.pts.size() == 3);
        CHECK(c.ref_floor == 0.0);  // quadratic reference is the closed form
        CHECK(c.solver == solver_name(s));
        CHECK(c.pts[0].mse > c.pts[1].mse);
        CHECK(c.pts[1].mse > c.pts[2].mse);
        for (const auto& p : c.pts) CHECK(p.se > 0.0);
    }
}

TEST_CASE("error ratio across dimensions tracks sqrt(d)") {
    const std::vector<int> dl{1, 4};
    const DimScalingResult r =
        dimension_scaling(1.0, 4.0, 1.0, 32, dl, 400, SolverKind::rmm, 11, 2);
    REQUIRE(r.ratio.size() == 2);
    CHECK(r.ratio[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.ratio[1] > 1.5);
    CHECK(r.ratio[1] < 2.5);
}

TEST_CASE("transient covariance quadrature agrees with the closed form") {
    for (auto [u, L, T] : {std::tuple{1.0, 4.0, 1.0}, std::tuple{2.0, 4.0, 2.0},
                           std::tuple{3.999, 4.0, 0.7}, std::tuple{0.5, 8.0, 1.3}}) {
        const Eigen::Matrix2d q = transient_covariance_quadrature(u, L, T);
        const Eigen::Matrix2d e = exact_moments(u, L, T).cov;
        CHECK((q - e).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("moment propagation error decays at third order in the step") {
    const std::vector<double> hs{0.125, 0.0625, 0.03125, 0.015625};
    const WeakOrderResult r = weak_error_order(1.0, 4.0, 1.0, hs);
    REQUIRE(r.err_norm.size() == hs.size());
    for (std::size_t i = 1; i < hs.size(); ++i)
        CHECK(r.err_norm[i] < r.err_norm[i - 1]);
    CHECK(r.worst_slope > 2.5);
    CHECK(r.slope_vv > 2.5);
    CHECK(r.slope_vv < 3.5);
}

TEST_CASE("Wilson interval reference values") {
    double lo = -1.0, hi = -1.0;
    wilson_interval(5, 100, lo, hi);
    CHECK(lo == doctest::Approx(0.021543679154367959).epsilon(1e-12));
    CHECK(hi == doctest::Approx(0.11175046923191913).epsilon(1e-12));
    wilson_interval(0, 50, lo, hi);
    CHECK(lo == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(hi == doctest::Approx(0.071347599133358724).epsilon(1e-12));
    wilson_interval(50, 50, lo, hi);
    CHECK(lo == doctest::Approx(0.92865240086664136).epsilon(1e-12));
    CHECK(hi == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("crossing probability estimator") {
    // Travel budget: covering 6 Cx at speed Cv/2 needs 12 Cx / Cv > T units
    // of time, so the event is impossible and no sampling happens.
    const PEstimate f = estimate_P(1.0, 1.0, 2.0, 4.0, 1.0, 1000, 64, 5, 1);
    CHECK(f.forbidden);
    CHECK(f.p == 0.0);
    CHECK(f.hits == 0);

    const PEstimate e = estimate_P(0.1, 4.0, 2.0, 4.0, 2.0, 500, 256, 5, 2);
    CHECK_FALSE(e.forbidden);
    CHECK(e.trials == 500);
    CHECK(e.hits > 0);
    CHECK(e.p == doctest::Approx(double(e.hits) / 500.0).epsilon(1e-15));
    CHECK(e.lo <= e.p);
    CHECK(e.p <= e.hi);
    CHECK(e.hi <= 1.0);
}

TEST_CASE("rate prefactors") {
    // min{ 2L(1-s)s Cx, L s Cv/2 } with s = sqrt(1 - u/L).
    CHECK(epsilon_bar(1.0, 4.0, 0.75, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
    const double s = std::sqrt(0.5);
    CHECK(epsilon_bar(0.1, 4.0, 2.0, 4.0) ==
          doctest::Approx(std::min(2.0 * 4.0 * (1.0 - s) * s * 0.1, 4.0 * s * 2.0))
              .epsilon(1e-14));
    CHECK(upper_rate_constant(1.0, 4.0, 1.0) ==
          doctest::Approx(std::sqrt(1.25)).epsilon(1e-14));
    CHECK(upper_rate_constant(2.0, 8.0, 2.0) ==
          doctest::Approx(std::sqrt(8.0 / 2.0 + 16.0 / 8.0)).epsilon(1e-14));
    // Defective limit is the continuous extension.
    CHECK(cbar(1.0, 1.0, 1.0, 1.0, 1.5) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(cbar(1.0, 1.0, 1.0 - 1e-12, 1.0, 1.5) ==
          doctest::Approx(cbar(1.0, 1.0, 1.0, 1.0, 1.5)).epsilon(1e-6));
    CHECK(cbar(0.1, 4.0, 3.0, 4.0, 2.0) > 0.0);
}

TEST_CASE("lower-rate search reports self-consistent table entries") {
    const double ell = 1.0, L = 4.0, T = 2.0;
    const std::vector<double> us{2.0}, cxs{0.1}, cvs{4.0}, urs{3.0};
    const ClowResult r = clow_search(ell, L, T, us, cxs, cvs, urs, 800, 256, 1, 2);
    REQUIRE(r.table.size() == 1);
    const ClowPoint& p = r.table[0];
    CHECK(p.u == 2.0);
    const double c = cbar(p.Cx, p.Cv, p.uR, L, T);
    const double scale = p.Cx * p.Cx * std::min(p.u - ell, p.uR - p.u) * c;
    CHECK(p.value == doctest::Approx(std::sqrt(p.P.p) * scale).epsilon(1e-12));
    CHECK(p.lo == doctest::Approx(std::sqrt(p.P.lo) * scale).epsilon(1e-12));
    CHECK(p.hi == doctest::Approx(std::sqrt(p.P.hi) * scale).epsilon(1e-12));
    CHECK(r.best.value == p.value);
}

TEST_CASE("bump perturbations respect the coupled displacement bounds") {
    const PerturbationReport rep =
        check_perturbation(2.0, 1.0, 4.0, 1.0, 0.1, 4, 1.0, 2, 50, 256, 3, 2);
    CHECK(rep.pairs == 100);
    CHECK(rep.violations == 0);
    CHECK(rep.eps > 0.0);
    CHECK(rep.bound_x > 0.0);
    CHECK(rep.bound_v > 0.0);
    CHECK(rep.max_ratio_x <= 1.0 + rep.slack);
    CHECK(rep.max_ratio_v <= 1.0 + rep.slack);
}

TEST_CASE("gradient-dominated potential traps the coupled difference") {
    // grad U1 = 2x + 1/2 >= 2x = grad U2 everywhere: the coupled gap
    // X(U1) - X(U2) can never turn positive.
    Potential shifted;
    shifted.d = 1;
    shifted.grad = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g(0) = 2.0 * x(0) + 0.5;
    };
    shifted.hess_lo = 2.0;
    shifted.hess_hi = 2.0;
    shifted.minimizer = Eigen::VectorXd::Constant(1, -0.25);
    shifted.name = "shifted-quadratic";

    const TrappingReport rep =
        check_trapping(shifted, quadratic(2.0), 4.0, 1.0, 100, 256, 9, 2);
    CHECK(rep.hypothesis_ok);
    CHECK(rep.violations == 0);
    CHECK(rep.max_pos_dx <= rep.tol);
    CHECK(rep.max_pos_dxdv <= rep.tol);

    // Identical potentials: the gap is identically zero.
    const TrappingReport same =
        check_trapping(quadratic(2.0), quadratic(2.0), 4.0, 1.0, 30, 128, 9, 1);
    CHECK(same.hypothesis_ok);
    CHECK(same.violations == 0);
    CHECK(same.max_pos_dx == 0.0);

    // Curvature ordering alone is not pointwise gradient ordering.
    const TrappingReport bad =
        check_trapping(quadratic(3.0), quadratic(2.0), 4.0, 1.0, 10, 64, 9, 1);
    CHECK_FALSE(bad.hypothesis_ok);
}

TEST_CASE("event-path separation clears the per-bump floor") {
    const std::vector<int> ks{1, 2};
    const SeparationReport rep = check_separation(2.0, 1.0, 4.0, 2.0, 0.1, 4.0,
                                                  1.0, 4, 3.0, ks, 300, 512, 1, 2);
    REQUIRE(rep.per_k.size() == 2);
    CHECK(rep.eps > 0.0);
    CHECK(rep.cbar_value == doctest::Approx(cbar(0.1, 4.0, 3.0, 4.0, 2.0)).epsilon(1e-12));
    long hits = 0;
    for (const auto& st : rep.per_k) {
        hits += st.hits;
        CHECK(st.floor == doctest::Approx(rep.cbar_value * rep.eps * st.k * 0.1 /
                                          (4.0 * 4.0))
                              .epsilon(1e-12));
        if (st.hits > 0) {
            CHECK(st.violations == 0);
            CHECK(st.min_ratio >= 0.9);
            CHECK(st.mean_sep > 0.0);
        }
    }
    CHECK(hits > 0);  // T = 2 keeps the two-sided event at a few percent
    CHECK(rep.total_violations == 0);
}
