#include <doctest.h>

#include <cstdlib>
#include <string>

#include "uldyn/experiments.hpp"

using namespace uldyn;

TEST_CASE("g17 formatting round trips doubles exactly") {
    for (double v : {0.1, 1.0 / 3.0, 12345.6789, -2.5e17, 1e-300, 0.0,
                     6.02214076e23, -1.7976931348623157e308}) {
        CHECK(std::stod(fmt_g17(v)) == v);
    }
    CHECK(fmt_g17(0.0) == "0");
}

TEST_CASE("outcome pass flag and CSV serialization") {
    ExperimentOutcome o;
    CHECK(o.all_pass());  // vacuously
    o.checks.push_back({"a", true, ""});
    CHECK(o.all_pass());
    o.checks.push_back({"b", false, ""});
    CHECK_FALSE(o.all_pass());

    CsvRow r;
    r.experiment = "converge";
    r.solver = "rmm";
    r.potential = "adversarial:u=2,Cx=0.1";  // comma forces quoting
    r.d = 1;
    r.Ns = 16;
    r.T = 1.0;
    r.trials = 10;
    r.mse = 0.25;
    r.seed = 7;
    o.rows = {r, r};
    const std::string csv = o.csv();
    const std::string header =
        "experiment,solver,potential,d,Ns,T,trials,mse,se,slope,slope_se,seed,version\n";
    CHECK(csv.rfind(header, 0) == 0);
    CHECK(csv.find("\"adversarial:u=2,Cx=0.1\"") != std::string::npos);
    int lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 3);
}

TEST_CASE("worker count comes from the environment") {
    unsetenv("ULDYN_WORKERS");
    CHECK(default_workers() == 1);
    setenv("ULDYN_WORKERS", "5", 1);
    CHECK(default_workers() == 5);
    setenv("ULDYN_WORKERS", "bogus", 1);
    CHECK(default_workers() == 1);
    setenv("ULDYN_WORKERS", "-3", 1);
    CHECK(default_workers() == 1);
    unsetenv("ULDYN_WORKERS");
}

TEST_CASE("weak-order experiment passes its gate and is deterministic") {
    WeakConfig cfg;
    cfg.h_list = {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
    cfg.min_slope = 2.5;
    const ExperimentOutcome a = run_weak(cfg);
    CHECK(a.all_pass());
    CHECK(a.results.contains("slope_norm"));
    CHECK(a.results["points"].size() == cfg.h_list.size());
    CHECK(a.results["points"][0].contains("err_norm"));
    CHECK(a.rows.size() == cfg.h_list.size());
    const ExperimentOutcome b = run_weak(cfg);
    CHECK(a.csv() == b.csv());
    CHECK(a.results == b.results);
}

TEST_CASE("converge experiment smoke run") {
    ConvergeConfig cfg;
    cfg.solver = "em";
    cfg.Ns_list = {8, 16};
    cfg.trials = 40;
    cfg.ref_mult = 16;
    const ExperimentOutcome o = run_converge(cfg);
    CHECK(o.all_pass());  // order gates disabled by default config
    CHECK(o.rows.size() == 2);
    CHECK(o.results.contains("slope"));
    CHECK(o.results.contains("r2"));
    CHECK(o.results["points"].size() == 2);

    // The order gate takes the positive convergence order and compares the
    // (negative) fitted slope against its negation.
    cfg.expect_order = 1.0;
    cfg.order_tol = 0.25;
    CHECK(run_converge(cfg).all_pass());
    cfg.expect_order = 3.0;
    CHECK_FALSE(run_converge(cfg).all_pass());
}

TEST_CASE("trap experiment rejects non-dominating patterns and passes on ordered ones") {
    TrapConfig bad;
    bad.beta_hi = "zeros";
    bad.beta_lo = "ones";
    CHECK_THROWS(run_trap(bad));

    TrapConfig cfg;
    cfg.N = 4;
    cfg.trials = 30;
    cfg.Ns_fine = 128;
    const ExperimentOutcome o = run_trap(cfg);
    CHECK(o.all_pass());
    CHECK(o.results["hypothesis_ok"].get<bool>());
    CHECK(o.results["violations"].get<long>() == 0);
}

TEST_CASE("artifacts are byte-identical across worker counts") {
    PerturbConfig cfg;
    cfg.N = 4;
    cfg.n_beta = 2;
    cfg.trials = 120;
    cfg.Ns_fine = 256;
    cfg.workers = 1;
    const ExperimentOutcome w1 = run_perturb(cfg);
    cfg.workers = 3;
    const ExperimentOutcome w3 = run_perturb(cfg);
    CHECK(w1.csv() == w3.csv());
    CHECK(w1.results == w3.results);
    CHECK(w1.all_pass());

    ProbConfig pc;
    pc.trials = 400;
    pc.Ns_fine = 256;
    pc.T = 2.0;
    pc.workers = 1;
    const ExperimentOutcome p1 = run_prob(pc);
    pc.workers = 4;
    const ExperimentOutcome p4 = run_prob(pc);
    CHECK(p1.csv() == p4.csv());
    CHECK(p1.results == p4.results);
}

TEST_CASE("lattice and chain-decomposition experiments pass at small size") {
    LatticeConfig lc;
    lc.cls.N = 4;
    lc.cls.trials = 40;
    lc.cls.Ns_fine = 256;
    const ExperimentOutcome lo = run_lattice(lc);
    CHECK(lo.all_pass());
    CHECK(lo.results["equiv_failures"].get<long>() == 0);

    ScdCheckConfig sc;
    sc.N = 8;
    sc.identity_max_N = 20;
    const ExperimentOutcome so = run_scd_check(sc);
    CHECK(so.all_pass());
}
