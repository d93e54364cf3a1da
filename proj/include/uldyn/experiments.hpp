#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "uldyn/analysis.hpp"
#include "uldyn/lattice.hpp"

namespace uldyn {

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

// One CSV row; every experiment maps its primary statistics onto the same
// fixed column set (see README for the per-experiment column semantics).
struct CsvRow {
    std::string experiment, solver, potential;
    int d = 1;
    int Ns = 0;
    double T = 0.0;
    long trials = 0;
    double mse = 0.0, se = 0.0, slope = 0.0, slope_se = 0.0;
    std::uint64_t seed = 0;
};

struct ExperimentOutcome {
    std::string experiment;
    nlohmann::json params;
    nlohmann::json results;
    std::vector<Check> checks;
    double runtime_s = 0.0;
    std::vector<CsvRow> rows;

    bool all_pass() const;
    nlohmann::json summary() const;
    std::string csv() const;  // header + rows, numbers in %.17g
};

// Shortest-round-trip decimal rendering, locale independent.
std::string fmt_g17(double v);

void write_text(const std::string& path, const std::string& text);

// Number of trial workers: ULDYN_WORKERS if set (>= 1), else 1.
int default_workers();

// ---------------------------------------------------------------------------
// Experiment configurations (one per CLI subcommand)
// ---------------------------------------------------------------------------

struct ConvergeConfig {
    std::string solver = "rmm";
    std::string potential = "quadratic:u=1";
    int d = 1;
    double ell = 1.0, L = 4.0, T = 1.0;
    std::vector<int> Ns_list = {16, 32, 64, 128, 256};
    int trials = 2000;
    int ref_mult = 64;
    double expect_order = 0.0;  // convergence order, positive; 0 disables the check
    double order_tol = 0.15;
    double r2_min = 0.0;  // 0 disables the fit-quality check
    std::uint64_t seed = 1;
    int workers = 1;
};
ExperimentOutcome run_converge(const ConvergeConfig& cfg);

struct DimScaleConfig {
    std::string solver = "rmm";
    double u = 1.0, L = 4.0, T = 1.0;
    int Ns = 64;
    std::vector<int> d_list = {1, 4, 16, 64};
    int trials = 2000;
    double ratio_tol = 0.12;  // relative deviation of rmse(d)/rmse(d0) from sqrt(d/d0)
    std::uint64_t seed = 1;
    int workers = 1;
};
ExperimentOutcome run_dimscale(const DimScaleConfig& cfg);

struct WeakConfig {
    double u = 1.0, L = 4.0, T = 1.0;
    std::vector<double> h_list = {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256};
    int quad_nodes = 32;
    double min_slope = 2.7;
    std::uint64_t seed = 1;  // echoed in artifacts; the experiment is deterministic
};
ExperimentOutcome run_weak(const WeakConfig& cfg);

struct ProbConfig {
    double Cx = 0.1, Cv = 4.0, u = 2.5, L = 4.0, T = 1.0;
    long trials = 20000;
    int Ns_fine = 1024;
    std::uint64_t seed = 1;
    int workers = 1;
};
ExperimentOutcome run_prob(const ProbConfig& cfg);

struct ClowConfig {
    double ell = 1.0, L = 4.0, T = 1.0;
    std::vector<double> u_list = {2.5};
    std::vector<double> Cx_list = {0.05, 0.1, 0.2};
    std::vector<double> Cv_list = {2.0, 4.0, 8.0};
    std::vector<double> uR_list = {3.0, 3.5, 4.0};
    long trials = 20000;
    int Ns_fine = 1024;
    std::uint64_t seed = 1;
    int workers = 1;
};
ExperimentOutcome run_clow(const ClowConfig& cfg);

struct PerturbConfig {
    double u = 2.0, ell = 1.0, L = 4.0, T = 1.0, Cx = 0.1, xi = 1.0;
    int N = 8, n_beta = 1, trials = 10000, Ns_fine = 4096;
    double slack = 0.05;
    std::uint64_t seed = 1;
    int workers = 1;
};
ExperimentOutcome run_perturb(const PerturbConfig& cfg);

struct TrapConfig {
    double u = 2.0, ell = 1.0, L = 4.0, T = 1.0, Cx = 0.1, xi = 1.0;
    int N = 8, trials = 10000, Ns_fine = 1024;
    // Ordered pair within the bump family: beta_hi >= beta_lo bitwise.
    std::string beta_hi = "ones", beta_lo = "zeros";
    double tol = 0.0;  // 0 = auto: 1e-9 + calibrated discretization slack
    std::uint64_t seed = 1;
    int workers = 1;
};
ExperimentOutcome run_trap(const TrapConfig& cfg);

struct SeparateConfig {
    // T = 2 keeps the two-sided crossing event reasonably probable (~4%)
    // while the separation floor stays well above coupled discretization
    // noise at the default grid; at T = 1 the event probability is ~5e-5
    // and a default-size run is inconclusive.
    double u = 2.0, ell = 1.0, L = 4.0, T = 2.0, Cx = 0.1, Cv = 4.0, xi = 1.0;
    int N = 8;
    double uR = 3.0;  // certified upper curvature of the flat member
    std::vector<int> k_list = {1, 2, 4, 8};
    int trials = 2000, Ns_fine = 4096;
    double slack = 0.1;
    std::uint64_t seed = 1;
    int workers = 1;
};
ExperimentOutcome run_separate(const SeparateConfig& cfg);

struct LatticeConfig {
    ClassExperimentConfig cls;  // solver/u/ell/L/Cx/Cv/xi/N/T/trials/Ns_fine/...
};
ExperimentOutcome run_lattice(const LatticeConfig& cfg);

struct ScdCheckConfig {
    int N = 12;
    int identity_max_N = 30;
    std::uint64_t seed = 1;  // echoed; the check is deterministic
};
ExperimentOutcome run_scd_check(const ScdCheckConfig& cfg);

}  // namespace uldyn
