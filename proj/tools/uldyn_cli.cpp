// Command-line front end: one subcommand per experiment, CSV + JSON artifacts,
// deterministic seeded execution.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <functional>
#include <string>

#include "uldyn/experiments.hpp"
#include "uldyn/version.hpp"

namespace {

using uldyn::ExperimentOutcome;

struct OutputOpts {
    std::string csv, json;
};

void add_common(CLI::App* sub, std::uint64_t& seed, OutputOpts& out,
                const std::string& name) {
    sub->add_option("--seed", seed, "master seed (required; no wall-clock default)")
        ->required();
    out.csv = name + ".csv";
    out.json = name + ".json";
    sub->add_option("--out-csv", out.csv, "CSV output path")->capture_default_str();
    sub->add_option("--out-json", out.json, "JSON summary output path")
        ->capture_default_str();
    sub->set_config("--config", "", "read options from an INI/TOML file (flags override)");
    sub->allow_config_extras(CLI::config_extras_mode::error);
}

void add_workers(CLI::App* sub, int& workers) {
    workers = uldyn::default_workers();
    sub->add_option("--workers", workers, "trial workers (default: ULDYN_WORKERS or 1)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

void require_ascending(const std::vector<int>& xs, const char* what) {
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (xs[i] <= xs[i - 1])
            throw CLI::ValidationError(std::string(what) + " must be strictly ascending");
}

int emit(const ExperimentOutcome& out, const OutputOpts& paths) {
    uldyn::write_text(paths.csv, out.csv());
    uldyn::write_text(paths.json, out.summary().dump(2) + "\n");
    for (const auto& c : out.checks)
        std::printf("[%s] %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                    c.detail.c_str());
    std::printf("%s: wrote %s and %s (%.2f s)\n", out.experiment.c_str(), paths.csv.c_str(),
                paths.json.c_str(), out.runtime_s);
    return out.all_pass() ? 0 : 1;
}

// Lets a potential spec carry its own L / ell (e.g. "quadratic:u=1,L=4");
// an explicit flag must agree with the spec value if both are present.
void resolve_class_bounds(const std::string& spec_text, bool ell_given, bool L_given,
                          double& ell, double& L) {
    const uldyn::PotentialSpec spec = uldyn::parse_potential_spec(spec_text);
    if (spec.has("L")) {
        const double v = spec.num("L");
        if (L_given && v != L)
            throw CLI::ValidationError("--L conflicts with the potential spec's L");
        L = v;
    }
    if (spec.has("ell")) {
        const double v = spec.num("ell");
        if (ell_given && v != ell)
            throw CLI::ValidationError("--ell conflicts with the potential spec's ell");
        ell = v;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string("uldyn ") + uldyn::kVersion +
                 " - kinetic Langevin solvers, error curves, and lower-bound machinery"};
    app.require_subcommand(1);

    std::function<int()> runner;

    // ----------------------------------------------------------------- converge
    {
        auto cfg = std::make_shared<uldyn::ConvergeConfig>();
        auto paths = std::make_shared<OutputOpts>();
        CLI::App* sub = app.add_subcommand("converge", "strong-error curve and order fit");
        sub->add_option("--solver", cfg->solver, "em | rmm")->capture_default_str();
        sub->add_option("--potential", cfg->potential, "potential spec, e.g. quadratic:u=1")
            ->capture_default_str();
        sub->add_option("--d", cfg->d, "dimension")->check(CLI::PositiveNumber)
            ->capture_default_str();
        auto* oell = sub->add_option("--ell", cfg->ell, "class lower curvature")
                         ->capture_default_str();
        auto* oL = sub->add_option("--L", cfg->L, "class upper curvature / noise scale")
                       ->capture_default_str();
        sub->add_option("--T", cfg->T, "horizon")->capture_default_str();
        sub->add_option("--ns", cfg->Ns_list, "step counts (comma separated, ascending)")
            ->delimiter(',')
            ->capture_default_str();
        sub->add_option("--trials", cfg->trials, "Monte Carlo trials")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--ref-mult", cfg->ref_mult, "reference upsampling factor (even)")
            ->capture_default_str();
        sub->add_option("--expect-order", cfg->expect_order,
                        "expected convergence order (positive; the fitted slope "
                        "must be within --order-tol of its negation); 0 disables")
            ->capture_default_str();
        sub->add_option("--order-tol", cfg->order_tol, "slope tolerance")
            ->capture_default_str();
        sub->add_option("--r2-min", cfg->r2_min, "minimum fit R^2; 0 disables the check")
            ->capture_default_str();
        add_workers(sub, cfg->workers);
        add_common(sub, cfg->seed, *paths, "converge");
        sub->callback([cfg, paths, oell, oL, &runner] {
            require_ascending(cfg->Ns_list, "--ns");
            resolve_class_bounds(cfg->potential, oell->count() > 0, oL->count() > 0,
                                 cfg->ell, cfg->L);
            runner = [cfg, paths] { return emit(uldyn::run_converge(*cfg), *paths); };
        });
    }

    // ----------------------------------------------------------------- dimscale
    {
        auto cfg = std::make_shared<uldyn::DimScaleConfig>();
        auto paths = std::make_shared<OutputOpts>();
        CLI::App* sub = app.add_subcommand("dimscale", "error growth across dimension");
        sub->add_option("--solver", cfg->solver, "em | rmm")->capture_default_str();
        sub->add_option("--u", cfg->u, "quadratic curvature")->capture_default_str();
        sub->add_option("--L", cfg->L, "noise scale")->capture_default_str();
        sub->add_option("--T", cfg->T, "horizon")->capture_default_str();
        sub->add_option("--ns", cfg->Ns, "fixed step count")->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--d-list", cfg->d_list, "dimensions (comma separated, ascending)")
            ->delimiter(',')
            ->capture_default_str();
        sub->add_option("--trials", cfg->trials, "Monte Carlo trials per dimension")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--ratio-tol", cfg->ratio_tol,
                        "relative tolerance of rmse ratios vs sqrt(d/d0)")
            ->capture_default_str();
        add_workers(sub, cfg->workers);
        add_common(sub, cfg->seed, *paths, "dimscale");
        sub->callback([cfg, paths, &runner] {
            require_ascending(cfg->d_list, "--d-list");
            runner = [cfg, paths] { return emit(uldyn::run_dimscale(*cfg), *paths); };
        });
    }

    // ----------------------------------------------------------------- weak
    {
        auto cfg = std::make_shared<uldyn::WeakConfig>();
        auto paths = std::make_shared<OutputOpts>();
        CLI::App* sub =
            app.add_subcommand("weak", "deterministic weak-order study (moment propagation)");
        sub->add_option("--u", cfg->u, "quadratic curvature")->capture_default_str();
        sub->add_option("--L", cfg->L, "noise scale")->capture_default_str();
        sub->add_option("--T", cfg->T, "horizon")->capture_default_str();
        sub->add_option("--h-list", cfg->h_list, "step sizes (comma separated)")
            ->delimiter(',')
            ->capture_default_str();
        sub->add_option("--quad-nodes", cfg->quad_nodes, "Gauss-Legendre nodes per step")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--min-slope", cfg->min_slope, "required covariance-error slope")
            ->capture_default_str();
        add_common(sub, cfg->seed, *paths, "weak");
        sub->callback([cfg, paths, &runner] {
            runner = [cfg, paths] { return emit(uldyn::run_weak(*cfg), *paths); };
        });
    }

    // ----------------------------------------------------------------- prob
    {
        auto cfg = std::make_shared<uldyn::ProbConfig>();
        auto paths = std::make_shared<OutputOpts>();
        CLI::App* sub =
            app.add_subcommand("prob", "two-sided crossing probability of the exact dynamics");
        sub->add_option("--cx", cfg->Cx, "position threshold Cx")->capture_default_str();
        sub->add_option("--cv", cfg->Cv, "velocity budget Cv")->capture_default_str();
        sub->add_option("--u", cfg->u, "quadratic curvature")->capture_default_str();
        sub->add_option("--L", cfg->L, "noise scale")->capture_default_str();
        sub->add_option("--T", cfg->T, "horizon")->capture_default_str();
        sub->add_option("--trials", cfg->trials, "Monte Carlo trials")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--ns-fine", cfg->Ns_fine, "fine grid resolution for path sups")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        add_workers(sub, cfg->workers);
        add_common(sub, cfg->seed, *paths, "prob");
        sub->callback([cfg, paths, &runner] {
            runner = [cfg, paths] { return emit(uldyn::run_prob(*cfg), *paths); };
        });
    }

    // ----------------------------------------------------------------- clow
    {
        auto cfg = std::make_shared<uldyn::ClowConfig>();
        auto paths = std::make_shared<OutputOpts>();
        CLI::App* sub = app.add_subcommand("clow", "grid search for the lower-rate prefactor");
        sub->add_option("--ell", cfg->ell, "class lower curvature")->capture_default_str();
        sub->add_option("--L", cfg->L, "class upper curvature / noise scale")
            ->capture_default_str();
        sub->add_option("--T", cfg->T, "horizon")->capture_default_str();
        sub->add_option("--u-list", cfg->u_list, "curvatures to scan")->delimiter(',')
            ->capture_default_str();
        sub->add_option("--cx-list", cfg->Cx_list, "Cx values to scan")->delimiter(',')
            ->capture_default_str();
        sub->add_option("--cv-list", cfg->Cv_list, "Cv values to scan")->delimiter(',')
            ->capture_default_str();
        sub->add_option("--ur-list", cfg->uR_list, "u_R values to scan")->delimiter(',')
            ->capture_default_str();
        sub->add_option("--trials", cfg->trials, "Monte Carlo trials per curvature")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--ns-fine", cfg->Ns_fine, "fine grid resolution for path sups")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        add_workers(sub, cfg->workers);
        add_common(sub, cfg->seed, *paths, "clow");
        sub->callback([cfg, paths, &runner] {
            runner = [cfg, paths] { return emit(uldyn::run_clow(*cfg), *paths); };
        });
    }

    // ----------------------------------------------------------------- perturb
    {
        auto cfg = std::make_shared<uldyn::PerturbConfig>();
        auto paths = std::make_shared<OutputOpts>();
        CLI::App* sub = app.add_subcommand(
            "perturb", "pathwise displacement bounds of the bump family vs the quadratic");
        sub->add_option("--u", cfg->u, "base curvature")->capture_default_str();
        sub->add_option("--ell", cfg->ell, "class lower curvature")->capture_default_str();
        sub->add_option("--L", cfg->L, "class upper curvature / noise scale")
            ->capture_default_str();
        sub->add_option("--T", cfg->T, "horizon")->capture_default_str();
        sub->add_option("--cx", cfg->Cx, "bump region half-width parameter")
            ->capture_default_str();
        sub->add_option("--xi", cfg->xi, "bump slope bound")->capture_default_str();
        sub->add_option("--n", cfg->N, "bump budget N (2N cells)")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--n-beta", cfg->n_beta, "bump patterns per path")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--trials", cfg->trials, "paths")->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--ns-fine", cfg->Ns_fine, "fine grid steps")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--slack", cfg->slack, "allowed relative discretization slack")
            ->capture_default_str();
        add_workers(sub, cfg->workers);
        add_common(sub, cfg->seed, *paths, "perturb");
        sub->callback([cfg, paths, &runner] {
            runner = [cfg, paths] { return emit(uldyn::run_perturb(*cfg), *paths); };
        });
    }

    // ----------------------------------------------------------------- trap
    {
        auto cfg = std::make_shared<uldyn::TrapConfig>();
        auto paths = std::make_shared<OutputOpts>();
        CLI::App* sub = app.add_subcommand(
            "trap", "coupled pathwise order for gradient-dominating potential pairs");
        sub->add_option("--u", cfg->u, "base curvature")->capture_default_str();
        sub->add_option("--ell", cfg->ell, "class lower curvature")->capture_default_str();
        sub->add_option("--L", cfg->L, "class upper curvature / noise scale")
            ->capture_default_str();
        sub->add_option("--T", cfg->T, "horizon")->capture_default_str();
        sub->add_option("--cx", cfg->Cx, "bump region half-width parameter")
            ->capture_default_str();
        sub->add_option("--xi", cfg->xi, "bump slope bound")->capture_default_str();
        sub->add_option("--n", cfg->N, "bump budget N (2N cells)")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--beta-hi", cfg->beta_hi, "dominating pattern (ones|zeros|bits)")
            ->capture_default_str();
        sub->add_option("--beta-lo", cfg->beta_lo, "dominated pattern (ones|zeros|bits)")
            ->capture_default_str();
        sub->add_option("--trials", cfg->trials, "paths")->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--ns-fine", cfg->Ns_fine, "fine grid steps")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--tol", cfg->tol,
                        "excursion tolerance (0 = 1e-9 + calibrated slack)")
            ->capture_default_str();
        add_workers(sub, cfg->workers);
        add_common(sub, cfg->seed, *paths, "trap");
        sub->callback([cfg, paths, &runner] {
            runner = [cfg, paths] { return emit(uldyn::run_trap(*cfg), *paths); };
        });
    }

    // ----------------------------------------------------------------- separate
    {
        auto cfg = std::make_shared<uldyn::SeparateConfig>();
        auto paths = std::make_shared<OutputOpts>();
        CLI::App* sub = app.add_subcommand(
            "separate", "event-filtered final-time separation of bump-family pairs");
        sub->add_option("--u", cfg->u, "base curvature")->capture_default_str();
        sub->add_option("--ell", cfg->ell, "class lower curvature")->capture_default_str();
        sub->add_option("--L", cfg->L, "class upper curvature / noise scale")
            ->capture_default_str();
        sub->add_option("--T", cfg->T, "horizon")->capture_default_str();
        sub->add_option("--cx", cfg->Cx, "position threshold Cx")->capture_default_str();
        sub->add_option("--cv", cfg->Cv, "velocity budget Cv")->capture_default_str();
        sub->add_option("--xi", cfg->xi, "bump slope bound")->capture_default_str();
        sub->add_option("--n", cfg->N, "bump budget N (2N cells)")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--ur", cfg->uR, "certified upper curvature of the flat member")
            ->capture_default_str();
        sub->add_option("--k-list", cfg->k_list, "differing-bump counts (ascending)")
            ->delimiter(',')
            ->capture_default_str();
        sub->add_option("--trials", cfg->trials, "paths before event filtering")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--ns-fine", cfg->Ns_fine, "fine grid steps")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--slack", cfg->slack, "allowed relative floor slack")
            ->capture_default_str();
        add_workers(sub, cfg->workers);
        add_common(sub, cfg->seed, *paths, "separate");
        sub->callback([cfg, paths, &runner] {
            require_ascending(cfg->k_list, "--k-list");
            runner = [cfg, paths] { return emit(uldyn::run_separate(*cfg), *paths); };
        });
    }

    // ----------------------------------------------------------------- lattice
    {
        auto cfg = std::make_shared<uldyn::LatticeConfig>();
        auto paths = std::make_shared<OutputOpts>();
        CLI::App* sub = app.add_subcommand(
            "lattice", "equivalence-class rerun identity and class-spread statistics");
        sub->add_option("--solver", cfg->cls.solver, "em | rmm")->capture_default_str();
        sub->add_option("--u", cfg->cls.u, "base curvature")->capture_default_str();
        sub->add_option("--ell", cfg->cls.ell, "class lower curvature")->capture_default_str();
        sub->add_option("--L", cfg->cls.L, "class upper curvature / noise scale")
            ->capture_default_str();
        sub->add_option("--cx", cfg->cls.Cx, "position threshold Cx")->capture_default_str();
        sub->add_option("--cv", cfg->cls.Cv, "velocity budget Cv")->capture_default_str();
        sub->add_option("--xi", cfg->cls.xi, "bump slope bound")->capture_default_str();
        sub->add_option("--n", cfg->cls.N, "query budget N (2N cells)")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--T", cfg->cls.T, "horizon")->capture_default_str();
        sub->add_option("--trials", cfg->cls.trials, "class pairs / paths")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--ns-fine", cfg->cls.Ns_fine, "fine reference steps")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--spread-samples", cfg->cls.spread_samples,
                        "reduced indices sampled for the spread statistic")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        add_common(sub, cfg->cls.seed, *paths, "lattice");
        sub->callback([cfg, paths, &runner] {
            runner = [cfg, paths] { return emit(uldyn::run_lattice(*cfg), *paths); };
        });
    }

    // ----------------------------------------------------------------- scd-check
    {
        auto cfg = std::make_shared<uldyn::ScdCheckConfig>();
        auto paths = std::make_shared<OutputOpts>();
        CLI::App* sub = app.add_subcommand(
            "scd-check", "symmetric chain decomposition and level-identity validation");
        sub->add_option("--n", cfg->N, "lattice bit count")->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--identity-max-n", cfg->identity_max_N,
                        "largest N for the exact level identity")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        add_common(sub, cfg->seed, *paths, "scd-check");
        sub->callback([cfg, paths, &runner] {
            runner = [cfg, paths] { return emit(uldyn::run_scd_check(*cfg), *paths); };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        return runner ? runner() : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
