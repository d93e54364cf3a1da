// Python bindings for the main operations: moments and prefactor evaluators,
// path simulation, probability estimation, experiment drivers (as JSON), and
// the lattice utilities.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <vector>

#include "uldyn/experiments.hpp"
#include "uldyn/version.hpp"

namespace py = pybind11;
using namespace uldyn;

namespace {

py::dict moments_dict(const Moments& m) {
    py::dict d;
    d["mean"] = std::vector<double>{m.mean(0), m.mean(1)};
    d["cov"] = std::vector<std::vector<double>>{{m.cov(0, 0), m.cov(0, 1)},
                                                {m.cov(1, 0), m.cov(1, 1)}};
    return d;
}

py::dict simulate(const std::string& solver, const std::string& potential, int d,
                  double ell, double L, double T, int Ns, std::uint64_t seed,
                  std::uint64_t trial) {
    const Potential p = make_potential(parse_potential_spec(potential), d, ell, L, seed);
    GridBuilder gb(T);
    gb.nodes(Ns);
    std::vector<double> etas;
    const SolverKind kind = parse_solver(solver);
    if (kind == SolverKind::rmm) {
        etas = draw_midpoints(Ns, RngSpec{seed, trial, stream::midpoint});
        gb.midpoints(Ns, etas);
    }
    ExponentSet thetas;
    if (p.quad_u)
        for (int i = 0; i < p.quad_u->size(); ++i) {
            const double s = std::sqrt(1.0 - (*p.quad_u)(i) / L);
            thetas.add(1.0 - s);
            thetas.add(1.0 + s);
        }
    const NoiseRealization nr =
        sample_noise(gb.build(), thetas, p.d, RngSpec{seed, trial, stream::noise});
    const SolverRun run = kind == SolverKind::rmm ? rmm_integrate(p, L, Ns, nr, etas)
                                                  : em_integrate(p, L, Ns, nr);
    py::dict out;
    out["x"] = std::vector<double>(run.state.x.data(), run.state.x.data() + run.state.x.size());
    out["v"] = std::vector<double>(run.state.v.data(), run.state.v.data() + run.state.v.size());
    out["queries"] = run.queries;
    return out;
}

py::dict estimate_p_dict(double Cx, double Cv, double u, double L, double T, long trials,
                         int Ns_fine, std::uint64_t seed, int workers) {
    const PEstimate e = estimate_P(Cx, Cv, u, L, T, trials, Ns_fine, seed, workers);
    py::dict d;
    d["p"] = e.p;
    d["lo"] = e.lo;
    d["hi"] = e.hi;
    d["hits"] = e.hits;
    d["trials"] = e.trials;
    d["forbidden"] = e.forbidden;
    return d;
}

std::string converge_json(const std::string& solver, const std::string& potential, int d,
                          double ell, double L, double T, const std::vector<int>& ns,
                          int trials, std::uint64_t seed, int workers) {
    ConvergeConfig cfg;
    cfg.solver = solver;
    cfg.potential = potential;
    cfg.d = d;
    cfg.ell = ell;
    cfg.L = L;
    cfg.T = T;
    cfg.Ns_list = ns;
    cfg.trials = trials;
    cfg.seed = seed;
    cfg.workers = workers;
    return run_converge(cfg).summary().dump();
}

std::string weak_json(double u, double L, double T, const std::vector<double>& h_list) {
    WeakConfig cfg;
    cfg.u = u;
    cfg.L = L;
    cfg.T = T;
    cfg.h_list = h_list;
    return run_weak(cfg).summary().dump();
}

}  // namespace

PYBIND11_MODULE(_uldyn, m) {
    m.doc() = "kinetic Langevin solvers with shared weighted Brownian noise";
    m.attr("__version__") = kVersion;

    m.def("exact_moments",
          [](double u, double L, double T) { return moments_dict(exact_moments(u, L, T)); },
          py::arg("u"), py::arg("L"), py::arg("T"),
          "transient mean/covariance of (X_T, V_T) for the 1-d quadratic");
    m.def("semigroup",
          [](double u, double L, double t) {
              const Eigen::Matrix2d M = semigroup(u, L, t);
              return std::vector<std::vector<double>>{{M(0, 0), M(0, 1)}, {M(1, 0), M(1, 1)}};
          },
          py::arg("u"), py::arg("L"), py::arg("t"));
    m.def("epsilon_bar", &epsilon_bar, py::arg("Cx"), py::arg("Cv"), py::arg("u"),
          py::arg("L"));
    m.def("cbar", &cbar, py::arg("Cx"), py::arg("Cv"), py::arg("uR"), py::arg("L"),
          py::arg("T"));
    m.def("upper_rate_constant", &upper_rate_constant, py::arg("ell"), py::arg("L"),
          py::arg("T"));
    m.def("simulate", &simulate, py::arg("solver"), py::arg("potential"), py::arg("d"),
          py::arg("ell"), py::arg("L"), py::arg("T"), py::arg("Ns"), py::arg("seed"),
          py::arg("trial") = 0,
          "one solver run on a fresh noise realization; returns x, v, queries");
    m.def("estimate_p", &estimate_p_dict, py::arg("Cx"), py::arg("Cv"), py::arg("u"),
          py::arg("L"), py::arg("T"), py::arg("trials"), py::arg("Ns_fine"), py::arg("seed"),
          py::arg("workers") = 1);
    m.def("converge_json", &converge_json, py::arg("solver"), py::arg("potential"),
          py::arg("d"), py::arg("ell"), py::arg("L"), py::arg("T"), py::arg("ns"),
          py::arg("trials"), py::arg("seed"), py::arg("workers") = 1,
          "strong-error experiment; returns the JSON summary");
    m.def("weak_json", &weak_json, py::arg("u"), py::arg("L"), py::arg("T"),
          py::arg("h_list"), "deterministic weak-order experiment; JSON summary");
    m.def("scd_chain_count",
          [](int N) { return scd(N).chains.size(); }, py::arg("N"));
    m.def("upsilon", &upsilon, py::arg("mask"), py::arg("N"));
    m.def("level_variance_identity_holds", &level_variance_identity_holds, py::arg("N"));
}
