#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "uldyn/noise.hpp"
#include "uldyn/potentials.hpp"

namespace uldyn {

// Kinetic Langevin system under study:
//   dX_t = V_t dt
//   dV_t = -2 V_t dt - (1/L) grad U(X_t) dt + (2/sqrt(L)) dW_t,
//   X_0 = argmin U, V_0 = 0.
// All solvers below consume the same pre-sampled NoiseRealization, so any
// two runs on the same realization are driven by the same Brownian path.

struct PhaseState {
    Eigen::VectorXd x;
    Eigen::VectorXd v;
};

// One gradient query: where and at what path time it was issued.
struct QueryPoint {
    Eigen::VectorXd x;
    double t = 0.0;
};

using PathObserver =
    std::function<void(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& v)>;

struct SolveOptions {
    bool record_trace = false;  // store gradient query sequence
    bool record_path = false;   // store state at every step time
    PathObserver observer;      // streaming hook, called at every step time
};

struct SolverRun {
    PhaseState state;                // state at the horizon
    long queries = 0;                // number of gradient evaluations
    std::vector<QueryPoint> trace;   // filled iff record_trace
    std::vector<double> path_times;  // filled iff record_path
    std::vector<PhaseState> path;
};

// Phase-space transition matrix exp(t H) for the homogeneous part with a
// quadratic potential of curvature u:  H = [[0, 1], [-u/L, -2]].
// Eigenvalues are -(1 -+ sqrt(1-u/L)); within relative distance 1e-9 of
// u = L the defective (Jordan) limit exp(-t) [[1+t, t], [-(u/L) t, 1-t]]
// is used.
Eigen::Matrix2d semigroup(double u, double L, double t);

// Distributionally exact transient second moments of (X_T, V_T) for the
// 1-d quadratic of curvature u (mean is identically zero from the cold
// start at the minimizer).
struct Moments {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
};
Moments exact_moments(double u, double L, double T);

// Pathwise exact solver for (per-component) quadratic potentials, via the
// closed-form stochastic convolution. Requires lambda-(u) and lambda+(u)
// in the realization's exponent set and 1 - u/L >= 1e-6 (the defective
// limit would need non-exponential weights). `at_times` selects the
// propagation checkpoints (must be grid points, strictly increasing,
// starting at 0 and ending at T); empty means every grid point. The result
// is checkpoint-independent up to roundoff.
SolverRun exact_quadratic(const Eigen::VectorXd& u, double L,
                          const NoiseRealization& nr,
                          std::span<const double> at_times = {},
                          const SolveOptions& opts = {});
SolverRun exact_quadratic(double u, double L, const NoiseRealization& nr,
                          std::span<const double> at_times = {},
                          const SolveOptions& opts = {});

// Exponential Euler integrator: freezes grad U at the left node of each of
// the Ns uniform steps and integrates the rest of the dynamics exactly.
// Issues one gradient query per step (N = Ns).
SolverRun em_integrate(const Potential& p, double L, int Ns,
                       const NoiseRealization& nr, const SolveOptions& opts = {});

// Randomized midpoint integrator: per step k of length h, draws eta_k
// (supplied by the caller), computes a half state at s_k + eta_k h with the
// gradient frozen at X_k, then completes the step with the gradient frozen
// at the half state. Issues two gradient queries per step (N = 2 Ns).
// The realization's grid must contain every node and every midpoint.
SolverRun rmm_integrate(const Potential& p, double L, int Ns,
                        const NoiseRealization& nr, std::span<const double> etas,
                        const SolveOptions& opts = {});

// Uniform midpoint draws for rmm_integrate, from the dedicated stream.
std::vector<double> draw_midpoints(int Ns, const RngSpec& rng);

// Deterministic propagation of the exact first/second moments of the
// randomized midpoint chain for a 1-d quadratic potential, averaging each
// step over the midpoint distribution with `quad_nodes`-point Gauss-Legendre
// quadrature on [0,1]. Used by the weak-order experiment; no sampling.
Moments rmm_moments_quadratic(double u, double L, double h, int steps,
                              int quad_nodes = 32);

// Dispatch for the common "best available solution" need: closed-form
// solver when the potential is exactly quadratic (etas ignored), fine
// randomized-midpoint run otherwise.
SolverRun reference_solution(const Potential& p, double L, int Ns_ref,
                             const NoiseRealization& nr,
                             std::span<const double> etas_ref,
                             const SolveOptions& opts = {});

// Gauss-Legendre rule on [0,1] (nodes ascending); exposed for reuse by the
// analysis quadrature oracles.
void gauss_legendre_01(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace uldyn
