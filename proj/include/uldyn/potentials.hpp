#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace uldyn {

// A confining potential exposed through its gradient oracle. Pure data +
// function; shareable across threads. `hess_lo/hess_hi` is a certified
// interval containing all Hessian eigenvalues over R^d.
struct Potential {
    int d = 1;
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> grad;  // g <- grad U(x)
    double hess_lo = 0.0;
    double hess_hi = 0.0;
    Eigen::VectorXd minimizer;  // global minimizer (the simulation start point)
    std::string name;
    // Set iff U is exactly quadratic: per-component curvature. Lets the
    // reference dispatcher pick the closed-form solver.
    std::optional<Eigen::VectorXd> quad_u;

    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
        Eigen::VectorXd g(d);
        grad(x, g);
        return g;
    }
};

// U(x) = u|x|^2/2 in d dimensions.
Potential quadratic(double u, int d = 1);

// Separable sum of 1-d potentials, one per coordinate.
Potential separable(std::vector<Potential> components);

// ---------------------------------------------------------------------------
// Adversarial bump family
// ---------------------------------------------------------------------------

// C^1 bump used as a gradient perturbation. Piecewise quadratic on
// [0, w] with w = Cx/(2N):
//   a x^2                       on [0,   w/4]
//   -a (x - w/2)^2 + 2a(w/4)^2  on [w/4, 3w/4]
//   a (x - w)^2                 on [3w/4, w]
//   0 elsewhere,  a = 4 N xi / Cx.
// Peak value eps = Cx xi/(8N); slope bounded by xi; value >= eps/2 on the
// middle half [w/4, 3w/4].
struct Bump1D {
    double Cx = 0.0;
    int N = 0;
    double xi = 0.0;
    double w = 0.0;    // support width Cx/(2N)
    double a = 0.0;    // curvature 4*N*xi/Cx
    double eps = 0.0;  // peak value Cx*xi/(8N)

    double operator()(double x) const;
    double deriv(double x) const;
};

Bump1D bump_g(double Cx, int N, double xi);

// Bit pattern beta over the 2N cells I_j = [x_j, x_{j+1}), j = -N..N-1,
// x_j = Cx*j/(2N), covering [-Cx/2, Cx/2); the last cell is closed. Index
// beta[j + N] selects whether cell j carries a bump.
using BetaIndex = std::vector<std::uint8_t>;

// Cell containing x, or -N-1 if x lies outside [-Cx/2, Cx/2].
int cell_of(double x, double Cx, int N);
// Left endpoint x_j of cell j.
double cell_left(int j, double Cx, int N);

// 1-d gradient perturbation of the quadratic: grad U(x) = u x + sum_j beta_j
// g(x - x_j). Bumps perturb the *gradient*, so the Hessian interval is
// [u - xi, u + xi]; construction requires xi <= min(u - ell, L - u) so the
// family stays inside the class [ell, L].
Potential adversarial(double u, double Cx, int N, double xi, BetaIndex beta,
                      double ell, double L);

// Smooth non-quadratic member of the class [ell, L] in d dimensions:
// grad U_i(x) = (ell+L)/2 * x_i + (L-ell)/4 * (1 - cos x_i).
// Curvature at the origin is exactly (ell+L)/2; the certified Hessian
// interval is [(3 ell + L)/4, (ell + 3 L)/4].
Potential smooth_nonquadratic(double ell, double L, int d = 1);

// ---------------------------------------------------------------------------
// Config parsing (CLI / file schema)
// ---------------------------------------------------------------------------

// Compact spec: "kind:key=val,key=val". Kinds: quadratic (u), smooth (),
// adversarial (Cx, N, xi, beta=<bitstring of length 2N>|ones|zeros|random),
// separable (u=<comma-free ';'-separated list> not supported compactly —
// use the JSON form). ell/L/d come from the experiment context.
struct PotentialSpec {
    std::string kind;
    std::vector<std::pair<std::string, std::string>> params;

    bool has(const std::string& key) const;
    double num(const std::string& key) const;
    double num(const std::string& key, double fallback) const;
    std::string str(const std::string& key, const std::string& fallback) const;
};

PotentialSpec parse_potential_spec(const std::string& text);

// Bump pattern from "ones" | "zeros" | "random" | explicit 0/1 bitstring of
// length `cells`; `seed` feeds the random case.
BetaIndex parse_beta(const std::string& text, int cells, std::uint64_t seed);

// Builds the potential; `seed` seeds the bump pattern when beta=random.
Potential make_potential(const PotentialSpec& spec, int d, double ell, double L,
                         std::uint64_t seed);

}  // namespace uldyn
