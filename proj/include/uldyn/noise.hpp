#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "uldyn/rng.hpp"

namespace uldyn {

// ---------------------------------------------------------------------------
// Time grids
// ---------------------------------------------------------------------------

// Provenance tags for grid points (bitmask: a point can be e.g. a uniform
// node of one ladder and a midpoint of another after merging).
enum PointTag : unsigned {
    tag_node = 1u,
    tag_midpoint = 2u,
    tag_horizon = 4u,
    tag_extra = 8u,
};

// Canonical node/midpoint arithmetic. Planner and solvers must use these
// exact expressions so lookups hit grid points bitwise.
inline double node_time(double T, int Ns, int k) {
    return k == Ns ? T : static_cast<double>(k) * (T / Ns);
}
inline double midpoint_time(double T, int Ns, int k, double eta) {
    const double h = T / Ns;
    const double m = static_cast<double>(k) * h + eta * h;
    return m > T ? T : m;
}

struct TimeGrid {
    std::vector<double> t;        // strictly increasing, t.front()==0, t.back()==T
    std::vector<unsigned> tags;   // PointTag bitmask per point
    double T = 0.0;

    std::size_t size() const { return t.size(); }
    std::size_t intervals() const { return t.size() - 1; }
    // Exact (bitwise) lookup; throws std::invalid_argument if absent.
    // Interpolation is deliberately unsupported.
    std::size_t index_of(double time) const;
    bool contains(double time) const;
};

// Merges node ladders, midpoints and ad-hoc times into one validated grid.
class GridBuilder {
public:
    explicit GridBuilder(double T);
    GridBuilder& nodes(int Ns);
    GridBuilder& midpoints(int Ns, std::span<const double> etas);
    GridBuilder& at(double time, unsigned tag = tag_extra);
    TimeGrid build() const;

private:
    double T_;
    std::vector<std::pair<double, unsigned>> pts_;
};

// One-call planner: uniform nodes, optional per-step midpoints, extra times.
TimeGrid plan_grid(double T, int Ns, std::span<const double> etas = {},
                   std::span<const double> extra = {});

// ---------------------------------------------------------------------------
// Exponential weights
// ---------------------------------------------------------------------------

// Sorted set of exponents theta for the weighted integrals
// int exp(theta s) dW_s. Always contains 0 (plain increments) and 2 (the
// friction weight); exponents closer than 1e-12 are merged.
class ExponentSet {
public:
    static constexpr double merge_tol = 1e-12;

    ExponentSet();
    explicit ExponentSet(std::span<const double> thetas);
    ExponentSet(std::initializer_list<double> thetas);
    void add(double theta);
    std::size_t size() const { return th_.size(); }
    double operator[](std::size_t i) const { return th_[i]; }
    const std::vector<double>& values() const { return th_; }
    // Index of the exponent matching theta within merge_tol; throws if absent.
    std::size_t index_of(double theta) const;

private:
    std::vector<double> th_;
};

// Covariance of the right-anchored integrals J_a = int_{[t0,t1]} e^{a(s-t1)} dW
// and J_b over the same subinterval of length delta.
double pair_covariance(double theta_a, double theta_b, double delta);

// ---------------------------------------------------------------------------
// Sampled noise
// ---------------------------------------------------------------------------

// A realization of the driving Brownian path, stored as right-anchored
// weighted increments per grid subinterval:
//   J(theta_r, i) = int_{t_i}^{t_{i+1}} exp(theta_r (s - t_{i+1})) dW_s .
// Anchoring at the right endpoint keeps every stored weight in (0,1], so
// large horizons never overflow. Column block i*d..(i+1)*d-1 of `J` holds
// subinterval i; row r holds exponent r.
struct NoiseRealization {
    TimeGrid grid;
    ExponentSet thetas;
    int d = 1;
    Eigen::MatrixXd J;  // (thetas.size()) x (intervals()*d)

    // Cached factor S with S S^T = per-subinterval covariance, one entry per
    // distinct subinterval length (keyed by the bit pattern of delta).
    std::vector<Eigen::MatrixXd> factors;
    std::vector<std::int32_t> factor_of_interval;

    Eigen::Block<Eigen::MatrixXd> block(std::size_t i) {
        return J.block(0, static_cast<Eigen::Index>(i) * d,
                       static_cast<Eigen::Index>(thetas.size()), d);
    }
    Eigen::Block<const Eigen::MatrixXd> block(std::size_t i) const {
        return J.block(0, static_cast<Eigen::Index>(i) * d,
                       static_cast<Eigen::Index>(thetas.size()), d);
    }
};

// Allocates the realization for (grid, thetas, d) and fills it from the
// engine derived from `rng`. Draw order is fixed (subinterval-major, then
// dimension, then exponent), so identical (seed, trial, stream) reproduce
// bit-identical realizations.
NoiseRealization sample_noise(const TimeGrid& grid, const ExponentSet& thetas,
                              int d, const RngSpec& rng);

// In-place refill with new randomness; reuses grid, factors and storage.
void resample_noise(NoiseRealization& nr, const RngSpec& rng);

// acc += coeff * sum over stored subintervals [p,q] covering [t[ia], t[ic]] of
//        exp(theta (q - anchor)) J_theta[p,q]
// i.e. the right-anchored integral over the composed interval re-anchored at
// `anchor`. Requires ia <= ic (equal gives zero contribution).
void add_weighted(const NoiseRealization& nr, std::size_t ia, std::size_t ic,
                  double theta, double anchor, double coeff,
                  Eigen::VectorXd& acc);

// Convenience allocation form; a and c must be grid points (exact match).
Eigen::VectorXd weighted_integral(const NoiseRealization& nr, double a,
                                  double c, double theta, double anchor);

// The running weighted Brownian motion int_0^t e^{theta s} dW_s, assembled
// from stored increments (t must be a grid point). Note the left anchor: this
// is the textbook object, so it can overflow for large theta*t by design.
Eigen::VectorXd wtilde(const NoiseRealization& nr, double t, double theta);

}  // namespace uldyn
