#include "uldyn/noise.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace uldyn {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

// ---------------------------------------------------------------------------
// TimeGrid / GridBuilder
// ---------------------------------------------------------------------------

std::size_t TimeGrid::index_of(double time) const {
    auto it = std::lower_bound(t.begin(), t.end(), time);
    if (it == t.end() || *it != time)
        throw std::invalid_argument("TimeGrid::index_of: time is not a grid point");
    return static_cast<std::size_t>(it - t.begin());
}

bool TimeGrid::contains(double time) const {
    auto it = std::lower_bound(t.begin(), t.end(), time);
    return it != t.end() && *it == time;
}

GridBuilder::GridBuilder(double T) : T_(T) {
    require(std::isfinite(T) && T > 0.0, "GridBuilder: horizon must be finite and positive");
    pts_.emplace_back(0.0, tag_node);
    pts_.emplace_back(T, tag_horizon | tag_node);
}

GridBuilder& GridBuilder::nodes(int Ns) {
    require(Ns >= 1, "GridBuilder::nodes: Ns must be >= 1");
    for (int k = 0; k <= Ns; ++k) pts_.emplace_back(node_time(T_, Ns, k), tag_node);
    return *this;
}

GridBuilder& GridBuilder::midpoints(int Ns, std::span<const double> etas) {
    require(Ns >= 1, "GridBuilder::midpoints: Ns must be >= 1");
    require(etas.size() == static_cast<std::size_t>(Ns),
            "GridBuilder::midpoints: need one eta per step");
    for (int k = 0; k < Ns; ++k) {
        const double e = etas[static_cast<std::size_t>(k)];
        require(std::isfinite(e) && e >= 0.0 && e <= 1.0,
                "GridBuilder::midpoints: eta must lie in [0,1]");
        pts_.emplace_back(midpoint_time(T_, Ns, k, e), tag_midpoint);
    }
    return *this;
}

GridBuilder& GridBuilder::at(double time, unsigned tag) {
    require(std::isfinite(time) && time >= 0.0 && time <= T_,
            "GridBuilder::at: time must lie in [0,T]");
    pts_.emplace_back(time, tag);
    return *this;
}

TimeGrid GridBuilder::build() const {
    auto pts = pts_;
    std::sort(pts.begin(), pts.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    TimeGrid g;
    g.T = T_;
    g.t.reserve(pts.size());
    g.tags.reserve(pts.size());
    for (const auto& [time, tag] : pts) {
        if (!g.t.empty() && g.t.back() == time) {
            g.tags.back() |= tag;  // exact duplicate: merge provenance
        } else {
            g.t.push_back(time);
            g.tags.push_back(tag);
        }
    }
    return g;
}

TimeGrid plan_grid(double T, int Ns, std::span<const double> etas,
                   std::span<const double> extra) {
    GridBuilder b(T);
    b.nodes(Ns);
    if (!etas.empty()) b.midpoints(Ns, etas);
    for (double e : extra) b.at(e);
    return b.build();
}

// ---------------------------------------------------------------------------
// ExponentSet
// ---------------------------------------------------------------------------

ExponentSet::ExponentSet() : th_{0.0, 2.0} {}

ExponentSet::ExponentSet(std::span<const double> thetas) : th_{0.0, 2.0} {
    for (double th : thetas) add(th);
}

ExponentSet::ExponentSet(std::initializer_list<double> thetas) : th_{0.0, 2.0} {
    for (double th : thetas) add(th);
}

void ExponentSet::add(double theta) {
    require(std::isfinite(theta), "ExponentSet::add: exponent must be finite");
    auto it = std::lower_bound(th_.begin(), th_.end(), theta);
    if (it != th_.end() && std::abs(*it - theta) <= merge_tol) return;
    if (it != th_.begin() && std::abs(*(it - 1) - theta) <= merge_tol) return;
    th_.insert(it, theta);
}

std::size_t ExponentSet::index_of(double theta) const {
    auto it = std::lower_bound(th_.begin(), th_.end(), theta - merge_tol);
    if (it != th_.end() && std::abs(*it - theta) <= merge_tol)
        return static_cast<std::size_t>(it - th_.begin());
    throw std::invalid_argument("ExponentSet::index_of: exponent not in set");
}

// ---------------------------------------------------------------------------
// Covariance and sampling
// ---------------------------------------------------------------------------

double pair_covariance(double theta_a, double theta_b, double delta) {
    require(delta >= 0.0, "pair_covariance: interval length must be >= 0");
    const double s = theta_a + theta_b;
    if (s == 0.0) return delta;  // Ito isometry for the unweighted pair
    return -std::expm1(-s * delta) / s;
}

namespace {

// S with S S^T = covariance of the right-anchored integrals over one
// subinterval of length delta. Cholesky when well conditioned, symmetric
// eigen-clamp otherwise (tiny delta makes the exponents indistinguishable
// and the matrix numerically rank-one).
Eigen::MatrixXd interval_factor(const std::vector<double>& th, double delta) {
    const auto m = static_cast<Eigen::Index>(th.size());
    Eigen::MatrixXd C(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double c = pair_covariance(th[static_cast<std::size_t>(i)],
                                             th[static_cast<std::size_t>(j)], delta);
            C(i, j) = c;
            C(j, i) = c;
        }
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() == Eigen::Success) {
        Eigen::MatrixXd S = llt.matrixL();
        return S;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

void build_factors(NoiseRealization& nr) {
    const std::size_t n = nr.grid.intervals();
    nr.factors.clear();
    nr.factor_of_interval.assign(n, -1);
    std::unordered_map<std::uint64_t, std::int32_t> by_delta;
    by_delta.reserve(64);
    for (std::size_t i = 0; i < n; ++i) {
        const double delta = nr.grid.t[i + 1] - nr.grid.t[i];
        const std::uint64_t key = std::bit_cast<std::uint64_t>(delta);
        auto [it, fresh] = by_delta.try_emplace(key, static_cast<std::int32_t>(nr.factors.size()));
        if (fresh) nr.factors.push_back(interval_factor(nr.thetas.values(), delta));
        nr.factor_of_interval[i] = it->second;
    }
}

}  // namespace

NoiseRealization sample_noise(const TimeGrid& grid, const ExponentSet& thetas,
                              int d, const RngSpec& rng) {
    require(d >= 1, "sample_noise: dimension must be >= 1");
    require(grid.size() >= 2, "sample_noise: grid needs at least two points");
    NoiseRealization nr;
    nr.grid = grid;
    nr.thetas = thetas;
    nr.d = d;
    nr.J.resize(static_cast<Eigen::Index>(thetas.size()),
                static_cast<Eigen::Index>(grid.intervals()) * d);
    build_factors(nr);
    resample_noise(nr, rng);
    return nr;
}

void resample_noise(NoiseRealization& nr, const RngSpec& rng) {
    auto eng = make_engine(rng);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto m = static_cast<Eigen::Index>(nr.thetas.size());
    const std::size_t n = nr.grid.intervals();
    Eigen::VectorXd z(m);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::MatrixXd& S = nr.factors[static_cast<std::size_t>(nr.factor_of_interval[i])];
        const Eigen::Index col0 = static_cast<Eigen::Index>(i) * nr.d;
        for (int k = 0; k < nr.d; ++k) {
            for (Eigen::Index r = 0; r < m; ++r) z(r) = gauss(eng);
            nr.J.col(col0 + k).noalias() = S * z;
        }
    }
}

void add_weighted(const NoiseRealization& nr, std::size_t ia, std::size_t ic,
                  double theta, double anchor, double coeff,
                  Eigen::VectorXd& acc) {
    if (ia > ic) throw std::invalid_argument("add_weighted: interval is reversed");
    const auto row = static_cast<Eigen::Index>(nr.thetas.index_of(theta));
    for (std::size_t i = ia; i < ic; ++i) {
        const double q = nr.grid.t[i + 1];
        const double w = coeff * std::exp(theta * (q - anchor));
        acc.noalias() += w * nr.block(i).row(row).transpose();
    }
}

Eigen::VectorXd weighted_integral(const NoiseRealization& nr, double a,
                                  double c, double theta, double anchor) {
    const std::size_t ia = nr.grid.index_of(a);
    const std::size_t ic = nr.grid.index_of(c);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(nr.d);
    add_weighted(nr, ia, ic, theta, anchor, 1.0, acc);
    return acc;
}

Eigen::VectorXd wtilde(const NoiseRealization& nr, double t, double theta) {
    return weighted_integral(nr, 0.0, t, theta, 0.0);
}

}  // namespace uldyn
