#include "uldyn/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace uldyn {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// (1 - exp(-2 delta)) / 2, stable for tiny delta.
inline double half_one_minus_exp2(double delta) { return -std::expm1(-2.0 * delta) / 2.0; }

}  // namespace

Eigen::Matrix2d semigroup(double u, double L, double t) {
    require(u > 0.0 && L > 0.0 && u <= L, "semigroup: need 0 < u <= L");
    require(t >= 0.0, "semigroup: need t >= 0");
    const double r = 1.0 - u / L;
    Eigen::Matrix2d M;
    if (std::abs(r) < 1e-9) {
        // Defective eigenvalue pair; exp(tH) = e^{-t} (I + t(H + I)).
        const double e = std::exp(-t);
        M << e * (1.0 + t), e * t, -e * (u / L) * t, e * (1.0 - t);
        return M;
    }
    const double s = std::sqrt(r);
    const double lm = 1.0 - s, lp = 1.0 + s;
    const double em = std::exp(-t * lm), ep = std::exp(-t * lp);
    M << (lp * em - lm * ep) / (2.0 * s), (em - ep) / (2.0 * s),
        (u / L) * (ep - em) / (2.0 * s), (lp * ep - lm * em) / (2.0 * s);
    return M;
}

Moments exact_moments(double u, double L, double T) {
    require(u > 0.0 && L > 0.0 && 1.0 - u / L >= 1e-6,
            "exact_moments: need 0 < u < L (strictly, by at least 1e-6 relative)");
    require(T > 0.0, "exact_moments: need T > 0");
    const double s = std::sqrt(1.0 - u / L);
    const double a = 1.0 - s, b = 1.0 + s;
    const double D = L - u;
    const auto E = [T](double rate) { return -std::expm1(-rate * T) / rate; };
    const double E2a = E(2.0 * a), Eab = E(a + b), E2b = E(2.0 * b);
    Moments m;
    m.cov(0, 0) = (E2a - 2.0 * Eab + E2b) / D;
    m.cov(0, 1) = m.cov(1, 0) = ((a + b) * Eab - a * E2a - b * E2b) / D;
    m.cov(1, 1) = (a * a * E2a - 2.0 * a * b * Eab + b * b * E2b) / D;
    return m;
}

// ---------------------------------------------------------------------------
// Exact solver
// ---------------------------------------------------------------------------

SolverRun exact_quadratic(const Eigen::VectorXd& u, double L,
                          const NoiseRealization& nr,
                          std::span<const double> at_times,
                          const SolveOptions& opts) {
    const int d = nr.d;
    require(u.size() == d, "exact_quadratic: one curvature per dimension");
    for (int k = 0; k < d; ++k)
        require(u(k) > 0.0 && 1.0 - u(k) / L >= 1e-6,
                "exact_quadratic: need 0 < u < L (strictly, by at least 1e-6 relative)");

    // Group dimensions by identical curvature so each exponent pair is
    // accumulated once per step.
    struct Group {
        double u;
        double lm, lp, sqD;
        std::vector<int> dims;
        double memo_delta = -1.0;
        Eigen::Matrix2d memo_M;
    };
    std::vector<Group> groups;
    for (int k = 0; k < d; ++k) {
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const Group& g) { return g.u == u(k); });
        if (it == groups.end()) {
            Group g;
            g.u = u(k);
            const double s = std::sqrt(1.0 - u(k) / L);
            g.lm = 1.0 - s;
            g.lp = 1.0 + s;
            g.sqD = std::sqrt(L - u(k));
            groups.push_back(g);
            it = groups.end() - 1;
        }
        it->dims.push_back(k);
    }
    for (const Group& g : groups) {
        nr.thetas.index_of(g.lm);  // throws if the realization lacks the exponents
        nr.thetas.index_of(g.lp);
    }

    std::vector<double> default_times;
    if (at_times.empty()) {
        default_times = nr.grid.t;
        at_times = default_times;
    }
    require(at_times.size() >= 2 && at_times.front() == 0.0 &&
                at_times.back() == nr.grid.T,
            "exact_quadratic: checkpoints must run from 0 to the horizon");

    SolverRun run;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d), v = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd accm(d), accp(d);
    const auto emit = [&](double t) {
        if (opts.observer) opts.observer(t, x, v);
        if (opts.record_path) {
            run.path_times.push_back(t);
            run.path.push_back({x, v});
        }
    };
    emit(0.0);
    std::size_t ia = nr.grid.index_of(at_times[0]);
    for (std::size_t j = 0; j + 1 < at_times.size(); ++j) {
        const double b = at_times[j + 1];
        const std::size_t ib = nr.grid.index_of(b);
        require(ib > ia, "exact_quadratic: checkpoints must be strictly increasing");
        const double delta = b - at_times[j];
        for (Group& g : groups) {
            accm.setZero();
            accp.setZero();
            add_weighted(nr, ia, ib, g.lm, b, 1.0, accm);
            add_weighted(nr, ia, ib, g.lp, b, 1.0, accp);
            if (g.memo_delta != delta) {
                g.memo_M = semigroup(g.u, L, delta);
                g.memo_delta = delta;
            }
            const Eigen::Matrix2d& M = g.memo_M;
            for (int k : g.dims) {
                const double gx = (accm(k) - accp(k)) / g.sqD;
                const double gv = (g.lp * accp(k) - g.lm * accm(k)) / g.sqD;
                const double xn = M(0, 0) * x(k) + M(0, 1) * v(k) + gx;
                const double vn = M(1, 0) * x(k) + M(1, 1) * v(k) + gv;
                x(k) = xn;
                v(k) = vn;
            }
        }
        ia = ib;
        emit(b);
    }
    run.state = {std::move(x), std::move(v)};
    return run;
}

SolverRun exact_quadratic(double u, double L, const NoiseRealization& nr,
                          std::span<const double> at_times, const SolveOptions& opts) {
    return exact_quadratic(Eigen::VectorXd::Constant(nr.d, u), L, nr, at_times, opts);
}

// ---------------------------------------------------------------------------
// Exponential Euler
// ---------------------------------------------------------------------------

SolverRun em_integrate(const Potential& p, double L, int Ns,
                       const NoiseRealization& nr, const SolveOptions& opts) {
    require(Ns >= 1, "em_integrate: Ns must be >= 1");
    require(p.d == nr.d, "em_integrate: potential and noise dimension mismatch");
    require(L > 0.0, "em_integrate: L must be positive");
    const double T = nr.grid.T;
    const double sqL = std::sqrt(L);
    std::vector<std::size_t> idx(static_cast<std::size_t>(Ns) + 1);
    for (int k = 0; k <= Ns; ++k)
        idx[static_cast<std::size_t>(k)] = nr.grid.index_of(node_time(T, Ns, k));

    SolverRun run;
    const int d = p.d;
    Eigen::VectorXd x = p.minimizer, v = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd g(d), accW(d), accJ2(d), xn(d), vn(d);
    const auto emit = [&](double t) {
        if (opts.observer) opts.observer(t, x, v);
        if (opts.record_path) {
            run.path_times.push_back(t);
            run.path.push_back({x, v});
        }
    };
    emit(0.0);
    for (int k = 0; k < Ns; ++k) {
        const std::size_t ia = idx[static_cast<std::size_t>(k)];
        const std::size_t ib = idx[static_cast<std::size_t>(k) + 1];
        const double a = nr.grid.t[ia], b = nr.grid.t[ib];
        const double delta = b - a;
        const double alpha = half_one_minus_exp2(delta);
        accW.setZero();
        accJ2.setZero();
        add_weighted(nr, ia, ib, 0.0, b, 1.0, accW);
        add_weighted(nr, ia, ib, 2.0, b, 1.0, accJ2);
        p.grad(x, g);
        ++run.queries;
        if (opts.record_trace) run.trace.push_back({x, a});
        xn = x + alpha * v + (accW - accJ2) / sqL - ((delta - alpha) / (2.0 * L)) * g;
        vn = std::exp(-2.0 * delta) * v + (2.0 / sqL) * accJ2 - (alpha / L) * g;
        x.swap(xn);
        v.swap(vn);
        emit(b);
    }
    run.state = {std::move(x), std::move(v)};
    return run;
}

// ---------------------------------------------------------------------------
// Randomized midpoint
// ---------------------------------------------------------------------------

SolverRun rmm_integrate(const Potential& p, double L, int Ns,
                        const NoiseRealization& nr, std::span<const double> etas,
                        const SolveOptions& opts) {
    require(Ns >= 1, "rmm_integrate: Ns must be >= 1");
    require(etas.size() == static_cast<std::size_t>(Ns),
            "rmm_integrate: need one midpoint draw per step");
    require(p.d == nr.d, "rmm_integrate: potential and noise dimension mismatch");
    require(L > 0.0, "rmm_integrate: L must be positive");
    const double T = nr.grid.T;
    const double sqL = std::sqrt(L);

    SolverRun run;
    const int d = p.d;
    Eigen::VectorXd x = p.minimizer, v = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd g(d), gh(d), xh(d), accW(d), accJ2(d), xn(d), vn(d);
    const auto emit = [&](double t) {
        if (opts.observer) opts.observer(t, x, v);
        if (opts.record_path) {
            run.path_times.push_back(t);
            run.path.push_back({x, v});
        }
    };
    emit(0.0);
    std::size_t ia = nr.grid.index_of(node_time(T, Ns, 0));
    for (int k = 0; k < Ns; ++k) {
        const double e = etas[static_cast<std::size_t>(k)];
        require(e >= 0.0 && e <= 1.0, "rmm_integrate: midpoint draw outside [0,1]");
        const double tm = midpoint_time(T, Ns, k, e);
        const double tb = node_time(T, Ns, k + 1);
        const std::size_t im = nr.grid.index_of(tm);
        const std::size_t ib = nr.grid.index_of(tb);
        const double ta = nr.grid.t[ia];
        const double dm = tm - ta;       // eta_k h as realized on the grid
        const double df = tb - ta;       // h as realized on the grid
        const double am = half_one_minus_exp2(dm);
        const double af = half_one_minus_exp2(df);
        const double e2 = std::exp(-2.0 * (tb - tm));  // e^{2(eta h - h)}

        // Half step: gradient frozen at the left node.
        p.grad(x, g);
        ++run.queries;
        if (opts.record_trace) run.trace.push_back({x, tm});
        accW.setZero();
        accJ2.setZero();
        add_weighted(nr, ia, im, 0.0, tm, 1.0, accW);
        add_weighted(nr, ia, im, 2.0, tm, 1.0, accJ2);
        xh = x + am * v + (accW - accJ2) / sqL - ((dm - am) / (2.0 * L)) * g;

        // Full step: gradient frozen at the half state.
        p.grad(xh, gh);
        ++run.queries;
        if (opts.record_trace) run.trace.push_back({xh, tb});
        accW.setZero();
        accJ2.setZero();
        add_weighted(nr, ia, ib, 0.0, tb, 1.0, accW);
        add_weighted(nr, ia, ib, 2.0, tb, 1.0, accJ2);
        xn = x + af * v + (accW - accJ2) / sqL - (df * (1.0 - e2) / (2.0 * L)) * gh;
        vn = std::exp(-2.0 * df) * v + (2.0 / sqL) * accJ2 - (df * e2 / L) * gh;
        x.swap(xn);
        v.swap(vn);
        ia = ib;
        emit(tb);
    }
    run.state = {std::move(x), std::move(v)};
    return run;
}

std::vector<double> draw_midpoints(int Ns, const RngSpec& rng) {
    require(Ns >= 1, "draw_midpoints: Ns must be >= 1");
    auto eng = make_engine(rng);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> etas(static_cast<std::size_t>(Ns));
    for (auto& e : etas) e = unif(eng);
    return etas;
}

// ---------------------------------------------------------------------------
// Moment propagation (deterministic weak-order oracle)
// ---------------------------------------------------------------------------

void gauss_legendre_01(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    require(n >= 1, "gauss_legendre_01: need n >= 1");
    nodes.assign(static_cast<std::size_t>(n), 0.0);
    weights.assign(static_cast<std::size_t>(n), 0.0);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Initial guess (Chebyshev), then Newton on P_n.
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - z * z) * pp * pp);
        // z is the i-th largest root on [-1,1]; map to [0,1] ascending.
        nodes[static_cast<std::size_t>(i)] = (1.0 - z) / 2.0;
        nodes[static_cast<std::size_t>(n - 1 - i)] = (1.0 + z) / 2.0;
        weights[static_cast<std::size_t>(i)] = w / 2.0;
        weights[static_cast<std::size_t>(n - 1 - i)] = w / 2.0;
    }
}

Moments rmm_moments_quadratic(double u, double L, double h, int steps, int quad_nodes) {
    require(u > 0.0 && L > 0.0, "rmm_moments_quadratic: need positive u, L");
    require(h > 0.0 && steps >= 1, "rmm_moments_quadratic: need h > 0, steps >= 1");
    std::vector<double> qn, qw;
    gauss_legendre_01(quad_nodes, qn, qw);

    // Per midpoint value: one step is the affine-Gaussian map
    //   state' = A(eta) state + noise(eta), noise ~ N(0, Sigma(eta)).
    const std::size_t nq = qn.size();
    std::vector<Eigen::Matrix2d> A(nq), Sig(nq);
    const double ah = half_one_minus_exp2(h);
    const double eh = std::exp(-2.0 * h);
    for (std::size_t q = 0; q < nq; ++q) {
        const double d1 = qn[q] * h;       // time to the midpoint
        const double d2 = h - d1;          // remainder of the step
        const double a1 = half_one_minus_exp2(d1);
        const double a2 = half_one_minus_exp2(d2);
        const double e2 = std::exp(-2.0 * d2);
        const double b1 = u * (d1 - a1) / (2.0 * L);
        const double cx = h * (1.0 - e2) * u / (2.0 * L);
        const double cv = h * e2 * u / L;
        A[q] << 1.0 - cx * (1.0 - b1), ah - cx * a1,
            -cv * (1.0 - b1), eh - cv * a1;
        // Noise coordinates: (increment, weight-2 integral) over [0, d1]
        // (block P) and over [d1, h] (block Q), all right-anchored.
        Eigen::Matrix2d Mp, Mq, CovP, CovQ;
        Mp << 1.0 - cx, cx - e2, -cv, 2.0 * e2 + cv;
        Mq << 1.0, -1.0, 0.0, 2.0;
        CovP << d1, a1, a1, -std::expm1(-4.0 * d1) / 4.0;
        CovQ << d2, a2, a2, -std::expm1(-4.0 * d2) / 4.0;
        Sig[q] = (Mp * CovP * Mp.transpose() + Mq * CovQ * Mq.transpose()) / L;
    }

    Moments m;  // zero mean, zero covariance start
    Eigen::Matrix2d C = Eigen::Matrix2d::Zero();
    Eigen::Vector2d mu = Eigen::Vector2d::Zero();
    for (int k = 0; k < steps; ++k) {
        Eigen::Matrix2d Cn = Eigen::Matrix2d::Zero();
        Eigen::Vector2d mn = Eigen::Vector2d::Zero();
        // Second-moment matrix propagates through the mixture exactly.
        const Eigen::Matrix2d S = C + mu * mu.transpose();
        for (std::size_t q = 0; q < nq; ++q) {
            Cn.noalias() += qw[q] * (A[q] * S * A[q].transpose() + Sig[q]);
            mn.noalias() += qw[q] * (A[q] * mu);
        }
        mu = mn;
        C = Cn - mu * mu.transpose();
    }
    m.mean = mu;
    m.cov = C;
    return m;
}

SolverRun reference_solution(const Potential& p, double L, int Ns_ref,
                             const NoiseRealization& nr,
                             std::span<const double> etas_ref,
                             const SolveOptions& opts) {
    if (p.quad_u) return exact_quadratic(*p.quad_u, L, nr, {}, opts);
    return rmm_integrate(p, L, Ns_ref, nr, etas_ref, opts);
}

}  // namespace uldyn
