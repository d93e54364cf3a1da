#include "uldyn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <thread>

#include "uldyn/noise.hpp"

namespace uldyn {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

RngSpec substream(RngSpec r, std::uint64_t tag) {
    r.stream |= (tag << 8);
    return r;
}

struct Ols {
    double slope = 0.0, intercept = 0.0, slope_se = 0.0, r2 = 0.0;
    int n = 0;
};

Ols ols_fit(std::span<const double> x, std::span<const double> y) {
    Ols f;
    f.n = static_cast<int>(x.size());
    if (f.n < 2) return f;
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < f.n; ++i) {
        mx += x[static_cast<std::size_t>(i)];
        my += y[static_cast<std::size_t>(i)];
    }
    mx /= f.n;
    my /= f.n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int i = 0; i < f.n; ++i) {
        const double dx = x[static_cast<std::size_t>(i)] - mx;
        const double dy = y[static_cast<std::size_t>(i)] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0.0;
    for (int i = 0; i < f.n; ++i) {
        const double r = y[static_cast<std::size_t>(i)] - f.intercept -
                         f.slope * x[static_cast<std::size_t>(i)];
        ssr += r * r;
    }
    f.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
    f.slope_se = f.n > 2 ? std::sqrt(ssr / (f.n - 2) / sxx) : 0.0;
    return f;
}

}  // namespace

SolverKind parse_solver(const std::string& name) {
    if (name == "em") return SolverKind::em;
    if (name == "rmm") return SolverKind::rmm;
    throw std::invalid_argument("unknown solver '" + name + "' (expected em or rmm)");
}

const char* solver_name(SolverKind s) { return s == SolverKind::em ? "em" : "rmm"; }

void parallel_trials(int trials, int workers, const std::function<void(int)>& body) {
    require(trials >= 0, "parallel_trials: trials must be >= 0");
    require(workers >= 1, "parallel_trials: workers must be >= 1");
    if (workers == 1 || trials <= 1) {
        for (int t = 0; t < trials; ++t) body(t);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const int lo = static_cast<int>(static_cast<long>(trials) * w / workers);
        const int hi = static_cast<int>(static_cast<long>(trials) * (w + 1) / workers);
        pool.emplace_back([lo, hi, &body] {
            for (int t = lo; t < hi; ++t) body(t);
        });
    }
    for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// Strong error
// ---------------------------------------------------------------------------

FitResult fit_order(const ErrorCurve& curve) {
    std::vector<double> xs, ys;
    int dropped = 0;
    for (const auto& p : curve.pts) {
        if (!(p.mse > 0.0) || !std::isfinite(p.mse)) {
            ++dropped;
            continue;
        }
        const double rmse = std::sqrt(p.mse);
        // The reference's own error adds ~ref_floor^2 to the measured mse, so
        // points with ref_floor above 0.1*rmse (>1% mse contamination) are
        // unreliable and excluded from the fit.
        if (curve.ref_floor > 0.0 && curve.ref_floor > 0.1 * rmse) {
            ++dropped;
            continue;
        }
        xs.push_back(std::log(static_cast<double>(p.Ns)));
        ys.push_back(std::log(rmse));
    }
    if (dropped > 0)
        std::cerr << "fit_order: dropped " << dropped
                  << " point(s) (zero/non-finite mse or reference floor above 10% of rmse)\n";
    const Ols f = ols_fit(xs, ys);
    FitResult out;
    out.slope = f.slope;
    out.slope_se = f.slope_se;
    out.intercept = f.intercept;
    out.r2 = f.r2;
    out.n_used = f.n;
    return out;
}

ErrorCurve strong_error(const StrongErrorConfig& cfg, const Potential& p) {
    require(!cfg.Ns_list.empty(), "strong_error: Ns_list must not be empty");
    require(cfg.trials >= 2, "strong_error: need at least 2 trials");
    require(cfg.T > 0.0 && cfg.L > 0.0, "strong_error: need T > 0, L > 0");
    std::vector<int> ns_list = cfg.Ns_list;
    std::sort(ns_list.begin(), ns_list.end());
    require(ns_list.front() >= 1, "strong_error: Ns must be >= 1");
    const bool exact_ref = p.quad_u.has_value();
    const bool rmm = cfg.solver == SolverKind::rmm;
    const int max_ns = ns_list.back();
    require(cfg.ref_mult >= 2 && cfg.ref_mult % 2 == 0,
            "strong_error: ref_mult must be an even upsampling factor");
    const int ns_ref = cfg.ref_mult * max_ns;

    ExponentSet thetas;
    if (exact_ref)
        for (int k = 0; k < p.quad_u->size(); ++k) {
            const double u = (*p.quad_u)(k);
            require(1.0 - u / cfg.L >= 1e-6, "strong_error: quadratic reference needs u < L");
            const double s = std::sqrt(1.0 - u / cfg.L);
            thetas.add(1.0 - s);
            thetas.add(1.0 + s);
        }

    const std::size_t n_ns = ns_list.size();
    std::vector<double> sq(static_cast<std::size_t>(cfg.trials) * n_ns, 0.0);
    std::vector<double> floor_sq(exact_ref ? 0 : static_cast<std::size_t>(cfg.trials), 0.0);

    parallel_trials(cfg.trials, cfg.workers, [&](int trial) {
        const auto tu = static_cast<std::uint64_t>(trial);
        GridBuilder gb(cfg.T);
        std::vector<std::vector<double>> etas(n_ns);
        for (std::size_t i = 0; i < n_ns; ++i) {
            const int Ns = ns_list[i];
            gb.nodes(Ns);
            if (rmm) {
                etas[i] = draw_midpoints(
                    Ns, substream(RngSpec{cfg.seed, tu, stream::midpoint},
                                  static_cast<std::uint64_t>(Ns)));
                gb.midpoints(Ns, etas[i]);
            }
        }
        std::vector<double> etas_ref, etas_half;
        if (!exact_ref) {
            etas_ref = draw_midpoints(ns_ref, RngSpec{cfg.seed, tu, stream::ref_midpoint});
            etas_half = draw_midpoints(
                ns_ref / 2, substream(RngSpec{cfg.seed, tu, stream::ref_midpoint}, 1));
            gb.nodes(ns_ref).midpoints(ns_ref, etas_ref);
            gb.nodes(ns_ref / 2).midpoints(ns_ref / 2, etas_half);
        }
        const TimeGrid grid = gb.build();
        const NoiseRealization nr =
            sample_noise(grid, thetas, p.d, RngSpec{cfg.seed, tu, stream::noise});

        SolverRun ref;
        if (exact_ref) {
            ref = exact_quadratic(*p.quad_u, cfg.L, nr);
        } else {
            ref = rmm_integrate(p, cfg.L, ns_ref, nr, etas_ref);
            const SolverRun half = rmm_integrate(p, cfg.L, ns_ref / 2, nr, etas_half);
            floor_sq[static_cast<std::size_t>(trial)] =
                (ref.state.x - half.state.x).squaredNorm();
        }
        for (std::size_t i = 0; i < n_ns; ++i) {
            const int Ns = ns_list[i];
            const SolverRun run = rmm ? rmm_integrate(p, cfg.L, Ns, nr, etas[i])
                                      : em_integrate(p, cfg.L, Ns, nr);
            sq[static_cast<std::size_t>(trial) * n_ns + i] =
                (run.state.x - ref.state.x).squaredNorm();
        }
    });

    ErrorCurve curve;
    curve.solver = solver_name(cfg.solver);
    curve.potential = p.name;
    curve.d = p.d;
    curve.T = cfg.T;
    curve.trials = cfg.trials;
    curve.seed = cfg.seed;
    for (std::size_t i = 0; i < n_ns; ++i) {
        double mean = 0.0;
        for (int t = 0; t < cfg.trials; ++t) mean += sq[static_cast<std::size_t>(t) * n_ns + i];
        mean /= cfg.trials;
        double var = 0.0;
        for (int t = 0; t < cfg.trials; ++t) {
            const double dv = sq[static_cast<std::size_t>(t) * n_ns + i] - mean;
            var += dv * dv;
        }
        var /= std::max(1, cfg.trials - 1);
        curve.pts.push_back({ns_list[i], mean, std::sqrt(var / cfg.trials)});
    }
    if (!exact_ref) {
        double fm = 0.0;
        for (double v : floor_sq) fm += v;
        curve.ref_floor = std::sqrt(fm / cfg.trials);
    }
    return curve;
}

DimScalingResult dimension_scaling(double u, double L, double T, int Ns,
                                   std::span<const int> d_list, int trials,
                                   SolverKind solver, std::uint64_t seed,
                                   int workers) {
    require(!d_list.empty(), "dimension_scaling: d_list must not be empty");
    DimScalingResult out;
    for (int d : d_list) {
        StrongErrorConfig cfg;
        cfg.solver = solver;
        cfg.L = L;
        cfg.T = T;
        cfg.Ns_list = {Ns};
        cfg.trials = trials;
        cfg.seed = seed + static_cast<std::uint64_t>(d);  // fresh paths per dimension
        cfg.workers = workers;
        const ErrorCurve curve = strong_error(cfg, quadratic(u, d));
        out.d_list.push_back(d);
        out.rmse.push_back(std::sqrt(curve.pts[0].mse));
        out.se.push_back(curve.pts[0].se);
    }
    for (std::size_t i = 0; i < out.rmse.size(); ++i)
        out.ratio.push_back(out.rmse[i] / out.rmse[0]);
    return out;
}

// ---------------------------------------------------------------------------
// Weak order
// ---------------------------------------------------------------------------

Eigen::Matrix2d transient_covariance_quadrature(double u, double L, double T,
                                                int panels, int nodes) {
    require(panels >= 1 && nodes >= 2, "transient_covariance_quadrature: bad rule");
    require(u > 0.0 && L > 0.0 && u < L, "transient_covariance_quadrature: need 0 < u < L");
    std::vector<double> qn, qw;
    gauss_legendre_01(nodes, qn, qw);
    const double s = std::sqrt(1.0 - u / L);
    const double a = 1.0 - s, b = 1.0 + s;
    const double sqD = std::sqrt(L - u);
    Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
    const double w_panel = T / panels;
    for (int pnl = 0; pnl < panels; ++pnl) {
        const double t0 = w_panel * pnl;
        for (std::size_t q = 0; q < qn.size(); ++q) {
            const double t = t0 + w_panel * qn[q];
            const double f = (std::exp(-a * t) - std::exp(-b * t)) / sqD;
            const double g = (b * std::exp(-b * t) - a * std::exp(-a * t)) / sqD;
            Eigen::Matrix2d bb;
            bb << f * f, f * g, f * g, g * g;
            acc += (qw[q] * w_panel) * bb;
        }
    }
    return acc;
}

WeakOrderResult weak_error_order(double u, double L, double T,
                                 std::span<const double> h_list, int quad_nodes) {
    require(!h_list.empty(), "weak_error_order: h_list must not be empty");
    WeakOrderResult out;
    const Moments ex = exact_moments(u, L, T);
    for (double h : h_list) {
        require(h > 0.0, "weak_error_order: h must be positive");
        const long steps = std::lround(T / h);
        require(steps >= 1 && std::abs(steps * h - T) <= 1e-9 * T,
                "weak_error_order: h must divide T");
        const Moments mm = rmm_moments_quadratic(u, L, h, static_cast<int>(steps), quad_nodes);
        out.h_list.push_back(h);
        out.err_xx.push_back(std::abs(mm.cov(0, 0) - ex.cov(0, 0)));
        out.err_xv.push_back(std::abs(mm.cov(0, 1) - ex.cov(0, 1)));
        out.err_vv.push_back(std::abs(mm.cov(1, 1) - ex.cov(1, 1)));
        out.err_norm.push_back(
            std::max({out.err_xx.back(), out.err_xv.back(), out.err_vv.back()}));
    }
    const auto slope_of = [&](const std::vector<double>& err) {
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < err.size(); ++i)
            if (err[i] > 0.0 && std::isfinite(err[i])) {
                xs.push_back(std::log(out.h_list[i]));
                ys.push_back(std::log(err[i]));
            }
        return ols_fit(xs, ys).slope;
    };
    out.slope_xx = slope_of(out.err_xx);
    out.slope_xv = slope_of(out.err_xv);
    out.slope_vv = slope_of(out.err_vv);
    out.worst_slope = slope_of(out.err_norm);
    return out;
}

// ---------------------------------------------------------------------------
// Crossing probability
// ---------------------------------------------------------------------------

void wilson_interval(long hits, long trials, double& lo, double& hi) {
    require(trials > 0 && hits >= 0 && hits <= trials, "wilson_interval: bad counts");
    const double z = 1.959963984540054;  // 97.5% normal quantile
    const double n = static_cast<double>(trials);
    const double ph = static_cast<double>(hits) / n;
    const double z2n = z * z / n;
    const double center = (ph + z2n / 2.0) / (1.0 + z2n);
    const double half =
        z * std::sqrt(ph * (1.0 - ph) / n + z2n / (4.0 * n)) / (1.0 + z2n);
    lo = std::max(0.0, center - half);
    hi = std::min(1.0, center + half);
}

namespace {

// Records per-path sup/inf statistics of the exact quadratic over the grid.
struct PathExtremes {
    double supx, infx, supv;
};

PathExtremes exact_extremes(double u, double L, const NoiseRealization& nr) {
    PathExtremes e{-std::numeric_limits<double>::infinity(),
                   std::numeric_limits<double>::infinity(), 0.0};
    SolveOptions opt;
    opt.observer = [&e](double, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
        e.supx = std::max(e.supx, x(0));
        e.infx = std::min(e.infx, x(0));
        e.supv = std::max(e.supv, std::abs(v(0)));
    };
    exact_quadratic(u, L, nr, {}, opt);
    return e;
}

}  // namespace

PEstimate estimate_P(double Cx, double Cv, double u, double L, double T,
                     long trials, int Ns_fine, std::uint64_t seed, int workers) {
    require(Cx > 0.0 && Cv > 0.0, "estimate_P: need Cx > 0, Cv > 0");
    require(trials >= 1 && Ns_fine >= 2, "estimate_P: need trials >= 1, Ns_fine >= 2");
    const double s = std::sqrt(1.0 - u / L);
    const TimeGrid grid = plan_grid(T, Ns_fine);
    const ExponentSet thetas{1.0 - s, 1.0 + s};
    std::vector<std::uint8_t> hit(static_cast<std::size_t>(trials), 0);
    std::vector<NoiseRealization> buf(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    const auto body = [&](int w, long lo, long hi) {
        NoiseRealization& nr = buf[static_cast<std::size_t>(w)];
        nr = sample_noise(grid, thetas, 1, RngSpec{seed, static_cast<std::uint64_t>(lo),
                                                   stream::noise});
        for (long t = lo; t < hi; ++t) {
            resample_noise(nr, RngSpec{seed, static_cast<std::uint64_t>(t), stream::noise});
            const PathExtremes e = exact_extremes(u, L, nr);
            hit[static_cast<std::size_t>(t)] =
                (e.supx >= 2.0 * Cx && e.infx <= -2.0 * Cx && e.supv <= Cv / 2.0) ? 1 : 0;
        }
    };
    if (workers == 1) {
        body(0, 0, trials);
    } else {
        for (int w = 0; w < workers; ++w) {
            const long lo = trials * w / workers;
            const long hi = trials * (w + 1) / workers;
            pool.emplace_back(body, w, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    PEstimate est;
    est.trials = trials;
    for (auto h : hit) est.hits += h;
    est.p = static_cast<double>(est.hits) / static_cast<double>(trials);
    wilson_interval(est.hits, trials, est.lo, est.hi);
    est.forbidden = 12.0 * Cx / Cv > T;
    return est;
}

// ---------------------------------------------------------------------------
// Prefactors
// ---------------------------------------------------------------------------

double epsilon_bar(double Cx, double Cv, double u, double L) {
    require(Cx > 0.0 && Cv > 0.0, "epsilon_bar: need Cx > 0, Cv > 0");
    require(u > 0.0 && u <= L, "epsilon_bar: need 0 < u <= L");
    const double s = std::sqrt(std::max(0.0, 1.0 - u / L));
    return std::min(2.0 * L * (1.0 - s) * s * Cx, L * s * Cv / 2.0);
}

double cbar(double Cx, double Cv, double uR, double L, double T) {
    require(Cx > 0.0 && Cv > 0.0 && T > 0.0, "cbar: need Cx, Cv, T > 0");
    require(uR > 0.0 && uR <= L, "cbar: need 0 < uR <= L");
    const double r = 1.0 - uR / L;
    if (std::abs(r) < 1e-9)
        return Cx * std::exp(3.0 * Cx / (2.0 * Cv) - T) / (4.0 * L * Cv * Cv);
    const double s = std::sqrt(r);
    return std::exp((3.0 * Cx / (2.0 * Cv) - T) * (1.0 - s)) *
           (-std::expm1(-(Cx / Cv) * s)) / (4.0 * L * Cv * s);
}

double upper_rate_constant(double ell, double L, double T) {
    require(ell > 0.0 && L >= ell && T > 0.0, "upper_rate_constant: need 0 < ell <= L, T > 0");
    return std::sqrt(T * T * T / ell + T * T * T * T / L);
}

ClowResult clow_search(double ell, double L, double T,
                       std::span<const double> u_list,
                       std::span<const double> Cx_list,
                       std::span<const double> Cv_list,
                       std::span<const double> uR_list, long trials,
                       int Ns_fine, std::uint64_t seed, int workers) {
    require(!u_list.empty() && !Cx_list.empty() && !Cv_list.empty() && !uR_list.empty(),
            "clow_search: all parameter lists must be non-empty");
    ClowResult out;
    out.best.value = -1.0;
    const TimeGrid grid = plan_grid(T, Ns_fine);
    std::vector<PathExtremes> ext(static_cast<std::size_t>(trials));
    for (std::size_t iu = 0; iu < u_list.size(); ++iu) {
        const double u = u_list[iu];
        require(ell < u && u < L, "clow_search: every u must satisfy ell < u < L");
        const double s = std::sqrt(1.0 - u / L);
        const ExponentSet thetas{1.0 - s, 1.0 + s};
        std::vector<NoiseRealization> buf(static_cast<std::size_t>(workers));
        std::vector<std::thread> pool;
        const auto body = [&](int w, long lo, long hi) {
            NoiseRealization& nr = buf[static_cast<std::size_t>(w)];
            nr = sample_noise(grid, thetas, 1,
                              RngSpec{seed + iu, static_cast<std::uint64_t>(lo), stream::noise});
            for (long t = lo; t < hi; ++t) {
                resample_noise(nr, RngSpec{seed + iu, static_cast<std::uint64_t>(t),
                                           stream::noise});
                ext[static_cast<std::size_t>(t)] = exact_extremes(u, L, nr);
            }
        };
        if (workers == 1) {
            body(0, 0, trials);
        } else {
            for (int w = 0; w < workers; ++w)
                pool.emplace_back(body, w, trials * w / workers, trials * (w + 1) / workers);
            for (auto& th : pool) th.join();
        }
        for (double Cx : Cx_list)
            for (double Cv : Cv_list) {
                long hits = 0;
                for (long t = 0; t < trials; ++t) {
                    const PathExtremes& e = ext[static_cast<std::size_t>(t)];
                    if (e.supx >= 2.0 * Cx && e.infx <= -2.0 * Cx && e.supv <= Cv / 2.0)
                        ++hits;
                }
                PEstimate P;
                P.hits = hits;
                P.trials = trials;
                P.p = static_cast<double>(hits) / static_cast<double>(trials);
                wilson_interval(hits, trials, P.lo, P.hi);
                P.forbidden = 12.0 * Cx / Cv > T;
                for (double uR : uR_list) {
                    if (!(uR > u && uR <= L)) continue;
                    const double gap = std::min(u - ell, uR - u);
                    if (gap <= 0.0) continue;
                    ClowPoint pt;
                    pt.Cx = Cx;
                    pt.Cv = Cv;
                    pt.u = u;
                    pt.uR = uR;
                    pt.P = P;
                    const double cb = cbar(Cx, Cv, uR, L, T);
                    pt.value = std::sqrt(P.p) * Cx * Cx * gap * cb;
                    pt.lo = std::sqrt(P.lo) * Cx * Cx * gap * cb;
                    pt.hi = std::sqrt(P.hi) * Cx * Cx * gap * cb;
                    out.table.push_back(pt);
                    if (pt.value > out.best.value) out.best = pt;
                }
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bump-family pathwise checks
// ---------------------------------------------------------------------------

PerturbationReport check_perturbation(double u, double ell, double L, double T,
                                      double Cx, int N, double xi, int n_beta,
                                      int trials, int Ns_fine, std::uint64_t seed,
                                      int workers, double slack) {
    require(n_beta >= 1 && trials >= 1, "check_perturbation: need n_beta, trials >= 1");
    require(1.0 - u / L >= 1e-6, "check_perturbation: need u < L");
    const double s = std::sqrt(1.0 - u / L);
    const double eps = Cx * xi / (8.0 * N);
    PerturbationReport rep;
    rep.eps = eps;
    rep.bound_x = eps / (2.0 * L * (1.0 - s) * s);
    rep.bound_v = eps / (L * s);
    rep.slack = slack;

    // Pattern 0 is all-ones (every cell active); the rest are random.
    std::vector<BetaIndex> betas;
    betas.emplace_back(static_cast<std::size_t>(2 * N), 1);
    for (int i = 1; i < n_beta; ++i) {
        auto eng = make_engine(RngSpec{seed, static_cast<std::uint64_t>(i), stream::index});
        std::bernoulli_distribution coin(0.5);
        BetaIndex b(static_cast<std::size_t>(2 * N), 0);
        for (auto& bit : b) bit = coin(eng) ? 1 : 0;
        betas.push_back(std::move(b));
    }
    const Potential base =
        adversarial(u, Cx, N, xi, BetaIndex(static_cast<std::size_t>(2 * N), 0), ell, L);
    std::vector<Potential> perturbed;
    for (const auto& b : betas) perturbed.push_back(adversarial(u, Cx, N, xi, b, ell, L));

    std::vector<double> max_rx(static_cast<std::size_t>(trials), 0.0);
    std::vector<double> max_rv(static_cast<std::size_t>(trials), 0.0);
    std::vector<long> viol(static_cast<std::size_t>(trials), 0);

    parallel_trials(trials, workers, [&](int trial) {
        const auto tu = static_cast<std::uint64_t>(trial);
        const auto etas = draw_midpoints(Ns_fine, RngSpec{seed, tu, stream::midpoint});
        GridBuilder gb(T);
        gb.nodes(Ns_fine).midpoints(Ns_fine, etas);
        const TimeGrid grid = gb.build();
        const NoiseRealization nr =
            sample_noise(grid, ExponentSet{}, 1, RngSpec{seed, tu, stream::noise});

        std::vector<double> xb, vb;
        xb.reserve(static_cast<std::size_t>(Ns_fine) + 1);
        vb.reserve(static_cast<std::size_t>(Ns_fine) + 1);
        SolveOptions rec;
        rec.observer = [&](double, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
            xb.push_back(x(0));
            vb.push_back(v(0));
        };
        rmm_integrate(base, L, Ns_fine, nr, etas, rec);

        for (const auto& pot : perturbed) {
            std::size_t i = 0;
            double mrx = 0.0, mrv = 0.0;
            SolveOptions cmp;
            cmp.observer = [&](double, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
                mrx = std::max(mrx, std::abs(x(0) - xb[i]));
                mrv = std::max(mrv, std::abs(v(0) - vb[i]));
                ++i;
            };
            rmm_integrate(pot, L, Ns_fine, nr, etas, cmp);
            const double rx = mrx / rep.bound_x;
            const double rv = mrv / rep.bound_v;
            max_rx[static_cast<std::size_t>(trial)] =
                std::max(max_rx[static_cast<std::size_t>(trial)], rx);
            max_rv[static_cast<std::size_t>(trial)] =
                std::max(max_rv[static_cast<std::size_t>(trial)], rv);
            if (rx > 1.0 + slack || rv > 1.0 + slack)
                ++viol[static_cast<std::size_t>(trial)];
        }
    });
    for (int t = 0; t < trials; ++t) {
        rep.max_ratio_x = std::max(rep.max_ratio_x, max_rx[static_cast<std::size_t>(t)]);
        rep.max_ratio_v = std::max(rep.max_ratio_v, max_rv[static_cast<std::size_t>(t)]);
        rep.violations += viol[static_cast<std::size_t>(t)];
    }
    rep.pairs = static_cast<long>(trials) * n_beta;
    return rep;
}

TrappingReport check_trapping(const Potential& U1, const Potential& U2,
                              double L, double T, int trials, int Ns_fine,
                              std::uint64_t seed, int workers, double tol) {
    require(U1.d == 1 && U2.d == 1, "check_trapping: 1-d potentials only");
    TrappingReport rep;
    rep.trials = trials;
    rep.tol = tol;

    // Hypothesis probe: grad U1 >= grad U2 on a dense grid spanning the
    // reachable range (and both gradients agree far out where bumps vanish).
    const double lo_h = std::min(U1.hess_lo, U2.hess_lo);
    const double range = 10.0 * std::max(1.0, 1.0 / std::sqrt(std::max(lo_h, 1e-12)));
    rep.hypothesis_ok = true;
    Eigen::VectorXd px(1), g1(1), g2(1);
    for (int i = 0; i <= 20000; ++i) {
        px(0) = -range + 2.0 * range * i / 20000.0;
        U1.grad(px, g1);
        U2.grad(px, g2);
        if (g1(0) < g2(0) - 1e-12) {
            rep.hypothesis_ok = false;
            break;
        }
    }
    if (!rep.hypothesis_ok) return rep;

    std::vector<double> mdx(static_cast<std::size_t>(trials), 0.0);
    std::vector<double> mdxdv(static_cast<std::size_t>(trials), 0.0);
    parallel_trials(trials, workers, [&](int trial) {
        const auto tu = static_cast<std::uint64_t>(trial);
        const auto etas = draw_midpoints(Ns_fine, RngSpec{seed, tu, stream::midpoint});
        GridBuilder gb(T);
        gb.nodes(Ns_fine).midpoints(Ns_fine, etas);
        const TimeGrid grid = gb.build();
        const NoiseRealization nr =
            sample_noise(grid, ExponentSet{}, 1, RngSpec{seed, tu, stream::noise});
        std::vector<double> xb, vb;
        SolveOptions rec;
        rec.observer = [&](double, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
            xb.push_back(x(0));
            vb.push_back(v(0));
        };
        rmm_integrate(U1, L, Ns_fine, nr, etas, rec);
        std::size_t i = 0;
        double a = -std::numeric_limits<double>::infinity();
        double b = -std::numeric_limits<double>::infinity();
        SolveOptions cmp;
        cmp.observer = [&](double, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
            const double dx = xb[i] - x(0);
            const double dv = vb[i] - v(0);
            a = std::max(a, dx);
            b = std::max(b, dx + dv);
            ++i;
        };
        rmm_integrate(U2, L, Ns_fine, nr, etas, cmp);
        mdx[static_cast<std::size_t>(trial)] = a;
        mdxdv[static_cast<std::size_t>(trial)] = b;
    });
    for (int t = 0; t < trials; ++t) {
        rep.max_pos_dx = std::max(rep.max_pos_dx, mdx[static_cast<std::size_t>(t)]);
        rep.max_pos_dxdv = std::max(rep.max_pos_dxdv, mdxdv[static_cast<std::size_t>(t)]);
        if (mdx[static_cast<std::size_t>(t)] > tol ||
            mdxdv[static_cast<std::size_t>(t)] > tol)
            ++rep.violations;
    }
    return rep;
}

SeparationReport check_separation(double u, double ell, double L, double T,
                                  double Cx, double Cv, double xi, int N,
                                  double uR, std::span<const int> k_list,
                                  int trials, int Ns_fine, std::uint64_t seed,
                                  int workers, double slack) {
    require(!k_list.empty(), "check_separation: k_list must not be empty");
    require(u + xi <= uR && uR <= L, "check_separation: need u + xi <= uR <= L");
    const double eps = Cx * xi / (8.0 * N);
    const double ebar = epsilon_bar(Cx, Cv, u, L);
    require(eps < ebar, "check_separation: bump amplitude exceeds the event budget");
    const double cb = cbar(Cx, Cv, uR, L, T);

    SeparationReport rep;
    rep.cbar_value = cb;
    rep.eps = eps;
    rep.eps_bar = ebar;

    // k active cells, spread evenly over the 2N cells with a cyclic shift.
    // The 2N/k shifts partition the cells, so averaging the separation over
    // all shifts weights every cell equally and the event-conditional mean is
    // proportional to k whenever bump contributions are additive (a single
    // fixed pattern would confound the k-regression with cell-occupation
    // geometry: paths dwell longer near the center, overweighting
    // center-anchored patterns).  The floor bound is checked per shift, since
    // each shifted pattern is itself a valid k-bump pair.
    const auto pattern_for = [&](int k, int shift) {
        const int stride = 2 * N / k;
        BetaIndex b(static_cast<std::size_t>(2 * N), 0);
        for (int i = 0; i < k; ++i)
            b[static_cast<std::size_t>(shift + i * stride)] = 1;
        return b;
    };
    const BetaIndex zeros(static_cast<std::size_t>(2 * N), 0);
    const Potential flat = adversarial(u, Cx, N, xi, zeros, ell, L);
    for (int k : k_list)
        require(k >= 1 && k <= 2 * N && (2 * N) % k == 0,
                "check_separation: each k must divide 2N");

    const double s = std::sqrt(1.0 - u / L);
    const ExponentSet thetas{1.0 - s, 1.0 + s};
    const std::size_t nk = k_list.size();
    std::vector<double> sep_mean(static_cast<std::size_t>(trials) * nk, 0.0);
    std::vector<double> sep_min(static_cast<std::size_t>(trials) * nk, 0.0);
    std::vector<std::uint8_t> hit(static_cast<std::size_t>(trials), 0);

    parallel_trials(trials, workers, [&](int trial) {
        const auto tu = static_cast<std::uint64_t>(trial);
        const auto etas = draw_midpoints(Ns_fine, RngSpec{seed, tu, stream::ref_midpoint});
        GridBuilder gb(T);
        gb.nodes(Ns_fine).midpoints(Ns_fine, etas);
        const TimeGrid grid = gb.build();
        const NoiseRealization nr =
            sample_noise(grid, thetas, 1, RngSpec{seed, tu, stream::noise});
        const PathExtremes e = exact_extremes(u, L, nr);
        if (!(e.supx >= 2.0 * Cx && e.infx <= -2.0 * Cx && e.supv <= Cv / 2.0)) return;
        hit[static_cast<std::size_t>(trial)] = 1;
        const double x_flat = rmm_integrate(flat, L, Ns_fine, nr, etas).state.x(0);
        for (std::size_t ik = 0; ik < nk; ++ik) {
            const int k = k_list[ik];
            const int nshift = 2 * N / k;
            double acc = 0.0, lo = std::numeric_limits<double>::infinity();
            for (int s = 0; s < nshift; ++s) {
                const Potential bumped =
                    adversarial(u, Cx, N, xi, pattern_for(k, s), ell, L);
                const double sp =
                    x_flat - rmm_integrate(bumped, L, Ns_fine, nr, etas).state.x(0);
                acc += sp;
                lo = std::min(lo, sp);
            }
            sep_mean[static_cast<std::size_t>(trial) * nk + ik] = acc / nshift;
            sep_min[static_cast<std::size_t>(trial) * nk + ik] = lo;
        }
    });

    std::vector<double> log_k, log_mean;
    for (std::size_t ik = 0; ik < nk; ++ik) {
        SeparationKStat st;
        st.k = k_list[ik];
        st.floor = cb * eps * st.k * Cx / (4.0 * N);
        st.min_ratio = std::numeric_limits<double>::infinity();
        double acc = 0.0;
        for (int t = 0; t < trials; ++t) {
            if (!hit[static_cast<std::size_t>(t)]) continue;
            ++st.hits;
            acc += sep_mean[static_cast<std::size_t>(t) * nk + ik];
            const double ratio = sep_min[static_cast<std::size_t>(t) * nk + ik] / st.floor;
            st.min_ratio = std::min(st.min_ratio, ratio);
            if (ratio < 1.0 - slack) ++st.violations;
        }
        if (st.hits > 0) st.mean_sep = acc / st.hits;
        if (!std::isfinite(st.min_ratio)) st.min_ratio = 0.0;
        rep.total_violations += st.violations;
        rep.per_k.push_back(st);
        if (st.hits > 0 && st.mean_sep > 0.0) {
            log_k.push_back(std::log(static_cast<double>(st.k)));
            log_mean.push_back(std::log(st.mean_sep));
        }
    }
    rep.regression_slope = ols_fit(log_k, log_mean).slope;
    return rep;
}

}  // namespace uldyn
