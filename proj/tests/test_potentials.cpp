#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "uldyn/potentials.hpp"

using namespace uldyn;

TEST_CASE("bump profile: support, peak, slope bound, C1 joins") {
    const double Cx = 0.1, xi = 1.0;
    const int N = 8;
    const Bump1D g = bump_g(Cx, N, xi);
    const double w = Cx / (2.0 * N);
    const double eps = Cx * xi / (8.0 * N);
    CHECK(g.w == doctest::Approx(w).epsilon(1e-15));
    CHECK(g.eps == doctest::Approx(eps).epsilon(1e-15));

    // Zero off the support, nonnegative inside.
    CHECK(g(-1e-9) == 0.0);
    CHECK(g(0.0) == 0.0);
    CHECK(g(w) == 0.0);
    CHECK(g(w + 1e-9) == 0.0);
    CHECK(g.deriv(-1e-9) == 0.0);
    CHECK(g.deriv(w + 1e-9) == 0.0);

    // Peak value eps at the center, eps/2 at the quarter points, and at
    // least eps/2 on the whole middle half of the cell.
    CHECK(g(w / 2.0) == doctest::Approx(eps).epsilon(1e-14));
    CHECK(g(w / 4.0) == doctest::Approx(eps / 2.0).epsilon(1e-14));
    CHECK(g(3.0 * w / 4.0) == doctest::Approx(eps / 2.0).epsilon(1e-14));
    for (int i = 0; i <= 100; ++i) {
        const double x = w / 4.0 + i * (w / 2.0) / 100.0;
        CHECK(g(x) >= eps / 2.0 - 1e-16);
        CHECK(g(x) <= eps + 1e-16);
    }

    // Slope bounded by xi, attained at the quarter points.
    double max_slope = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double x = i * w / 1000.0;
        max_slope = std::max(max_slope, std::abs(g.deriv(x)));
    }
    CHECK(max_slope <= xi + 1e-12);
    CHECK(std::abs(g.deriv(w / 4.0)) == doctest::Approx(xi).epsilon(1e-12));

    // C1 continuity at the piece joins.
    for (double x : {w / 4.0, w / 2.0, 3.0 * w / 4.0}) {
        CHECK(g(x - 1e-10) == doctest::Approx(g(x + 1e-10)).epsilon(1e-4));
        CHECK(g.deriv(x - 1e-10) == doctest::Approx(g.deriv(x + 1e-10)).epsilon(1e-4));
    }

    // Finite-difference consistency of the derivative.
    for (double x : {0.1 * w, 0.3 * w, 0.5 * w, 0.62 * w, 0.9 * w}) {
        const double h = 1e-7 * w;
        const double fd = (g(x + h) - g(x - h)) / (2.0 * h);
        CHECK(g.deriv(x) == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("cell indexing over [-Cx/2, Cx/2]") {
    const double Cx = 0.1;
    const int N = 8;
    const double w = Cx / (2.0 * N);
    CHECK(cell_of(-Cx / 2.0, Cx, N) == -N);
    CHECK(cell_of(0.0, Cx, N) == 0);
    CHECK(cell_of(w * 0.999, Cx, N) == 0);
    CHECK(cell_of(w, Cx, N) == 1);
    CHECK(cell_of(Cx / 2.0 - 1e-12, Cx, N) == N - 1);
    CHECK(cell_of(Cx / 2.0, Cx, N) == N - 1);  // last cell closed
    CHECK(cell_of(Cx / 2.0 + 1e-12, Cx, N) == -N - 1);
    CHECK(cell_of(-Cx / 2.0 - 1e-12, Cx, N) == -N - 1);
    CHECK(cell_left(-N, Cx, N) == doctest::Approx(-Cx / 2.0));
    CHECK(cell_left(3, Cx, N) == doctest::Approx(3.0 * w));
}

TEST_CASE("quadratic potential") {
    const Potential q = quadratic(2.5, 3);
    CHECK(q.d == 3);
    CHECK(q.hess_lo == 2.5);
    CHECK(q.hess_hi == 2.5);
    CHECK(q.minimizer.isZero());
    REQUIRE(q.quad_u.has_value());
    CHECK((*q.quad_u)(1) == 2.5);
    Eigen::VectorXd x(3);
    x << 1.0, -2.0, 0.5;
    CHECK((q.gradient(x) - 2.5 * x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adversarial member: gradient assembly and class certificates") {
    const double u = 2.0, Cx = 0.1, xi = 1.0, ell = 1.0, L = 4.0;
    const int N = 8;
    BetaIndex beta(static_cast<std::size_t>(2 * N), 0);
    beta[3] = beta[8] = beta[15] = 1;  // cells -5, 0, 7
    const Potential p = adversarial(u, Cx, N, xi, beta, ell, L);
    CHECK(p.d == 1);
    CHECK(p.hess_lo == doctest::Approx(u - xi));
    CHECK(p.hess_hi == doctest::Approx(u + xi));
    CHECK(!p.quad_u.has_value());
    CHECK(p.minimizer(0) == 0.0);

    const Bump1D g = bump_g(Cx, N, xi);
    Eigen::VectorXd x(1);
    // Gradient is the base slope plus the active bumps, evaluated relative
    // to each active cell's left endpoint.
    for (double xv : {-0.031, -0.0288, 0.0007, 0.002, 0.0451, 0.08, -0.2}) {
        x(0) = xv;
        double expect = u * xv;
        for (int j = -N; j < N; ++j)
            if (beta[static_cast<std::size_t>(j + N)])
                expect += g(xv - cell_left(j, Cx, N));
        CHECK(p.gradient(x)(0) == doctest::Approx(expect).epsilon(1e-14));
    }

    // The origin is a critical point of every member, and strict convexity
    // (hess_lo > 0) makes it the unique minimizer.
    x(0) = 0.0;
    CHECK(p.gradient(x)(0) == 0.0);
    CHECK(p.hess_lo > 0.0);

    // The perturbation never exceeds the peak amplitude.
    const double eps = Cx * xi / (8.0 * N);
    for (int i = 0; i <= 2000; ++i) {
        x(0) = -0.06 + i * 0.12 / 2000.0;
        const double dev = p.gradient(x)(0) - u * x(0);
        CHECK(dev >= -1e-16);
        CHECK(dev <= eps + 1e-16);
    }

    // xi outside the class budget is rejected.
    CHECK_THROWS_AS(adversarial(u, Cx, N, 2.5, beta, ell, L), std::invalid_argument);
    // Wrong beta length is rejected.
    CHECK_THROWS_AS(adversarial(u, Cx, N, xi, BetaIndex(3, 0), ell, L),
                    std::invalid_argument);
}

TEST_CASE("smooth non-quadratic member") {
    const double ell = 1.0, L = 4.0;
    const Potential p = smooth_nonquadratic(ell, L, 2);
    CHECK(p.d == 2);
    CHECK(p.hess_lo == doctest::Approx((3.0 * ell + L) / 4.0));
    CHECK(p.hess_hi == doctest::Approx((ell + 3.0 * L) / 4.0));
    CHECK(!p.quad_u.has_value());
    Eigen::VectorXd x(2);
    x << 0.7, -1.3;
    const Eigen::VectorXd gr = p.gradient(x);
    for (int i = 0; i < 2; ++i)
        CHECK(gr(i) == doctest::Approx((ell + L) / 2.0 * x(i) +
                                       (L - ell) / 4.0 * (1.0 - std::cos(x(i)))));
    x.setZero();
    CHECK(p.gradient(x).cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.minimizer.isZero());
}

TEST_CASE("separable potential acts coordinate-wise") {
    std::vector<Potential> comps;
    comps.push_back(quadratic(1.0, 1));
    comps.push_back(quadratic(3.0, 1));
    const Potential p = separable(std::move(comps));
    CHECK(p.d == 2);
    CHECK(p.hess_lo == 1.0);
    CHECK(p.hess_hi == 3.0);
    REQUIRE(p.quad_u.has_value());
    CHECK((*p.quad_u)(0) == 1.0);
    CHECK((*p.quad_u)(1) == 3.0);
    Eigen::VectorXd x(2);
    x << 2.0, -1.0;
    const Eigen::VectorXd gr = p.gradient(x);
    CHECK(gr(0) == 2.0);
    CHECK(gr(1) == -3.0);
}

TEST_CASE("potential spec parsing") {
    const PotentialSpec s = parse_potential_spec("adversarial:u=2,Cx=0.1,N=8,beta=ones");
    CHECK(s.kind == "adversarial");
    CHECK(s.num("u") == 2.0);
    CHECK(s.num("Cx") == 0.1);
    CHECK(s.str("beta", "zeros") == "ones");
    CHECK(s.num("xi", 7.0) == 7.0);  // fallback for missing key
    CHECK_THROWS_AS((void)s.num("missing"), std::invalid_argument);

    CHECK(parse_potential_spec("smooth").kind == "smooth");
    CHECK_THROWS_AS((void)parse_potential_spec("nosuchkind:u=1"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_potential_spec("quadratic:u"), std::invalid_argument);

    const Potential q = make_potential(parse_potential_spec("quadratic:u=1.5"), 2, 1.0,
                                       4.0, 1);
    REQUIRE(q.quad_u.has_value());
    CHECK((*q.quad_u)(0) == 1.5);
    CHECK(q.d == 2);
}

TEST_CASE("beta parsing") {
    CHECK(parse_beta("ones", 4, 1) == BetaIndex({1, 1, 1, 1}));
    CHECK(parse_beta("zeros", 4, 1) == BetaIndex({0, 0, 0, 0}));
    CHECK(parse_beta("0110", 4, 1) == BetaIndex({0, 1, 1, 0}));
    CHECK_THROWS_AS((void)parse_beta("01", 4, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_beta("01x0", 4, 1), std::invalid_argument);
    // Random patterns are reproducible in the seed.
    CHECK(parse_beta("random", 16, 9) == parse_beta("random", 16, 9));
}
