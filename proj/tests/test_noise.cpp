#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "uldyn/noise.hpp"

using namespace uldyn;

TEST_CASE("exponent set always carries the plain and friction weights") {
    ExponentSet e;
    CHECK(e.size() == 2);
    CHECK(e[0] == 0.0);
    CHECK(e[1] == 2.0);

    ExponentSet f{0.5, 3.0};
    CHECK(f.size() == 4);
    CHECK(f[0] == 0.0);
    CHECK(f[1] == 0.5);
    CHECK(f[2] == 2.0);
    CHECK(f[3] == 3.0);
    CHECK(f.index_of(0.5) == 1);
    CHECK_THROWS_AS((void)f.index_of(1.7), std::invalid_argument);

    // Values closer than the merge tolerance collapse to one exponent.
    ExponentSet g{2.0 + 1e-13, 1.0, 1.0 + 1e-13};
    CHECK(g.size() == 3);  // {0, 1, 2}
    CHECK(g.index_of(1.0) == g.index_of(1.0 + 1e-13));
}

TEST_CASE("pair covariance closed form") {
    // Cov over one subinterval of length delta of the right-anchored
    // integrals with exponents a and b is (1 - e^{-(a+b)d})/(a+b).
    CHECK(pair_covariance(0.0, 0.0, 0.37) == doctest::Approx(0.37).epsilon(1e-15));
    const double d = 0.25, th = 2.0;
    CHECK(pair_covariance(th, th, d) ==
          doctest::Approx((1.0 - std::exp(-2.0 * th * d)) / (2.0 * th)).epsilon(1e-14));
    CHECK(pair_covariance(0.0, th, d) ==
          doctest::Approx((1.0 - std::exp(-th * d)) / th).epsilon(1e-14));
    // Symmetry and positivity.
    CHECK(pair_covariance(0.3, 1.1, d) == pair_covariance(1.1, 0.3, d));
    CHECK(pair_covariance(0.3, 1.1, d) > 0.0);
}

TEST_CASE("grid planner produces canonical merged grids") {
    // Uniform ladder without midpoints.
    const TimeGrid g = plan_grid(1.0, 2);
    REQUIRE(g.size() == 3);
    CHECK(g.t[0] == 0.0);
    CHECK(g.t[1] == 0.5);
    CHECK(g.t[2] == 1.0);
    CHECK((g.tags[1] & tag_node) != 0);
    CHECK((g.tags[2] & tag_horizon) != 0);
    CHECK(g.contains(0.5));
    CHECK(!g.contains(0.25));
    CHECK(g.index_of(0.5) == 1);
    CHECK_THROWS_AS((void)g.index_of(0.3), std::invalid_argument);

    // Ladder plus per-step midpoints at the canonical times.
    const std::vector<double> etas{0.5, 0.25};
    const TimeGrid m = plan_grid(1.0, 2, etas);
    REQUIRE(m.size() == 5);
    CHECK(m.t[1] == midpoint_time(1.0, 2, 0, 0.5));   // 0.25
    CHECK(m.t[2] == 0.5);
    CHECK(m.t[3] == midpoint_time(1.0, 2, 1, 0.25));  // 0.625
    CHECK((m.tags[1] & tag_midpoint) != 0);

    // Merging two ladders unions the points and ORs the tags.
    GridBuilder gb(1.0);
    gb.nodes(2).nodes(4);
    const TimeGrid u = gb.build();
    REQUIRE(u.size() == 5);
    CHECK(u.t[1] == 0.25);
    CHECK(u.t[2] == 0.5);

    // A midpoint colliding with a node keeps both tags.
    GridBuilder gc(1.0);
    const std::vector<double> eta_hit{0.5};
    gc.nodes(1).midpoints(1, eta_hit);
    const TimeGrid c = gc.build();
    const std::size_t i = c.index_of(0.5);
    CHECK((c.tags[i] & tag_midpoint) != 0);
}

TEST_CASE("equal subinterval lengths share one cached factor") {
    const TimeGrid g = plan_grid(1.0, 4);
    const NoiseRealization nr = sample_noise(g, ExponentSet{}, 1, RngSpec{7, 0, 0});
    CHECK(nr.factors.size() == 1);  // all deltas bit-identical
    for (std::size_t i = 0; i < g.intervals(); ++i) CHECK(nr.factor_of_interval[i] == 0);

    GridBuilder gb(1.0);
    gb.nodes(2).at(0.1);
    const NoiseRealization nr2 = sample_noise(gb.build(), ExponentSet{}, 1, RngSpec{7, 0, 0});
    CHECK(nr2.factors.size() == 3);  // deltas 0.1, 0.4, 0.5
}

TEST_CASE("noise is a pure function of (seed, trial, stream)") {
    const TimeGrid g = plan_grid(1.0, 8);
    const ExponentSet th{0.5};
    const NoiseRealization a = sample_noise(g, th, 2, RngSpec{42, 3, 0});
    const NoiseRealization b = sample_noise(g, th, 2, RngSpec{42, 3, 0});
    CHECK(a.J == b.J);
    const NoiseRealization c = sample_noise(g, th, 2, RngSpec{42, 4, 0});
    CHECK(a.J != c.J);

    // Resampling in place reproduces a fresh draw with the same spec.
    NoiseRealization r = sample_noise(g, th, 2, RngSpec{42, 0, 0});
    resample_noise(r, RngSpec{42, 3, 0});
    CHECK(r.J == a.J);
}

TEST_CASE("re-anchored composition is additive across a split point") {
    // J[a,c] anchored at `anchor` must equal e^{th (b-anchor)} J[a,b]@b plus
    // J[b,c]@anchor for any interior grid point b.
    const TimeGrid g = plan_grid(2.0, 5);
    const ExponentSet th{0.7, 1.9};
    const NoiseRealization nr = sample_noise(g, th, 1, RngSpec{11, 0, 0});
    for (double theta : th.values()) {
        const double b = g.t[2], anchor = 2.0;
        const Eigen::VectorXd whole = weighted_integral(nr, 0.0, 2.0, theta, anchor);
        const Eigen::VectorXd left = weighted_integral(nr, 0.0, b, theta, b);
        const Eigen::VectorXd right = weighted_integral(nr, b, 2.0, theta, anchor);
        const Eigen::VectorXd composed = std::exp(theta * (b - anchor)) * left + right;
        CHECK((whole - composed).cwiseAbs().maxCoeff() < 1e-14);
    }
    // Degenerate interval contributes nothing.
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(1);
    add_weighted(nr, 2, 2, 0.7, 0.0, 1.0, acc);
    CHECK(acc(0) == 0.0);
}

TEST_CASE("sampled covariances match the Ito isometry within 4 standard errors") {
    // Joint covariance over a composed interval: for the right-anchored
    // integral over [0,T] assembled from stored subintervals,
    // Cov = (1 - e^{-(a+b)T})/(a+b), the same closed form as one interval.
    const double T = 1.0;
    GridBuilder gb(T);
    gb.nodes(3).at(0.05);
    const TimeGrid g = gb.build();
    const ExponentSet th{0.1339745962155614, 1.8660254037844386};  // 1 -+ sqrt(3)/2
    const int M = 100000;
    const std::size_t nth = th.size();

    NoiseRealization nr = sample_noise(g, th, 1, RngSpec{5, 0, 0});
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nth), 1);
    Eigen::MatrixXd sum2 =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nth), static_cast<Eigen::Index>(nth));
    for (int t = 0; t < M; ++t) {
        resample_noise(nr, RngSpec{5, static_cast<std::uint64_t>(t), 0});
        Eigen::VectorXd j(static_cast<Eigen::Index>(nth));
        for (std::size_t r = 0; r < nth; ++r)
            j(static_cast<Eigen::Index>(r)) = weighted_integral(nr, 0.0, T, th[r], T)(0);
        sum += j;
        sum2 += j * j.transpose();
    }
    const Eigen::MatrixXd mean = sum / M;
    const Eigen::MatrixXd cov = sum2 / M - mean * mean.transpose();
    for (std::size_t a = 0; a < nth; ++a)
        for (std::size_t b = 0; b < nth; ++b) {
            const double exact = pair_covariance(th[a], th[b], T);
            const double va = pair_covariance(th[a], th[a], T);
            const double vb = pair_covariance(th[b], th[b], T);
            const double se = std::sqrt((va * vb + exact * exact) / M);
            CHECK(std::abs(cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) -
                           exact) < 4.0 * se);
        }
    // Means vanish.
    CHECK(mean.cwiseAbs().maxCoeff() < 4.0 / std::sqrt(static_cast<double>(M)));
}

TEST_CASE("left-anchored running integral matches its variance law") {
    // wtilde(t, theta) = int_0^t e^{theta s} dW has variance (e^{2 th t}-1)/(2 th).
    const TimeGrid g = plan_grid(0.75, 3);
    const ExponentSet th{};
    const int M = 60000;
    NoiseRealization nr = sample_noise(g, th, 1, RngSpec{9, 0, 0});
    double s2 = 0.0;
    for (int t = 0; t < M; ++t) {
        resample_noise(nr, RngSpec{9, static_cast<std::uint64_t>(t), 0});
        const double w = wtilde(nr, 0.75, 2.0)(0);
        s2 += w * w;
    }
    const double var = s2 / M;
    const double exact = (std::exp(2.0 * 2.0 * 0.75) - 1.0) / (2.0 * 2.0);
    CHECK(std::abs(var - exact) < 4.0 * exact * std::sqrt(2.0 / M));
}
