#include "uldyn/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>

#include "uldyn/rng.hpp"

namespace uldyn {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

std::string fmt_num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

Potential quadratic(double u, int d) {
    require(u > 0.0 && std::isfinite(u), "quadratic: curvature must be positive");
    require(d >= 1, "quadratic: dimension must be >= 1");
    Potential p;
    p.d = d;
    p.grad = [u](const Eigen::VectorXd& x, Eigen::VectorXd& g) { g = u * x; };
    p.hess_lo = u;
    p.hess_hi = u;
    p.minimizer = Eigen::VectorXd::Zero(d);
    p.name = "quadratic(u=" + fmt_num(u) + ")";
    p.quad_u = Eigen::VectorXd::Constant(d, u);
    return p;
}

Potential separable(std::vector<Potential> components) {
    require(!components.empty(), "separable: need at least one component");
    Potential p;
    p.d = static_cast<int>(components.size());
    p.hess_lo = components.front().hess_lo;
    p.hess_hi = components.front().hess_hi;
    p.minimizer = Eigen::VectorXd(p.d);
    bool all_quad = true;
    Eigen::VectorXd us(p.d);
    for (int i = 0; i < p.d; ++i) {
        const Potential& c = components[static_cast<std::size_t>(i)];
        require(c.d == 1, "separable: components must be 1-d");
        p.hess_lo = std::min(p.hess_lo, c.hess_lo);
        p.hess_hi = std::max(p.hess_hi, c.hess_hi);
        p.minimizer(i) = c.minimizer(0);
        if (c.quad_u)
            us(i) = (*c.quad_u)(0);
        else
            all_quad = false;
    }
    if (all_quad) p.quad_u = us;
    p.name = "separable(d=" + std::to_string(p.d) + ")";
    auto comps = std::make_shared<std::vector<Potential>>(std::move(components));
    p.grad = [comps](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        Eigen::VectorXd xi(1), gi(1);
        for (int i = 0; i < x.size(); ++i) {
            xi(0) = x(i);
            (*comps)[static_cast<std::size_t>(i)].grad(xi, gi);
            g(i) = gi(0);
        }
    };
    return p;
}

// ---------------------------------------------------------------------------
// Bump family
// ---------------------------------------------------------------------------

Bump1D bump_g(double Cx, int N, double xi) {
    require(Cx > 0.0 && std::isfinite(Cx), "bump_g: Cx must be positive");
    require(N >= 1, "bump_g: N must be >= 1");
    require(xi > 0.0 && std::isfinite(xi), "bump_g: xi must be positive");
    Bump1D b;
    b.Cx = Cx;
    b.N = N;
    b.xi = xi;
    b.w = Cx / (2.0 * N);
    b.a = 4.0 * N * xi / Cx;
    b.eps = Cx * xi / (8.0 * N);
    return b;
}

double Bump1D::operator()(double x) const {
    if (x <= 0.0 || x >= w) return 0.0;
    const double q = w / 4.0;
    if (x < q) return a * x * x;
    if (x <= 3.0 * q) {
        const double y = x - 2.0 * q;
        return -a * y * y + 2.0 * a * q * q;
    }
    const double y = x - w;
    return a * y * y;
}

double Bump1D::deriv(double x) const {
    if (x <= 0.0 || x >= w) return 0.0;
    const double q = w / 4.0;
    if (x < q) return 2.0 * a * x;
    if (x <= 3.0 * q) return -2.0 * a * (x - 2.0 * q);
    return 2.0 * a * (x - w);
}

int cell_of(double x, double Cx, int N) {
    if (x < -Cx / 2.0 || x > Cx / 2.0) return -N - 1;
    if (x == Cx / 2.0) return N - 1;  // last cell is closed on the right
    const int j = static_cast<int>(std::floor(2.0 * N * x / Cx));
    return std::min(std::max(j, -N), N - 1);
}

double cell_left(int j, double Cx, int N) { return Cx * static_cast<double>(j) / (2.0 * N); }

Potential adversarial(double u, double Cx, int N, double xi, BetaIndex beta,
                      double ell, double L) {
    require(ell > 0.0 && ell < u && u < L, "adversarial: need 0 < ell < u < L");
    require(xi > 0.0 && xi <= u - ell && u + xi <= L,
            "adversarial: need 0 < xi <= min(u - ell, L - u)");
    require(beta.size() == static_cast<std::size_t>(2 * N),
            "adversarial: beta must have one bit per cell (2N)");
    const Bump1D b = bump_g(Cx, N, xi);
    Potential p;
    p.d = 1;
    p.hess_lo = u - xi;
    p.hess_hi = u + xi;
    p.minimizer = Eigen::VectorXd::Zero(1);
    p.name = "adversarial(u=" + fmt_num(u) + ",Cx=" + fmt_num(Cx) +
             ",N=" + std::to_string(N) + ",xi=" + fmt_num(xi) + ")";
    auto bits = std::make_shared<BetaIndex>(std::move(beta));
    p.grad = [u, Cx, N, b, bits](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        const double xv = x(0);
        double gv = u * xv;
        const int j = cell_of(xv, Cx, N);
        if (j >= -N && (*bits)[static_cast<std::size_t>(j + N)])
            gv += b(xv - cell_left(j, Cx, N));
        g(0) = gv;
    };
    return p;
}

Potential smooth_nonquadratic(double ell, double L, int d) {
    require(0.0 < ell && ell < L, "smooth_nonquadratic: need 0 < ell < L");
    require(d >= 1, "smooth_nonquadratic: dimension must be >= 1");
    const double c0 = (ell + L) / 2.0;
    const double c1 = (L - ell) / 4.0;
    Potential p;
    p.d = d;
    p.grad = [c0, c1](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g = c0 * x + c1 * (1.0 - x.array().cos()).matrix();
    };
    p.hess_lo = c0 - c1;
    p.hess_hi = c0 + c1;
    p.minimizer = Eigen::VectorXd::Zero(d);
    p.name = "smooth(ell=" + fmt_num(ell) + ",L=" + fmt_num(L) + ")";
    return p;
}

// ---------------------------------------------------------------------------
// Spec parsing
// ---------------------------------------------------------------------------

bool PotentialSpec::has(const std::string& key) const {
    for (const auto& [k, v] : params)
        if (k == key) return true;
    return false;
}

std::string PotentialSpec::str(const std::string& key, const std::string& fallback) const {
    for (const auto& [k, v] : params)
        if (k == key) return v;
    return fallback;
}

double PotentialSpec::num(const std::string& key) const {
    for (const auto& [k, v] : params)
        if (k == key) {
            std::size_t pos = 0;
            const double x = std::stod(v, &pos);
            if (pos != v.size())
                throw std::invalid_argument("potential spec: bad number for key '" + key + "'");
            return x;
        }
    throw std::invalid_argument("potential spec: missing key '" + key + "'");
}

double PotentialSpec::num(const std::string& key, double fallback) const {
    return has(key) ? num(key) : fallback;
}

PotentialSpec parse_potential_spec(const std::string& text) {
    PotentialSpec s;
    const auto colon = text.find(':');
    s.kind = text.substr(0, colon);
    if (colon != std::string::npos) {
        std::stringstream rest(text.substr(colon + 1));
        std::string item;
        while (std::getline(rest, item, ',')) {
            if (item.empty()) continue;
            const auto eq = item.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("potential spec: expected key=value, got '" + item + "'");
            s.params.emplace_back(item.substr(0, eq), item.substr(eq + 1));
        }
    }
    if (s.kind != "quadratic" && s.kind != "separable" && s.kind != "adversarial" &&
        s.kind != "smooth")
        throw std::invalid_argument("potential spec: unknown kind '" + s.kind + "'");
    return s;
}

Potential make_potential(const PotentialSpec& spec, int d, double ell, double L,
                         std::uint64_t seed) {
    if (spec.kind == "quadratic") return quadratic(spec.num("u"), d);
    if (spec.kind == "smooth") return smooth_nonquadratic(ell, L, d);
    if (spec.kind == "separable") {
        // u=<v> applies the same 1-d quadratic curvature to every coordinate.
        std::vector<Potential> comps;
        comps.reserve(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) comps.push_back(quadratic(spec.num("u"), 1));
        return separable(std::move(comps));
    }
    // adversarial
    const double u = spec.num("u");
    const double Cx = spec.num("Cx");
    const int N = static_cast<int>(spec.num("N"));
    const double xi = spec.num("xi", std::min(u - ell, L - u));
    BetaIndex beta = parse_beta(spec.str("beta", "ones"), 2 * N, seed);
    return adversarial(u, Cx, N, xi, std::move(beta), ell, L);
}

BetaIndex parse_beta(const std::string& text, int cells, std::uint64_t seed) {
    require(cells >= 1, "parse_beta: need at least one cell");
    BetaIndex beta(static_cast<std::size_t>(cells), 0);
    if (text == "ones") {
        std::fill(beta.begin(), beta.end(), std::uint8_t{1});
    } else if (text == "zeros") {
        // already zero
    } else if (text == "random") {
        auto eng = make_engine(RngSpec{seed, 0, stream::index});
        std::bernoulli_distribution coin(0.5);
        for (auto& b : beta) b = coin(eng) ? 1 : 0;
    } else {
        if (text.size() != static_cast<std::size_t>(cells))
            throw std::invalid_argument("beta bitstring must have one bit per cell");
        for (std::size_t i = 0; i < text.size(); ++i) {
            if (text[i] != '0' && text[i] != '1')
                throw std::invalid_argument("beta bitstring must be 0/1");
            beta[i] = text[i] == '1' ? 1 : 0;
        }
    }
    return beta;
}

}  // namespace uldyn
