#include "calsens/simlab.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <random>

#include "calsens/error.hpp"

namespace calsens::simlab {
namespace {

using boost::math::quadrature::gauss_kronrod;

double integrate(const std::function<double(double)>& f, double a, double b) {
    return gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

void check_theta(double theta) {
    if (!(theta > 0.0 && theta <= 1.0))
        throw ConfigError("proxy coefficient must lie in (0, 1] so that the propensity stays in [0, 1]");
}

// P(A=1 | x, w) of the proxy DGP.
double proxy_p1(double x, double w, double theta) { return (x + theta * w + 2.0) / 4.0; }

// E(W | A = arm, X = x) by quadrature over W ~ U(-1,1).
double proxy_w_given(double x, int arm, double theta) {
    auto p = [&](double w) { return arm == 1 ? proxy_p1(x, w, theta) : 1.0 - proxy_p1(x, w, theta); };
    const double num = integrate([&](double w) { return w * p(w); }, -1.0, 1.0);
    const double den = integrate(p, -1.0, 1.0);
    return num / den;
}

double proxy_mu(double x, int arm, double theta) {
    const double t2 = theta * theta;
    return arm == 1 ? x + t2 / (3.0 * (x + 2.0)) : x - t2 / (3.0 * (2.0 - x));
}

// E{mu_arm(X) | A = 1 - arm} in closed form: p(x | A=0) = (2-x)/4, p(x | A=1) = (x+2)/4.
double proxy_pseudo_empty(int arm, double theta) {
    const double t2 = theta * theta;
    const double log3 = std::log(3.0);
    // E[X | A=0] = -1/6, E[X | A=1] = 1/6.
    if (arm == 1) return -1.0 / 6.0 + t2 / 12.0 * (4.0 * log3 - 2.0);
    return 1.0 / 6.0 - t2 / 12.0 * (4.0 * log3 - 2.0);
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

ProxySample gen_proxy(std::size_t n, std::uint64_t seed, double theta) {
    check_theta(theta);
    if (n < 2) throw ValidationError("proxy generator needs n >= 2");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0), v(0.0, 1.0);
    std::normal_distribution<double> eps(0.0, 1.0);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
    std::vector<int> a(n);
    std::vector<double> y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = u(rng), wi = u(rng);
        const int ai = v(rng) < proxy_p1(xi, wi, theta) ? 1 : 0;
        x(static_cast<Eigen::Index>(i), 0) = xi;
        w[i] = wi;
        a[i] = ai;
        y[i] = xi + theta * wi + eps(rng);
    }
    return {Dataset(std::move(x), std::move(a), std::move(y), {"X"}), std::move(w), theta};
}

ProxySample gen_proxy_example_1(std::size_t n, std::uint64_t seed) { return gen_proxy(n, seed, 1.0); }

ProxySample gen_proxy_example_2(std::size_t n, std::uint64_t seed, double theta) { return gen_proxy(n, seed, theta); }

double ProxyTruths::m() const { return std::abs(psi_x - psi_empty); }
double ProxyTruths::lower(double gamma) const { return psi_x - gamma * m(); }
double ProxyTruths::upper(double gamma) const { return psi_x + gamma * m(); }

ProxyTruths proxy_truths(double theta) {
    check_theta(theta);
    ProxyTruths t;
    t.theta = theta;
    t.psi_star = 0.0;
    t.psi_x = theta * theta * std::log(3.0) / 3.0;
    t.psi_empty = (1.0 + theta * theta) / 3.0;
    return t;
}

double proxy_psi_x_quadrature(double theta) {
    check_theta(theta);
    auto gap = [&](double x) {
        const double m1 = x + theta * proxy_w_given(x, 1, theta);
        const double m0 = x + theta * proxy_w_given(x, 0, theta);
        return 0.5 * (m1 - m0);
    };
    return integrate(gap, -1.0, 1.0);
}

double proxy_psi_empty_quadrature(double theta) {
    check_theta(theta);
    // Joint density of (X, W) is 1/4 on the square.
    auto moment = [&](int arm, bool with_y) {
        return integrate(
            [&](double x) {
                return integrate(
                    [&](double w) {
                        const double p = arm == 1 ? proxy_p1(x, w, theta) : 1.0 - proxy_p1(x, w, theta);
                        return 0.25 * p * (with_y ? x + theta * w : 1.0);
                    },
                    -1.0, 1.0);
            },
            -1.0, 1.0);
    };
    return moment(1, true) / moment(1, false) - moment(0, true) / moment(0, false);
}

double example2_theta() {
    // psi_* = 0, so the equality reads psi_X = psi_empty - psi_X.
    auto f = [](double th) { return 2.0 * proxy_psi_x_quadrature(th) - proxy_psi_empty_quadrature(th); };
    std::uintmax_t iters = 100;
    const auto r = boost::math::tools::toms748_solve(f, 0.1, 1.0, boost::math::tools::eps_tolerance<double>(50), iters);
    return 0.5 * (r.first + r.second);
}

double example2_theta_closed_form() { return std::sqrt(1.0 / (2.0 * std::log(3.0) - 1.0)); }

DgpSpec proxy_spec(std::size_t n, std::uint64_t seed, double theta) {
    const auto t = proxy_truths(theta);
    DgpSpec s;
    s.generator = theta == 1.0 ? "proxy-example-1" : "proxy-example-2";
    s.parameters = {{"theta", theta}};
    s.n = n;
    s.seed = seed;
    s.truths = {{"psi_star", t.psi_star}, {"psi_x", t.psi_x}, {"psi_empty", t.psi_empty}, {"m", t.m()},
                {"lower_gamma1", t.lower(1.0)}, {"upper_gamma1", t.upper(1.0)}};
    return s;
}

std::shared_ptr<const NuisanceFactory> proxy_factory(double theta, NuisanceConfig cfg) {
    check_theta(theta);
    const double e1 = (1.0 + theta * theta) / 6.0;
    auto pi1 = [](const Eigen::MatrixXd& x, const std::vector<std::size_t>& cols) {
        if (cols.empty()) return Eigen::VectorXd::Constant(x.rows(), 0.5).eval();
        return ((x.col(0).array() + 2.0) / 4.0).matrix().eval();
    };
    auto mu = [theta, e1](const Eigen::MatrixXd& x, const std::vector<std::size_t>& cols, int arm) {
        if (cols.empty()) return Eigen::VectorXd::Constant(x.rows(), arm == 1 ? e1 : -e1).eval();
        Eigen::VectorXd out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = proxy_mu(x(i, 0), arm, theta);
        return out;
    };
    auto pseudo = [theta](const Eigen::MatrixXd& x, const std::vector<std::size_t>& sub, int arm) {
        if (!sub.empty()) {
            Eigen::VectorXd out(x.rows());
            for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = proxy_mu(x(i, 0), arm, theta);
            return out;
        }
        return Eigen::VectorXd::Constant(x.rows(), proxy_pseudo_empty(arm, theta)).eval();
    };
    return std::make_shared<AnalyticFactory>(pi1, mu, std::move(cfg), pseudo);
}

double BinaryTruths::gamma0() const { return std::abs(psi) / m; }

Dataset gen_binary(const BinaryDgp& g, std::size_t n, std::uint64_t seed) {
    if (n < 2) throw ValidationError("binary generator needs n >= 2");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> eps(0.0, g.sigma);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
    std::vector<int> a(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const double x1 = u(rng) < g.p1 ? 1.0 : 0.0;
        const double x2 = u(rng) < g.p2 ? 1.0 : 0.0;
        const int ai = u(rng) < logistic(g.alpha0 + g.alpha1 * x1 + g.alpha2 * x2) ? 1 : 0;
        x(r, 0) = x1;
        x(r, 1) = x2;
        a[i] = ai;
        y[i] = g.tau * ai + g.b1 * x1 + g.b2 * x2 + eps(rng);
    }
    return Dataset(std::move(x), std::move(a), std::move(y), {"X1", "X2"});
}

BinaryTruths binary_truths(const BinaryDgp& g) {
    const double px[2][2] = {{1.0 - g.p1, g.p1}, {1.0 - g.p2, g.p2}};
    const double b[2] = {g.b1, g.b2};
    auto pi1 = [&](double x1, double x2) { return logistic(g.alpha0 + g.alpha1 * x1 + g.alpha2 * x2); };
    BinaryTruths t;
    t.psi = g.tau;
    for (int j = 0; j < 2; ++j) {
        const int k = 1 - j;
        double psi_minus = 0.0;
        for (int xk = 0; xk < 2; ++xk) {
            double ey[2];
            for (int arm = 0; arm < 2; ++arm) {
                double num = 0.0, den = 0.0;
                for (int xj = 0; xj < 2; ++xj) {
                    const double x1 = j == 0 ? xj : xk, x2 = j == 0 ? xk : xj;
                    const double p = pi1(x1, x2);
                    const double w = px[j][xj] * (arm == 1 ? p : 1.0 - p);
                    num += w * (g.tau * arm + b[k] * xk + b[j] * xj);
                    den += w;
                }
                ey[arm] = num / den;
            }
            psi_minus += px[k][xk] * (ey[1] - ey[0]);
        }
        t.component[j] = t.psi - psi_minus;
    }
    t.argmax = std::abs(t.component[1]) > std::abs(t.component[0]) ? 1 : 0;
    t.m = std::abs(t.component[t.argmax]);
    return t;
}

DgpSpec binary_spec(const BinaryDgp& g, std::size_t n, std::uint64_t seed) {
    const auto t = binary_truths(g);
    DgpSpec s;
    s.generator = "binary-two-covariate";
    s.parameters = {{"p1", g.p1},   {"p2", g.p2}, {"alpha0", g.alpha0}, {"alpha1", g.alpha1}, {"alpha2", g.alpha2},
                    {"tau", g.tau}, {"b1", g.b1}, {"b2", g.b2},         {"sigma", g.sigma}};
    s.n = n;
    s.seed = seed;
    s.truths = {{"psi", t.psi}, {"component_1", t.component[0]}, {"component_2", t.component[1]},
                {"m", t.m},     {"argmax", static_cast<double>(t.argmax)}, {"gamma0", t.gamma0()}};
    return s;
}

Dataset gen_smooth(std::size_t n, std::uint64_t seed) {
    if (n < 2) throw ValidationError("smooth generator needs n >= 2");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> eps(0.0, 1.0);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
    std::vector<int> a(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const double x1 = u(rng), x2 = u(rng);
        const int ai = u(rng) < logistic(-0.5 + 1.5 * x1 - 1.0 * x2) ? 1 : 0;
        x(r, 0) = x1;
        x(r, 1) = x2;
        a[i] = ai;
        y[i] = 0.5 * ai + x1 + 0.5 * x2 + eps(rng);
    }
    return Dataset(std::move(x), std::move(a), std::move(y), {"X1", "X2"});
}

Dataset gen_uniform_outcome(std::size_t n, std::uint64_t seed) {
    if (n < 4) throw ValidationError("uniform generator needs n >= 4");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
    std::vector<int> a(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x(static_cast<Eigen::Index>(i), 0) = u(rng);
        a[i] = static_cast<int>(i % 2);
        y[i] = u(rng);
    }
    return Dataset(std::move(x), std::move(a), std::move(y), {"X"});
}

}  // namespace calsens::simlab
