#include <doctest.h>

#include <random>

#include "calsens/eif.hpp"

using namespace calsens;

TEST_CASE("AIPW influence values by hand") {
    CHECK(eif::phi_amd(1, 2.0, 0.25, 1.0, 0.0) == doctest::Approx(5.0));
    CHECK(eif::phi_amd(0, 1.0, 0.75, 1.0, 0.5) == doctest::Approx(-1.5));
    const std::vector<int> a{1, 0};
    const std::vector<double> y{2.0, 1.0};
    Eigen::VectorXd p(2), m1(2), m0(2);
    p << 0.25, 0.75;
    m1 << 1.0, 1.0;
    m0 << 0.0, 0.5;
    const auto v = eif::phi_amd(a, y, p, m1, m0);
    CHECK(v(0) == doctest::Approx(5.0));
    CHECK(v(1) == doctest::Approx(-1.5));
}

TEST_CASE("xi values and its exact second-order remainder") {
    CHECK(eif::xi(1, 0.3, 1) == doctest::Approx(0.51));
    CHECK(eif::xi(0, 0.3, 1) == doctest::Approx(-0.09));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int rep = 0; rep < 20; ++rep) {
        const double pi = u(rng), pibar = u(rng);
        // A ~ Bern(pi): E xi(pibar) - pi^2 = -(pibar - pi)^2
        const double e = pi * eif::xi(1, pibar, 1) + (1 - pi) * eif::xi(0, pibar, 1);
        CHECK(e - pi * pi == doctest::Approx(-(pibar - pi) * (pibar - pi)).epsilon(1e-12));
        // arm 0 uses P(A = 0)
        const double e0 = pi * eif::xi(1, 1 - pibar, 0) + (1 - pi) * eif::xi(0, 1 - pibar, 0);
        CHECK(e0 - (1 - pi) * (1 - pi) == doctest::Approx(-(pibar - pi) * (pibar - pi)).epsilon(1e-12));
    }
}

TEST_CASE("lambda values by hand") {
    const eif::LambdaInputs v{1.0, 0.5, 1.5, 0.5, 0.4, 0.5, 0.6};
    CHECK(eif::lambda(1, 3.0, 1, v) == doctest::Approx(-0.25));
    CHECK(eif::lambda(0, 3.0, 1, v) == doctest::Approx(-1.75));
    // Same covariates in both views: the correction terms cancel on the treated.
    const eif::LambdaInputs same{1.0, 0.5, 1.0, 0.5, 0.5, 0.5, 0.5};
    CHECK(eif::lambda(1, 7.0, 1, same) == doctest::Approx(0.25));
}

namespace {

eif::OddsValues flat(double t, const Eigen::VectorXd& p, const Eigen::VectorXd& m1, const Eigen::VectorXd& m0) {
    eif::OddsValues v;
    v.t = t;
    v.pi1 = p;
    v.theta1_plus = v.theta1_minus = m1;
    v.theta0_plus = v.theta0_minus = m0;
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(p.size());
    v.nu1_plus = v.nu1_minus = v.nu0_plus = v.nu0_minus = one;
    v.ftilde1_plus = v.f1_minus = v.f0_minus = v.ftilde0_plus = 0.5 * one;
    return v;
}

}  // namespace

TEST_CASE("odds influence function collapses to AIPW at t = 1") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    const int n = 50;
    Eigen::VectorXd p(n), m1(n), m0(n);
    std::vector<int> a(n);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
        p(i) = u(rng), m1(i) = u(rng), m0(i) = u(rng);
        a[static_cast<std::size_t>(i)] = u(rng) < 0.5;
        y[static_cast<std::size_t>(i)] = 3 * u(rng);
    }
    const auto v = flat(1.0, p, m1, m0);
    const auto ref = eif::phi_amd(a, y, p, m1, m0);
    CHECK((eif::varphi_odds(a, y, v, eif::Side::upper) - ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((eif::varphi_odds(a, y, v, eif::Side::lower) - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("bound derivative terms have the right sign and size") {
    Eigen::VectorXd p(1), m(1);
    p << 0.25;
    m << 0.0;
    const auto v = flat(2.0, p, m, m);
    // upper: G [0.75 * 0.5 + 2 * 0.25 * 0.5] = G * 0.625
    CHECK(eif::dbound_dM_terms(v, 1.5, eif::Side::upper)(0) == doctest::Approx(1.5 * 0.625));
    // lower: -G [2 * 0.75 * 0.5 + 0.25 * 0.5] = -G * 0.875
    CHECK(eif::dbound_dM_terms(v, 1.5, eif::Side::lower)(0) == doctest::Approx(-1.5 * 0.875));
}

TEST_CASE("influence function of the maximal slope") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    const int n = 600;
    Eigen::MatrixXd x(n, 2);
    std::vector<int> a(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = u(rng), x(i, 1) = u(rng);
        a[static_cast<std::size_t>(i)] = u(rng) < logistic(-0.2 + 0.5 * x(i, 0) - 2.0 * x(i, 1));
    }
    const auto proj = fit_logistic_projection(x, a);
    REQUIRE(proj.argmax == 1);
    CHECK(proj.beta(2) < 0);
    const auto phi = eif::phi_M_odds(x, a, proj);
    CHECK(std::abs(phi.mean()) < 1e-8);
    const Eigen::VectorXd direct = -(proj.scores(x, a) * proj.fisher_info.inverse().row(2).transpose());
    CHECK((phi - direct).cwiseAbs().maxCoeff() < 1e-8);
    // Sandwich with the model-based information: var(phi) ~ (I^-1)_{jj}.
    CHECK(phi.squaredNorm() / n == doctest::Approx(proj.fisher_inverse(2, 2)).epsilon(0.15));
}
