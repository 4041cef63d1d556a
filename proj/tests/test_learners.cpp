#include <doctest.h>

#include <cmath>
#include <random>

#include "calsens/error.hpp"
#include "calsens/learners.hpp"
#include "calsens/nuisance.hpp"

using namespace calsens;

namespace {

// Fixed sample; reference fits from statsmodels Logit / OLS.
const double kX[40][2] = {
    {0.129, 0.499}, {0.601, 0.029}, {0.148, 0.928}, {0.07, 0.13},   {0.948, 0.622}, {0.369, 0.511}, {0.663, 0.275},
    {0.138, 0.788}, {0.67, 0.512},  {0.817, 0.549}, {0.981, 0.205}, {0.554, 0.484}, {0.353, 0.592}, {0.235, 0.802},
    {0.867, 0.129}, {0.467, 0.277}, {0.083, 0.896}, {0.43, 0.148},  {0.673, 0.202}, {0.901, 0.217}, {0.033, 0.201},
    {0.346, 0.469}, {0.906, 0.697}, {0.339, 0.017}, {0.16, 0.996},  {0.46, 0.691},  {0.055, 0.034}, {0.846, 0.588},
    {0.309, 0.317}, {0.089, 0.173}, {0.025, 0.839}, {0.466, 0.127}, {0.739, 0.196}, {0.062, 0.598}, {0.896, 0.027},
    {0.805, 0.19},  {0.093, 0.018}, {0.293, 0.727}, {0.493, 0.853}, {0.217, 0.315}};
const int kA[40] = {1, 0, 0, 1, 1, 1, 0, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 1, 1,
                    1, 0, 0, 0, 0, 1, 1, 1, 0, 1, 1, 1, 1, 0, 1, 1, 0, 1, 0, 1};
const double kY[40] = {0.565, 2.352, 0.119, 0.929, 2.169, 1.285, 2.379, 0.495, 2.104, 1.959,
                       2.855, 0.983, 0.679, 0.907, 2.428, 1.831, 0.433, 2.109, 2.388, 2.89,
                       0.831, 1.014, 1.896, 1.515, -0.015, 1.065, 1.048, 2.179, 1.199, 0.428,
                       0.189, 1.873, 2.607, 0.699, 2.572, 2.203, 1.771, 1.086, 1.682, 1.758};

Eigen::MatrixXd xmat() {
    Eigen::MatrixXd x(40, 2);
    for (int i = 0; i < 40; ++i) x(i, 0) = kX[i][0], x(i, 1) = kX[i][1];
    return x;
}
Eigen::VectorXd avec() {
    Eigen::VectorXd a(40);
    for (int i = 0; i < 40; ++i) a(i) = kA[i];
    return a;
}
Eigen::VectorXd yvec() { return Eigen::Map<const Eigen::VectorXd>(kY, 40); }

}  // namespace

TEST_CASE("logistic regression matches the reference MLE") {
    const auto fit = fit_logistic(xmat(), avec());
    REQUIRE(fit.converged);
    CHECK(fit.beta(0) == doctest::Approx(0.27291522017385983).epsilon(1e-7));
    CHECK(fit.beta(1) == doctest::Approx(0.7653575602300048).epsilon(1e-7));
    CHECK(fit.beta(2) == doctest::Approx(-0.9601294163018654).epsilon(1e-7));
    // Standard errors: sqrt(diag(I^-1) / n).
    const Eigen::MatrixXd inv = fit.fisher_info.inverse();
    CHECK(std::sqrt(inv(1, 1) / 40.0) == doctest::Approx(1.087893883762133).epsilon(1e-6));
    CHECK(std::sqrt(inv(2, 2) / 40.0) == doctest::Approx(1.1384220897974675).epsilon(1e-6));
}

TEST_CASE("logistic regression reports separation") {
    Eigen::MatrixXd x(6, 1);
    x << 0, 1, 2, 3, 4, 5;
    Eigen::VectorXd a(6);
    a << 0, 0, 0, 1, 1, 1;
    CHECK_FALSE(fit_logistic(x, a).converged);
    CHECK_THROWS_AS(fit_regressor(Learner::logistic, x, a), FitError);
}

TEST_CASE("least squares matches the reference fit") {
    const auto b = least_squares(basis_expand(xmat(), Learner::linear), yvec());
    CHECK(b(0) == doctest::Approx(1.0784136113577767).epsilon(1e-10));
    CHECK(b(1) == doctest::Approx(1.9917855564970088).epsilon(1e-10));
    CHECK(b(2) == doctest::Approx(-1.1257950311504938).epsilon(1e-10));
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(40) * 3.0;
    CHECK(weighted_least_squares(basis_expand(xmat(), Learner::linear), yvec(), w).isApprox(b, 1e-10));
}

TEST_CASE("basis expansion sizes") {
    const auto x = xmat();
    CHECK(basis_expand(x, Learner::linear).cols() == 3);
    const auto p = basis_expand(x, Learner::poly2);
    CHECK(p.cols() == 6);
    CHECK(p(3, 3) == doctest::Approx(kX[3][0] * kX[3][0]));
    CHECK(p(3, 4) == doctest::Approx(kX[3][0] * kX[3][1]));
}

TEST_CASE("learners recover simple structure") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    Eigen::MatrixXd x(400, 1);
    Eigen::VectorXd y(400);
    for (int i = 0; i < 400; ++i) x(i, 0) = u(rng), y(i) = std::sin(3 * x(i, 0));
    Eigen::MatrixXd probe(3, 1);
    probe << 0.2, 0.5, 0.8;
    for (auto l : {Learner::knn, Learner::nadaraya_watson, Learner::poly2}) {
        const auto r = fit_regressor(l, x, y);
        const auto p = r->predict(probe);
        for (int i = 0; i < 3; ++i) CHECK(p(i) == doctest::Approx(std::sin(3 * probe(i, 0))).epsilon(0.05));
    }
    LearnerOptions one;
    one.knn_k = 1;
    const auto nn = fit_regressor(Learner::knn, x, y, one)->predict(x.topRows(5));
    for (int i = 0; i < 5; ++i) CHECK(nn(i) == y(i));
    const auto c = fit_regressor(Learner::constant, x, y)->predict(probe);
    CHECK(c(0) == doctest::Approx(y.mean()));
    const Eigen::MatrixXd none(400, 0);
    CHECK(fit_regressor(Learner::linear, none, y)->predict(Eigen::MatrixXd(2, 0))(1) == doctest::Approx(y.mean()));
}

TEST_CASE("learner names round-trip") {
    for (auto l : {Learner::constant, Learner::linear, Learner::poly2, Learner::knn, Learner::nadaraya_watson,
                   Learner::logistic})
        CHECK(parse_learner(learner_name(l)) == l);
    CHECK_THROWS_AS(parse_learner("forest"), ConfigError);
}

TEST_CASE("propensity truncation and arm complement") {
    const auto rule = fit_propensity(xmat(), std::span<const int>(kA, 40), Learner::logistic, 0.3);
    const auto p1 = rule.pi1(xmat());
    const auto p0 = rule.pi(0, xmat());
    for (int i = 0; i < 40; ++i) {
        CHECK(p1(i) >= 0.3);
        CHECK(p1(i) <= 0.7);
        CHECK(p0(i) == doctest::Approx(1.0 - p1(i)));
    }
}

TEST_CASE("logistic projection picks the largest slope") {
    const auto proj = fit_logistic_projection(xmat(), std::span<const int>(kA, 40));
    CHECK(proj.argmax == 1);
    CHECK(proj.m_hat() == doctest::Approx(0.9601294163018654).epsilon(1e-7));
    CHECK(proj.runner_up_gap == doctest::Approx(0.9601294163018654 - 0.7653575602300048).epsilon(1e-6));
    const auto s = proj.scores(xmat(), std::span<const int>(kA, 40));
    CHECK(s.colwise().sum().norm() < 1e-8);
    Eigen::MatrixXd bad = xmat();
    bad(0, 0) = 2.0;
    CHECK_THROWS_AS(fit_logistic_projection(bad, std::span<const int>(kA, 40)), ValidationError);
}
