#include <doctest.h>

#include <cmath>

#include "calsens/error.hpp"
#include "calsens/experiments.hpp"
#include "calsens/inference.hpp"
#include "calsens/models.hpp"
#include "calsens/simlab.hpp"

using namespace calsens;

TEST_CASE("cross-fitted AIPW with known nuisances equals the direct average") {
    const auto s = simlab::gen_proxy_example_1(2000, 5);
    const auto folds = make_folds(s.data.n(), 5, 1);
    const auto fit = crossfit_aipw(s.data, folds, {0}, *simlab::proxy_factory(1.0));
    double direct = 0.0;
    for (std::size_t i = 0; i < s.data.n(); ++i) {
        const double x = s.data.x(i, 0), y = s.data.y(i);
        const double p = (x + 2) / 4, m1 = x + 1 / (3 * (x + 2)), m0 = x - 1 / (3 * (2 - x));
        direct += s.data.a(i) ? m1 - m0 + (y - m1) / p : m1 - m0 - (y - m0) / (1 - p);
    }
    direct /= static_cast<double>(s.data.n());
    CHECK(fit.estimate == doctest::Approx(direct).epsilon(1e-12));
    CHECK(fit.phi.mean() == doctest::Approx(fit.estimate).epsilon(1e-12));
}

TEST_CASE("effect differences: bounds, components and measured confounding") {
    const auto data = simlab::gen_binary(simlab::coverage_dgp(), 3000, 11);
    const auto folds = make_folds(data.n(), 5, 2);
    const auto fit = estimate_effect_differences(data, folds);
    REQUIRE(fit.confounding.components.size() == 2);
    double mx = 0.0;
    for (const auto& c : fit.confounding.components) {
        CHECK(c.magnitude == doctest::Approx(std::abs(c.estimate)));
        mx = std::max(mx, c.magnitude);
    }
    CHECK(fit.confounding.value == doctest::Approx(mx));
    CHECK(fit.confounding.maximizer_label == "X1");
    const auto p0 = fit.at(0.0);
    CHECK(p0.lower == doctest::Approx(fit.psi));
    CHECK(p0.upper == doctest::Approx(fit.psi));
    const auto p2 = fit.at(2.0);
    CHECK(p2.upper == doctest::Approx(fit.psi + 2 * mx).epsilon(1e-12));
    CHECK(p2.lower == doctest::Approx(fit.psi - 2 * mx).epsilon(1e-12));
    const auto truth = simlab::binary_truths(simlab::coverage_dgp());
    CHECK(fit.psi == doctest::Approx(truth.psi).epsilon(0.15));
    CHECK(mx == doctest::Approx(truth.m).epsilon(0.35));
}

TEST_CASE("calibrated bounds equal post hoc bounds at Gamma times M") {
    const auto grid = default_gamma_grid();
    SUBCASE("effect differences") {
        const auto d = simlab::gen_binary(simlab::coverage_dgp(), 1500, 3);
        CHECK(invariance_check(estimate_effect_differences(d, make_folds(d.n(), 5, 1)), grid));
    }
    SUBCASE("outcome model") {
        const auto d = simlab::gen_binary(simlab::coverage_dgp(), 1500, 4);
        CHECK(invariance_check(estimate_outcome_model(d, make_folds(d.n(), 5, 1)), grid));
    }
    SUBCASE("odds model") {
        const auto d = simlab::gen_smooth(1500, 5);
        CHECK(invariance_check(estimate_odds_ratio(d, make_folds(d.n(), 5, 1)), grid));
    }
    CHECK(invariance_check(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0 + 1e-12}));
    CHECK_FALSE(invariance_check(std::vector<double>{1.0}, std::vector<double>{1.0 + 1e-6}));
}

TEST_CASE("all models reduce to the point estimate at Gamma = 0") {
    const auto d = simlab::gen_smooth(1200, 8);
    const auto folds = make_folds(d.n(), 5, 3);
    for (auto kind : {ModelKind::effect_diff, ModelKind::odds, ModelKind::outcome}) {
        const auto fit = estimate_model(kind, d, folds);
        const auto p = fit.at(0.0);
        CHECK(p.lower == doctest::Approx(fit.psi).epsilon(1e-8));
        CHECK(p.upper == doctest::Approx(fit.psi).epsilon(1e-8));
        const auto q = fit.at(1.0);
        CHECK(q.lower < q.upper);
        CHECK(q.lower <= fit.psi);
        CHECK(q.upper >= fit.psi);
    }
}

TEST_CASE("odds bound derivative is positive above and negative below") {
    const auto d = simlab::gen_smooth(2000, 9);
    const auto fit = estimate_odds_ratio(d, make_folds(d.n(), 5, 4));
    const auto [du, dl] = derivative_dU_dM(fit, 1.0);
    CHECK(du > 0.0);
    CHECK(dl < 0.0);
}

TEST_CASE("model names and gamma validation") {
    for (auto m : {ModelKind::effect_diff, ModelKind::odds, ModelKind::outcome})
        CHECK(parse_model(model_name(m)) == m);
    CHECK_THROWS_AS(parse_model("tobit"), ConfigError);
    const auto d = simlab::gen_binary(simlab::coverage_dgp(), 500, 1);
    const auto fit = estimate_effect_differences(d, make_folds(d.n(), 5, 1));
    CHECK_THROWS_AS(fit.curve({-1.0}), ConfigError);
    const auto grid = default_gamma_grid();
    CHECK(grid.front() > 0.0);
    CHECK(fit.curve(grid).points.size() == grid.size());
}
