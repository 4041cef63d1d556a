#include <doctest.h>

#include <cmath>
#include <random>

#include "calsens/error.hpp"
#include "calsens/experiments.hpp"
#include "calsens/inference.hpp"
#include "calsens/simlab.hpp"
#include "calsens/stats.hpp"

using namespace calsens;

namespace {

// A fit whose bounds are psi -/+ gamma * slope with unit-scale influence values.
ModelFit synthetic(ModelKind kind, double psi, double m, double lo_slope, double hi_slope) {
    ModelFit f;
    f.model = kind;
    f.n = 4;
    f.psi = psi;
    f.confounding.value = m;
    Eigen::VectorXd phi(4);
    phi << 1, -1, 2, -2;
    f.phi_psi = phi;
    f.at = [=](double g) {
        BoundPoint p;
        p.gamma = g;
        p.lower = psi - lo_slope * g;
        p.upper = psi + hi_slope * g;
        p.phi_lower = p.phi_upper = p.ph_phi_lower = p.ph_phi_upper = phi;
        return p;
    };
    return f;
}

}  // namespace

TEST_CASE("wald limits use one- and two-sided normal quantiles") {
    BoundCurve c;
    c.psi = 1.0;
    Eigen::VectorXd phi(4);
    phi << 1, -1, 3, -3;  // centered sd sqrt(5), se sqrt(5)/2
    c.phi_psi = phi;
    BoundPoint p;
    p.gamma = 1.0;
    p.lower = 0.5;
    p.upper = 1.5;
    p.phi_lower = p.phi_upper = p.ph_phi_lower = p.ph_phi_upper = phi;
    p.ph_lower = 0.6;
    p.ph_upper = 1.4;
    c.points.push_back(p);
    const auto rep = wald_intervals(c, 0.05);
    const auto& r = rep.rows[0];
    const double se = std::sqrt(5.0) / 2.0;
    CHECK(r.se_lower == doctest::Approx(se));
    CHECK(r.lb == doctest::Approx(0.5 - 1.6448536269514722 * se));
    CHECK(r.ub2 == doctest::Approx(1.5 + 1.959963984540054 * se));
    CHECK(r.ph_lb2 == doctest::Approx(0.6 - 1.959963984540054 * se));
    CHECK(rep.psi_se == doctest::Approx(se));
    CHECK_THROWS_AS(wald_intervals(c, 1.5), ConfigError);
}

TEST_CASE("bootstrap of a mean: deterministic, rescaled, validated") {
    const auto d = simlab::gen_binary(simlab::coverage_dgp(), 800, 3);
    const Pipeline mean_y = [](const Dataset& s, std::uint64_t) {
        double m = 0;
        for (std::size_t i = 0; i < s.n(); ++i) m += s.y(i);
        return std::vector<double>{m / static_cast<double>(s.n())};
    };
    BootstrapOptions o;
    o.replicates = 400;
    o.m = 800;
    o.seed = 17;
    const auto a = bootstrap_variance(mean_y, d, o);
    const auto b = bootstrap_variance(mean_y, d, o);
    CHECK(a.variance == b.variance);
    const double oracle = stats::variance(d.outcome()) / 800.0;
    CHECK(a.variance[0] == doctest::Approx(oracle).epsilon(0.2));
    // m-out-of-n: variance of the m-mean times m/n estimates the n-mean variance.
    o.m = 200;
    CHECK(bootstrap_variance(mean_y, d, o).variance[0] == doctest::Approx(oracle).epsilon(0.2));
    o.replicates = 49;
    CHECK_THROWS_AS(bootstrap_variance(mean_y, d, o), ValidationError);
    o.replicates = 50;
    o.m = 1;
    CHECK_THROWS_AS(bootstrap_variance(mean_y, d, o), ValidationError);
}

TEST_CASE("bootstrap gives up when too many replicates fail") {
    const auto d = simlab::gen_binary(simlab::coverage_dgp(), 100, 3);
    const Pipeline flaky = [](const Dataset& s, std::uint64_t seed) {
        if (seed % 4 == 0) throw FitError("synthetic failure");
        return std::vector<double>{s.y(0)};
    };
    BootstrapOptions o;
    o.replicates = 100;
    o.m = 100;
    CHECK_THROWS_AS(bootstrap_variance(flaky, d, o), NumericalError);
}

TEST_CASE("bootstrap variance replaces the influence standard errors") {
    const auto d = simlab::gen_binary(simlab::coverage_dgp(), 600, 5);
    const std::vector<double> grid{0.0, 1.0};
    const auto fit = estimate_effect_differences(d, make_folds(d.n(), 5, 1));
    auto rep = wald_intervals(fit.curve(grid), 0.05);
    BootstrapOptions o;
    o.replicates = 60;
    o.m = 600;
    const auto boot = bootstrap_variance(model_pipeline(ModelKind::effect_diff, {}, 5, grid), d, o);
    REQUIRE(boot.variance.size() == 6);
    const double if_se = rep.rows[1].se_upper;
    apply_bootstrap(rep, boot);
    CHECK(rep.source == VarianceSource::bootstrap);
    CHECK(rep.rows[1].se_upper == doctest::Approx(std::sqrt(boot.variance[3])));
    CHECK(rep.rows[1].se_upper == doctest::Approx(if_se).epsilon(0.4));
    BootstrapResult wrong;
    wrong.variance = {1.0};
    CHECK_THROWS_AS(apply_bootstrap(rep, wrong), ValidationError);
}

TEST_CASE("robustness value: closed form and root agree") {
    const auto f = synthetic(ModelKind::effect_diff, 0.5, 0.2, 0.2, 0.2);
    const auto cf = robustness_value(f);
    CHECK(cf.method == "closed-form");
    CHECK(cf.gamma0 == 0.5 / 0.2);
    CHECK(cf.crossing == "lower");
    RobustnessOptions o;
    o.force_root = true;
    const auto zr = robustness_value(f, o);
    CHECK(zr.method == "z-root");
    CHECK(zr.gamma0 == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(zr.residual < 1e-10);
    CHECK(zr.se == doctest::Approx(cf.se).epsilon(1e-4));
}

TEST_CASE("closed form is exactly |psi|/M on a fitted model") {
    const auto d = simlab::gen_binary(simlab::coverage_dgp(), 2000, 8);
    const auto fit = estimate_effect_differences(d, make_folds(d.n(), 5, 1));
    const auto rv = robustness_value(fit);
    CHECK(rv.gamma0 == std::abs(fit.psi) / fit.confounding.value);
    CHECK(rv.ci_lower <= rv.gamma0);
    CHECK(rv.ci_upper >= rv.gamma0);
}

TEST_CASE("reported robustness value arithmetic") {
    // Point estimate over measured confounding as reported: 264 / 36.5.
    CHECK(std::abs(264.0 / 36.5 - 7.24) < 0.02);
    const auto f = synthetic(ModelKind::effect_diff, 264.0, 36.5, 36.5, 36.5);
    CHECK(robustness_value(f).gamma0 == doctest::Approx(7.2328767).epsilon(1e-7));
}

TEST_CASE("robustness value edge cases") {
    CHECK(robustness_value(synthetic(ModelKind::odds, 0.0, 0.3, 0.3, 0.3)).gamma0 == 0.0);
    CHECK_THROWS_AS(robustness_value(synthetic(ModelKind::odds, 0.5, 0.3, 0.0, 0.3)), DegenerateError);
    CHECK_THROWS_AS(robustness_value(synthetic(ModelKind::effect_diff, 0.5, 0.0, 0.0, 0.0)), DegenerateError);
    const auto neg = robustness_value(synthetic(ModelKind::odds, -0.6, 0.3, 0.3, 0.2));
    CHECK(neg.crossing == "upper");
    CHECK(neg.gamma0 == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("z-root residual on fitted odds and outcome models") {
    const auto smooth = simlab::gen_smooth(2000, 12);
    const auto odds = estimate_odds_ratio(smooth, make_folds(smooth.n(), 5, 1));
    const auto ro = robustness_value(odds);
    CHECK(ro.method == "z-root");
    CHECK(ro.residual < 1e-8);
    CHECK(ro.gamma0 > 0.0);
    const auto bin = simlab::gen_binary(simlab::robustness_dgp(), 2000, 13);
    const auto out = estimate_outcome_model(bin, make_folds(bin.n(), 5, 1));
    const auto rm = robustness_value(out);
    CHECK(rm.residual < 1e-8);
    const auto p = out.at(rm.gamma0);
    CHECK(std::min(std::abs(p.lower), std::abs(p.upper)) < 1e-6);
}

TEST_CASE("regime boundaries and variance ratio") {
    CHECK(classify_regime(-0.8, 1.0) == "under");
    CHECK(classify_regime(0.5, 0.1) == "over");
    CHECK(classify_regime(0.5, 10.0) == "over");
    CHECK(classify_regime(-0.5, 1.0) == "equal");
    CHECK(variance_ratio(-0.5, 1.0) == 1.0);
    CHECK(variance_ratio(-0.25, 0.5) == 1.0);
    CHECK(variance_ratio(0.0, 2.0) == 5.0);
}

TEST_CASE("regime analysis formula matches the direct variance") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    for (double c : {-0.9, -0.3, 0.0, 0.6}) {
        Eigen::VectorXd u(500), m(500);
        for (int i = 0; i < 500; ++i) {
            const double e = z(rng);
            u(i) = e;
            m(i) = c * e + std::sqrt(1 - c * c) * z(rng);
        }
        const auto r = regime_analysis(u, m, 1.3, 0.4);
        CHECK(std::abs(r.ratio - r.direct_ratio) < 1e-10);
        CHECK(r.regime == classify_regime(r.rho, r.rrse));
        CHECK((r.direct_ratio < 1.0) == (r.regime == "under"));
    }
    CHECK_THROWS_AS(regime_analysis(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(4), 1.0, 1.0), ValidationError);
    CHECK_THROWS_AS(regime_analysis(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(3), 1.0, 1.0), DegenerateError);
}
