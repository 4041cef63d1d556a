#include <doctest.h>

#include <cmath>

#include "calsens/error.hpp"
#include "calsens/experiments.hpp"
#include "calsens/simlab.hpp"

using namespace calsens;

TEST_CASE("proxy truths: closed forms agree with quadrature") {
    for (double th : {0.3, 0.7, 1.0}) {
        const auto t = simlab::proxy_truths(th);
        CHECK(t.psi_star == 0.0);
        CHECK(simlab::proxy_psi_x_quadrature(th) == doctest::Approx(t.psi_x).epsilon(1e-10));
        CHECK(simlab::proxy_psi_empty_quadrature(th) == doctest::Approx(t.psi_empty).epsilon(1e-10));
    }
    const auto one = simlab::proxy_truths(1.0);
    CHECK(one.psi_x == doctest::Approx(0.3662).epsilon(1e-3));
    CHECK(one.psi_empty == doctest::Approx(2.0 / 3.0));
    CHECK(one.lower(1.0) == doctest::Approx(0.066).epsilon(0.02));
    CHECK(one.upper(1.0) == doctest::Approx(0.667).epsilon(1e-3));
}

TEST_CASE("second proxy example: theta root and bias equality") {
    const double th = simlab::example2_theta();
    CHECK(th == doctest::Approx(std::sqrt(1.0 / (2.0 * std::log(3.0) - 1.0))).epsilon(1e-10));
    CHECK(simlab::example2_theta_closed_form() == doctest::Approx(0.913928).epsilon(1e-6));
    const auto t = simlab::proxy_truths(th);
    const double bias = std::log(3.0) / (6.0 * std::log(3.0) - 3.0);
    CHECK(std::abs(t.psi_star - t.psi_x) == doctest::Approx(bias).epsilon(1e-10));
    CHECK(t.m() == doctest::Approx(bias).epsilon(1e-10));
    CHECK(bias == doctest::Approx(0.306).epsilon(1e-3));
    CHECK(t.lower(1.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(t.upper(1.0) == doctest::Approx(2.0 * std::log(3.0) / (6.0 * std::log(3.0) - 3.0)).epsilon(1e-10));
}

TEST_CASE("proxy generator") {
    const auto a = simlab::gen_proxy_example_1(5000, 3);
    const auto b = simlab::gen_proxy_example_1(5000, 3);
    CHECK(a.data.outcome()[17] == b.data.outcome()[17]);
    CHECK(a.w == b.w);
    CHECK(a.data.d() == 1);
    CHECK(a.data.names() == std::vector<std::string>{"X"});
    double treated = 0;
    for (std::size_t i = 0; i < a.data.n(); ++i) treated += a.data.a(i);
    CHECK(treated / 5000.0 == doctest::Approx(0.5).epsilon(0.05));
    CHECK(simlab::gen_proxy_example_1(50, 4).data.outcome()[0] != a.data.outcome()[0]);
    CHECK_THROWS_AS(simlab::gen_proxy(10, 1, 0.0), ConfigError);
    CHECK_THROWS_AS(simlab::gen_proxy(10, 1, 1.5), ConfigError);
    const auto spec = simlab::proxy_spec(100, 7, 1.0);
    CHECK(spec.truths.at("psi_x") == doctest::Approx(std::log(3.0) / 3.0));
}

TEST_CASE("binary truths match an independent enumeration") {
    // Reference values from a separate enumeration over the four cells.
    const auto c = simlab::binary_truths(simlab::coverage_dgp());
    CHECK(c.psi == doctest::Approx(1.0));
    CHECK(c.component[0] == doctest::Approx(-0.24450436915040008).epsilon(1e-12));
    CHECK(c.component[1] == doctest::Approx(-0.0621083982014643).epsilon(1e-12));
    CHECK(c.argmax == 0);
    CHECK(c.m == doctest::Approx(0.24450436915040008).epsilon(1e-12));
    CHECK(c.gamma0() == doctest::Approx(1.0 / 0.24450436915040008).epsilon(1e-12));
    const auto g = simlab::binary_truths(simlab::argmax_dgp());
    CHECK(g.component[0] == doctest::Approx(-0.24344292737946116).epsilon(1e-12));
    CHECK(g.component[1] == doctest::Approx(-0.19475434190356888).epsilon(1e-12));
}

TEST_CASE("binary generator matches its parameters") {
    const auto dgp = simlab::coverage_dgp();
    const auto d = simlab::gen_binary(dgp, 20000, 9);
    CHECK(d.names() == std::vector<std::string>{"X1", "X2"});
    double x1 = 0;
    for (std::size_t i = 0; i < d.n(); ++i) x1 += d.x(i, 0);
    CHECK(x1 / 20000.0 == doctest::Approx(dgp.p1).epsilon(0.03));
    CHECK(simlab::binary_spec(dgp, 10, 1).truths.count("psi") == 1);
}

TEST_CASE("other generators") {
    const auto s = simlab::gen_smooth(1000, 1);
    CHECK(s.d() == 2);
    CHECK(s.covariates().minCoeff() >= 0.0);
    CHECK(s.covariates().maxCoeff() <= 1.0);
    const auto u = simlab::gen_uniform_outcome(1000, 1);
    CHECK(u.arm_count(1) == 500);
    for (std::size_t i = 0; i < u.n(); ++i) {
        CHECK(u.y(i) >= 0.0);
        CHECK(u.y(i) <= 1.0);
    }
}

TEST_CASE("experiment registry") {
    const auto names = simlab::experiment_names();
    CHECK(names.size() == 10);
    try {
        simlab::run_experiment("nope");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("coverage-effect-diff") != std::string::npos);
    }
    simlab::ExperimentOptions o;
    o.reps = 10;
    const auto r = simlab::run_experiment("coverage-effect-diff", o);
    CHECK(r.underpowered);
    CHECK(r.rows.size() == 10);
    CHECK(r.row_seeds.size() == 10);
    const auto again = simlab::run_experiment("coverage-effect-diff", o);
    CHECK(again.rows == r.rows);
}

TEST_CASE("finite-support remainders") {
    const auto rep = simlab::remainder_check(5);
    CHECK(rep.xi_errors.size() == 10);
    for (double e : rep.xi_errors) CHECK(e < 1e-10);
    CHECK(rep.lambda_slope >= 1.8);
    CHECK(rep.lambda_slope <= 2.2);
}
