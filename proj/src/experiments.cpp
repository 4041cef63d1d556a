#include "calsens/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <json.hpp>
#include <random>

#include "calsens/eif.hpp"
#include "calsens/error.hpp"
#include "calsens/inference.hpp"
#include "calsens/learners.hpp"
#include "calsens/models.hpp"
#include "calsens/parallel.hpp"
#include "calsens/stats.hpp"
#include "calsens/theta.hpp"

namespace calsens::simlab {
namespace {

constexpr int kFolds = 5;

double sd_of(const std::vector<double>& v) { return stats::sd(v); }
double mean_of(const std::vector<double>& v) { return stats::mean(v); }

std::string fmt(double v) { return stats::format_double(v); }

struct Ctx {
    ExperimentResult r;

    Ctx(std::string name, const ExperimentOptions& o, int default_reps, std::size_t default_n) {
        r.name = std::move(name);
        r.default_reps = default_reps;
        r.reps = o.reps > 0 ? o.reps : default_reps;
        r.n = o.n > 0 ? o.n : default_n;
        r.seed = o.seed;
        r.underpowered = r.reps < default_reps || r.n < default_n;
    }
    void metric(const std::string& k, double v) { r.metrics.emplace_back(k, v); }
    void check(const std::string& name, bool pass, const std::string& detail) { r.checks.push_back({name, pass, detail}); }
    std::uint64_t rep_seed(std::size_t i) const { return stats::derive_seed(r.seed, i); }
};

ModelOptions binary_options() {
    ModelOptions o;
    o.nuisance.propensity = Learner::logistic;
    o.nuisance.outcome = Learner::linear;
    return o;
}

// Effect-difference fit on a binary-DGP replicate; returns the Gamma = 1 point.
struct EdRep {
    double psi, m_hat, lower, upper, se_lower, se_upper, se_m, lb2, ub2;
    std::size_t argmax;
    double gap_signed;  // |c_1| - |c_2|
};

EdRep effect_diff_rep(const BinaryDgp& g, std::size_t n, std::uint64_t seed, double alpha) {
    const auto data = gen_binary(g, n, seed);
    const auto folds = make_folds(n, kFolds, stats::derive_seed(seed, 1));
    const auto fit = estimate_effect_differences(data, folds, binary_options());
    const auto p = fit.at(1.0);
    const double z = stats::normal_quantile(1.0 - alpha / 2.0);
    EdRep e{};
    e.psi = fit.psi;
    e.m_hat = fit.confounding.value;
    e.lower = p.lower;
    e.upper = p.upper;
    e.se_lower = p.se_lower();
    e.se_upper = p.se_upper();
    e.se_m = centered_se(fit.confounding.influence);
    e.lb2 = p.lower - z * e.se_lower;
    e.ub2 = p.upper + z * e.se_upper;
    e.argmax = fit.confounding.maximizer;
    e.gap_signed = fit.confounding.components[0].magnitude - fit.confounding.components[1].magnitude;
    return e;
}

ExperimentResult example_proxy(const ExperimentOptions& o, bool second) {
    Ctx c(second ? "example-2" : "example-1", o, 1, 100000);
    c.r.reps = 1;
    const double theta = second ? example2_theta() : 1.0;
    const auto truth = proxy_truths(theta);
    c.r.dgps.push_back(proxy_spec(c.r.n, c.r.seed, theta));

    // Quadrature check of the closed-form truths before any estimation.
    const double qx = proxy_psi_x_quadrature(theta), qe = proxy_psi_empty_quadrature(theta);
    c.metric("psi_x_quadrature", qx);
    c.metric("psi_empty_quadrature", qe);
    c.check("quadrature psi_X matches closed form to 1e-6", std::abs(qx - truth.psi_x) < 1e-6,
            fmt(qx) + " vs " + fmt(truth.psi_x));
    c.check("quadrature psi_empty matches closed form to 1e-6", std::abs(qe - truth.psi_empty) < 1e-6,
            fmt(qe) + " vs " + fmt(truth.psi_empty));
    if (second) {
        const double closed = example2_theta_closed_form();
        c.metric("theta_root", theta);
        c.metric("theta_closed_form", closed);
        c.metric("theta_squared", theta * theta);
        c.check("bias-equality root equals sqrt(1/(2 log 3 - 1))", std::abs(theta - closed) < 1e-8,
                fmt(theta) + " vs " + fmt(closed));
    }

    const auto sample = gen_proxy(c.r.n, c.r.seed, theta);
    const auto folds = make_folds(c.r.n, 2, stats::derive_seed(c.r.seed, 1));
    ModelOptions mo;
    mo.factory = proxy_factory(theta);
    const auto fit = estimate_effect_differences(sample.data, folds, mo);
    const auto p = fit.at(1.0);
    const double psi_x = fit.psi;
    const double psi_e = fit.psi - fit.confounding.components[0].estimate;
    const double z = stats::normal_quantile(0.975);
    const double lb2 = p.lower - z * p.se_lower(), ub2 = p.upper + z * p.se_upper();
    c.metric("psi_x_hat", psi_x);
    c.metric("psi_empty_hat", psi_e);
    c.metric("m_hat", fit.confounding.value);
    c.metric("lower_gamma1", p.lower);
    c.metric("upper_gamma1", p.upper);
    c.metric("lb2_gamma1", lb2);
    c.metric("ub2_gamma1", ub2);
    c.metric("true_psi_x", truth.psi_x);
    c.metric("true_psi_empty", truth.psi_empty);
    c.metric("true_lower_gamma1", truth.lower(1.0));
    c.metric("true_upper_gamma1", truth.upper(1.0));

    if (!second) {
        c.check("psi_X-hat within 0.02 of log(3)/3", std::abs(psi_x - 0.3662) <= 0.02, fmt(psi_x));
        c.check("psi_empty-hat within 0.02 of 2/3", std::abs(psi_e - 0.6667) <= 0.02, fmt(psi_e));
        c.check("Gamma=1 bounds within 0.03 of [0.066, 0.667]",
                std::abs(p.lower - 0.066) <= 0.03 && std::abs(p.upper - 0.667) <= 0.03,
                "[" + fmt(p.lower) + ", " + fmt(p.upper) + "]");
        c.check("Gamma=1 bounds exclude 0", p.lower > 0.0, fmt(p.lower));
    } else {
        const double bias = std::abs(psi_x - psi_e);
        c.metric("bias_x_empty", bias);
        c.check("|psi_X-hat - psi_empty-hat| within 0.02 of 0.306", std::abs(bias - 0.306) <= 0.02, fmt(bias));
        c.check("Gamma=1 band contains 0", lb2 <= 0.0 && ub2 >= 0.0, "[" + fmt(lb2) + ", " + fmt(ub2) + "]");
        c.check("Gamma=1 upper bound near 2 log 3/(6 log 3 - 3)", std::abs(p.upper - truth.upper(1.0)) <= 0.03,
                fmt(p.upper) + " vs " + fmt(truth.upper(1.0)));
    }

    // Learned nuisances on the same sample, reported only.
    const auto learned = estimate_effect_differences(sample.data, folds, binary_options());
    c.metric("learned_psi_x_hat", learned.psi);
    c.metric("learned_lower_gamma1", learned.at(1.0).lower);
    c.metric("learned_upper_gamma1", learned.at(1.0).upper);
    return c.r;
}

ExperimentResult coverage_effect_diff(const ExperimentOptions& o) {
    Ctx c("coverage-effect-diff", o, 500, 2000);
    const auto g = coverage_dgp();
    const auto t = binary_truths(g);
    c.r.dgps.push_back(binary_spec(g, c.r.n, c.r.seed));
    const double alpha = 0.05;
    const auto reps = static_cast<std::size_t>(c.r.reps);
    const std::size_t n_small = std::max<std::size_t>(c.r.n / 4, 50);

    std::vector<EdRep> big(reps), small(reps);
    parallel_for(reps, [&](std::size_t i) {
        big[i] = effect_diff_rep(g, c.r.n, c.rep_seed(i), alpha);
        small[i] = effect_diff_rep(g, n_small, stats::derive_seed(c.rep_seed(i), 7), alpha);
    });

    c.r.columns = {"psi", "m_hat", "lower", "upper", "se_lower", "se_upper", "se_m", "lb2", "ub2", "covered",
                   "upper_one_sided", "lower_one_sided", "argmax_correct"};
    const double z1 = stats::normal_quantile(1.0 - alpha);
    std::vector<double> u, l, m, seu, sem, w_big, w_small;
    int covered = 0, cov_u = 0, cov_l = 0;
    for (std::size_t i = 0; i < reps; ++i) {
        const auto& e = big[i];
        const bool cv = e.lb2 <= t.lower(1.0) && e.ub2 >= t.upper(1.0);
        const bool cu = e.upper + z1 * e.se_upper >= t.upper(1.0);
        const bool cl = e.lower - z1 * e.se_lower <= t.lower(1.0);
        covered += cv;
        cov_u += cu;
        cov_l += cl;
        u.push_back(e.upper);
        l.push_back(e.lower);
        m.push_back(e.m_hat);
        seu.push_back(e.se_upper);
        sem.push_back(e.se_m);
        w_big.push_back((e.ub2 - e.upper) + (e.lower - e.lb2));
        const auto& s = small[i];
        w_small.push_back((s.ub2 - s.upper) + (s.lower - s.lb2));
        c.r.rows.push_back({e.psi, e.m_hat, e.lower, e.upper, e.se_lower, e.se_upper, e.se_m, e.lb2, e.ub2,
                            double(cv), double(cu), double(cl), double(e.argmax == t.argmax)});
        c.r.row_seeds.push_back(c.rep_seed(i));
    }
    const double R = static_cast<double>(reps);
    const double coverage = covered / R;
    const double sd_u = sd_of(u), if_u = mean_of(seu);
    const double sd_m = sd_of(m), if_m = mean_of(sem);
    const double width_ratio = mean_of(w_big) / mean_of(w_small);
    c.metric("true_lower", t.lower(1.0));
    c.metric("true_upper", t.upper(1.0));
    c.metric("coverage_two_sided", coverage);
    c.metric("coverage_upper_one_sided", cov_u / R);
    c.metric("coverage_lower_one_sided", cov_l / R);
    c.metric("bias_upper", mean_of(u) - t.upper(1.0));
    c.metric("bias_lower", mean_of(l) - t.lower(1.0));
    c.metric("empirical_sd_upper", sd_u);
    c.metric("mean_if_sd_upper", if_u);
    c.metric("empirical_sd_m", sd_m);
    c.metric("mean_if_sd_m", if_m);
    c.metric("n_small", static_cast<double>(n_small));
    c.metric("margin_width_ratio", width_ratio);
    c.check("two-sided 95% band coverage in [0.93, 0.99]", coverage >= 0.93 && coverage <= 0.99, fmt(coverage));
    c.check("mean IF sd of U-hat within 15% of empirical sd", std::abs(if_u / sd_u - 1.0) <= 0.15,
            fmt(if_u) + " vs " + fmt(sd_u));
    c.check("mean IF sd of M-hat within 15% of empirical sd", std::abs(if_m / sd_m - 1.0) <= 0.15,
            fmt(if_m) + " vs " + fmt(sd_m));
    const double expect = std::sqrt(static_cast<double>(n_small) / static_cast<double>(c.r.n));
    c.check("sampling margin shrinks like 1/sqrt(n) within 10%", std::abs(width_ratio / expect - 1.0) <= 0.10,
            fmt(width_ratio) + " vs " + fmt(expect));
    return c.r;
}

ExperimentResult argmax_selection(const ExperimentOptions& o) {
    Ctx c("argmax-selection", o, 200, 8000);
    const auto g = argmax_dgp();
    const auto t = binary_truths(g);
    c.r.dgps.push_back(binary_spec(g, c.r.n, c.r.seed));
    const std::vector<std::size_t> grid = {c.r.n / 16, c.r.n / 4, c.r.n};
    const auto reps = static_cast<std::size_t>(c.r.reps);
    c.r.columns = {"n", "argmax", "misselected", "gap_hat"};

    std::vector<double> miss;
    std::vector<double> gaps_first;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        std::vector<EdRep> out(reps);
        parallel_for(reps, [&](std::size_t i) {
            out[i] = effect_diff_rep(g, grid[k], stats::derive_seed(c.rep_seed(i), 100 + k), 0.05);
        });
        int wrong = 0;
        for (std::size_t i = 0; i < reps; ++i) {
            const bool w = out[i].argmax != t.argmax;
            wrong += w;
            if (k == 0) gaps_first.push_back(out[i].gap_signed);
            c.r.rows.push_back({double(grid[k]), double(out[i].argmax), double(w), out[i].gap_signed});
            c.r.row_seeds.push_back(stats::derive_seed(c.rep_seed(i), 100 + k));
        }
        miss.push_back(wrong / static_cast<double>(reps));
        c.metric("misselection_n" + std::to_string(grid[k]), miss.back());
    }
    const double gap = std::abs(std::abs(t.component[0]) - std::abs(t.component[1]));
    const double sd_small = sd_of(gaps_first);
    c.metric("true_gap", gap);
    c.metric("sd_gap_hat_smallest_n", sd_small);
    c.metric("gap_over_sd", gap / sd_small);

    // Exact tie: symmetric covariates, reported only.
    BinaryDgp tie = g;
    tie.alpha2 = tie.alpha1;
    tie.b2 = tie.b1;
    tie.p2 = tie.p1;
    std::vector<EdRep> tie_out(reps);
    parallel_for(reps, [&](std::size_t i) {
        tie_out[i] = effect_diff_rep(tie, grid[1], stats::derive_seed(c.rep_seed(i), 999), 0.05);
    });
    int first = 0;
    for (const auto& e : tie_out) first += e.argmax == 0;
    c.metric("tie_first_selected", first / static_cast<double>(reps));

    bool decreasing = true;
    for (std::size_t k = 1; k < miss.size(); ++k) decreasing = decreasing && miss[k] < miss[k - 1];
    std::string trail;
    for (double v : miss) trail += (trail.empty() ? "" : ", ") + fmt(v);
    c.check("misselection strictly decreasing in n", decreasing, trail);
    c.check("misselection below 2% at the largest n", miss.back() < 0.02, fmt(miss.back()));
    c.check("separation gap at least 0.2 sd of the estimated gap", gap >= 0.2 * sd_small,
            fmt(gap) + " vs sd " + fmt(sd_small));
    return c.r;
}

ExperimentResult robustness_coverage(const ExperimentOptions& o) {
    Ctx c("robustness-coverage", o, 300, 2000);
    const auto g = robustness_dgp();
    const auto t = binary_truths(g);
    c.r.dgps.push_back(binary_spec(g, c.r.n, c.r.seed));
    const auto reps = static_cast<std::size_t>(c.r.reps);
    struct Out {
        double g0, se, lo, hi, exact_gap;
    };
    std::vector<Out> out(reps);
    parallel_for(reps, [&](std::size_t i) {
        const auto s = c.rep_seed(i);
        const auto data = gen_binary(g, c.r.n, s);
        const auto folds = make_folds(c.r.n, kFolds, stats::derive_seed(s, 1));
        const auto fit = estimate_effect_differences(data, folds, binary_options());
        const auto rv = robustness_value(fit);
        out[i] = {rv.gamma0, rv.se, rv.ci_lower, rv.ci_upper,
                  std::abs(rv.gamma0 - std::abs(fit.psi) / fit.confounding.value)};
    });
    c.r.columns = {"gamma0", "se", "ci_lower", "ci_upper", "covered"};
    int covered = 0;
    double worst = 0.0;
    std::vector<double> g0, se;
    for (std::size_t i = 0; i < reps; ++i) {
        const bool cv = out[i].lo <= t.gamma0() && out[i].hi >= t.gamma0();
        covered += cv;
        worst = std::max(worst, out[i].exact_gap);
        g0.push_back(out[i].g0);
        se.push_back(out[i].se);
        c.r.rows.push_back({out[i].g0, out[i].se, out[i].lo, out[i].hi, double(cv)});
        c.r.row_seeds.push_back(c.rep_seed(i));
    }
    const double cov = covered / static_cast<double>(reps);
    c.metric("true_gamma0", t.gamma0());
    c.metric("mean_gamma0_hat", mean_of(g0));
    c.metric("empirical_sd_gamma0", sd_of(g0));
    c.metric("mean_se_gamma0", mean_of(se));
    c.metric("coverage", cov);
    c.check("Gamma0 CI coverage in [0.92, 0.99]", cov >= 0.92 && cov <= 0.99, fmt(cov));
    c.check("closed form equals |psi|/M exactly", worst == 0.0, fmt(worst));
    return c.r;
}

ExperimentResult derivative_check(const ExperimentOptions& o) {
    Ctx c("derivative-check", o, 1, 4000);
    c.r.reps = 1;
    DgpSpec spec;
    spec.generator = "smooth-unit-square";
    spec.n = c.r.n;
    spec.seed = c.r.seed;
    c.r.dgps.push_back(spec);
    const auto data = gen_smooth(c.r.n, c.r.seed);
    const auto folds = make_folds(c.r.n, kFolds, stats::derive_seed(c.r.seed, 1));
    const auto fit = estimate_odds_ratio(data, folds, binary_options());
    const double m = fit.confounding.value;
    c.metric("m_hat", m);
    c.r.columns = {"gamma", "dU_dM_plugin", "dU_dM_fd", "dL_dM_plugin", "dL_dM_fd", "rel_err_upper", "rel_err_lower"};
    bool ok_u = true, ok_l = true, pos = true, neg = true;
    double worst = 0.0;
    for (double gamma : {0.5, 1.0, 2.0}) {
        const auto p = fit.at(gamma);
        // Step in log t of 0.02 either side.
        const double h = 0.02 / gamma;
        const auto up = fit.odds_eval(gamma * (m + h)), dn = fit.odds_eval(gamma * (m - h));
        const double fd_u = (up.upper - dn.upper) / (2.0 * h);
        const double fd_l = (up.lower - dn.lower) / (2.0 * h);
        const double eu = std::abs(p.dU_dM / fd_u - 1.0), el = std::abs(p.dL_dM / fd_l - 1.0);
        worst = std::max({worst, eu, el});
        ok_u = ok_u && eu <= 0.05;
        ok_l = ok_l && el <= 0.05;
        pos = pos && p.dU_dM > 0 && !p.derivative_clamped;
        neg = neg && p.dL_dM < 0;
        c.r.rows.push_back({gamma, p.dU_dM, fd_u, p.dL_dM, fd_l, eu, el});
        c.r.row_seeds.push_back(c.r.seed);
    }
    c.metric("worst_relative_error", worst);
    c.check("plug-in dU/dM within 5% of finite differences", ok_u, "worst " + fmt(worst));
    c.check("plug-in dL/dM within 5% of finite differences", ok_l, "worst " + fmt(worst));
    c.check("dU/dM strictly positive", pos, "");
    c.check("dL/dM strictly negative", neg, "");
    return c.r;
}

ExperimentResult remainder(const ExperimentOptions& o) {
    Ctx c("remainder", o, 1, 9);
    c.r.reps = 1;
    c.r.n = 9;
    DgpSpec spec;
    spec.generator = "finite-support-3x3";
    spec.seed = c.r.seed;
    c.r.dgps.push_back(spec);
    const auto rep = remainder_check(c.r.seed);
    double worst = 0.0;
    for (double e : rep.xi_errors) worst = std::max(worst, e);
    c.metric("xi_worst_error", worst);
    c.metric("lambda_slope", rep.lambda_slope);
    c.r.columns = {"scale", "lambda_remainder"};
    for (std::size_t i = 0; i < rep.scales.size(); ++i) {
        c.r.rows.push_back({rep.scales[i], rep.lambda_remainders[i]});
        c.r.row_seeds.push_back(c.r.seed);
    }
    c.check("xi remainder identity exact to 1e-10 over 10 perturbations", worst < 1e-10 && rep.xi_errors.size() == 10,
            fmt(worst));
    c.check("lambda remainder log-log slope in [1.8, 2.2]", rep.lambda_slope >= 1.8 && rep.lambda_slope <= 2.2,
            fmt(rep.lambda_slope));
    return c.r;
}

ExperimentResult regime_map(const ExperimentOptions& o) {
    Ctx c("regime-map", o, 1, 2000);
    c.r.reps = 1;
    c.r.columns = {"rho", "rrse", "ratio", "under", "over", "equal"};
    int mismatches = 0, boundary_bad = 0;
    // rho = (i - 20)/20, rrse = j/20; exact integer form of the region boundary.
    for (int i = 0; i <= 40; ++i) {
        for (int j = 1; j <= 60; ++j) {
            const double rho = (i - 20) / 20.0, rrse = j / 20.0;
            const auto cls = classify_regime(rho, rrse);
            const int k = 2 * (20 - i);
            const std::string expect = j < k ? "under" : (j == k ? "equal" : "over");
            mismatches += cls != expect;
            const double ratio = variance_ratio(rho, rrse);
            if (j == k && std::abs(ratio - 1.0) > 1e-12) ++boundary_bad;
            c.r.rows.push_back({rho, rrse, ratio, double(cls == "under"), double(cls == "over"), double(cls == "equal")});
            c.r.row_seeds.push_back(c.r.seed);
        }
    }
    c.check("classification matches {rho < 0 and RRSE < -2 rho} on the grid", mismatches == 0,
            std::to_string(mismatches) + " mismatches");
    c.check("variance ratio is 1 on the boundary", boundary_bad == 0, std::to_string(boundary_bad) + " off");
    c.check("(rho=-0.8, RRSE=1) is under-estimation", classify_regime(-0.8, 1.0) == "under", "");
    bool pos_over = true;
    for (int j = 1; j <= 60; ++j) pos_over = pos_over && classify_regime(0.5, j / 20.0) == "over";
    c.check("(rho=0.5, any RRSE) is over-estimation", pos_over, "");

    // Formula vs direct variance on synthetic influence vectors.
    std::mt19937_64 rng(c.r.seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    const auto n = static_cast<Eigen::Index>(c.r.n);
    double worst = 0.0;
    for (double rho : {-0.9, -0.5, -0.1, 0.0, 0.3, 0.8}) {
        for (double scale : {0.2, 1.0, 3.0}) {
            Eigen::VectorXd u(n), m(n);
            for (Eigen::Index r = 0; r < n; ++r) {
                const double z1 = nd(rng), z2 = nd(rng);
                u(r) = z1;
                m(r) = scale * (rho * z1 + std::sqrt(1.0 - rho * rho) * z2);
            }
            const auto rep = regime_analysis(u, m, 1.3, 0.7);
            worst = std::max(worst, std::abs(rep.ratio - rep.direct_ratio));
        }
    }
    c.metric("worst_formula_vs_direct", worst);
    c.check("variance-ratio formula matches direct computation to 1e-10", worst < 1e-10, fmt(worst));
    return c.r;
}

ExperimentResult theta_closed_form(const ExperimentOptions& o) {
    Ctx c("theta-closed-form", o, 1, 200000);
    c.r.reps = 1;
    const auto data = gen_uniform_outcome(c.r.n, c.r.seed);
    c.r.columns = {"t", "arm", "theta_minus", "closed_minus", "theta_plus", "closed_plus"};
    double worst = 0.0;
    for (int arm = 0; arm < 2; ++arm) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < data.n(); ++i)
            if (data.a(i) == arm) rows.push_back(i);
        const Eigen::MatrixXd x = data.design(rows);
        const Eigen::VectorXd y = to_vector(std::span<const double>(gather(data.outcome(), rows)));
        const Eigen::MatrixXd at = Eigen::MatrixXd::Constant(1, 1, 0.5);
        for (double t : {1.5, 2.0, 4.0}) {
            const double tm = fit_theta(x, y, arm, t, ThetaSide::minus).predict(at)(0);
            const double tp = fit_theta(x, y, arm, t, ThetaSide::plus).predict(at)(0);
            const double cm = 1.0 / (1.0 + std::sqrt(t)), cp = std::sqrt(t) / (1.0 + std::sqrt(t));
            worst = std::max({worst, std::abs(tm - cm), std::abs(tp - cp)});
            c.r.rows.push_back({t, double(arm), tm, cm, tp, cp});
            c.r.row_seeds.push_back(c.r.seed);
        }
        // t = 1 is least squares on the sieve.
        const auto r1 = fit_theta(x, y, arm, 1.0, ThetaSide::minus);
        const Eigen::VectorXd ls = least_squares(basis_expand(x, Learner::linear), y);
        const double d1 = (r1.coef - ls).cwiseAbs().maxCoeff();
        c.metric("t1_vs_least_squares_arm" + std::to_string(arm), d1);
        c.check("t=1 collapses to least squares (arm " + std::to_string(arm) + ")", d1 < 1e-8, fmt(d1));
    }
    c.metric("worst_abs_error", worst);
    c.check("theta-hat within 5e-3 of the closed forms for t in {1.5, 2, 4}", worst <= 5e-3, fmt(worst));

    // t = 1 in the odds bundle: the bounds meet at the cross-fitted AIPW estimate.
    const auto sm = gen_smooth(4000, c.r.seed);
    const auto folds = make_folds(sm.n(), kFolds, stats::derive_seed(c.r.seed, 1));
    const auto fit = estimate_odds_ratio(sm, folds, binary_options());
    const auto p = fit.at(0.0);
    const double gap = std::max(std::abs(p.upper - fit.psi), std::abs(p.lower - fit.psi));
    c.metric("odds_t1_gap", gap);
    c.check("odds bounds at t=1 equal psi-hat", gap < 1e-8, fmt(gap));
    for (auto kind : {ModelKind::effect_diff, ModelKind::outcome}) {
        const auto f = estimate_model(kind, sm, folds, binary_options());
        const auto q = f.at(0.0);
        const double d = std::max(std::abs(q.upper - f.psi), std::abs(q.lower - f.psi));
        c.check(model_name(kind) + " bounds at Gamma=0 equal psi-hat", d < 1e-12, fmt(d));
    }
    return c.r;
}

ExperimentResult invariance(const ExperimentOptions& o) {
    Ctx c("invariance", o, 1, 2000);
    c.r.reps = 1;
    const auto grid = default_gamma_grid();
    const auto sm = gen_smooth(c.r.n, c.r.seed);
    const auto folds = make_folds(sm.n(), kFolds, stats::derive_seed(c.r.seed, 1));
    for (auto kind : {ModelKind::effect_diff, ModelKind::outcome, ModelKind::odds}) {
        const auto fit = estimate_model(kind, sm, folds, binary_options());
        c.check(model_name(kind) + ": U(Gamma) = u(Gamma M-hat) to 1e-10 on the default grid",
                invariance_check(fit, grid, 1e-10), "M-hat " + fmt(fit.confounding.value));
    }
    return c.r;
}

using Runner = std::function<ExperimentResult(const ExperimentOptions&)>;

const std::vector<std::pair<std::string, Runner>>& registry() {
    static const std::vector<std::pair<std::string, Runner>> r = {
        {"example-1", [](const ExperimentOptions& o) { return example_proxy(o, false); }},
        {"example-2", [](const ExperimentOptions& o) { return example_proxy(o, true); }},
        {"coverage-effect-diff", coverage_effect_diff},
        {"argmax-selection", argmax_selection},
        {"robustness-coverage", robustness_coverage},
        {"derivative-check", derivative_check},
        {"remainder", remainder},
        {"regime-map", regime_map},
        {"theta-closed-form", theta_closed_form},
        {"invariance", invariance},
    };
    return r;
}

}  // namespace

bool ExperimentResult::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

double ExperimentResult::metric(const std::string& key) const {
    for (const auto& [k, v] : metrics)
        if (k == key) return v;
    throw ConfigError("experiment '" + name + "' has no metric '" + key + "'");
}

std::vector<std::string> experiment_names() {
    std::vector<std::string> out;
    for (const auto& [k, _] : registry()) out.push_back(k);
    return out;
}

ExperimentResult run_experiment(const std::string& name, const ExperimentOptions& opts) {
    for (const auto& [k, fn] : registry()) {
        if (k != name) continue;
        if (opts.reps < 0) throw ConfigError("reps must be positive");
        const auto t0 = std::chrono::steady_clock::now();
        auto r = fn(opts);
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }
    std::string list;
    for (const auto& n : experiment_names()) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown experiment '" + name + "'; available: " + list);
}

void write_experiment(const ExperimentResult& r, const std::filesystem::path& dir, const std::string& header_line) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream csv(dir / (r.name + "_replicates.csv"));
        if (!csv) throw ConfigError("cannot write to " + dir.string());
        csv << header_line << "\n";
        csv << "row,seed";
        for (const auto& c : r.columns) csv << "," << c;
        csv << "\n";
        for (std::size_t i = 0; i < r.rows.size(); ++i) {
            csv << i << "," << (i < r.row_seeds.size() ? r.row_seeds[i] : r.seed);
            for (double v : r.rows[i]) csv << "," << stats::format_double(v);
            csv << "\n";
        }
    }
    nlohmann::ordered_json j;
    j["experiment"] = r.name;
    j["header"] = header_line;
    j["reps"] = r.reps;
    j["default_reps"] = r.default_reps;
    j["n"] = r.n;
    j["seed"] = r.seed;
    j["underpowered"] = r.underpowered;
    j["seconds"] = r.seconds;
    j["dgps"] = nlohmann::json::array();
    for (const auto& d : r.dgps) {
        nlohmann::ordered_json dj;
        dj["generator"] = d.generator;
        dj["n"] = d.n;
        dj["seed"] = d.seed;
        for (const auto& [k, v] : d.parameters) dj["parameters"][k] = v;
        for (const auto& [k, v] : d.truths) dj["truths"][k] = v;
        j["dgps"].push_back(dj);
    }
    for (const auto& [k, v] : r.metrics) j["metrics"][k] = v;
    j["checks"] = nlohmann::json::array();
    for (const auto& c : r.checks) j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    j["passed"] = r.passed();
    std::ofstream js(dir / (r.name + "_summary.json"));
    js << j.dump(2) << "\n";
}

BinaryDgp coverage_dgp() {
    BinaryDgp g;
    g.alpha0 = -0.5;
    g.alpha1 = 1.0;
    g.alpha2 = 0.5;
    g.tau = 1.0;
    g.b1 = 1.0;
    g.b2 = 0.5;
    return g;
}

BinaryDgp argmax_dgp() {
    BinaryDgp g;
    g.alpha0 = -0.5;
    g.alpha1 = 1.0;
    g.alpha2 = 1.0;
    g.tau = 1.0;
    g.b1 = 1.0;
    g.b2 = 0.8;
    return g;
}

BinaryDgp robustness_dgp() {
    BinaryDgp g = coverage_dgp();
    g.tau = 0.5;
    return g;
}

RemainderReport remainder_check(std::uint64_t seed) {
    // X = (X1, X2) on {0,1,2}^2; S = {X2}, so X_{-S} = X1.
    constexpr int L = 3;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0), dir(-1.0, 1.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    double p[L][L], pi1[L][L], mu[2][L][L];
    double tot = 0.0;
    for (auto& row : p)
        for (double& v : row) tot += (v = 0.2 + u(rng));
    for (auto& row : p)
        for (double& v : row) v /= tot;
    for (auto& row : pi1)
        for (double& v : row) v = 0.2 + 0.6 * u(rng);
    for (auto& arm : mu)
        for (auto& row : arm)
            for (double& v : row) v = nd(rng);
    auto pia = [&](int arm, int i, int j) { return arm == 1 ? pi1[i][j] : 1.0 - pi1[i][j]; };

    RemainderReport rep;
    for (int k = 0; k < 10; ++k) {
        double worst = 0.0;
        for (int arm = 0; arm < 2; ++arm) {
            double e_xi = 0.0, norm = 0.0, sq = 0.0;
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < L; ++j) {
                    const double pt = pia(arm, i, j);
                    const double pb = std::clamp(pt + 0.3 * dir(rng), 0.01, 0.99);
                    e_xi += p[i][j] * (pt * eif::xi(arm, pb, arm) + (1.0 - pt) * eif::xi(1 - arm, pb, arm));
                    norm += p[i][j] * pt * pt;
                    sq += p[i][j] * (pb - pt) * (pb - pt);
                }
            worst = std::max(worst, std::abs(e_xi - norm + sq));
        }
        rep.xi_errors.push_back(worst);
    }

    // lambda for arm 1: truths on X1, fixed perturbation directions.
    const int arm = 1;
    double px1[L], mu_sub[L], g[L], pi_sub[L];
    for (int i = 0; i < L; ++i) {
        double s = 0.0, num = 0.0, den = 0.0, gn = 0.0, gd = 0.0;
        for (int j = 0; j < L; ++j) {
            s += p[i][j];
            num += p[i][j] * pia(arm, i, j) * mu[arm][i][j];
            den += p[i][j] * pia(arm, i, j);
            gn += p[i][j] * pia(1 - arm, i, j) * mu[arm][i][j];
            gd += p[i][j] * pia(1 - arm, i, j);
        }
        px1[i] = s;
        mu_sub[i] = num / den;
        g[i] = gn / gd;
        pi_sub[i] = den / s;
    }
    double target = 0.0;
    for (int i = 0; i < L; ++i) target += px1[i] * (mu_sub[i] - g[i]) * (mu_sub[i] - g[i]);

    double d_sub[L], d_g[L], d_pis[L], d_full[L][L], d_pif[L][L];
    for (int i = 0; i < L; ++i) {
        d_sub[i] = dir(rng);
        d_g[i] = dir(rng);
        d_pis[i] = dir(rng);
        for (int j = 0; j < L; ++j) {
            d_full[i][j] = dir(rng);
            d_pif[i][j] = dir(rng);
        }
    }
    for (double h : {0.1, 0.05, 0.025}) {
        double e = 0.0;
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < L; ++j) {
                const double pf = pia(arm, i, j) + 0.5 * h * d_pif[i][j];
                const double ps = pi_sub[i] + 0.5 * h * d_pis[i];
                eif::LambdaInputs v{mu_sub[i] + h * d_sub[i], g[i] + h * d_g[i], mu[arm][i][j] + h * d_full[i][j],
                                    ps, pf, 1.0 - ps, 1.0 - pf};
                // Y enters linearly, so plugging in its conditional mean is exact.
                const double pt = pia(arm, i, j);
                e += p[i][j] * (pt * eif::lambda(arm, mu[arm][i][j], arm, v) +
                                (1.0 - pt) * eif::lambda(1 - arm, mu[1 - arm][i][j], arm, v));
            }
        rep.scales.push_back(h);
        rep.lambda_remainders.push_back(std::abs(e - target));
    }
    // Least-squares slope of log remainder on log scale.
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < rep.scales.size(); ++i) {
        mx += std::log(rep.scales[i]);
        my += std::log(rep.lambda_remainders[i]);
    }
    mx /= 3.0;
    my /= 3.0;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < rep.scales.size(); ++i) {
        const double dx = std::log(rep.scales[i]) - mx;
        sxy += dx * (std::log(rep.lambda_remainders[i]) - my);
        sxx += dx * dx;
    }
    rep.lambda_slope = sxy / sxx;
    return rep;
}

}  // namespace calsens::simlab
