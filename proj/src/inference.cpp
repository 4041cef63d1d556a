#include "calsens/inference.hpp"

#include <cmath>
#include <random>

#include "calsens/error.hpp"
#include "calsens/parallel.hpp"
#include "calsens/stats.hpp"

namespace calsens {

std::string variance_source_name(VarianceSource s) {
    return s == VarianceSource::influence ? "influence" : "bootstrap";
}

namespace {

void fill_limits(IntervalRow& r, double alpha) {
    const double z1 = stats::normal_quantile(1.0 - alpha);
    const double z2 = stats::normal_quantile(1.0 - alpha / 2.0);
    r.lb = r.lower - z1 * r.se_lower;
    r.ub = r.upper + z1 * r.se_upper;
    r.lb2 = r.lower - z2 * r.se_lower;
    r.ub2 = r.upper + z2 * r.se_upper;
    r.ph_lb2 = r.ph_lower - z2 * r.ph_se_lower;
    r.ph_ub2 = r.ph_upper + z2 * r.ph_se_upper;
}

double sample_variance(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

IntervalReport wald_intervals(const BoundCurve& curve, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    IntervalReport rep;
    rep.alpha = alpha;
    rep.psi = curve.psi;
    rep.psi_se = centered_se(curve.phi_psi);
    for (const auto& p : curve.points) {
        IntervalRow r;
        r.gamma = p.gamma;
        r.lower = p.lower;
        r.upper = p.upper;
        r.se_lower = p.se_lower();
        r.se_upper = p.se_upper();
        r.ph_lower = p.ph_lower;
        r.ph_upper = p.ph_upper;
        r.ph_se_lower = p.ph_se_lower();
        r.ph_se_upper = p.ph_se_upper();
        if (r.se_lower == 0.0 || r.se_upper == 0.0)
            rep.warnings.push_back("zero influence-function variance at gamma=" + stats::format_double(p.gamma) +
                                   "; interval is degenerate");
        if (p.derivative_clamped)
            rep.warnings.push_back("bound derivative in M was clamped at gamma=" + stats::format_double(p.gamma));
        fill_limits(r, alpha);
        rep.rows.push_back(r);
    }
    return rep;
}

BootstrapResult bootstrap_variance(const Pipeline& pipeline, const Dataset& data, const BootstrapOptions& opts) {
    if (opts.replicates < 50) throw ValidationError("bootstrap needs at least 50 replicates");
    if (opts.m < 2) throw ValidationError("bootstrap resample size must be at least 2");
    BootstrapResult res;
    res.n = data.n();
    res.m = std::min(opts.m, data.n());
    res.replicates = opts.replicates;

    const auto B = static_cast<std::size_t>(opts.replicates);
    std::vector<std::vector<double>> stats_b(B);
    std::vector<std::string> errors(B);
    parallel_for(B, [&](std::size_t b) {
        std::mt19937_64 rng(stats::derive_seed(opts.seed, 2 * b));
        std::uniform_int_distribution<std::size_t> pick(0, data.n() - 1);
        std::vector<std::size_t> rows(res.m);
        for (auto& r : rows) r = pick(rng);
        try {
            stats_b[b] = pipeline(data.take_rows(rows), stats::derive_seed(opts.seed, 2 * b + 1));
        } catch (const Error& e) {
            errors[b] = e.what();
        }
    });
    std::size_t k = 0;
    for (std::size_t b = 0; b < B; ++b) {
        if (!errors[b].empty()) {
            ++res.failures;
            res.failure_log.push_back("replicate " + std::to_string(b) + ": " + errors[b]);
        } else {
            k = stats_b[b].size();
        }
    }
    if (static_cast<double>(res.failures) > 0.1 * static_cast<double>(B)) {
        std::string msg = "bootstrap failed in " + std::to_string(res.failures) + " of " + std::to_string(B) +
                          " replicates";
        for (std::size_t i = 0; i < std::min<std::size_t>(3, res.failure_log.size()); ++i)
            msg += "; " + res.failure_log[i];
        throw NumericalError(msg);
    }
    const double scale = static_cast<double>(res.m) / static_cast<double>(res.n);
    res.variance.assign(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> col;
        for (std::size_t b = 0; b < B; ++b)
            if (errors[b].empty()) col.push_back(stats_b[b][j]);
        res.variance[j] = sample_variance(col) * scale;
    }
    return res;
}

Pipeline model_pipeline(ModelKind kind, ModelOptions opts, int folds, std::vector<double> gamma_grid) {
    return [kind, opts = std::move(opts), folds, grid = std::move(gamma_grid)](const Dataset& d, std::uint64_t seed) {
        const auto f = make_folds(d.n(), folds, seed);
        const auto fit = estimate_model(kind, d, f, opts);
        std::vector<double> out;
        for (double g : grid) {
            const auto p = fit.at(g);
            out.push_back(p.lower);
            out.push_back(p.upper);
        }
        out.push_back(fit.confounding.value);
        out.push_back(fit.psi);
        return out;
    };
}

void apply_bootstrap(IntervalReport& report, const BootstrapResult& boot) {
    if (boot.variance.size() != 2 * report.rows.size() + 2)
        throw ValidationError("bootstrap statistics do not match the interval grid");
    report.source = VarianceSource::bootstrap;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        auto& r = report.rows[i];
        r.se_lower = std::sqrt(boot.variance[2 * i]);
        r.se_upper = std::sqrt(boot.variance[2 * i + 1]);
        fill_limits(r, report.alpha);
    }
    report.psi_se = std::sqrt(boot.variance.back());
}

double variance_ratio(double rho, double rrse) { return 1.0 + rrse * rrse + 2.0 * rho * rrse; }

std::string classify_regime(double rho, double rrse) {
    const double lhs = 0.5 * rrse;
    if (lhs < -rho) return "under";
    if (lhs > -rho) return "over";
    return "equal";
}

RegimeReport regime_analysis(const Eigen::VectorXd& u_influence, const Eigen::VectorXd& m_influence, double gamma,
                             double m_hat) {
    if (u_influence.size() != m_influence.size() || u_influence.size() < 2)
        throw ValidationError("regime analysis needs influence vectors of equal length");
    const std::span<const double> u(u_influence.data(), static_cast<std::size_t>(u_influence.size()));
    const std::span<const double> m(m_influence.data(), static_cast<std::size_t>(m_influence.size()));
    const double vu = stats::variance(u), vm = stats::variance(m);
    if (!(vu > 0.0) || !(vm > 0.0) || !(m_hat > 0.0) || !(gamma > 0.0))
        throw DegenerateError("regime analysis: zero variance, zero measured confounding or zero gamma");
    RegimeReport r;
    r.gamma = gamma;
    r.m_hat = m_hat;
    r.rho = stats::covariance(u, m) / std::sqrt(vu * vm);
    r.rrse = (std::sqrt(vm) / m_hat) / (std::sqrt(vu) / gamma);
    r.ratio = variance_ratio(r.rho, r.rrse);
    const Eigen::VectorXd cal = u_influence + (gamma / m_hat) * m_influence;
    r.direct_ratio = stats::variance(std::span<const double>(cal.data(), static_cast<std::size_t>(cal.size()))) / vu;
    r.regime = classify_regime(r.rho, r.rrse);
    return r;
}

}  // namespace calsens
