#include <cmath>

#include "calsens/error.hpp"
#include "calsens/inference.hpp"
#include "calsens/stats.hpp"

namespace calsens {
namespace {

void set_ci(RobustnessValue& rv, double alpha) {
    const double z = stats::normal_quantile(1.0 - alpha / 2.0);
    rv.ci_lower = std::max(0.0, rv.gamma0 - z * rv.se);
    rv.ci_upper = rv.gamma0 + z * rv.se;
}

RobustnessValue closed_form(const ModelFit& fit, const RobustnessOptions& opts) {
    RobustnessValue rv;
    rv.method = "closed-form";
    const double m = fit.confounding.value;
    rv.gamma0 = std::abs(fit.psi) / m;
    rv.crossing = fit.psi >= 0 ? "lower" : "upper";
    const auto p = fit.at(rv.gamma0);
    const Eigen::VectorXd& phi = fit.psi >= 0 ? p.phi_lower : p.phi_upper;
    rv.se = centered_se(phi) / m;
    rv.residual = std::abs(p.lower * p.upper);
    rv.psi_prime = fit.psi >= 0 ? -m * p.upper : m * p.lower;
    rv.evaluations = 1;
    set_ci(rv, opts.alpha);
    return rv;
}

}  // namespace

RobustnessValue robustness_value(const ModelFit& fit, const RobustnessOptions& opts) {
    if (!(fit.confounding.value > 0.0)) throw DegenerateError("robustness value needs nonzero measured confounding");
    if (fit.model == ModelKind::effect_diff && !opts.force_root) return closed_form(fit, opts);

    RobustnessValue rv;
    rv.method = "z-root";
    auto big_psi = [&](double g) {
        ++rv.evaluations;
        const auto p = fit.at(g);
        return p.lower * p.upper;
    };
    const double at0 = big_psi(0.0);
    double lo = 0.0, hi = 0.0;
    if (at0 <= 0.0) {
        rv.gamma0 = 0.0;
    } else {
        // Expand the bracket geometrically; bounds are monotone so the first
        // sign change is the crossing.
        double g = std::min(0.25, opts.gamma_max);
        double prev = 0.0, v = 0.0;
        for (;;) {
            v = big_psi(g);
            if (v <= 0.0) break;
            if (g >= opts.gamma_max) {
                throw DegenerateError("bounds do not cross zero on [0, " + stats::format_double(opts.gamma_max) +
                                      "]: L*U is " + stats::format_double(at0) + " at 0 and " +
                                      stats::format_double(v) + " at the upper end");
            }
            prev = g;
            g = std::min(2.0 * g, opts.gamma_max);
        }
        lo = prev;
        hi = g;
        if (v == 0.0) {
            rv.gamma0 = hi;
        } else {
            double mid = 0.5 * (lo + hi), vm = 0.0;
            for (int it = 0; it < 200; ++it) {
                mid = 0.5 * (lo + hi);
                vm = big_psi(mid);
                if (std::abs(vm) <= opts.residual_tol || hi - lo <= 1e-15 * std::max(1.0, hi)) break;
                if (vm > 0.0) lo = mid;
                else hi = mid;
            }
            rv.gamma0 = mid;
        }
    }
    const auto p = fit.at(rv.gamma0);
    rv.residual = std::abs(p.lower * p.upper);
    rv.crossing = std::abs(p.lower) <= std::abs(p.upper) ? "lower" : "upper";

    const double h = std::max(1e-4, 1e-4 * rv.gamma0);
    if (rv.gamma0 - h >= 0.0) rv.psi_prime = (big_psi(rv.gamma0 + h) - big_psi(rv.gamma0 - h)) / (2.0 * h);
    else rv.psi_prime = (big_psi(rv.gamma0 + h) - big_psi(rv.gamma0)) / h;
    const Eigen::VectorXd phi_psi = p.phi_upper * p.lower + p.phi_lower * p.upper;
    if (rv.psi_prime == 0.0) throw NumericalError("robustness value: derivative of L*U vanishes at the root");
    rv.se = centered_se(phi_psi) / std::abs(rv.psi_prime);
    set_ci(rv, opts.alpha);
    return rv;
}

}  // namespace calsens
