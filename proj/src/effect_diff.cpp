#include <cmath>

#include "calsens/error.hpp"
#include "calsens/models.hpp"
#include "calsens/stats.hpp"

namespace calsens {

ModelFit estimate_effect_differences(const Dataset& data, const FoldAssignment& folds, const ModelOptions& opts) {
    const auto factory = opts.factory ? opts.factory : std::make_shared<LearnerFactory>(opts.nuisance);
    const auto full = crossfit_aipw(data, folds, all_columns(data), *factory);

    ModelFit fit;
    fit.model = ModelKind::effect_diff;
    fit.n = data.n();
    fit.psi = full.estimate;
    fit.phi_psi = full.phi;

    auto& mc = fit.confounding;
    mc.model = ModelKind::effect_diff;
    for (const auto& g : data.covariate_groups()) {
        const auto sub = crossfit_aipw(data, folds, complement(data, g.columns), *factory);
        Component c;
        c.label = g.label;
        c.excluded = g.columns;
        c.estimate = full.estimate - sub.estimate;
        c.magnitude = std::abs(c.estimate);
        c.influence = full.phi - sub.phi;
        c.se = centered_se(c.influence);
        mc.components.push_back(std::move(c));
    }
    double best = -1.0, second = -1.0;
    for (std::size_t j = 0; j < mc.components.size(); ++j) {
        const double m = mc.components[j].magnitude;
        if (m > best) {
            second = best;
            best = m;
            mc.maximizer = j;
        } else if (m > second) {
            second = m;
        }
    }
    const auto& top = mc.components[mc.maximizer];
    mc.value = best;
    mc.maximizer_label = top.label;
    mc.runner_up_gap = second < 0 ? best : best - second;
    if (!(mc.value > opts.degenerate_tol * std::max(1.0, std::abs(fit.psi))))
        throw DegenerateError("measured confounding is zero: leaving out any covariate leaves the estimate unchanged");

    const double sign = top.estimate >= 0 ? 1.0 : -1.0;
    mc.influence = sign * top.influence;
    const Eigen::VectorXd phi = fit.phi_psi;
    const Eigen::VectorXd delta = top.influence;
    const double psi = fit.psi, m_hat = mc.value;

    fit.at = [phi, delta, psi, m_hat, sign](double gamma) {
        BoundPoint p;
        p.gamma = gamma;
        p.upper = psi + gamma * m_hat;
        p.lower = psi - gamma * m_hat;
        p.phi_upper = phi + sign * gamma * delta;
        p.phi_lower = phi - sign * gamma * delta;
        p.ph_upper = psi + (gamma * m_hat);
        p.ph_lower = psi - (gamma * m_hat);
        p.ph_phi_upper = phi;
        p.ph_phi_lower = phi;
        p.dU_dM = gamma;
        p.dL_dM = -gamma;
        return p;
    };
    fit.sensitivity = [psi](const std::vector<double>& g) { return std::make_pair(psi - g.at(0), psi + g.at(0)); };
    return fit;
}

}  // namespace calsens
