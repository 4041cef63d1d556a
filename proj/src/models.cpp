#include "calsens/models.hpp"

#include <cmath>

#include "calsens/error.hpp"

namespace calsens {

ModelKind parse_model(const std::string& name) {
    if (name == "effect-diff") return ModelKind::effect_diff;
    if (name == "odds") return ModelKind::odds;
    if (name == "outcome") return ModelKind::outcome;
    throw ConfigError("unknown model '" + name + "' (effect-diff, odds, outcome)");
}

std::string model_name(ModelKind m) {
    switch (m) {
        case ModelKind::effect_diff: return "effect-diff";
        case ModelKind::odds: return "odds";
        case ModelKind::outcome: return "outcome";
    }
    return "?";
}

std::vector<double> ModelFit::calibrated_parameters(double gamma) const {
    if (model == ModelKind::outcome) return {gamma * confounding.per_arm[0], gamma * confounding.per_arm[1]};
    return {gamma * confounding.value};
}

BoundCurve ModelFit::curve(const std::vector<double>& gamma_grid) const {
    BoundCurve c;
    c.model = model;
    c.n = n;
    c.psi = psi;
    c.phi_psi = phi_psi;
    c.m_hat = confounding.value;
    for (double g : gamma_grid) {
        if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("gamma values must be finite and nonnegative");
        c.points.push_back(at(g));
    }
    return c;
}

ModelFit estimate_model(ModelKind kind, const Dataset& data, const FoldAssignment& folds, const ModelOptions& opts) {
    switch (kind) {
        case ModelKind::effect_diff: return estimate_effect_differences(data, folds, opts);
        case ModelKind::odds: return estimate_odds_ratio(data, folds, opts);
        case ModelKind::outcome: return estimate_outcome_model(data, folds, opts);
    }
    throw ConfigError("unknown model");
}

bool invariance_check(const std::vector<double>& calibrated, const std::vector<double>& sensitivity, double tol) {
    if (calibrated.size() != sensitivity.size()) return false;
    for (std::size_t i = 0; i < calibrated.size(); ++i) {
        const double scale = 1.0 + std::abs(calibrated[i]);
        if (!(std::abs(calibrated[i] - sensitivity[i]) <= tol * scale)) return false;
    }
    return true;
}

bool invariance_check(const ModelFit& fit, const std::vector<double>& gamma_grid, double tol) {
    std::vector<double> cal, sens;
    for (double g : gamma_grid) {
        const auto p = fit.at(g);
        const auto [l, u] = fit.sensitivity(fit.calibrated_parameters(g));
        cal.push_back(p.lower);
        cal.push_back(p.upper);
        sens.push_back(l);
        sens.push_back(u);
    }
    return invariance_check(cal, sens, tol);
}

std::vector<double> default_gamma_grid() { return {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0}; }

}  // namespace calsens
