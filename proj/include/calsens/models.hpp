#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "calsens/crossfit.hpp"
#include "calsens/data.hpp"

namespace calsens {

enum class ModelKind { effect_diff, odds, outcome };

ModelKind parse_model(const std::string& name);
std::string model_name(ModelKind m);

// One leave-out unit of measured confounding.
struct Component {
    std::string label;
    std::vector<std::size_t> excluded;  // view columns left out
    int arm = -1;                       // outcome model only
    double estimate = 0.0;              // signed psi - psi_{-S}; lambda mean for the outcome model
    double magnitude = 0.0;             // |estimate|
    double se = 0.0;
    Eigen::VectorXd influence;          // uncentered
};

struct MeasuredConfounding {
    ModelKind model = ModelKind::effect_diff;
    double value = 0.0;  // M-hat multiplying Gamma in the bounds
    std::size_t maximizer = 0;
    std::string maximizer_label;
    double runner_up_gap = 0.0;
    std::vector<Component> components;
    Eigen::VectorXd influence;  // of M-hat, uncentered
    std::vector<double> per_arm;  // outcome model: M_0, M_1
    std::vector<double> arm_norms;  // outcome model: ||pi_1||, ||pi_0|| paired with M_0, M_1
};

struct BoundPoint {
    double gamma = 0.0;
    double lower = 0.0, upper = 0.0;
    Eigen::VectorXd phi_lower, phi_upper;
    // Uncalibrated bounds at the matching sensitivity parameter, treating
    // M-hat as fixed.
    double ph_lower = 0.0, ph_upper = 0.0;
    Eigen::VectorXd ph_phi_lower, ph_phi_upper;
    double dU_dM = 0.0, dL_dM = 0.0;
    bool derivative_clamped = false;

    double se_lower() const { return centered_se(phi_lower); }
    double se_upper() const { return centered_se(phi_upper); }
    double ph_se_lower() const { return centered_se(ph_phi_lower); }
    double ph_se_upper() const { return centered_se(ph_phi_upper); }
};

struct BoundCurve {
    ModelKind model = ModelKind::effect_diff;
    std::size_t n = 0;
    double psi = 0.0;
    Eigen::VectorXd phi_psi;
    double m_hat = 0.0;
    std::vector<BoundPoint> points;
};

// Values of the odds-ratio bounds at a given log t (cross-fitted).
struct OddsEval {
    double upper = 0.0, lower = 0.0;
    Eigen::VectorXd phi_upper, phi_lower;
    // Per-observation d bound / d log t; times Gamma gives d bound / dM.
    Eigen::VectorXd dupper_dlogt, dlower_dlogt;
};

struct ModelFit {
    ModelKind model = ModelKind::effect_diff;
    std::size_t n = 0;
    double psi = 0.0;
    Eigen::VectorXd phi_psi;
    MeasuredConfounding confounding;
    std::function<BoundPoint(double)> at;
    // Uncalibrated (lower, upper) at raw sensitivity parameters: one value for
    // effect-diff and odds, one per arm (gamma_0, gamma_1) for the outcome model.
    std::function<std::pair<double, double>(const std::vector<double>&)> sensitivity;
    std::function<OddsEval(double)> odds_eval;  // odds model only
    std::vector<std::string> warnings;

    // Raw sensitivity parameters that Gamma maps to under the fitted M.
    std::vector<double> calibrated_parameters(double gamma) const;
    BoundCurve curve(const std::vector<double>& gamma_grid) const;
};

struct ModelOptions {
    NuisanceConfig nuisance;
    // Overrides the learners in `nuisance` (e.g. analytic nuisances).
    std::shared_ptr<const NuisanceFactory> factory;
    // Outcome model leave-out family; empty means leave out each covariate group.
    std::vector<std::vector<std::size_t>> family;
    double degenerate_tol = 1e-12;
};

ModelFit estimate_effect_differences(const Dataset& data, const FoldAssignment& folds, const ModelOptions& opts = {});
// Covariates are min-max rescaled internally unless already in the unit cube.
ModelFit estimate_odds_ratio(const Dataset& data, const FoldAssignment& folds, const ModelOptions& opts = {});
ModelFit estimate_outcome_model(const Dataset& data, const FoldAssignment& folds, const ModelOptions& opts = {});
ModelFit estimate_model(ModelKind kind, const Dataset& data, const FoldAssignment& folds,
                        const ModelOptions& opts = {});

// Plug-in dU/dM and dL/dM at Gamma for the odds model.
std::pair<double, double> derivative_dU_dM(const ModelFit& odds_fit, double gamma);

// True iff calibrated[i] == sensitivity[i] to `tol` (absolute, scaled by 1 + |value|).
bool invariance_check(const std::vector<double>& calibrated, const std::vector<double>& sensitivity,
                      double tol = 1e-10);
// Convenience: compares U-hat(Gamma) with u-hat(Gamma M-hat) on the grid, both sides.
bool invariance_check(const ModelFit& fit, const std::vector<double>& gamma_grid, double tol = 1e-10);

std::vector<double> default_gamma_grid();

}  // namespace calsens
