#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "calsens/models.hpp"

namespace calsens {

enum class VarianceSource { influence, bootstrap };
std::string variance_source_name(VarianceSource s);

struct IntervalRow {
    double gamma = 0.0;
    double lower = 0.0, upper = 0.0;
    double se_lower = 0.0, se_upper = 0.0;
    double lb = 0.0, ub = 0.0;    // one-sided at alpha
    double lb2 = 0.0, ub2 = 0.0;  // two-sided band, each side at alpha/2
    // Post hoc (uncalibrated) counterparts.
    double ph_lower = 0.0, ph_upper = 0.0;
    double ph_se_lower = 0.0, ph_se_upper = 0.0;
    double ph_lb2 = 0.0, ph_ub2 = 0.0;
};

struct IntervalReport {
    double alpha = 0.05;
    VarianceSource source = VarianceSource::influence;
    double psi = 0.0, psi_se = 0.0;
    std::vector<IntervalRow> rows;
    std::vector<std::string> warnings;
};

IntervalReport wald_intervals(const BoundCurve& curve, double alpha);

struct BootstrapOptions {
    int replicates = 100;
    std::size_t m = 1000;  // resample size (clamped to n)
    std::uint64_t seed = 1;
};

// A pipeline maps a dataset and a seed to a fixed-length vector of statistics.
using Pipeline = std::function<std::vector<double>(const Dataset&, std::uint64_t)>;

struct BootstrapResult {
    std::vector<double> variance;  // rescaled to the full-sample size by m/n
    int replicates = 0;
    int failures = 0;
    std::size_t m = 0, n = 0;
    std::vector<std::string> failure_log;
};

BootstrapResult bootstrap_variance(const Pipeline& pipeline, const Dataset& data, const BootstrapOptions& opts);

// Statistics [L(g_1), U(g_1), ..., L(g_k), U(g_k), M-hat, psi-hat] of a full re-estimation.
Pipeline model_pipeline(ModelKind kind, ModelOptions opts, int folds, std::vector<double> gamma_grid);

// Replaces the influence-based standard errors of `report` by bootstrap ones
// (as produced by model_pipeline on the same grid).
void apply_bootstrap(IntervalReport& report, const BootstrapResult& boot);

struct RobustnessValue {
    double gamma0 = 0.0;
    double se = 0.0;
    double ci_lower = 0.0, ci_upper = 0.0;
    std::string crossing = "lower";  // which bound reaches zero
    std::string method;              // closed-form | z-root
    double residual = 0.0;           // |L(g0) U(g0)|
    double psi_prime = 0.0;
    int evaluations = 0;
};

struct RobustnessOptions {
    double gamma_max = 50.0;
    double alpha = 0.05;
    double residual_tol = 1e-10;
    bool force_root = false;  // use the z-root even where a closed form exists
};

RobustnessValue robustness_value(const ModelFit& fit, const RobustnessOptions& opts = {});

struct RegimeReport {
    double gamma = 0.0;  // raw sensitivity parameter
    double m_hat = 0.0;
    double rho = 0.0;
    double rrse = 0.0;
    double ratio = 0.0;         // from rho and RRSE
    double direct_ratio = 0.0;  // V{u + gamma M/M} / V{u} computed directly
    std::string regime;         // over | under | equal
};

double variance_ratio(double rho, double rrse);
// under iff rho < 0 and rrse < -2 rho; equal on the boundary.
std::string classify_regime(double rho, double rrse);
RegimeReport regime_analysis(const Eigen::VectorXd& u_influence, const Eigen::VectorXd& m_influence, double gamma,
                             double m_hat);

}  // namespace calsens
