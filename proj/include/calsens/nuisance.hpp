#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <span>

#include "calsens/data.hpp"
#include "calsens/learners.hpp"

namespace calsens {

using VectorFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

inline Eigen::VectorXd to_vector(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
Eigen::VectorXd to_vector(std::span<const int> v);

struct PropensityRule {
    VectorFn raw;  // untruncated P(A=1 | x)
    double epsilon = 0.01;

    Eigen::VectorXd pi1(const Eigen::MatrixXd& x) const;
    // pi_0 is computed as 1 - pi_1 of the truncated values.
    Eigen::VectorXd pi(int arm, const Eigen::MatrixXd& x) const;

    static PropensityRule from(RegressorPtr r, double epsilon);
};

struct OutcomeRule {
    std::array<VectorFn, 2> mu;
    Eigen::VectorXd predict(int arm, const Eigen::MatrixXd& x) const { return mu[static_cast<std::size_t>(arm)](x); }

    static OutcomeRule from(RegressorPtr mu0, RegressorPtr mu1);
};

PropensityRule fit_propensity(const Eigen::MatrixXd& x, std::span<const int> a, Learner method, double epsilon,
                              const LearnerOptions& opts = {});
PropensityRule fit_propensity(const Dataset& train, Learner method, double epsilon, const LearnerOptions& opts = {});

// Regression of Y on x within arm `arm`.
RegressorPtr fit_outcome(const Eigen::MatrixXd& x, std::span<const int> a, std::span<const double> y, int arm,
                         Learner method, const LearnerOptions& opts = {});
RegressorPtr fit_outcome(const Dataset& train, int arm, Learner method, const LearnerOptions& opts = {});

// Logistic regression of A on unit-cube covariates; measured confounding is
// the largest absolute slope.
struct LogisticProjection {
    Eigen::VectorXd beta;  // intercept, slopes
    Eigen::MatrixXd fisher_info;  // E[p(1-p) x~ x~^T]
    Eigen::MatrixXd fisher_inverse;
    std::size_t argmax = 0;  // slope index (0-based covariate)
    double runner_up_gap = 0.0;  // |beta_argmax| - second largest |beta_j|
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;

    double m_hat() const { return std::abs(beta(static_cast<Eigen::Index>(argmax) + 1)); }
    // s(z; beta) = (a - p(x)) x~ for each row.
    Eigen::MatrixXd scores(const Eigen::MatrixXd& x, std::span<const int> a) const;
};

LogisticProjection fit_logistic_projection(const Eigen::MatrixXd& unit_x, std::span<const int> a,
                                           const LearnerOptions& opts = {});
LogisticProjection fit_logistic_projection(const Dataset& unit_train, const LearnerOptions& opts = {});

inline double eval_omega(double y, double theta, double t) {
    const double r = y - theta;
    return r > 0 ? r : (r < 0 ? t * r : 0.0);
}

// E{mu_a(X) | A = 1-a, X_sub}: mu_a evaluated on the full covariates of the
// arm-(1-a) rows, then regressed on their subset covariates.
RegressorPtr fit_pseudo_outcome(const Eigen::MatrixXd& x_full, const Eigen::MatrixXd& x_sub, std::span<const int> a,
                                const OutcomeRule& mu, int arm, Learner method, const LearnerOptions& opts = {});

}  // namespace calsens
