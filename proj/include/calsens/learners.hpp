#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

namespace calsens {

enum class Learner { constant, linear, poly2, knn, nadaraya_watson, logistic };

Learner parse_learner(const std::string& name);
std::string learner_name(Learner l);

struct LearnerOptions {
    int knn_k = 0;  // 0: round(sqrt(n))
    // Candidate bandwidths for Nadaraya-Watson are these multiples of the
    // normal-reference bandwidth; the leave-one-out CV minimiser wins.
    std::vector<double> nw_multipliers{0.25, 0.5, 0.75, 1.0, 1.5, 2.0};
    int logistic_max_iter = 100;
    double logistic_tol = 1e-8;
};

class Regressor {
public:
    virtual ~Regressor() = default;
    virtual Eigen::VectorXd predict(const Eigen::MatrixXd& x) const = 0;
};
using RegressorPtr = std::shared_ptr<const Regressor>;

// Design with intercept: [1, x] (linear) or [1, x, x_j x_k for j <= k] (poly2).
Eigen::MatrixXd basis_expand(const Eigen::MatrixXd& x, Learner sieve);

// Least squares via column-pivoted QR (tolerates rank-deficient designs).
Eigen::VectorXd least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);
Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& w);

struct LogisticFit {
    Eigen::VectorXd beta;  // intercept first
    Eigen::MatrixXd fisher_info;  // mean of p(1-p) x~ x~^T at beta
    double loglik = 0.0;  // mean log-likelihood
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Damped Newton on the Bernoulli log-likelihood with intercept.
LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& a, const LearnerOptions& opts = {});

double logistic(double eta);

// Any learner on (x, y). Zero-column designs reduce to the constant learner.
// Logistic expects y in {0,1} and predicts probabilities.
RegressorPtr fit_regressor(Learner method, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const LearnerOptions& opts = {});

}  // namespace calsens
