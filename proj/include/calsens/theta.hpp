#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "calsens/learners.hpp"

namespace calsens {

// minus: theta solves E[omega_theta(Y; t) | x] = 0; plus: the same with 1/t.
enum class ThetaSide { minus, plus };

struct ThetaOptions {
    Learner sieve = Learner::linear;
    int max_iter = 200;
    int patience = 5;
    // Bandwidth of the smoothed indicator 1(Y < theta), as a fraction of sd(Y).
    double smoothing = 1e-3;
};

struct ThetaRule {
    int arm = 1;
    ThetaSide side = ThetaSide::minus;
    double t = 1.0;
    Learner sieve = Learner::linear;
    Eigen::VectorXd coef;
    double y_min = 0.0, y_max = 0.0;
    Eigen::VectorXd below_coef;   // P(Y < theta(x) | x)
    Eigen::VectorXd f_coef;       // E[(theta(x) - Y)_+ | x]
    Eigen::VectorXd ftilde_coef;  // E[(Y - theta(x))_+ | x]
    double moment_residual = 0.0;  // training mean of omega_theta(Y; s)
    int iterations = 0;
    std::vector<double> loss_trace;

    // Weight on the lower branch of omega: t for minus, 1/t for plus.
    double s() const { return side == ThetaSide::minus ? t : 1.0 / t; }

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd below(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd exceed(const Eigen::MatrixXd& x) const { return (1.0 - below(x).array()).matrix(); }
    // nu = P(Y > theta) + s P(Y < theta)
    Eigen::VectorXd nu(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd f(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd ftilde(const Eigen::MatrixXd& x) const;
};

// Fit on the arm-`arm` rows only (x, y are already restricted to that arm).
// Newton iterations on the asymmetric squared loss whose derivative is
// -omega, with step halving; exact at convergence.
ThetaRule fit_theta(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int arm, double t, ThetaSide side,
                    const ThetaOptions& opts = {});

// Pointwise root of the empirical moment sum_i w_i omega_theta(y_i; s) = 0 by
// bisection (test oracle).
double theta_bisection(const Eigen::VectorXd& y, double s, const Eigen::VectorXd* weights = nullptr);

}  // namespace calsens
