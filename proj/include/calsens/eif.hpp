#pragma once

#include <Eigen/Dense>
#include <span>

#include "calsens/nuisance.hpp"

// Uncentered influence-function values. Callers center.
namespace calsens::eif {

inline double phi_amd(int a, double y, double pi1, double mu1, double mu0) {
    const double mu_a = a == 1 ? mu1 : mu0;
    const double w = a == 1 ? 1.0 / pi1 : -1.0 / (1.0 - pi1);
    return mu1 - mu0 + w * (y - mu_a);
}

Eigen::VectorXd phi_amd(std::span<const int> a, std::span<const double> y, const Eigen::VectorXd& pi1,
                        const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu0);

// Uncentered influence function of E[pi_arm(X)^2]; pi_arm is P(A = arm | X).
inline double xi(int a, double pi_arm, int arm) {
    return pi_arm * pi_arm + 2.0 * pi_arm * ((a == arm ? 1.0 : 0.0) - pi_arm);
}

Eigen::VectorXd xi(std::span<const int> a, const Eigen::VectorXd& pi_arm, int arm);

// Nuisances of lambda_a(Z; S) at one observation. `_sub` values use X_{-S}.
struct LambdaInputs {
    double mu_sub;        // mu_a(X_{-S})
    double pseudo;        // E{mu_a(X) | A = 1-a, X_{-S}}
    double mu_full;       // mu_a(X)
    double pi_a_sub;      // pi_a(X_{-S})
    double pi_a_full;     // pi_a(X)
    double pi_other_sub;  // pi_{1-a}(X_{-S})
    double pi_other_full; // pi_{1-a}(X)
};

inline double lambda(int a, double y, int arm, const LambdaInputs& v) {
    const double gap = v.mu_sub - v.pseudo;
    double corr = 0.0;
    if (a == arm) {
        corr += (y - v.mu_sub) / v.pi_a_sub;
        corr -= (y - v.mu_full) / v.pi_a_full * (v.pi_other_full / v.pi_other_sub);
    } else {
        corr -= (v.mu_full - v.pseudo) / v.pi_other_sub;
    }
    return gap * gap + 2.0 * gap * corr;
}

// Nuisance values of the odds-ratio bounds at multiplier t, evaluated on rows.
struct OddsValues {
    double t = 1.0;
    Eigen::VectorXd pi1;
    Eigen::VectorXd theta1_plus, theta1_minus, theta0_plus, theta0_minus;
    Eigen::VectorXd nu1_plus, nu1_minus, nu0_plus, nu0_minus;
    Eigen::VectorXd ftilde1_plus, f1_minus, f0_minus, ftilde0_plus;
};

enum class Side { upper, lower };

Eigen::VectorXd varphi_odds(std::span<const int> a, std::span<const double> y, const OddsValues& v, Side side);

// Per-observation pieces of the M-derivative of the bounds (averaged by the caller):
// upper: Gamma [pi0 ftilde1(theta1+)/nu1+ + t pi1 f0(theta0-)/nu0-]
// lower: -Gamma [t pi0 f1(theta1-)/nu1- + pi1 ftilde0(theta0+)/nu0+]
Eigen::VectorXd dbound_dM_terms(const OddsValues& v, double gamma, Side side);

// e_j^T I^{-1} sign(beta_j) s(Z; beta) for the maximising slope j.
Eigen::VectorXd phi_M_odds(const Eigen::MatrixXd& unit_x, std::span<const int> a, const LogisticProjection& proj);

}  // namespace calsens::eif
