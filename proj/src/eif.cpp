#include "calsens/eif.hpp"

#include "calsens/error.hpp"

namespace calsens::eif {

Eigen::VectorXd phi_amd(std::span<const int> a, std::span<const double> y, const Eigen::VectorXd& pi1,
                        const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu0) {
    Eigen::VectorXd out(pi1.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double p = pi1(i);
        if (!(p > 0.0 && p < 1.0)) throw NumericalError("propensity outside (0, 1) in influence function");
        const auto k = static_cast<std::size_t>(i);
        out(i) = phi_amd(a[k], y[k], p, mu1(i), mu0(i));
    }
    return out;
}

Eigen::VectorXd xi(std::span<const int> a, const Eigen::VectorXd& pi_arm, int arm) {
    Eigen::VectorXd out(pi_arm.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = xi(a[static_cast<std::size_t>(i)], pi_arm(i), arm);
    return out;
}

Eigen::VectorXd varphi_odds(std::span<const int> a, std::span<const double> y, const OddsValues& v, Side side) {
    const double t = v.t;
    Eigen::VectorXd out(v.pi1.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double ai = a[k], yi = y[k];
        const double p1 = v.pi1(i), p0 = 1.0 - p1;
        const double th1 = side == Side::upper ? v.theta1_plus(i) : v.theta1_minus(i);
        const double nu1 = side == Side::upper ? v.nu1_plus(i) : v.nu1_minus(i);
        const double s1 = side == Side::upper ? 1.0 / t : t;
        const double th0 = side == Side::upper ? v.theta0_minus(i) : v.theta0_plus(i);
        const double nu0 = side == Side::upper ? v.nu0_minus(i) : v.nu0_plus(i);
        const double s0 = side == Side::upper ? t : 1.0 / t;
        if (!(nu1 > 0.0) || !(nu0 > 0.0)) throw NumericalError("nonpositive nu in odds-ratio influence function");
        const double treated = ai * yi + (1.0 - ai) * th1 + ai * eval_omega(yi, th1, s1) * p0 / (nu1 * p1);
        const double control = (1.0 - ai) * yi + ai * th0 + (1.0 - ai) * eval_omega(yi, th0, s0) * p1 / (nu0 * p0);
        out(i) = treated - control;
    }
    return out;
}

Eigen::VectorXd dbound_dM_terms(const OddsValues& v, double gamma, Side side) {
    const Eigen::ArrayXd p1 = v.pi1.array();
    const Eigen::ArrayXd p0 = 1.0 - p1;
    if (side == Side::upper)
        return (gamma * (p0 * v.ftilde1_plus.array() / v.nu1_plus.array() +
                         v.t * p1 * v.f0_minus.array() / v.nu0_minus.array()))
            .matrix();
    return (-gamma * (v.t * p0 * v.f1_minus.array() / v.nu1_minus.array() +
                      p1 * v.ftilde0_plus.array() / v.nu0_plus.array()))
        .matrix();
}

Eigen::VectorXd phi_M_odds(const Eigen::MatrixXd& unit_x, std::span<const int> a, const LogisticProjection& proj) {
    if (proj.fisher_inverse.size() == 0)
        throw NumericalError("logistic projection has no Fisher information inverse");
    const auto j = static_cast<Eigen::Index>(proj.argmax) + 1;
    const double sign = proj.beta(j) >= 0 ? 1.0 : -1.0;
    const Eigen::RowVectorXd row = proj.fisher_inverse.row(j);
    return sign * (proj.scores(unit_x, a) * row.transpose());
}

}  // namespace calsens::eif
