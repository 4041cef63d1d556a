#include "calsens/theta.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "calsens/error.hpp"
#include "calsens/nuisance.hpp"
#include "calsens/stats.hpp"

namespace calsens {
namespace {

double expectile_loss(const Eigen::VectorXd& r, double s) {
    double l = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) l += (r(i) > 0 ? 1.0 : s) * r(i) * r(i);
    return 0.5 * l / static_cast<double>(r.size());
}

Eigen::VectorXd branch_weights(const Eigen::VectorXd& r, double s) {
    return r.unaryExpr([s](double v) { return v > 0 ? 1.0 : s; });
}

}  // namespace

Eigen::VectorXd ThetaRule::predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd th = basis_expand(x, sieve) * coef;
    for (Eigen::Index i = 0; i < th.size(); ++i) th(i) = std::clamp(th(i), y_min, y_max);
    return th;
}

Eigen::VectorXd ThetaRule::below(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd p = basis_expand(x, sieve) * below_coef;
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = std::clamp(p(i), 0.0, 1.0);
    return p;
}

Eigen::VectorXd ThetaRule::nu(const Eigen::MatrixXd& x) const {
    return (1.0 + (s() - 1.0) * below(x).array()).matrix();
}

Eigen::VectorXd ThetaRule::f(const Eigen::MatrixXd& x) const {
    return (basis_expand(x, sieve) * f_coef).cwiseMax(0.0);
}

Eigen::VectorXd ThetaRule::ftilde(const Eigen::MatrixXd& x) const {
    return (basis_expand(x, sieve) * ftilde_coef).cwiseMax(0.0);
}

ThetaRule fit_theta(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int arm, double t, ThetaSide side,
                    const ThetaOptions& opts) {
    if (!(t > 0.0) || !std::isfinite(t)) throw ValidationError("theta: multiplier t must be positive and finite");
    if (y.size() == 0) throw FitError("theta: arm " + std::to_string(arm) + " is empty");
    ThetaRule rule;
    rule.arm = arm;
    rule.side = side;
    rule.t = t;
    rule.sieve = opts.sieve;
    rule.y_min = y.minCoeff();
    rule.y_max = y.maxCoeff();
    const double s = rule.s();

    const Eigen::MatrixXd b = basis_expand(x, opts.sieve);
    // Least squares start: exact when s = 1.
    Eigen::VectorXd c = least_squares(b, y);
    Eigen::VectorXd r = y - b * c;
    double loss = expectile_loss(r, s);
    rule.loss_trace.push_back(loss);
    Eigen::VectorXd w = branch_weights(r, s);
    int stalled = 0;
    bool done = s == 1.0;
    for (rule.iterations = 0; !done && rule.iterations < opts.max_iter; ++rule.iterations) {
        // Newton step = weighted least squares with the current branch weights.
        const Eigen::VectorXd target = weighted_least_squares(b, y, w);
        const Eigen::VectorXd step = target - c;
        double scale = 1.0;
        bool improved = false;
        for (int h = 0; h < 40; ++h, scale *= 0.5) {
            const Eigen::VectorXd cand = c + scale * step;
            const Eigen::VectorXd rc = y - b * cand;
            const double lc = expectile_loss(rc, s);
            if (lc <= loss) {
                improved = lc < loss;
                c = cand;
                r = rc;
                loss = lc;
                break;
            }
        }
        rule.loss_trace.push_back(loss);
        const Eigen::VectorXd w_new = branch_weights(r, s);
        if (w_new == w && scale == 1.0) {
            done = true;  // branch pattern stable: c is the exact minimiser
            break;
        }
        w = w_new;
        stalled = improved ? 0 : stalled + 1;
        if (stalled >= opts.patience) break;
    }
    const Eigen::VectorXd grad = b.transpose() * w.cwiseProduct(r) / static_cast<double>(r.size());
    const double scale_y = std::max(1.0, stats::sd(std::span<const double>(y.data(), static_cast<std::size_t>(y.size()))));
    if (!done && grad.norm() > 1e-7 * scale_y) {
        std::ostringstream msg;
        msg << "theta solver did not converge for arm " << arm << " (t=" << t << ", gradient norm " << grad.norm()
            << "); loss trace:";
        for (double l : rule.loss_trace) msg << ' ' << l;
        throw NumericalError(msg.str());
    }
    rule.coef = c;

    const Eigen::VectorXd th = rule.predict(x);
    double m = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) m += eval_omega(y(i), th(i), s);
    rule.moment_residual = m / static_cast<double>(y.size());

    const double sd = stats::sd(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
    const double h = opts.smoothing * sd;
    Eigen::VectorXd ind(y.size()), lo(y.size()), hi(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double d = th(i) - y(i);
        ind(i) = h > 0 ? stats::normal_cdf(d / h) : (d > 0 ? 1.0 : 0.0);
        lo(i) = std::max(d, 0.0);
        hi(i) = std::max(-d, 0.0);
    }
    rule.below_coef = least_squares(b, ind);
    rule.f_coef = least_squares(b, lo);
    rule.ftilde_coef = least_squares(b, hi);
    return rule;
}

double theta_bisection(const Eigen::VectorXd& y, double s, const Eigen::VectorXd* weights) {
    auto moment = [&](double th) {
        double m = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) m += (weights ? (*weights)(i) : 1.0) * eval_omega(y(i), th, s);
        return m;
    };
    double lo = y.minCoeff(), hi = y.maxCoeff();
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        // moment is decreasing in theta
        if (moment(mid) > 0) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace calsens
