#include "calsens/nuisance.hpp"

#include <algorithm>
#include <cmath>

#include "calsens/error.hpp"

namespace calsens {

Eigen::VectorXd to_vector(std::span<const int> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

Eigen::VectorXd PropensityRule::pi1(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd p = raw(x);
    const double lo = epsilon, hi = 1.0 - epsilon;
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = std::clamp(p(i), lo, hi);
    return p;
}

Eigen::VectorXd PropensityRule::pi(int arm, const Eigen::MatrixXd& x) const {
    Eigen::VectorXd p = pi1(x);
    if (arm == 1) return p;
    return (1.0 - p.array()).matrix();
}

PropensityRule PropensityRule::from(RegressorPtr r, double epsilon) {
    if (!(epsilon >= 0.0 && epsilon < 0.5)) throw ConfigError("propensity truncation must lie in [0, 0.5)");
    return PropensityRule{[r](const Eigen::MatrixXd& x) { return r->predict(x); }, epsilon};
}

OutcomeRule OutcomeRule::from(RegressorPtr mu0, RegressorPtr mu1) {
    OutcomeRule o;
    o.mu[0] = [mu0](const Eigen::MatrixXd& x) { return mu0->predict(x); };
    o.mu[1] = [mu1](const Eigen::MatrixXd& x) { return mu1->predict(x); };
    return o;
}

PropensityRule fit_propensity(const Eigen::MatrixXd& x, std::span<const int> a, Learner method, double epsilon,
                              const LearnerOptions& opts) {
    const auto av = to_vector(a);
    const double abar = av.mean();
    if (abar <= 0.0 || abar >= 1.0) throw FitError("propensity: both treatment arms must be present");
    return PropensityRule::from(fit_regressor(method, x, av, opts), epsilon);
}

PropensityRule fit_propensity(const Dataset& train, Learner method, double epsilon, const LearnerOptions& opts) {
    return fit_propensity(train.covariates(), train.treatment(), method, epsilon, opts);
}

RegressorPtr fit_outcome(const Eigen::MatrixXd& x, std::span<const int> a, std::span<const double> y, int arm,
                         Learner method, const LearnerOptions& opts) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] == arm) rows.push_back(static_cast<Eigen::Index>(i));
    if (rows.empty()) throw FitError("outcome regression: arm " + std::to_string(arm) + " is empty");
    Eigen::MatrixXd xa = x(rows, Eigen::placeholders::all);
    Eigen::VectorXd ya(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) ya(static_cast<Eigen::Index>(k)) = y[static_cast<std::size_t>(rows[k])];
    return fit_regressor(method == Learner::logistic ? Learner::linear : method, xa, ya, opts);
}

RegressorPtr fit_outcome(const Dataset& train, int arm, Learner method, const LearnerOptions& opts) {
    return fit_outcome(train.covariates(), train.treatment(), train.outcome(), arm, method, opts);
}

Eigen::MatrixXd LogisticProjection::scores(const Eigen::MatrixXd& x, std::span<const int> a) const {
    const Eigen::MatrixXd xt = basis_expand(x, Learner::linear);
    const Eigen::VectorXd eta = xt * beta;
    Eigen::MatrixXd s(xt.rows(), xt.cols());
    for (Eigen::Index i = 0; i < xt.rows(); ++i)
        s.row(i) = (a[static_cast<std::size_t>(i)] - logistic(eta(i))) * xt.row(i);
    return s;
}

LogisticProjection fit_logistic_projection(const Eigen::MatrixXd& unit_x, std::span<const int> a,
                                           const LearnerOptions& opts) {
    if (unit_x.cols() < 1) throw ValidationError("logistic projection needs at least one covariate");
    constexpr double slack = 1e-9;
    if (unit_x.size() > 0 && (unit_x.minCoeff() < -slack || unit_x.maxCoeff() > 1.0 + slack))
        throw ValidationError("logistic projection expects covariates rescaled to the unit cube");
    const auto fit = fit_logistic(unit_x, to_vector(a), opts);
    if (!fit.converged)
        throw FitError("logistic projection did not converge (gradient norm " + std::to_string(fit.grad_norm) +
                       "); the covariates may separate the arms or lie on a lower-dimensional affine subspace");
    LogisticProjection p;
    p.beta = fit.beta;
    p.fisher_info = fit.fisher_info;
    p.grad_norm = fit.grad_norm;
    p.iterations = fit.iterations;
    p.converged = fit.converged;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(p.fisher_info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-12)
        throw NumericalError("logistic projection: Fisher information is singular; the covariates may lie on a "
                             "lower-dimensional affine subspace");
    p.fisher_inverse = ldlt.solve(Eigen::MatrixXd::Identity(p.fisher_info.rows(), p.fisher_info.cols()));

    const Eigen::VectorXd slopes = p.beta.tail(p.beta.size() - 1).cwiseAbs();
    // Strict comparison keeps the smallest index on exact ties.
    double best = -1.0, second = -1.0;
    for (Eigen::Index j = 0; j < slopes.size(); ++j) {
        if (slopes(j) > best) {
            second = best;
            best = slopes(j);
            p.argmax = static_cast<std::size_t>(j);
        } else if (slopes(j) > second) {
            second = slopes(j);
        }
    }
    p.runner_up_gap = second < 0 ? best : best - second;
    return p;
}

LogisticProjection fit_logistic_projection(const Dataset& unit_train, const LearnerOptions& opts) {
    return fit_logistic_projection(unit_train.covariates(), unit_train.treatment(), opts);
}

RegressorPtr fit_pseudo_outcome(const Eigen::MatrixXd& x_full, const Eigen::MatrixXd& x_sub, std::span<const int> a,
                                const OutcomeRule& mu, int arm, Learner method, const LearnerOptions& opts) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] == 1 - arm) rows.push_back(static_cast<Eigen::Index>(i));
    if (rows.empty()) throw FitError("pseudo-outcome regression: arm " + std::to_string(1 - arm) + " is empty");
    const Eigen::MatrixXd xf = x_full(rows, Eigen::placeholders::all);
    const Eigen::MatrixXd xs = x_sub(rows, Eigen::placeholders::all);
    const Eigen::VectorXd pseudo = mu.predict(arm, xf);
    return fit_regressor(method == Learner::logistic ? Learner::linear : method, xs, pseudo, opts);
}

}  // namespace calsens
