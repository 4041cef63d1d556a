#include "calsens/crossfit.hpp"

#include <cmath>
#include <numeric>

#include "calsens/eif.hpp"
#include "calsens/error.hpp"
#include "calsens/stats.hpp"

namespace calsens {

std::vector<int> gather(std::span<const int> v, std::span<const std::size_t> rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(v[r]);
    return out;
}

std::vector<double> gather(std::span<const double> v, std::span<const std::size_t> rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(v[r]);
    return out;
}

namespace {

class FnRegressor final : public Regressor {
public:
    explicit FnRegressor(VectorFn f) : f_(std::move(f)) {}
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override { return f_(x); }

private:
    VectorFn f_;
};

}  // namespace

OutcomeRule NuisanceFactory::outcomes(const Dataset& data, std::span<const std::size_t> train,
                                      const std::vector<std::size_t>& cols) const {
    return OutcomeRule::from(outcome(data, train, cols, 0), outcome(data, train, cols, 1));
}

RegressorPtr NuisanceFactory::pseudo(const Dataset& data, std::span<const std::size_t> train,
                                    const std::vector<std::size_t>& full, const std::vector<std::size_t>& sub,
                                    const OutcomeRule& mu_full, int arm) const {
    const auto a = gather(data.treatment(), train);
    return fit_pseudo_outcome(data.design(train, &full), data.design(train, &sub), a, mu_full, arm,
                              config().pseudo, config().learner);
}

PropensityRule LearnerFactory::propensity(const Dataset& data, std::span<const std::size_t> train,
                                          const std::vector<std::size_t>& cols) const {
    const auto a = gather(data.treatment(), train);
    return fit_propensity(data.design(train, &cols), a, cfg_.propensity, cfg_.epsilon, cfg_.learner);
}

RegressorPtr LearnerFactory::outcome(const Dataset& data, std::span<const std::size_t> train,
                                     const std::vector<std::size_t>& cols, int arm) const {
    const auto a = gather(data.treatment(), train);
    const auto y = gather(data.outcome(), train);
    return fit_outcome(data.design(train, &cols), a, y, arm, cfg_.outcome, cfg_.learner);
}

PropensityRule AnalyticFactory::propensity(const Dataset&, std::span<const std::size_t>,
                                           const std::vector<std::size_t>& cols) const {
    auto pi1 = pi1_;
    return PropensityRule{[pi1, cols](const Eigen::MatrixXd& x) { return pi1(x, cols); }, cfg_.epsilon};
}

RegressorPtr AnalyticFactory::outcome(const Dataset&, std::span<const std::size_t>,
                                      const std::vector<std::size_t>& cols, int arm) const {
    auto mu = mu_;
    return std::make_shared<FnRegressor>([mu, cols, arm](const Eigen::MatrixXd& x) { return mu(x, cols, arm); });
}

RegressorPtr AnalyticFactory::pseudo(const Dataset& data, std::span<const std::size_t> train,
                                     const std::vector<std::size_t>& full, const std::vector<std::size_t>& sub,
                                     const OutcomeRule& mu_full, int arm) const {
    if (!pseudo_) return NuisanceFactory::pseudo(data, train, full, sub, mu_full, arm);
    auto f = pseudo_;
    return std::make_shared<FnRegressor>([f, sub, arm](const Eigen::MatrixXd& x) { return f(x, sub, arm); });
}

std::vector<std::size_t> all_columns(const Dataset& data) {
    std::vector<std::size_t> c(data.d());
    std::iota(c.begin(), c.end(), std::size_t{0});
    return c;
}

std::vector<std::size_t> complement(const Dataset& data, const std::vector<std::size_t>& excluded) {
    std::vector<bool> drop(data.d(), false);
    for (auto c : excluded) {
        if (c >= data.d()) throw ValidationError("column index out of range");
        drop[c] = true;
    }
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < data.d(); ++j)
        if (!drop[j]) out.push_back(j);
    return out;
}

AipwFit crossfit_aipw(const Dataset& data, const FoldAssignment& folds, const std::vector<std::size_t>& cols,
                      const NuisanceFactory& factory) {
    if (folds.fold_of.size() != data.n()) throw ValidationError("fold assignment does not match the dataset");
    AipwFit fit;
    fit.phi.resize(static_cast<Eigen::Index>(data.n()));
    for (int k = 0; k < folds.k; ++k) {
        const auto train = folds.rows_not_in(k);
        const auto test = folds.rows_in(k);
        const auto pi = factory.propensity(data, train, cols);
        const auto mu = factory.outcomes(data, train, cols);
        const Eigen::MatrixXd xt = data.design(test, &cols);
        const auto a = gather(data.treatment(), test);
        const auto y = gather(data.outcome(), test);
        const Eigen::VectorXd phi = eif::phi_amd(a, y, pi.pi1(xt), mu.predict(1, xt), mu.predict(0, xt));
        for (std::size_t m = 0; m < test.size(); ++m) fit.phi(static_cast<Eigen::Index>(test[m])) = phi(static_cast<Eigen::Index>(m));
    }
    fit.estimate = fit.phi.mean();
    return fit;
}

double centered_se(const Eigen::VectorXd& phi) {
    if (phi.size() == 0) return 0.0;
    const double v = stats::variance(std::span<const double>(phi.data(), static_cast<std::size_t>(phi.size())));
    return std::sqrt(v / static_cast<double>(phi.size()));
}

}  // namespace calsens
