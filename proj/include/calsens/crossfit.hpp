#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

#include "calsens/data.hpp"
#include "calsens/nuisance.hpp"
#include "calsens/theta.hpp"

namespace calsens {

struct NuisanceConfig {
    Learner propensity = Learner::logistic;
    Learner outcome = Learner::linear;
    Learner pseudo = Learner::linear;
    double epsilon = 0.01;
    LearnerOptions learner;
    ThetaOptions theta;
};

// Where the nuisance rules come from. `cols` are view-column indices of the
// dataset (possibly empty); `train` are the rows the rules may learn from.
class NuisanceFactory {
public:
    virtual ~NuisanceFactory() = default;
    virtual PropensityRule propensity(const Dataset& data, std::span<const std::size_t> train,
                                      const std::vector<std::size_t>& cols) const = 0;
    virtual RegressorPtr outcome(const Dataset& data, std::span<const std::size_t> train,
                                 const std::vector<std::size_t>& cols, int arm) const = 0;
    virtual OutcomeRule outcomes(const Dataset& data, std::span<const std::size_t> train,
                                 const std::vector<std::size_t>& cols) const;
    // E{mu_arm(X_full) | A = 1-arm, X_sub}; the default fits the configured
    // pseudo-outcome learner on the training rows.
    virtual RegressorPtr pseudo(const Dataset& data, std::span<const std::size_t> train,
                                const std::vector<std::size_t>& full, const std::vector<std::size_t>& sub,
                                const OutcomeRule& mu_full, int arm) const;
    virtual const NuisanceConfig& config() const = 0;
};

class LearnerFactory final : public NuisanceFactory {
public:
    explicit LearnerFactory(NuisanceConfig cfg = {}) : cfg_(std::move(cfg)) {}
    PropensityRule propensity(const Dataset& data, std::span<const std::size_t> train,
                              const std::vector<std::size_t>& cols) const override;
    RegressorPtr outcome(const Dataset& data, std::span<const std::size_t> train,
                         const std::vector<std::size_t>& cols, int arm) const override;
    const NuisanceConfig& config() const override { return cfg_; }

private:
    NuisanceConfig cfg_;
};

// Known nuisance functions (simulation verification mode). The callbacks see
// the subset's covariate matrix and the view-column indices it came from.
class AnalyticFactory final : public NuisanceFactory {
public:
    using Pi = std::function<Eigen::VectorXd(const Eigen::MatrixXd&, const std::vector<std::size_t>&)>;
    using Mu = std::function<Eigen::VectorXd(const Eigen::MatrixXd&, const std::vector<std::size_t>&, int)>;
    AnalyticFactory(Pi pi1, Mu mu, NuisanceConfig cfg = {}, Mu pseudo = {})
        : pi1_(std::move(pi1)), mu_(std::move(mu)), pseudo_(std::move(pseudo)), cfg_(std::move(cfg)) {}
    PropensityRule propensity(const Dataset& data, std::span<const std::size_t> train,
                              const std::vector<std::size_t>& cols) const override;
    RegressorPtr outcome(const Dataset& data, std::span<const std::size_t> train,
                         const std::vector<std::size_t>& cols, int arm) const override;
    RegressorPtr pseudo(const Dataset& data, std::span<const std::size_t> train, const std::vector<std::size_t>& full,
                        const std::vector<std::size_t>& sub, const OutcomeRule& mu_full, int arm) const override;
    const NuisanceConfig& config() const override { return cfg_; }

private:
    Pi pi1_;
    Mu mu_;
    Mu pseudo_;  // given the subset columns; empty: fit like LearnerFactory
    NuisanceConfig cfg_;
};

std::vector<int> gather(std::span<const int> v, std::span<const std::size_t> rows);
std::vector<double> gather(std::span<const double> v, std::span<const std::size_t> rows);

std::vector<std::size_t> all_columns(const Dataset& data);
std::vector<std::size_t> complement(const Dataset& data, const std::vector<std::size_t>& excluded);

struct AipwFit {
    double estimate = 0.0;
    Eigen::VectorXd phi;  // uncentered, one value per observation
};

// Cross-fitted adjusted mean difference on covariate columns `cols`:
// nuisances fitted off-fold, phi evaluated on-fold, pooled mean over all rows.
AipwFit crossfit_aipw(const Dataset& data, const FoldAssignment& folds, const std::vector<std::size_t>& cols,
                      const NuisanceFactory& factory);

double centered_se(const Eigen::VectorXd& phi);

}  // namespace calsens
