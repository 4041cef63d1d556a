#include <cmath>
#include <map>
#include <mutex>

#include "calsens/eif.hpp"
#include "calsens/error.hpp"
#include "calsens/models.hpp"

namespace calsens {
namespace {

bool in_unit_cube(const Dataset& data) {
    const Eigen::MatrixXd x = data.covariates();
    return x.minCoeff() >= 0.0 && x.maxCoeff() <= 1.0;
}

struct FoldArms {
    std::vector<std::size_t> test;
    Eigen::MatrixXd x_test;
    Eigen::MatrixXd x_arm[2];
    Eigen::VectorXd y_arm[2];
};

struct OddsState {
    Dataset data;
    std::vector<FoldArms> folds;
    Eigen::VectorXd pi1;  // cross-fitted
    ThetaOptions theta;
    std::mutex mu;
    std::map<double, std::shared_ptr<const OddsEval>> cache;

    explicit OddsState(Dataset d) : data(std::move(d)) {}

    std::shared_ptr<const OddsEval> eval(double logt) {
        {
            std::lock_guard<std::mutex> lock(mu);
            auto it = cache.find(logt);
            if (it != cache.end()) return it->second;
        }
        const double t = std::exp(logt);
        const auto n = static_cast<Eigen::Index>(data.n());
        eif::OddsValues v;
        v.t = t;
        v.pi1 = pi1;
        for (auto* vec : {&v.theta1_plus, &v.theta1_minus, &v.theta0_plus, &v.theta0_minus, &v.nu1_plus, &v.nu1_minus,
                          &v.nu0_plus, &v.nu0_minus, &v.ftilde1_plus, &v.f1_minus, &v.f0_minus, &v.ftilde0_plus})
            vec->resize(n);
        auto scatter = [](Eigen::VectorXd& dst, const std::vector<std::size_t>& rows, const Eigen::VectorXd& src) {
            for (std::size_t m = 0; m < rows.size(); ++m) dst(static_cast<Eigen::Index>(rows[m])) = src(static_cast<Eigen::Index>(m));
        };
        for (const auto& f : folds) {
            const auto r1p = fit_theta(f.x_arm[1], f.y_arm[1], 1, t, ThetaSide::plus, theta);
            const auto r1m = fit_theta(f.x_arm[1], f.y_arm[1], 1, t, ThetaSide::minus, theta);
            const auto r0p = fit_theta(f.x_arm[0], f.y_arm[0], 0, t, ThetaSide::plus, theta);
            const auto r0m = fit_theta(f.x_arm[0], f.y_arm[0], 0, t, ThetaSide::minus, theta);
            const auto& x = f.x_test;
            scatter(v.theta1_plus, f.test, r1p.predict(x));
            scatter(v.theta1_minus, f.test, r1m.predict(x));
            scatter(v.theta0_plus, f.test, r0p.predict(x));
            scatter(v.theta0_minus, f.test, r0m.predict(x));
            scatter(v.nu1_plus, f.test, r1p.nu(x));
            scatter(v.nu1_minus, f.test, r1m.nu(x));
            scatter(v.nu0_plus, f.test, r0p.nu(x));
            scatter(v.nu0_minus, f.test, r0m.nu(x));
            scatter(v.ftilde1_plus, f.test, r1p.ftilde(x));
            scatter(v.f1_minus, f.test, r1m.f(x));
            scatter(v.f0_minus, f.test, r0m.f(x));
            scatter(v.ftilde0_plus, f.test, r0p.ftilde(x));
        }
        auto e = std::make_shared<OddsEval>();
        e->phi_upper = eif::varphi_odds(data.treatment(), data.outcome(), v, eif::Side::upper);
        e->phi_lower = eif::varphi_odds(data.treatment(), data.outcome(), v, eif::Side::lower);
        e->upper = e->phi_upper.mean();
        e->lower = e->phi_lower.mean();
        e->dupper_dlogt = eif::dbound_dM_terms(v, 1.0, eif::Side::upper);
        e->dlower_dlogt = eif::dbound_dM_terms(v, 1.0, eif::Side::lower);
        std::lock_guard<std::mutex> lock(mu);
        return cache.emplace(logt, std::move(e)).first->second;
    }
};

}  // namespace

ModelFit estimate_odds_ratio(const Dataset& data, const FoldAssignment& folds, const ModelOptions& opts) {
    const auto factory = opts.factory ? opts.factory : std::make_shared<LearnerFactory>(opts.nuisance);
    const Dataset unit = in_unit_cube(data) ? data : minmax_rescale(data).data;
    const auto proj = fit_logistic_projection(unit, factory->config().learner);

    ModelFit fit;
    fit.model = ModelKind::odds;
    fit.n = data.n();
    auto& mc = fit.confounding;
    mc.model = ModelKind::odds;
    mc.value = proj.m_hat();
    mc.maximizer = proj.argmax;
    mc.maximizer_label = unit.names()[proj.argmax];
    mc.runner_up_gap = proj.runner_up_gap;
    mc.influence = eif::phi_M_odds(unit.covariates(), unit.treatment(), proj);
    {
        const auto names = unit.names();
        const Eigen::MatrixXd x = unit.covariates();
        const Eigen::VectorXd se = (proj.fisher_inverse.diagonal() / static_cast<double>(data.n())).cwiseSqrt();
        const Eigen::MatrixXd scores = proj.scores(x, unit.treatment());
        for (std::size_t j = 0; j < names.size(); ++j) {
            Component c;
            const auto idx = static_cast<Eigen::Index>(j) + 1;
            c.label = names[j];
            c.excluded = {j};
            c.estimate = proj.beta(idx);
            c.magnitude = std::abs(c.estimate);
            c.se = se(idx);
            c.influence = scores * proj.fisher_inverse.row(idx).transpose();
            mc.components.push_back(std::move(c));
        }
    }
    if (!(mc.value > opts.degenerate_tol))
        throw DegenerateError("measured confounding is zero: every logistic slope vanishes");

    const auto aipw = crossfit_aipw(unit, folds, all_columns(unit), *factory);
    fit.psi = aipw.estimate;
    fit.phi_psi = aipw.phi;

    auto state = std::make_shared<OddsState>(unit);
    state->theta = factory->config().theta;
    state->pi1.resize(static_cast<Eigen::Index>(data.n()));
    const auto cols = all_columns(unit);
    for (int k = 0; k < folds.k; ++k) {
        const auto train = folds.rows_not_in(k);
        FoldArms f;
        f.test = folds.rows_in(k);
        f.x_test = unit.design(f.test, &cols);
        const auto pi = factory->propensity(unit, train, cols);
        const Eigen::VectorXd p = pi.pi1(f.x_test);
        for (std::size_t m = 0; m < f.test.size(); ++m) state->pi1(static_cast<Eigen::Index>(f.test[m])) = p(static_cast<Eigen::Index>(m));
        for (int arm = 0; arm < 2; ++arm) {
            std::vector<std::size_t> rows;
            for (auto r : train)
                if (unit.a(r) == arm) rows.push_back(r);
            if (rows.empty()) throw FitError("odds model: a training fold has no rows in arm " + std::to_string(arm));
            f.x_arm[arm] = unit.design(rows, &cols);
            f.y_arm[arm] = to_vector(std::span<const double>(gather(unit.outcome(), rows)));
        }
        state->folds.push_back(std::move(f));
    }

    const double m_hat = mc.value;
    const Eigen::VectorXd phi_m = mc.influence;
    fit.odds_eval = [state](double logt) { return *state->eval(logt); };
    fit.at = [state, m_hat, phi_m](double gamma) {
        const auto e = state->eval(gamma * m_hat);
        BoundPoint p;
        p.gamma = gamma;
        p.upper = e->upper;
        p.lower = e->lower;
        p.dU_dM = gamma * e->dupper_dlogt.mean();
        p.dL_dM = gamma * e->dlower_dlogt.mean();
        constexpr double floor = 1e-12;
        if (gamma > 0 && !(p.dU_dM > 0)) {
            p.dU_dM = floor;
            p.derivative_clamped = true;
        }
        if (gamma > 0 && !(p.dL_dM < 0)) {
            p.dL_dM = -floor;
            p.derivative_clamped = true;
        }
        p.phi_upper = e->phi_upper + p.dU_dM * phi_m;
        p.phi_lower = e->phi_lower + p.dL_dM * phi_m;
        p.ph_upper = e->upper;
        p.ph_lower = e->lower;
        p.ph_phi_upper = e->phi_upper;
        p.ph_phi_lower = e->phi_lower;
        return p;
    };
    fit.sensitivity = [state](const std::vector<double>& g) {
        const auto e = state->eval(g.at(0));
        return std::make_pair(e->lower, e->upper);
    };
    return fit;
}

std::pair<double, double> derivative_dU_dM(const ModelFit& odds_fit, double gamma) {
    if (odds_fit.model != ModelKind::odds) throw ConfigError("derivative_dU_dM applies to the odds model");
    const auto p = odds_fit.at(gamma);
    return {p.dU_dM, p.dL_dM};
}

}  // namespace calsens
