#include <cmath>

#include "calsens/eif.hpp"
#include "calsens/error.hpp"
#include "calsens/models.hpp"

namespace calsens {

ModelFit estimate_outcome_model(const Dataset& data, const FoldAssignment& folds, const ModelOptions& opts) {
    const auto factory = opts.factory ? opts.factory : std::make_shared<LearnerFactory>(opts.nuisance);
    std::vector<std::vector<std::size_t>> family = opts.family;
    std::vector<std::string> labels;
    if (family.empty()) {
        for (const auto& g : data.covariate_groups()) {
            family.push_back(g.columns);
            labels.push_back(g.label);
        }
    } else {
        const auto names = data.names();
        for (auto& s : family) {
            s = SubsetSpec::of(s).excluded;
            std::string label;
            for (auto c : s) {
                if (c >= data.d()) throw ValidationError("outcome model: leave-out set references a missing column");
                label += (label.empty() ? "" : "+") + names[c];
            }
            labels.push_back(label.empty() ? "{}" : label);
        }
    }
    for (std::size_t i = 0; i < family.size(); ++i)
        for (std::size_t j = i + 1; j < family.size(); ++j)
            if (family[i] == family[j]) throw ValidationError("outcome model: leave-out sets must be distinct");

    const auto n = static_cast<Eigen::Index>(data.n());
    const auto full = all_columns(data);
    Eigen::VectorXd phi(n);
    Eigen::VectorXd xi[2] = {Eigen::VectorXd(n), Eigen::VectorXd(n)};  // xi_arm of ||pi_arm||^2
    std::vector<std::array<Eigen::VectorXd, 2>> lam(family.size(), {Eigen::VectorXd(n), Eigen::VectorXd(n)});

    auto scatter = [](Eigen::VectorXd& dst, const std::vector<std::size_t>& rows, const Eigen::VectorXd& src) {
        for (std::size_t m = 0; m < rows.size(); ++m) dst(static_cast<Eigen::Index>(rows[m])) = src(static_cast<Eigen::Index>(m));
    };
    for (int k = 0; k < folds.k; ++k) {
        const auto train = folds.rows_not_in(k);
        const auto test = folds.rows_in(k);
        const auto a = gather(data.treatment(), test);
        const auto y = gather(data.outcome(), test);
        const Eigen::MatrixXd xf = data.design(test, &full);
        const auto pi = factory->propensity(data, train, full);
        const auto mu = factory->outcomes(data, train, full);
        const Eigen::VectorXd p1 = pi.pi1(xf);
        const Eigen::VectorXd p0 = (1.0 - p1.array()).matrix();
        const Eigen::VectorXd mu_full[2] = {mu.predict(0, xf), mu.predict(1, xf)};
        scatter(phi, test, eif::phi_amd(a, y, p1, mu_full[1], mu_full[0]));
        scatter(xi[1], test, eif::xi(a, p1, 1));
        scatter(xi[0], test, eif::xi(a, p0, 0));

        for (std::size_t s = 0; s < family.size(); ++s) {
            const auto sub = complement(data, family[s]);
            const Eigen::MatrixXd xs = data.design(test, &sub);
            const auto pi_s = factory->propensity(data, train, sub);
            const auto mu_s = factory->outcomes(data, train, sub);
            const Eigen::VectorXd ps1 = pi_s.pi1(xs);
            for (int arm = 0; arm < 2; ++arm) {
                const auto pseudo = factory->pseudo(data, train, full, sub, mu, arm);
                const Eigen::VectorXd g = pseudo->predict(xs);
                const Eigen::VectorXd ms = mu_s.predict(arm, xs);
                Eigen::VectorXd out(static_cast<Eigen::Index>(test.size()));
                for (Eigen::Index i = 0; i < out.size(); ++i) {
                    const double pa_full = arm == 1 ? p1(i) : p0(i);
                    const double pa_sub = arm == 1 ? ps1(i) : 1.0 - ps1(i);
                    eif::LambdaInputs v{ms(i), g(i), mu_full[arm](i), pa_sub, pa_full, 1.0 - pa_sub, 1.0 - pa_full};
                    out(i) = eif::lambda(a[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(i)], arm, v);
                }
                scatter(lam[s][static_cast<std::size_t>(arm)], test, out);
            }
        }
    }

    ModelFit fit;
    fit.model = ModelKind::outcome;
    fit.n = data.n();
    fit.psi = phi.mean();
    fit.phi_psi = phi;
    auto& mc = fit.confounding;
    mc.model = ModelKind::outcome;

    double norm[2], m_arm[2];
    Eigen::VectorXd lam_bar[2] = {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    for (int arm = 0; arm < 2; ++arm) {
        double ss = xi[1 - arm].mean();
        if (ss < 0) {
            fit.warnings.push_back("negative plug-in estimate of ||pi_" + std::to_string(1 - arm) +
                                   "||^2 clamped to 0");
            ss = 0;
        }
        norm[arm] = std::sqrt(ss);
        double lsum = 0.0;
        for (std::size_t s = 0; s < family.size(); ++s) {
            const auto& l = lam[s][static_cast<std::size_t>(arm)];
            double lm = l.mean();
            Component c;
            c.label = labels[s];
            c.excluded = family[s];
            c.arm = arm;
            c.estimate = lm;
            if (lm < 0) {
                fit.warnings.push_back("negative plug-in estimate of the arm-" + std::to_string(arm) + " norm for '" +
                                       labels[s] + "' clamped to 0");
                lm = 0;
            }
            c.magnitude = lm;
            c.influence = l;
            c.se = centered_se(l);
            mc.components.push_back(std::move(c));
            lsum += lm;
            lam_bar[arm] += l;
        }
        lam_bar[arm] /= static_cast<double>(family.size());
        m_arm[arm] = std::sqrt(lsum / static_cast<double>(family.size()));
    }
    if (!(m_arm[0] > opts.degenerate_tol) || !(m_arm[1] > opts.degenerate_tol) || !(norm[0] > 0) || !(norm[1] > 0))
        throw DegenerateError("measured confounding is zero in at least one arm: every outcome regression is "
                              "unchanged by the leave-out sets");
    mc.per_arm = {m_arm[0], m_arm[1]};
    mc.arm_norms = {norm[0], norm[1]};
    mc.value = norm[0] * m_arm[0] + norm[1] * m_arm[1];
    {
        double best = -1.0, second = -1.0;
        for (std::size_t j = 0; j < mc.components.size(); ++j) {
            const double v = mc.components[j].magnitude;
            if (v > best) {
                second = best;
                best = v;
                mc.maximizer = j;
            } else if (v > second) {
                second = v;
            }
        }
        mc.maximizer_label = mc.components[mc.maximizer].label;
        mc.runner_up_gap = second < 0 ? best : best - second;
    }

    // Influence of sum_a ||pi_{1-a}|| M_a, and of its ||pi|| part alone.
    Eigen::VectorXd if_m = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd if_norm[2];
    for (int arm = 0; arm < 2; ++arm) {
        if_norm[arm] = xi[1 - arm] / (2.0 * norm[arm]);
        if_m += norm[arm] * lam_bar[arm] / (2.0 * m_arm[arm]) + m_arm[arm] * if_norm[arm];
    }
    mc.influence = if_m;

    const double psi = fit.psi, m_hat = mc.value;
    const double n0 = norm[0], n1 = norm[1], ma0 = m_arm[0], ma1 = m_arm[1];
    const Eigen::VectorXd ifn0 = if_norm[0], ifn1 = if_norm[1];
    fit.at = [phi, if_m, ifn0, ifn1, psi, m_hat, ma0, ma1, n0, n1](double gamma) {
        BoundPoint p;
        p.gamma = gamma;
        p.upper = psi + gamma * m_hat;
        p.lower = psi - gamma * m_hat;
        p.phi_upper = phi + gamma * if_m;
        p.phi_lower = phi - gamma * if_m;
        const double g0 = gamma * ma0, g1 = gamma * ma1;
        p.ph_upper = psi + (g0 * n0 + g1 * n1);
        p.ph_lower = psi - (g0 * n0 + g1 * n1);
        const Eigen::VectorXd ph = g0 * ifn0 + g1 * ifn1;
        p.ph_phi_upper = phi + ph;
        p.ph_phi_lower = phi - ph;
        p.dU_dM = gamma;
        p.dL_dM = -gamma;
        return p;
    };
    fit.sensitivity = [psi, n0, n1](const std::vector<double>& g) {
        if (g.size() != 2) throw ConfigError("outcome model sensitivity needs one parameter per arm");
        const double w = g[0] * n0 + g[1] * n1;
        return std::make_pair(psi - w, psi + w);
    };
    return fit;
}

}  // namespace calsens
