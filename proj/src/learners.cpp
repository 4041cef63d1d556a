#include "calsens/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "calsens/error.hpp"
#include "calsens/kernels.hpp"

namespace calsens {

Learner parse_learner(const std::string& name) {
    if (name == "constant") return Learner::constant;
    if (name == "linear") return Learner::linear;
    if (name == "poly2") return Learner::poly2;
    if (name == "knn") return Learner::knn;
    if (name == "nadaraya-watson" || name == "nw") return Learner::nadaraya_watson;
    if (name == "logistic") return Learner::logistic;
    throw ConfigError("unknown learner '" + name + "' (constant, linear, poly2, knn, nadaraya-watson, logistic)");
}

std::string learner_name(Learner l) {
    switch (l) {
        case Learner::constant: return "constant";
        case Learner::linear: return "linear";
        case Learner::poly2: return "poly2";
        case Learner::knn: return "knn";
        case Learner::nadaraya_watson: return "nadaraya-watson";
        case Learner::logistic: return "logistic";
    }
    return "?";
}

double logistic(double eta) {
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

Eigen::MatrixXd basis_expand(const Eigen::MatrixXd& x, Learner sieve) {
    const auto n = x.rows();
    const auto d = x.cols();
    if (sieve == Learner::constant) return Eigen::MatrixXd::Ones(n, 1);
    Eigen::Index p = 1 + d;
    if (sieve == Learner::poly2) p += d * (d + 1) / 2;
    Eigen::MatrixXd out(n, p);
    out.col(0).setOnes();
    out.middleCols(1, d) = x;
    if (sieve == Learner::poly2) {
        Eigen::Index c = 1 + d;
        for (Eigen::Index j = 0; j < d; ++j)
            for (Eigen::Index k = j; k < d; ++k) out.col(c++) = x.col(j).cwiseProduct(x.col(k));
    }
    return out;
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
    return design.colPivHouseholderQr().solve(y);
}

Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& w) {
    const Eigen::VectorXd sw = w.cwiseSqrt();
    return (sw.asDiagonal() * design).colPivHouseholderQr().solve(sw.cwiseProduct(y));
}

namespace {

double mean_loglik(const Eigen::VectorXd& eta, const Eigen::VectorXd& a) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        // log(1 + e^eta) computed stably
        const double e = eta(i);
        const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        s += a(i) * e - softplus;
    }
    return s / static_cast<double>(eta.size());
}

class ConstantRegressor final : public Regressor {
public:
    explicit ConstantRegressor(double c) : c_(c) {}
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
        return Eigen::VectorXd::Constant(x.rows(), c_);
    }

private:
    double c_;
};

class BasisRegressor final : public Regressor {
public:
    BasisRegressor(Learner sieve, Eigen::VectorXd coef) : sieve_(sieve), coef_(std::move(coef)) {}
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override { return basis_expand(x, sieve_) * coef_; }

private:
    Learner sieve_;
    Eigen::VectorXd coef_;
};

class LogisticRegressor final : public Regressor {
public:
    explicit LogisticRegressor(Eigen::VectorXd beta) : beta_(std::move(beta)) {}
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
        Eigen::VectorXd eta = basis_expand(x, Learner::linear) * beta_;
        return eta.unaryExpr([](double e) { return logistic(e); });
    }

private:
    Eigen::VectorXd beta_;
};

// Column standardisation shared by the distance-based learners.
struct Scaling {
    Eigen::RowVectorXd center;
    Eigen::RowVectorXd scale;

    static Scaling from(const Eigen::MatrixXd& x) {
        Scaling s;
        s.center = x.colwise().mean();
        s.scale.resize(x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double sd = std::sqrt((x.col(j).array() - s.center(j)).square().mean());
            s.scale(j) = sd > 0 ? sd : 1.0;
        }
        return s;
    }
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        return (x.rowwise() - center).array().rowwise() / scale.array();
    }
};

// Squared distances from query q to every training row (training stored column-major).
void sq_distances(const Eigen::MatrixXd& train, const double* q, std::vector<double>& out) {
    const auto n = static_cast<std::size_t>(train.rows());
    out.assign(n, 0.0);
    const auto& k = kernels::active();
    for (Eigen::Index j = 0; j < train.cols(); ++j) k.add_sq_diff(train.col(j).data(), n, q[j], out.data());
}

class KnnRegressor final : public Regressor {
public:
    KnnRegressor(const Eigen::MatrixXd& x, Eigen::VectorXd y, int k)
        : scaling_(Scaling::from(x)), train_(scaling_.apply(x)), y_(std::move(y)), k_(k) {}

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
        const Eigen::MatrixXd q = scaling_.apply(x);
        Eigen::VectorXd out(q.rows());
        std::vector<double> dist;
        std::vector<std::size_t> idx(static_cast<std::size_t>(train_.rows()));
        Eigen::RowVectorXd row(q.cols());
        const auto k = static_cast<std::size_t>(k_);
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
            row = q.row(i);
            sq_distances(train_, row.data(), dist);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            auto less = [&](std::size_t l, std::size_t r) { return dist[l] < dist[r] || (dist[l] == dist[r] && l < r); };
            std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1), idx.end(), less);
            double s = 0.0;
            for (std::size_t m = 0; m < k; ++m) s += y_(static_cast<Eigen::Index>(idx[m]));
            out(i) = s / static_cast<double>(k);
        }
        return out;
    }

private:
    Scaling scaling_;
    Eigen::MatrixXd train_;
    Eigen::VectorXd y_;
    int k_;
};

class NadarayaWatson final : public Regressor {
public:
    NadarayaWatson(Scaling scaling, Eigen::MatrixXd train, Eigen::VectorXd y, double h)
        : scaling_(std::move(scaling)), train_(std::move(train)), y_(std::move(y)), h_(h) {}

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
        const Eigen::MatrixXd q = scaling_.apply(x);
        Eigen::VectorXd out(q.rows());
        std::vector<double> dist;
        Eigen::RowVectorXd row(q.cols());
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
            row = q.row(i);
            sq_distances(train_, row.data(), dist);
            out(i) = smooth(dist, y_, h_, std::numeric_limits<std::size_t>::max());
        }
        return out;
    }

    // Kernel-weighted mean; weights are shifted by the nearest distance so a
    // query far from all data degrades to nearest-neighbour instead of 0/0.
    static double smooth(const std::vector<double>& dist, const Eigen::VectorXd& y, double h, std::size_t skip) {
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < dist.size(); ++m)
            if (m != skip) dmin = std::min(dmin, dist[m]);
        const double inv = 1.0 / (2.0 * h * h);
        double sw = 0.0, swy = 0.0;
        for (std::size_t m = 0; m < dist.size(); ++m) {
            if (m == skip) continue;
            const double w = std::exp(-(dist[m] - dmin) * inv);
            sw += w;
            swy += w * y(static_cast<Eigen::Index>(m));
        }
        return swy / sw;
    }

private:
    Scaling scaling_;
    Eigen::MatrixXd train_;
    Eigen::VectorXd y_;
    double h_;
};

RegressorPtr fit_nadaraya_watson(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LearnerOptions& opts) {
    auto scaling = Scaling::from(x);
    Eigen::MatrixXd train = scaling.apply(x);
    const auto n = static_cast<std::size_t>(train.rows());
    const double d = static_cast<double>(train.cols());
    const double h_ref = std::pow(4.0 / (d + 2.0), 1.0 / (d + 4.0)) * std::pow(static_cast<double>(n), -1.0 / (d + 4.0));

    // LOO-CV on at most 2000 rows keeps selection quadratic cost bounded.
    const std::size_t m = std::min<std::size_t>(n, 2000);
    std::vector<std::vector<double>> dists(m);
    Eigen::RowVectorXd row(train.cols());
    for (std::size_t i = 0; i < m; ++i) {
        row = train.row(static_cast<Eigen::Index>(i));
        sq_distances(train, row.data(), dists[i]);
    }
    double best_h = h_ref, best = std::numeric_limits<double>::infinity();
    for (double mult : opts.nw_multipliers) {
        const double h = mult * h_ref;
        double sse = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double r = y(static_cast<Eigen::Index>(i)) - NadarayaWatson::smooth(dists[i], y, h, i);
            sse += r * r;
        }
        if (sse < best) {
            best = sse;
            best_h = h;
        }
    }
    return std::make_shared<NadarayaWatson>(std::move(scaling), std::move(train), y, best_h);
}

}  // namespace

LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& a, const LearnerOptions& opts) {
    const Eigen::MatrixXd xt = basis_expand(x, Learner::linear);
    const auto n = static_cast<double>(xt.rows());
    const auto p = xt.cols();
    LogisticFit fit;
    fit.beta = Eigen::VectorXd::Zero(p);
    const double abar = a.mean();
    if (abar <= 0.0 || abar >= 1.0) throw FitError("logistic: outcome has a single class");
    fit.beta(0) = std::log(abar / (1.0 - abar));

    Eigen::VectorXd eta = xt * fit.beta;
    fit.loglik = mean_loglik(eta, a);
    for (fit.iterations = 0; fit.iterations < opts.logistic_max_iter; ++fit.iterations) {
        const Eigen::VectorXd pr = eta.unaryExpr([](double e) { return logistic(e); });
        const Eigen::VectorXd grad = xt.transpose() * (a - pr) / n;
        fit.grad_norm = grad.norm();
        if (fit.grad_norm < opts.logistic_tol) {
            fit.converged = true;
            break;
        }
        const Eigen::VectorXd w = pr.cwiseProduct((1.0 - pr.array()).matrix());
        const Eigen::MatrixXd info = xt.transpose() * w.asDiagonal() * xt / n;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
        const Eigen::VectorXd step = ldlt.solve(grad);
        // Near the optimum loglik changes fall below rounding; plain Newton.
        if (fit.grad_norm < 1e-5) {
            fit.beta += step;
            eta = xt * fit.beta;
            fit.loglik = mean_loglik(eta, a);
            continue;
        }
        double scale = 1.0;
        bool improved = false;
        for (int halvings = 0; halvings < 30; ++halvings, scale *= 0.5) {
            const Eigen::VectorXd cand = fit.beta + scale * step;
            const Eigen::VectorXd eta_c = xt * cand;
            const double ll = mean_loglik(eta_c, a);
            if (ll >= fit.loglik - 1e-15) {
                fit.beta = cand;
                eta = eta_c;
                fit.loglik = ll;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    const Eigen::VectorXd pr = eta.unaryExpr([](double e) { return logistic(e); });
    fit.grad_norm = (xt.transpose() * (a - pr) / n).norm();
    if (fit.grad_norm < opts.logistic_tol) fit.converged = true;
    const Eigen::VectorXd w = pr.cwiseProduct((1.0 - pr.array()).matrix());
    fit.fisher_info = xt.transpose() * w.asDiagonal() * xt / n;
    // Diverging slopes mean (quasi-)separation even if the gradient is small.
    if (fit.beta.cwiseAbs().maxCoeff() > 30.0) fit.converged = false;
    return fit;
}

RegressorPtr fit_regressor(Learner method, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const LearnerOptions& opts) {
    if (y.size() == 0) throw FitError("cannot fit a learner on zero rows");
    if (x.rows() != y.size()) throw FitError("learner: design and response lengths differ");
    if (method == Learner::constant || x.cols() == 0) {
        if (method == Learner::logistic && (y.mean() <= 0.0 || y.mean() >= 1.0))
            throw FitError("logistic: outcome has a single class");
        return std::make_shared<ConstantRegressor>(y.mean());
    }
    switch (method) {
        case Learner::linear:
        case Learner::poly2:
            return std::make_shared<BasisRegressor>(method, least_squares(basis_expand(x, method), y));
        case Learner::knn: {
            int k = opts.knn_k > 0 ? opts.knn_k : static_cast<int>(std::lround(std::sqrt(static_cast<double>(y.size()))));
            k = std::clamp(k, 1, static_cast<int>(y.size()));
            return std::make_shared<KnnRegressor>(x, y, k);
        }
        case Learner::nadaraya_watson: return fit_nadaraya_watson(x, y, opts);
        case Learner::logistic: {
            auto fit = fit_logistic(x, y, opts);
            if (!fit.converged)
                throw FitError("logistic regression did not converge (gradient norm " +
                               std::to_string(fit.grad_norm) +
                               "); the classes may be separable, try the knn learner");
            return std::make_shared<LogisticRegressor>(fit.beta);
        }
        case Learner::constant: break;
    }
    return std::make_shared<ConstantRegressor>(y.mean());
}

}  // namespace calsens
