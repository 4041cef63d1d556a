#include "calsens/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "calsens/error.hpp"
#include "calsens/stats.hpp"

namespace calsens {

SubsetSpec SubsetSpec::of(std::vector<std::size_t> cols) {
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    return SubsetSpec{std::move(cols)};
}

Dataset::Dataset(Eigen::MatrixXd covariates, std::vector<int> treatment, std::vector<double> outcome,
                 std::vector<std::string> names, std::vector<ColumnGroup> groups) {
    const auto n = treatment.size();
    const auto d = static_cast<std::size_t>(covariates.cols());
    if (static_cast<std::size_t>(covariates.rows()) != n || outcome.size() != n)
        throw ValidationError("dataset: covariates, treatment and outcome lengths differ");
    if (n < 2) throw ValidationError("dataset: need at least 2 observations");
    if (d < 1) throw ValidationError("dataset: need at least 1 covariate");
    if (names.empty()) {
        for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
    }
    if (names.size() != d) throw ValidationError("dataset: covariate name count does not match columns");
    std::size_t treated = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (treatment[i] != 0 && treatment[i] != 1)
            throw ValidationError("dataset: treatment value at row " + std::to_string(i + 1) +
                                  " is not 0 or 1");
        treated += static_cast<std::size_t>(treatment[i]);
        if (!std::isfinite(outcome[i]))
            throw ValidationError("dataset: non-finite outcome at row " + std::to_string(i + 1));
        for (std::size_t j = 0; j < d; ++j) {
            if (!std::isfinite(covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))))
                throw ValidationError("dataset: non-finite covariate at row " + std::to_string(i + 1) +
                                      ", column " + names[j]);
        }
    }
    if (treated == 0 || treated == n) throw ValidationError("dataset: both treatment arms must be non-empty");
    for (const auto& g : groups) {
        for (auto c : g.columns)
            if (c >= d) throw ValidationError("dataset: group '" + g.label + "' references a missing column");
    }
    auto s = std::make_shared<Storage>();
    s->x = std::move(covariates);
    s->treatment = std::move(treatment);
    s->outcome = std::move(outcome);
    s->names = std::move(names);
    s->groups = std::move(groups);
    store_ = std::move(s);
    cols_.resize(d);
    std::iota(cols_.begin(), cols_.end(), std::size_t{0});
}

std::vector<std::string> Dataset::names() const {
    std::vector<std::string> out;
    out.reserve(cols_.size());
    for (auto c : cols_) out.push_back(store_->names[c]);
    return out;
}

std::vector<ColumnGroup> Dataset::covariate_groups() const {
    std::vector<std::ptrdiff_t> view_of(store_->names.size(), -1);
    for (std::size_t j = 0; j < cols_.size(); ++j) view_of[cols_[j]] = static_cast<std::ptrdiff_t>(j);

    std::vector<ColumnGroup> out;
    std::vector<bool> grouped(cols_.size(), false);
    std::vector<std::pair<std::size_t, ColumnGroup>> ordered;  // keyed by first view column
    for (const auto& g : store_->groups) {
        ColumnGroup vg{g.label, {}};
        for (auto c : g.columns)
            if (view_of[c] >= 0) vg.columns.push_back(static_cast<std::size_t>(view_of[c]));
        if (vg.columns.empty()) continue;
        std::sort(vg.columns.begin(), vg.columns.end());
        for (auto c : vg.columns) grouped[c] = true;
        ordered.emplace_back(vg.columns.front(), std::move(vg));
    }
    for (std::size_t j = 0; j < cols_.size(); ++j)
        if (!grouped[j]) ordered.emplace_back(j, ColumnGroup{store_->names[cols_[j]], {j}});
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& l, const auto& r) { return l.first < r.first; });
    for (auto& [_, g] : ordered) out.push_back(std::move(g));
    return out;
}

SubsetSpec Dataset::group_spec(const std::string& label) const {
    for (const auto& g : covariate_groups())
        if (g.label == label) return SubsetSpec::of(g.columns);
    throw ConfigError("unknown covariate or group '" + label + "'");
}

Dataset Dataset::exclude(const SubsetSpec& spec) const {
    std::vector<bool> drop(cols_.size(), false);
    for (auto c : spec.excluded) {
        if (c >= cols_.size())
            throw ValidationError("exclude: column index " + std::to_string(c) + " out of range for d=" +
                                  std::to_string(cols_.size()));
        drop[c] = true;
    }
    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < cols_.size(); ++j)
        if (!drop[j]) kept.push_back(cols_[j]);
    if (kept.empty()) throw ValidationError("exclude: cannot exclude every covariate");
    return Dataset(store_, std::move(kept));
}

Eigen::MatrixXd Dataset::design(std::span<const std::size_t> rows, const std::vector<std::size_t>* cols) const {
    std::vector<std::size_t> all_cols;
    if (cols == nullptr) {
        all_cols.resize(cols_.size());
        std::iota(all_cols.begin(), all_cols.end(), std::size_t{0});
        cols = &all_cols;
    }
    const bool all_rows = rows.empty();
    const auto nr = static_cast<Eigen::Index>(all_rows ? n() : rows.size());
    Eigen::MatrixXd out(nr, static_cast<Eigen::Index>(cols->size()));
    for (std::size_t jj = 0; jj < cols->size(); ++jj) {
        const auto sc = static_cast<Eigen::Index>(cols_.at((*cols)[jj]));
        const auto oc = static_cast<Eigen::Index>(jj);
        if (all_rows) {
            out.col(oc) = store_->x.col(sc);
        } else {
            for (Eigen::Index r = 0; r < nr; ++r)
                out(r, oc) = store_->x(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]), sc);
        }
    }
    return out;
}

std::size_t Dataset::arm_count(int arm) const {
    return static_cast<std::size_t>(std::count(store_->treatment.begin(), store_->treatment.end(), arm));
}

Dataset Dataset::take_rows(std::span<const std::size_t> rows) const {
    Eigen::MatrixXd x = design(rows);
    std::vector<int> a;
    std::vector<double> y;
    a.reserve(rows.size());
    y.reserve(rows.size());
    for (auto r : rows) {
        a.push_back(store_->treatment.at(r));
        y.push_back(store_->outcome.at(r));
    }
    std::vector<ColumnGroup> groups;
    for (auto& g : covariate_groups())
        if (g.columns.size() > 1) groups.push_back(g);
    return Dataset(std::move(x), std::move(a), std::move(y), names(), std::move(groups));
}

Dataset Dataset::with_covariates(Eigen::MatrixXd covariates) const {
    if (covariates.cols() != static_cast<Eigen::Index>(d()))
        throw ValidationError("with_covariates: column count mismatch");
    std::vector<ColumnGroup> groups;
    for (auto& g : covariate_groups())
        if (g.columns.size() > 1) groups.push_back(g);
    return Dataset(std::move(covariates), store_->treatment, store_->outcome, names(), std::move(groups));
}

std::vector<std::size_t> FoldAssignment::rows_in(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldAssignment::rows_not_in(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] != fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldAssignment::sizes() const {
    std::vector<std::size_t> out(static_cast<std::size_t>(k), 0);
    for (int f : fold_of) ++out[static_cast<std::size_t>(f)];
    return out;
}

FoldAssignment make_folds(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2) throw ValidationError("make_folds: need at least 2 folds");
    if (static_cast<std::size_t>(k) > n)
        throw ValidationError("make_folds: fold count " + std::to_string(k) + " exceeds n=" + std::to_string(n));
    // Fisher-Yates with SplitMix64 so the assignment does not depend on the
    // standard library's shuffle implementation.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::uint64_t state = seed;
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(stats::splitmix64(state) % i);
        std::swap(perm[i - 1], perm[j]);
    }
    FoldAssignment out;
    out.fold_of.assign(n, 0);
    out.k = k;
    out.seed = seed;
    for (std::size_t pos = 0; pos < n; ++pos) out.fold_of[perm[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
    return out;
}

RescaledDataset minmax_rescale(const Dataset& data) {
    Eigen::MatrixXd x = data.covariates();
    std::vector<ColumnRange> ranges;
    const auto names = data.names();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        ColumnRange r{x.col(j).minCoeff(), x.col(j).maxCoeff()};
        if (!(r.width() > 0.0))
            throw ValidationError("minmax_rescale: covariate '" + names[static_cast<std::size_t>(j)] +
                                  "' is constant");
        for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = r.to_unit(x(i, j));
        ranges.push_back(r);
    }
    return {data.with_covariates(std::move(x)), std::move(ranges)};
}

Eigen::MatrixXd minmax_unscale(const Eigen::MatrixXd& unit, const std::vector<ColumnRange>& ranges) {
    Eigen::MatrixXd out = unit;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            out(i, j) = ranges[static_cast<std::size_t>(j)].from_unit(unit(i, j));
    return out;
}

}  // namespace calsens
