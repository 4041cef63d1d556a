#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace calsens {

// A named block of covariate columns that is left out as a unit
// (one-hot encoded categoricals, user-declared groups).
struct ColumnGroup {
    std::string label;
    std::vector<std::size_t> columns;
};

// Covariate columns to leave out, in the column indexing of the dataset it
// is applied to (0-based).
struct SubsetSpec {
    std::vector<std::size_t> excluded;

    static SubsetSpec none() { return {}; }
    static SubsetSpec of(std::vector<std::size_t> cols);
};

// Observations (X, A, Y). Storage is shared and immutable; `exclude` returns a
// column view over the same storage.
class Dataset {
public:
    Dataset(Eigen::MatrixXd covariates, std::vector<int> treatment, std::vector<double> outcome,
            std::vector<std::string> names, std::vector<ColumnGroup> groups = {});

    std::size_t n() const noexcept { return store_->treatment.size(); }
    std::size_t d() const noexcept { return cols_.size(); }

    double x(std::size_t i, std::size_t j) const { return store_->x(static_cast<Eigen::Index>(i),
                                                                      static_cast<Eigen::Index>(cols_[j])); }
    int a(std::size_t i) const { return store_->treatment[i]; }
    double y(std::size_t i) const { return store_->outcome[i]; }
    std::span<const int> treatment() const noexcept { return store_->treatment; }
    std::span<const double> outcome() const noexcept { return store_->outcome; }

    std::vector<std::string> names() const;
    // Leave-out units in this view's column indexing. Ungrouped columns form
    // singleton groups named after the column.
    std::vector<ColumnGroup> covariate_groups() const;
    SubsetSpec group_spec(const std::string& label) const;

    Dataset exclude(const SubsetSpec& spec) const;

    // Dense copy of the selected rows (all rows if empty) and view columns
    // (all view columns when `cols` is null). Zero columns is allowed.
    Eigen::MatrixXd design(std::span<const std::size_t> rows = {},
                           const std::vector<std::size_t>* cols = nullptr) const;
    Eigen::MatrixXd covariates() const { return design(); }

    std::size_t arm_count(int arm) const;
    bool shares_storage_with(const Dataset& other) const noexcept { return store_ == other.store_; }
    // Storage indices of the view's columns.
    const std::vector<std::size_t>& storage_columns() const noexcept { return cols_; }

    // Copy with selected rows (bootstrap resamples, physical subsets).
    Dataset take_rows(std::span<const std::size_t> rows) const;
    Dataset with_covariates(Eigen::MatrixXd covariates) const;

private:
    struct Storage {
        Eigen::MatrixXd x;
        std::vector<int> treatment;
        std::vector<double> outcome;
        std::vector<std::string> names;
        std::vector<ColumnGroup> groups;  // storage column indices
    };
    Dataset(std::shared_ptr<const Storage> s, std::vector<std::size_t> cols)
        : store_(std::move(s)), cols_(std::move(cols)) {}

    std::shared_ptr<const Storage> store_;
    std::vector<std::size_t> cols_;
};

// Cross-fitting fold labels, 0-based (fold k of K).
struct FoldAssignment {
    std::vector<int> fold_of;
    int k = 0;
    std::uint64_t seed = 0;

    std::vector<std::size_t> rows_in(int fold) const;
    std::vector<std::size_t> rows_not_in(int fold) const;
    std::vector<std::size_t> sizes() const;
};

FoldAssignment make_folds(std::size_t n, int k, std::uint64_t seed);

struct ColumnRange {
    double min = 0.0;
    double max = 1.0;
    double width() const noexcept { return max - min; }
    double to_unit(double v) const noexcept { return (v - min) / width(); }
    double from_unit(double u) const noexcept { return min + u * width(); }
};

struct RescaledDataset {
    Dataset data;
    std::vector<ColumnRange> ranges;
};

// Affine map of each covariate column onto [0, 1]. A slope fitted on the unit
// scale equals the original-scale slope times the column width.
RescaledDataset minmax_rescale(const Dataset& data);
Eigen::MatrixXd minmax_unscale(const Eigen::MatrixXd& unit, const std::vector<ColumnRange>& ranges);

// Column roles for CSV ingestion.
struct DataConfig {
    std::string treatment;
    std::string outcome;
    std::vector<std::string> covariates;   // empty: every other column
    std::vector<std::string> categorical;  // one-hot encoded, first (sorted) level dropped
    std::map<std::string, std::vector<std::string>> groups;  // label -> source columns
};

Dataset load_csv(const std::string& path, const DataConfig& config);
Dataset parse_csv(std::istream& in, const DataConfig& config, const std::string& source = "<stream>");

}  // namespace calsens
