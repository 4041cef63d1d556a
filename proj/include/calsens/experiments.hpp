#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "calsens/simlab.hpp"

namespace calsens::simlab {

struct ExperimentOptions {
    int reps = 0;         // 0: experiment default
    std::size_t n = 0;    // 0: experiment default
    std::uint64_t seed = 20240611;
};

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ExperimentResult {
    std::string name;
    std::vector<DgpSpec> dgps;
    int reps = 0;
    int default_reps = 0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    bool underpowered = false;
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<Check> checks;
    // Per-replicate (or per-grid-point) table; seeds kept separately at full width.
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<std::uint64_t> row_seeds;
    double seconds = 0.0;

    bool passed() const;
    double metric(const std::string& key) const;
};

std::vector<std::string> experiment_names();
// Throws ConfigError naming the available experiments on an unknown name.
ExperimentResult run_experiment(const std::string& name, const ExperimentOptions& opts = {});

// Writes <dir>/<name>_replicates.csv and <dir>/<name>_summary.json.
void write_experiment(const ExperimentResult& r, const std::filesystem::path& dir, const std::string& header_line);

// Two-covariate binary DGPs used by the experiments.
BinaryDgp coverage_dgp();
BinaryDgp argmax_dgp();
BinaryDgp robustness_dgp();

// Finite-support checks of the xi and lambda remainders (exact expectations).
struct RemainderReport {
    std::vector<double> xi_errors;  // |E xi(pibar) - ||pi||^2 + E(pibar - pi)^2| per perturbation
    std::vector<double> scales;
    std::vector<double> lambda_remainders;
    double lambda_slope = 0.0;
};
RemainderReport remainder_check(std::uint64_t seed);

}  // namespace calsens::simlab
