#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "calsens/crossfit.hpp"
#include "calsens/data.hpp"
#include "calsens/inference.hpp"
#include "calsens/models.hpp"

namespace calsens::cli {

// Everything needed to reproduce a run; flags override the config file.
struct RunConfig {
    std::filesystem::path input;
    DataConfig data;
    ModelKind model = ModelKind::effect_diff;
    std::vector<double> gamma_grid = default_gamma_grid();
    double alpha = 0.05;
    int folds = 5;
    std::uint64_t seed = 1;
    NuisanceConfig nuisance;
    // influence | bootstrap; empty picks bootstrap for the odds model and
    // influence functions otherwise.
    std::string variance;
    int bootstrap_b = 100;
    std::size_t bootstrap_m = 1000;
    unsigned threads = 0;
    std::filesystem::path out = "calsens_out";

    std::string effective_variance() const;
    // Canonical text form; the config hash is taken over it.
    std::string canonical() const;
    std::string hash() const;
    std::string header_line() const;
};

// INI-style file with [data], [model], [nuisance], [inference] sections.
// Relative input paths resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

// "a:b:step", inclusive of b up to rounding.
std::vector<double> parse_gamma_grid(const std::string& spec);
// "B,m"
std::pair<int, std::size_t> parse_bootstrap(const std::string& spec);

int run_cli(int argc, char** argv);

}  // namespace calsens::cli
