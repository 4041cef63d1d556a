#pragma once

#include <stdexcept>
#include <string>

namespace calsens {

// Exit codes used by the command-line tool.
enum class ExitCode : int { ok = 0, validation = 2, degenerate = 3, numerical = 4 };

class Error : public std::runtime_error {
public:
    Error(std::string kind, ExitCode code, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)), code_(code) {}
    const std::string& kind() const noexcept { return kind_; }
    ExitCode exit_code() const noexcept { return code_; }

private:
    std::string kind_;
    ExitCode code_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error("config", ExitCode::validation, w) {}
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& w) : Error("validation", ExitCode::validation, w) {}
};

// Nuisance fit failure (separation, empty arm, solver stall).
struct FitError : Error {
    explicit FitError(const std::string& w) : Error("fit", ExitCode::numerical, w) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& w) : Error("numerical", ExitCode::numerical, w) {}
};

// Zero measured confounding, no robustness-value crossing.
struct DegenerateError : Error {
    explicit DegenerateError(const std::string& w) : Error("degenerate", ExitCode::degenerate, w) {}
};

}  // namespace calsens
