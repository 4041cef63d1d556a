#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops. Each kernel has a scalar reference and an AVX2
// variant; the active table is chosen once at startup from the CPU features
// (override with CALSENS_SIMD=scalar).
namespace calsens::kernels {

enum class Backend { scalar, avx2 };

struct Table {
    double (*sum)(const double* x, std::size_t n);
    double (*dot)(const double* x, const double* y, std::size_t n);
    // sum_i (x_i - center)^2
    double (*centered_sumsq)(const double* x, std::size_t n, double center);
    // out_i += (col_i - q)^2
    void (*add_sq_diff)(const double* col, std::size_t n, double q, double* out);
    // out_i = omega_{theta_i}(y_i; t)
    void (*omega)(const double* y, const double* theta, std::size_t n, double t, double* out);
};

const Table& scalar_table();
const Table& avx2_table();

bool avx2_supported();
const Table& active();
Backend active_backend();
std::string_view backend_name(Backend b);
// Tests use this to pin a backend; returns the previous one.
Backend set_backend(Backend b);

inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }

inline double dot(std::span<const double> x, std::span<const double> y) {
    return active().dot(x.data(), y.data(), x.size());
}

inline double mean(std::span<const double> x) {
    return x.empty() ? 0.0 : sum(x) / static_cast<double>(x.size());
}

}  // namespace calsens::kernels
