#include "calsens/kernels.hpp"

namespace calsens::kernels {
namespace {

double sum_scalar(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

double centered_sumsq_scalar(const double* x, std::size_t n, double center) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - center;
        s += d * d;
    }
    return s;
}

void add_sq_diff_scalar(const double* col, std::size_t n, double q, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double d = col[i] - q;
        out[i] += d * d;
    }
}

void omega_scalar(const double* y, const double* theta, std::size_t n, double t, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - theta[i];
        out[i] = r > 0.0 ? r : (r < 0.0 ? t * r : 0.0);
    }
}

}  // namespace

const Table& scalar_table() {
    static const Table table{sum_scalar, dot_scalar, centered_sumsq_scalar, add_sq_diff_scalar,
                             omega_scalar};
    return table;
}

}  // namespace calsens::kernels
