#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <string>
#include <random>
#include <vector>

#include "calsens/kernels.hpp"
#include "calsens/nuisance.hpp"

using namespace calsens;

namespace {

std::vector<double> draws(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.5, 2.0);
    std::vector<double> v(n);
    for (auto& x : v) x = z(rng);
    return v;
}

}  // namespace

TEST_CASE("scalar kernels match naive loops") {
    const auto& s = kernels::scalar_table();
    const auto x = draws(37, 1), y = draws(37, 2);
    double sx = 0, dxy = 0, ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        dxy += x[i] * y[i];
        ss += (x[i] - 0.3) * (x[i] - 0.3);
    }
    CHECK(s.sum(x.data(), x.size()) == doctest::Approx(sx).epsilon(1e-14));
    CHECK(s.dot(x.data(), y.data(), x.size()) == doctest::Approx(dxy).epsilon(1e-14));
    CHECK(s.centered_sumsq(x.data(), x.size(), 0.3) == doctest::Approx(ss).epsilon(1e-14));
    CHECK(s.sum(x.data(), 0) == 0.0);
}

TEST_CASE("avx2 kernels agree with scalar on every tail length") {
    if (!kernels::avx2_supported()) return;
    const auto& s = kernels::scalar_table();
    const auto& v = kernels::avx2_table();
    for (std::size_t n = 0; n <= 41; ++n) {
        const auto x = draws(n, 10 + static_cast<unsigned>(n)), y = draws(n, 100 + static_cast<unsigned>(n));
        const double scale = 1.0 + s.centered_sumsq(x.data(), n, 0.0);
        CHECK(std::abs(v.sum(x.data(), n) - s.sum(x.data(), n)) <= 1e-12 * scale);
        CHECK(std::abs(v.dot(x.data(), y.data(), n) - s.dot(x.data(), y.data(), n)) <= 1e-12 * scale);
        CHECK(std::abs(v.centered_sumsq(x.data(), n, -0.7) - s.centered_sumsq(x.data(), n, -0.7)) <= 1e-12 * scale);

        std::vector<double> o1(n, 1.0), o2(n, 1.0);
        s.add_sq_diff(x.data(), n, 0.25, o1.data());
        v.add_sq_diff(x.data(), n, 0.25, o2.data());
        for (std::size_t i = 0; i < n; ++i) CHECK(o1[i] == doctest::Approx(o2[i]).epsilon(1e-14));

        std::vector<double> w1(n), w2(n);
        s.omega(x.data(), y.data(), n, 2.5, w1.data());
        v.omega(x.data(), y.data(), n, 2.5, w2.data());
        for (std::size_t i = 0; i < n; ++i) CHECK(w1[i] == w2[i]);
    }
}

TEST_CASE("omega kernel is the asymmetric residual") {
    const std::vector<double> y{1.0, -1.0, 0.5, 2.0};
    const std::vector<double> th{0.0, 0.0, 0.5, 3.0};
    std::vector<double> out(4);
    kernels::scalar_table().omega(y.data(), th.data(), 4, 3.0, out.data());
    CHECK(out[0] == 1.0);
    CHECK(out[1] == -3.0);
    CHECK(out[2] == 0.0);
    CHECK(out[3] == -3.0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(out[i] == eval_omega(y[i], th[i], 3.0));
}

TEST_CASE("backend can be pinned and restored") {
    const auto before = kernels::active_backend();
    const auto prev = kernels::set_backend(kernels::Backend::scalar);
    CHECK(prev == before);
    CHECK(kernels::active_backend() == kernels::Backend::scalar);
    CHECK(kernels::backend_name(kernels::Backend::scalar) == "scalar");
    const std::vector<double> x{1, 2, 3, 4, 5};
    CHECK(kernels::mean(x) == 3.0);
    kernels::set_backend(before);
    CHECK(kernels::active_backend() == before);
}

TEST_CASE("environment override selects the scalar backend") {
    const char* env = std::getenv("CALSENS_SIMD");
    if (!env || std::string(env) != "scalar") return;
    CHECK(kernels::active_backend() == kernels::Backend::scalar);
}
