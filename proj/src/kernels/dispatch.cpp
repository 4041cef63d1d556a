#include <atomic>
#include <cstdlib>
#include <string_view>

#include "calsens/kernels.hpp"

namespace calsens::kernels {
namespace {

Backend detect() {
    if (const char* env = std::getenv("CALSENS_SIMD"); env && std::string_view(env) == "scalar")
        return Backend::scalar;
    return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& current() {
    static std::atomic<Backend> b{detect()};
    return b;
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Table& active() {
    return current().load(std::memory_order_relaxed) == Backend::avx2 ? avx2_table() : scalar_table();
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

std::string_view backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

Backend set_backend(Backend b) {
    if (b == Backend::avx2 && !avx2_supported()) b = Backend::scalar;
    return current().exchange(b);
}

}  // namespace calsens::kernels
