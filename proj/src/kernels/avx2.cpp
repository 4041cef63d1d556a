#include "calsens/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define CALSENS_HAVE_AVX2_TU 1
#endif

namespace calsens::kernels {

#ifdef CALSENS_HAVE_AVX2_TU
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
        a1 = _mm256_add_pd(a1, _mm256_loadu_pd(x + i + 4));
    }
    for (; i + 4 <= n; i += 4) a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
    double s = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i) s += x[i];
    return s;
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
    }
    for (; i + 4 <= n; i += 4)
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    double s = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double centered_sumsq_avx2(const double* x, std::size_t n, double center) {
    const __m256d c = _mm256_set1_pd(center);
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), c);
        const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(x + i + 4), c);
        a0 = _mm256_fmadd_pd(d0, d0, a0);
        a1 = _mm256_fmadd_pd(d1, d1, a1);
    }
    for (; i + 4 <= n; i += 4) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), c);
        a0 = _mm256_fmadd_pd(d0, d0, a0);
    }
    double s = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i) {
        const double d = x[i] - center;
        s += d * d;
    }
    return s;
}

void add_sq_diff_avx2(const double* col, std::size_t n, double q, double* out) {
    const __m256d qv = _mm256_set1_pd(q);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(col + i), qv);
        _mm256_storeu_pd(out + i, _mm256_fmadd_pd(d, d, _mm256_loadu_pd(out + i)));
    }
    for (; i < n; ++i) {
        const double d = col[i] - q;
        out[i] += d * d;
    }
}

void omega_avx2(const double* y, const double* theta, std::size_t n, double t, double* out) {
    const __m256d tv = _mm256_set1_pd(t);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d r = _mm256_sub_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(theta + i));
        const __m256d below = _mm256_cmp_pd(r, zero, _CMP_LT_OQ);
        _mm256_storeu_pd(out + i, _mm256_blendv_pd(r, _mm256_mul_pd(tv, r), below));
    }
    for (; i < n; ++i) {
        const double r = y[i] - theta[i];
        out[i] = r > 0.0 ? r : (r < 0.0 ? t * r : 0.0);
    }
}

}  // namespace

const Table& avx2_table() {
    static const Table table{sum_avx2, dot_avx2, centered_sumsq_avx2, add_sq_diff_avx2, omega_avx2};
    return table;
}

#else

const Table& avx2_table() { return scalar_table(); }

#endif

}  // namespace calsens::kernels
