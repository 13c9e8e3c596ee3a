// Compiled with -mavx2 -mfma. Nothing in here may run unless avx2_table() returned non-null.
#include "rspn/kernels.hpp"

#include <cmath>
#include <immintrin.h>

#include <algorithm>

namespace rspn::kernels {

namespace {

inline double hsum(__m256d v)
{
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double sum_avx2(const double *x, std::size_t n)
{
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

template<ValueTransform T>
inline __m256d apply(__m256d v)
{
    if constexpr (T == ValueTransform::Reciprocal) return _mm256_div_pd(_mm256_set1_pd(1.0), v);
    else if constexpr (T == ValueTransform::AtLeastOne) return _mm256_max_pd(v, _mm256_set1_pd(1.0));
    else return v;
}

template<ValueTransform T>
inline double apply1(double v)
{
    if constexpr (T == ValueTransform::Reciprocal) return 1.0 / v;
    else if constexpr (T == ValueTransform::AtLeastOne) return std::max(v, 1.0);
    else return v;
}

template<ValueTransform T>
double moment_impl(const double *v, const double *w, std::size_t n, int power)
{
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    if (power == 2) {
        for (; i + 4 <= n; i += 4) {
            const __m256d g = apply<T>(_mm256_loadu_pd(v + i));
            acc = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_loadu_pd(w + i), g), g, acc);
        }
    } else {
        for (; i + 4 <= n; i += 4)
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), apply<T>(_mm256_loadu_pd(v + i)), acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double g = apply1<T>(v[i]);
        s += power == 2 ? w[i] * g * g : w[i] * g;
    }
    return s;
}

double moment_avx2(const double *v, const double *w, std::size_t n, ValueTransform t, int power)
{
    switch (t) {
        case ValueTransform::Identity: return moment_impl<ValueTransform::Identity>(v, w, n, power);
        case ValueTransform::Reciprocal: return moment_impl<ValueTransform::Reciprocal>(v, w, n, power);
        case ValueTransform::AtLeastOne: return moment_impl<ValueTransform::AtLeastOne>(v, w, n, power);
    }
    return 0.0;
}

void accumulate_sq_diff_avx2(double *acc, const double *x, double center, std::size_t n)
{
    const __m256d c = _mm256_set1_pd(center);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), c);
        _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(d, d, _mm256_loadu_pd(acc + i)));
    }
    for (; i < n; ++i) {
        const double d = x[i] - center;
        acc[i] = std::fma(d, d, acc[i]);
    }
}

void argmin_update_avx2(double *best, unsigned *arg, const double *d, unsigned id, std::size_t n)
{
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d b = _mm256_loadu_pd(best + i);
        const __m256d x = _mm256_loadu_pd(d + i);
        const __m256d lt = _mm256_cmp_pd(x, b, _CMP_LT_OQ);
        const int mask = _mm256_movemask_pd(lt);
        if (mask == 0) continue;
        _mm256_storeu_pd(best + i, _mm256_blendv_pd(b, x, lt));
        for (int j = 0; j < 4; ++j)
            if (mask & (1 << j)) arg[i + j] = id;
    }
    for (; i < n; ++i) {
        if (d[i] < best[i]) {
            best[i] = d[i];
            arg[i] = id;
        }
    }
}

}

const KernelTable &avx2_table_unchecked() noexcept
{
    static const KernelTable table{
        "avx2",
        sum_avx2,
        moment_avx2,
        accumulate_sq_diff_avx2,
        argmin_update_avx2,
    };
    return table;
}

}
