#include "rspn/kernels.hpp"

#include <algorithm>

namespace rspn::kernels {

namespace {

double sum_scalar(const double *x, std::size_t n)
{
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

template<ValueTransform T>
inline double apply(double v)
{
    if constexpr (T == ValueTransform::Reciprocal) return 1.0 / v;
    else if constexpr (T == ValueTransform::AtLeastOne) return std::max(v, 1.0);
    else return v;
}

template<ValueTransform T>
double moment_impl(const double *v, const double *w, std::size_t n, int power)
{
    double s = 0.0;
    if (power == 2) {
        for (std::size_t i = 0; i < n; ++i) {
            const double g = apply<T>(v[i]);
            s += w[i] * g * g;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) s += w[i] * apply<T>(v[i]);
    }
    return s;
}

double moment_scalar(const double *v, const double *w, std::size_t n, ValueTransform t, int power)
{
    switch (t) {
        case ValueTransform::Identity: return moment_impl<ValueTransform::Identity>(v, w, n, power);
        case ValueTransform::Reciprocal: return moment_impl<ValueTransform::Reciprocal>(v, w, n, power);
        case ValueTransform::AtLeastOne: return moment_impl<ValueTransform::AtLeastOne>(v, w, n, power);
    }
    return 0.0;
}

void accumulate_sq_diff_scalar(double *acc, const double *x, double center, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - center;
        acc[i] += d * d;
    }
}

void argmin_update_scalar(double *best, unsigned *arg, const double *d, unsigned id, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] < best[i]) {
            best[i] = d[i];
            arg[i] = id;
        }
    }
}

}

const KernelTable &scalar_table() noexcept
{
    static const KernelTable table{
        "scalar",
        sum_scalar,
        moment_scalar,
        accumulate_sq_diff_scalar,
        argmin_update_scalar,
    };
    return table;
}

}
