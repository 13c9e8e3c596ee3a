#pragma once

#include <cstddef>
#include <span>
#include <string_view>

/*======================================================================================================================
 * Data-parallel inner loops of leaf inference and clustering.
 *
 * Every kernel has a scalar reference implementation. When the library is built for x86-64 an AVX2/FMA variant is
 * compiled into a separate translation unit and chosen at startup if the CPU supports it. Setting RSPN_SIMD=scalar in
 * the environment pins the scalar set. Variants may differ in summation order only.
 *====================================================================================================================*/

namespace rspn::kernels {

/// Function applied to a leaf value before it is raised to the target power.
enum class ValueTransform { Identity, Reciprocal, AtLeastOne };

struct KernelTable
{
    std::string_view name;

    /// sum_i x[i]
    double (*sum)(const double *x, std::size_t n);

    /// sum_i w[i] * g(v[i])^power with g selected by the transform; power is 1 or 2.
    double (*moment)(const double *v, const double *w, std::size_t n, ValueTransform t, int power);

    /// acc[i] += (x[i] - center)^2
    void (*accumulate_sq_diff)(double *acc, const double *x, double center, std::size_t n);

    /// For each i: if d[i] < best[i] then best[i] = d[i], arg[i] = id.
    void (*argmin_update)(double *best, unsigned *arg, const double *d, unsigned id, std::size_t n);
};

const KernelTable &scalar_table() noexcept;

/// The AVX2 table, or nullptr if it was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable *avx2_table() noexcept;

/// The table selected at startup.
const KernelTable &active() noexcept;

inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }

inline double moment(std::span<const double> values, std::span<const double> weights, ValueTransform t, int power)
{
    return active().moment(values.data(), weights.data(), values.size(), t, power);
}

inline void accumulate_sq_diff(std::span<double> acc, std::span<const double> x, double center)
{
    active().accumulate_sq_diff(acc.data(), x.data(), center, acc.size());
}

inline void argmin_update(std::span<double> best, std::span<unsigned> arg, std::span<const double> d, unsigned id)
{
    active().argmin_update(best.data(), arg.data(), d.data(), id, best.size());
}

}
