#include <doctest.h>

#include "rspn/kernels.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace rspn::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -50, double hi = 50)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto &x : v) x = d(rng);
    return v;
}

double ref_moment(const std::vector<double> &v, const std::vector<double> &w, ValueTransform t, int power)
{
    long double acc = 0;
    for (std::size_t i = 0; i != v.size(); ++i) {
        double g = v[i];
        if (t == ValueTransform::Reciprocal) g = 1 / g;
        if (t == ValueTransform::AtLeastOne) g = std::max(g, 1.0);
        acc += (long double)w[i] * std::pow(g, power);
    }
    return double(acc);
}

}

TEST_CASE("scalar kernels match a long-double reference")
{
    const auto &k = scalar_table();
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 16u, 33u, 1000u}) {
        const auto v = random_values(n, n + 1, 0.5, 9);
        const auto w = random_values(n, n + 2, 0, 1);
        long double s = 0;
        for (double x : v) s += x;
        CHECK(k.sum(v.data(), n) == doctest::Approx(double(s)).epsilon(1e-12));
        for (auto t : {ValueTransform::Identity, ValueTransform::Reciprocal, ValueTransform::AtLeastOne})
            for (int p : {1, 2})
                CHECK(k.moment(v.data(), w.data(), n, t, p) == doctest::Approx(ref_moment(v, w, t, p)).epsilon(1e-12));
    }
}

TEST_CASE("AVX2 kernels agree with the scalar reference")
{
    const KernelTable *avx = avx2_table();
    if (!avx) {
        MESSAGE("AVX2 kernels not available on this machine");
        return;
    }
    const auto &sc = scalar_table();
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 8u, 15u, 64u, 1001u, 4099u}) {
        const auto v = random_values(n, 3 * n + 11, 0.2, 20);
        const auto w = random_values(n, 3 * n + 12, 0, 2);
        CHECK(avx->sum(v.data(), n) == doctest::Approx(sc.sum(v.data(), n)).epsilon(1e-12));
        for (auto t : {ValueTransform::Identity, ValueTransform::Reciprocal, ValueTransform::AtLeastOne})
            for (int p : {1, 2})
                CHECK(avx->moment(v.data(), w.data(), n, t, p) ==
                      doctest::Approx(sc.moment(v.data(), w.data(), n, t, p)).epsilon(1e-12));

        const auto x = random_values(n, 5 * n + 1);
        std::vector<double> a1(n, 1.5), a2(n, 1.5);
        sc.accumulate_sq_diff(a1.data(), x.data(), 3.25, n);
        avx->accumulate_sq_diff(a2.data(), x.data(), 3.25, n);
        for (std::size_t i = 0; i != n; ++i) CHECK(a1[i] == doctest::Approx(a2[i]).epsilon(1e-14));

        auto d = random_values(n, 7 * n + 1, 0, 10);
        if (n > 2) d[1] = 4.0; /* equal to the incumbent: must not replace it */
        std::vector<double> b1(n, 4.0), b2(n, 4.0);
        std::vector<unsigned> g1(n, 9), g2(n, 9);
        sc.argmin_update(b1.data(), g1.data(), d.data(), 2, n);
        avx->argmin_update(b2.data(), g2.data(), d.data(), 2, n);
        CHECK(b1 == b2);
        CHECK(g1 == g2);
    }
}

TEST_CASE("active table is one of the compiled variants")
{
    const auto &a = active();
    CHECK((a.name == scalar_table().name || (avx2_table() && a.name == avx2_table()->name)));
}
