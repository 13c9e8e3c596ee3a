#include <doctest.h>

#include "rspn/rdc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace rspn;

namespace {

struct Pair
{
    std::vector<double> x, y;
};

Pair make_pair(std::size_t n, double strength, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0, 1);
    Pair p;
    for (std::size_t i = 0; i != n; ++i) {
        const double a = z(rng);
        p.x.push_back(a);
        p.y.push_back(strength * a * a + (1 - strength) * z(rng)); /* nonlinear when strong */
    }
    return p;
}

}

TEST_CASE("copula ranks: ties, order and NULL")
{
    const std::vector<double> x{3, 1, 3, kNull, 2};
    const auto r = copula_ranks(x);
    CHECK(r[3] < r[1]);
    CHECK(r[1] < r[4]);
    CHECK(r[4] < r[0]);
    CHECK(r[0] == r[2]);
    for (double v : r) {
        CHECK(v > 0);
        CHECK(v <= 1);
    }
}

TEST_CASE("rdc separates dependence from independence")
{
    const RdcParams p;
    const Pair ind = make_pair(3000, 0, 1);
    const Pair dep = make_pair(3000, 0.9, 2);
    const double a = rdc(ind.x, ind.y, p, "x", "y");
    const double b = rdc(dep.x, dep.y, p, "x", "y");
    CHECK(a >= 0);
    CHECK(a < 0.3);
    CHECK(b > 0.6);
    CHECK(b <= 1);
    CHECK(rdc(dep.x, dep.x, p, "x", "x2") > 0.95);
}

TEST_CASE("rdc properties over generated inputs")
{
    const RdcParams p;
    std::mt19937_64 rng(99);
    for (int round = 0; round != 40; ++round) {
        const Pair d = make_pair(200 + rng() % 400, double(rng() % 100) / 100, rng());
        const double base = rdc(d.x, d.y, p, "x", "y");
        /* symmetric, bit for bit */
        CHECK(base == rdc(d.y, d.x, p, "y", "x"));
        /* invariant under strictly increasing transforms */
        std::vector<double> tx(d.x.size()), ty(d.y.size());
        std::transform(d.x.begin(), d.x.end(), tx.begin(), [](double v) { return std::exp(v); });
        std::transform(d.y.begin(), d.y.end(), ty.begin(), [](double v) { return 3 * v * v * v + 1; });
        CHECK(rdc(tx, ty, p, "x", "y") == doctest::Approx(base).epsilon(1e-9));
        /* invariant under a row permutation */
        std::vector<std::size_t> perm(d.x.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> px, py;
        for (auto i : perm) {
            px.push_back(d.x[i]);
            py.push_back(d.y[i]);
        }
        CHECK(rdc(px, py, p, "x", "y") == doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("pairwise matrix is symmetric with a unit diagonal")
{
    SampleTable t;
    const Pair d = make_pair(500, 0.8, 5);
    std::vector<double> noise(500);
    std::mt19937_64 rng(3);
    for (auto &v : noise) v = double(rng() % 7);
    t.add_column({"t.x", "t", "x"}, d.x);
    t.add_column({"t.y", "t", "y"}, d.y);
    t.add_column({"t.z", "t", "z"}, noise);
    const RdcMatrix m = pairwise_rdc(t, RdcParams{});
    REQUIRE(m.size() == 3);
    for (std::size_t i = 0; i != 3; ++i) {
        CHECK(m.at(i, i) == 1);
        for (std::size_t j = 0; j != 3; ++j) CHECK(m.at(i, j) == m.at(j, i));
    }
    CHECK(*m.get("t.x", "t.y") > *m.get("t.x", "t.z"));
    CHECK_FALSE(m.get("t.x", "t.w").has_value());
}

TEST_CASE("rdc parameter validation")
{
    RdcParams p;
    p.num_features = 0;
    CHECK_THROWS_AS(p.validate(), InputError);
}
