#include <doctest.h>

#include "fixtures.hpp"
#include "rspn/learn.hpp"

#include <random>

using namespace rspn;
using namespace fixtures;

TEST_CASE("variance formulas")
{
    CHECK(variance_of_probability(0.2, 100) == doctest::Approx(0.0016));
    CHECK(variance_of_probability(1.5, 10) == 0);
    CHECK_THROWS_AS(variance_of_probability(0.5, 0), InputError);

    const UncertainFactor a{2, 0.5, FactorKind::Probability}, b{3, 0.25, FactorKind::ConditionalExpectation};
    const UncertainFactor parts[] = {a, b};
    const UncertainFactor p = combine_product(parts);
    CHECK(p.mean == 6);
    CHECK(p.variance == doctest::Approx(0.5 * 0.25 + 0.5 * 9 + 0.25 * 4));

    const UncertainFactor r = reciprocal(a);
    CHECK(r.mean == 0.5);
    CHECK(r.variance == doctest::Approx(0.5 / 16));
    CHECK_THROWS_AS(reciprocal(UncertainFactor{}), EmptyCondition);

    const auto [lo, hi] = confidence_interval({10, 4, FactorKind::Probability}, 0.95);
    CHECK(lo == doctest::Approx(10 - 1.959963985 * 2));
    CHECK(hi == doctest::Approx(10 + 1.959963985 * 2));
    CHECK(confidence_interval(UncertainFactor::constant(3)).first == 3);
    CHECK_THROWS_AS(confidence_interval(a, 1.0), InputError);
}

TEST_CASE("conditional expectation variance on an exact model")
{
    SampleTable t;
    t.add_column({"t.x", "t", "x"}, {1, 2, 3, 4, kNull});
    t.add_column({"t.y", "t", "y"}, {0, 0, 1, 1, 1});
    const Rspn m = build_exact_rspn(t, "t");
    Predicate y1;
    y1.add("t.y", Op::Eq, 1);
    const TargetExpr x = TargetExpr{}.times("t.x");
    /* x in {3, 4}: variance 0.25 over n * P = 2 rows */
    CHECK(variance_of_cond_expectation(m, x, y1) == doctest::Approx(0.125));
    const UncertainFactor u = uncertain_expectation(m, x, y1);
    CHECK(u.mean == doctest::Approx(0.4 * 3.5));
    Predicate none;
    none.add("t.y", Op::Eq, 7);
    CHECK_THROWS_AS(variance_of_cond_expectation(m, x, none), EmptyCondition);
}

TEST_CASE("intervals of learned count estimates cover the sampling spread")
{
    /* population of 40000 rows; models learned on independent 2000-row samples */
    std::mt19937_64 rng(21);
    const std::size_t population = 40000;
    std::vector<double> pa(population), pb(population);
    for (std::size_t i = 0; i != population; ++i) {
        pa[i] = double(rng() % 10);
        pb[i] = pa[i] + double(rng() % 5);
    }
    Predicate pred;
    pred.add("t.a", Op::Lt, 3).add("t.b", Op::Ge, 3);
    double truth = 0;
    for (std::size_t i = 0; i != population; ++i) truth += pa[i] < 3 && pb[i] >= 3;

    int covered = 0;
    const int trials = 60;
    for (int k = 0; k != trials; ++k) {
        SampleTable s;
        std::vector<double> a, b;
        for (int i = 0; i != 2000; ++i) {
            const std::size_t r = rng() % population;
            a.push_back(pa[r]);
            b.push_back(pb[r]);
        }
        s.add_column({"t.a", "t", "a"}, a);
        s.add_column({"t.b", "t", "b"}, b);
        Rspn m = build_exact_rspn(s, "t");
        m.full_population_size = double(population);
        const UncertainFactor p = uncertain_expectation(m, {}, pred);
        const UncertainFactor parts[] = {UncertainFactor::constant(double(population)), p};
        const auto [lo, hi] = confidence_interval(combine_product(parts));
        covered += lo <= truth && truth <= hi;
    }
    CHECK(covered >= 50);
}
