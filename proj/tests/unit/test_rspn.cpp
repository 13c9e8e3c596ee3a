#include <doctest.h>

#include "fixtures.hpp"
#include "rspn/learn.hpp"

#include <cmath>
#include <random>

using namespace rspn;
using namespace fixtures;

TEST_CASE("hand-built two-cluster model: European customers under 30")
{
    const Rspn m = two_cluster_customers();
    m.validate();
    Predicate q;
    q.add("customer.c_region", Op::Eq, 1).add("customer.c_age", Op::Lt, 30);
    CHECK(m.probability(q) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(m.full_population_size * m.probability(q) == doctest::Approx(50).epsilon(1e-12));
    CHECK(m.probability({}) == doctest::Approx(1));
    CHECK(m.count_nodes(NodeKind::Sum) == 1);
    CHECK(m.count_nodes(NodeKind::Product) == 2);
    CHECK(m.count_nodes(NodeKind::Leaf) == 4);
    CHECK(m.depth() == 3);
    /* E[age | Europe] = (0.3*0.8*(.15*25+.85*40) + 0.7*0.1*(.2*25+.8*40)) / P(Europe) */
    Predicate eu;
    eu.add("customer.c_region", Op::Eq, 1);
    const double pe = 0.3 * 0.8 + 0.7 * 0.1;
    const double num = 0.3 * 0.8 * (0.15 * 25 + 0.85 * 40) + 0.7 * 0.1 * (0.2 * 25 + 0.8 * 40);
    CHECK(m.probability(eu) == doctest::Approx(pe));
    CHECK(m.conditional_expectation(TargetExpr{}.times("customer.c_age"), eu) == doctest::Approx(num / pe));
    /* MPE: the Asian cluster dominates */
    CHECK(m.mpe({}, "customer.c_region") == 0);
    CHECK(m.mpe(eu, "customer.c_age") == 40);
}

TEST_CASE("exact model equals a scan of the customer table")
{
    const Database db = toy_db();
    const Rspn m = exact_model(db, tables_of(db.schema, {"customer"}));
    const TargetExpr age = TargetExpr{}.times("customer.c_age");
    const TargetExpr age2 = TargetExpr{}.times("customer.c_age", ValueTransform::Identity, 2);
    CHECK(m.expectation(age, {}) == doctest::Approx((20 + 50 + 80) / 3.0).epsilon(1e-12));
    CHECK(m.expectation(age2, {}) == doctest::Approx((400 + 2500 + 6400) / 3.0).epsilon(1e-12));
    CHECK(m.second_moment(age, {}) == doctest::Approx((400 + 2500 + 6400) / 3.0).epsilon(1e-12));
    Predicate one;
    one.add("customer.c_age", Op::Gt, 60);
    CHECK(m.conditional_expectation(age, one) == doctest::Approx(80));
    Predicate none;
    none.add("customer.c_age", Op::Gt, 100);
    CHECK(m.probability(none) == 0);
    CHECK_THROWS_AS(m.conditional_expectation(age, none), EmptyCondition);
}

TEST_CASE("tuple-factor expectations over the toy join")
{
    const Database db = toy_db();
    const Rspn m = exact_model(db, tables_of(db.schema, {"customer", "order"}));
    CHECK(m.full_population_size == 5);
    /* rows: (c1,o1) (c1,o2) (c2,-) (c3,o3) (c3,o4); F' = 2,2,1,2,2 */
    TargetExpr inv;
    inv.times("F':customer<-order", ValueTransform::Reciprocal);
    Predicate nc;
    nc.add("N:customer", Op::Eq, 1);
    CHECK(m.expectation(inv, nc) == doctest::Approx((0.5 + 0.5 + 1 + 0.5 + 0.5) / 5).epsilon(1e-12));
    CHECK(m.expectation(inv.squared(), nc) == doctest::Approx((0.25 * 4 + 1) / 5).epsilon(1e-12));
}

TEST_CASE("NULL never satisfies a comparison")
{
    SampleTable t;
    t.add_column({"t.x", "t", "x", ColumnKind::Continuous, true}, {1, 2, kNull, 4});
    const Rspn m = build_exact_rspn(t, "t");
    for (Op op : {Op::Eq, Op::Ne, Op::Lt, Op::Le, Op::Gt, Op::Ge}) {
        Predicate p;
        p.add("t.x", op, 2);
        double expect = 0;
        for (double v : {1.0, 2.0, 4.0}) {
            Conjunct c{"t.x", op, {2}};
            expect += satisfies(c, v) ? 0.25 : 0;
        }
        CHECK(m.probability(p) == doctest::Approx(expect));
    }
    Predicate isnull, notnull;
    isnull.add_flag("t.x", Op::IsNull);
    notnull.add_flag("t.x", Op::NotNull);
    CHECK(m.probability(isnull) == doctest::Approx(0.25));
    CHECK(m.probability(notnull) == doctest::Approx(0.75));
    Predicate in;
    in.add_in("t.x", {1, 4, 9});
    CHECK(m.probability(in) == doctest::Approx(0.5));
}

TEST_CASE("probability is monotone under added conjuncts")
{
    std::mt19937_64 rng(4);
    SampleTable t;
    std::vector<double> a(800), b(800), c(800);
    for (std::size_t i = 0; i != a.size(); ++i) {
        a[i] = double(rng() % 10);
        b[i] = a[i] + double(rng() % 3);
        c[i] = double(rng() % 5);
    }
    t.add_column({"t.a", "t", "a"}, a);
    t.add_column({"t.b", "t", "b"}, b);
    t.add_column({"t.c", "t", "c"}, c);
    LearnParams lp;
    lp.min_instance_fraction = 0.05;
    const Rspn m = learn_rspn(t, lp, "t");
    m.validate();
    const char *cols[] = {"t.a", "t.b", "t.c"};
    const Op ops[] = {Op::Eq, Op::Lt, Op::Ge, Op::Ne};
    for (int round = 0; round != 300; ++round) {
        Predicate p;
        double last = 1;
        for (int k = 0; k != 4; ++k) {
            p.add(cols[rng() % 3], ops[rng() % 4], double(rng() % 12));
            const double now = m.probability(p);
            CHECK(now <= last + 1e-12);
            CHECK(now >= 0);
            last = now;
        }
    }
}

TEST_CASE("FD predicates are rewritten onto the determinant")
{
    const char *schema = R"({"tables": [{"name": "t", "csv": "t.csv", "primary_key": "id",
        "columns": [{"name": "id", "kind": "continuous"}, {"name": "zip", "kind": "continuous"},
                    {"name": "city", "kind": "categorical"}]}],
        "functional_dependencies": [{"table": "t", "determinant": "zip", "dependent": "city"}]})";
    const Database db =
        load_database(parse_schema(schema, ".", false), {{"t", "id,zip,city\n1,10,A\n2,10,A\n3,20,B\n4,30,B\n"}});
    const Rspn m = exact_model(db, TableSet::single(0));
    CHECK_FALSE(m.has_column("t.city"));
    Predicate p;
    p.add("t.city", Op::Eq, code(db, "t.city", "B"));
    CHECK(m.probability(p) == doctest::Approx(0.5));
    const Predicate tr = m.translate_fd_predicate(p);
    REQUIRE(tr.conjuncts.size() == 1);
    CHECK(tr.conjuncts[0].column == "t.zip");
    CHECK(tr.conjuncts[0].op == Op::In);
    CHECK(tr.conjuncts[0].values == std::vector<double>{20, 30});
}
