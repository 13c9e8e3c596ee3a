#include <doctest.h>

#include "fixtures.hpp"
#include "rspn/synth.hpp"
#include "rspn/workload.hpp"

#include <cmath>

using namespace rspn;
using namespace fixtures;

namespace {

struct Toy
{
    Database db = toy_db();
    Ensemble e = exact_ensemble(db, {tables_of(db.schema, {"customer", "order"}), tables_of(db.schema, {"customer"}),
                                     tables_of(db.schema, {"order"})});
    QueryEngine engine{e};

    FactorExpr count(const char *sql, std::vector<std::string> ids) const
    {
        const Query q = engine.parse(sql);
        return engine.compile_count(q, engine.plan_with(q, ids));
    }
};

constexpr const char *kEuropeCustomers = "SELECT COUNT(*) FROM customer WHERE c_region = 'EUROPE'";
constexpr const char *kEuropeOnline =
    "SELECT COUNT(*) FROM customer NATURAL JOIN \"order\" WHERE c_region = 'EUROPE' AND o_channel = 'ONLINE'";

}

TEST_CASE("worked examples on the customer/order data")
{
    const Toy t;
    const FactorExpr q1_join = t.count(kEuropeCustomers, {"customer|order"});
    CHECK(q1_join.case_label == "Case 2");
    CHECK(q1_join.value(t.e) == doctest::Approx(2).epsilon(1e-9));
    const FactorExpr q1_single = t.count(kEuropeCustomers, {"customer"});
    CHECK(q1_single.case_label == "Case 1");
    CHECK(q1_single.value(t.e) == doctest::Approx(2).epsilon(1e-9));

    const FactorExpr q2 = t.count(kEuropeOnline, {"customer|order"});
    CHECK(q2.case_label == "Case 1");
    CHECK(q2.value(t.e) == doctest::Approx(1).epsilon(1e-9));

    const FactorExpr q3 = t.count(kEuropeOnline, {"customer", "order"});
    CHECK(q3.case_label == "Case 3");
    CHECK(q3.value(t.e) == doctest::Approx(1).epsilon(1e-9));
    CHECK(t.count(kEuropeOnline, {"order", "customer"}).value(t.e) == doctest::Approx(1).epsilon(1e-9));

    const Estimate avg = t.engine.execute("SELECT AVG(c_age) FROM customer WHERE c_region = 'EUROPE'");
    CHECK(avg.value == doctest::Approx(35).epsilon(1e-9));
    CHECK_FALSE(avg.plan.empty());
}

TEST_CASE("outer joins, sums and groups on the toy data")
{
    const Toy t;
    const char *left = "SELECT COUNT(*) FROM customer NATURAL LEFT JOIN \"order\"";
    CHECK(t.count(left, {"customer|order"}).value(t.e) == doctest::Approx(5));
    CHECK(t.count(left, {"customer", "order"}).value(t.e) == doctest::Approx(5));
    CHECK(t.engine.execute("SELECT COUNT(*) FROM customer NATURAL JOIN \"order\"").value == doctest::Approx(4));
    CHECK(t.engine.execute("SELECT AVG(c_age) FROM customer NATURAL JOIN \"order\"").value == doctest::Approx(50));
    CHECK(t.engine.execute("SELECT SUM(c_age) FROM customer NATURAL JOIN \"order\" WHERE o_channel = 'ONLINE'").value ==
          doctest::Approx(100));

    const Estimate g = t.engine.execute("SELECT c_region, COUNT(*) FROM customer NATURAL JOIN \"order\" GROUP BY c_region");
    REQUIRE(g.groups.size() == 2);
    CHECK(g.groups[0].labels[0] == "ASIA");
    CHECK(g.groups[0].value == doctest::Approx(2));
    CHECK(g.groups[1].labels[0] == "EUROPE");
    CHECK(g.groups[1].value == doctest::Approx(2));
    CHECK(g.value == doctest::Approx(4));

    CHECK(t.engine.estimate_cardinality("SELECT COUNT(*) FROM customer WHERE c_age > 1000") == 1);
    CHECK_THROWS_AS(t.engine.execute("SELECT AVG(c_age) FROM customer WHERE c_age > 1000"), EmptyCondition);
}

TEST_CASE("regression and classification")
{
    const Toy t;
    Predicate asia;
    asia.add("customer.c_region", Op::Eq, code(t.db, "customer.c_region", "ASIA"));
    CHECK(t.engine.regress("customer.c_age", asia) == doctest::Approx(80));
    Predicate old;
    old.add("customer.c_age", Op::Gt, 60);
    CHECK(t.engine.classify("customer.c_region", old) == code(t.db, "customer.c_region", "ASIA"));
    CHECK_THROWS_AS(t.engine.regress("customer.c_height", asia), UnsupportedQuery);
}

TEST_CASE("a table with no model is reported")
{
    const Database db = toy_db();
    const Ensemble e = exact_ensemble(db, {tables_of(db.schema, {"customer"})});
    const QueryEngine engine(e);
    CHECK_THROWS_AS(engine.execute("SELECT COUNT(*) FROM \"order\""), UnsupportedQuery);
}

TEST_CASE("exact models answer generated workloads like the scan oracle")
{
    SynthOptions so;
    so.tables = 3;
    so.root_rows = 150;
    so.seed = 4;
    const Database db = load_synthetic(generate_synthetic(so));
    const Ensemble e = exact_ensemble(db, {db.schema.all_tables()});
    const QueryEngine engine(e);
    for (Aggregate agg : {Aggregate::Count, Aggregate::Avg, Aggregate::Sum}) {
        WorkloadOptions wo;
        wo.queries = 60;
        wo.aggregate = agg;
        wo.outer_join_probability = 0.3;
        wo.seed = 10 + unsigned(agg);
        for (const Query &q : generate_workload(db, wo)) {
            const ExactAnswer truth = scan_oracle(db, q);
            if (agg == Aggregate::Avg && std::isnan(truth.value)) continue;
            const Estimate est = engine.execute(q);
            INFO(q.text);
            CHECK(est.value == doctest::Approx(truth.value).epsilon(1e-9).scale(1));
        }
    }
}

TEST_CASE("identities between compiled aggregates")
{
    SynthOptions so;
    so.tables = 2;
    so.root_rows = 300;
    so.seed = 9;
    const Database db = load_synthetic(generate_synthetic(so));
    const TableSet all = db.schema.all_tables();
    const Ensemble e = exact_ensemble(db, {all, TableSet::single(0), TableSet::single(1)});
    const QueryEngine engine(e);
    WorkloadOptions wo;
    wo.queries = 80;
    wo.seed = 3;
    for (Query q : generate_workload(db, wo)) {
        INFO(q.text);
        const Plan joint = engine.plan_with(q, {e.rspns[0].id});
        const double count = engine.compile_count(q, joint).value(e);
        /* Case 1 on the join model and Case 2 on a superset model agree when both are exact */
        if (q.tables.size() == 1) {
            const Plan single = engine.plan_with(q, {e.rspns[1 + q.tables[0]].id});
            CHECK(engine.compile_count(q, single).value(e) == doctest::Approx(count).epsilon(1e-9));
        }
        /* SUM = COUNT(non-NULL) * AVG */
        const std::string column = db.schema.tables[q.tables.back()].name + ".num";
        Query sum = q, avg = q, nonnull = q;
        sum.aggregate = Aggregate::Sum;
        avg.aggregate = Aggregate::Avg;
        sum.aggregate_column = avg.aggregate_column = column;
        nonnull.predicate.add_flag(column, Op::NotNull);
        const double n = engine.compile_count(nonnull, joint).value(e);
        if (n > 0)
            CHECK(engine.execute(sum).value ==
                  doctest::Approx(n * engine.execute(avg).value).epsilon(1e-9));
        /* group counts partition the total */
        Query grouped = q;
        grouped.group_by = {db.schema.tables[q.tables.front()].name + ".cat"};
        const Estimate g = engine.execute(grouped);
        double total = 0;
        for (const auto &grp : g.groups) total += grp.value;
        CHECK(total == doctest::Approx(count).epsilon(1e-9));
    }
}
