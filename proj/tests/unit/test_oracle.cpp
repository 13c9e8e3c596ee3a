#include <doctest.h>

#include "fixtures.hpp"
#include "rspn/synth.hpp"
#include "rspn/workload.hpp"

#include <cmath>

using namespace rspn;
using namespace fixtures;

TEST_CASE("oracle on the toy data")
{
    const Database db = toy_db();
    const auto run = [&](const char *sql) { return scan_oracle(db, parse_query(sql, db.schema, db.catalog)); };
    CHECK(run("SELECT COUNT(*) FROM customer NATURAL JOIN \"order\"").value == 4);
    CHECK(run("SELECT COUNT(*) FROM customer NATURAL LEFT JOIN \"order\"").value == 5);
    CHECK(run("SELECT COUNT(*) FROM \"order\" NATURAL LEFT JOIN customer").value == 4);
    CHECK(run("SELECT AVG(c_age) FROM customer NATURAL JOIN \"order\"").value == 50);
    CHECK(std::isnan(run("SELECT AVG(c_age) FROM customer WHERE c_age > 99").value));
    const ExactAnswer g = run("SELECT o_channel, COUNT(*) FROM customer NATURAL LEFT JOIN \"order\" GROUP BY o_channel");
    REQUIRE(g.groups.size() == 3);
    CHECK(g.groups[0].value == 2);
    CHECK(g.groups[1].value == 2);
    CHECK(std::isnan(g.groups[2].key[0]));
    CHECK(g.groups[2].value == 1);
}

TEST_CASE("scan oracle agrees with nested-loop evaluation")
{
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        SynthOptions so;
        so.tables = 2 + unsigned(seed % 3);
        so.root_rows = 60;
        so.seed = seed;
        const Database db = load_synthetic(generate_synthetic(so));
        for (Aggregate agg : {Aggregate::Count, Aggregate::Avg}) {
            WorkloadOptions wo;
            wo.queries = 25;
            wo.aggregate = agg;
            wo.outer_join_probability = 0.4;
            wo.seed = seed * 7 + unsigned(agg);
            for (const Query &q : generate_workload(db, wo)) {
                INFO(q.text);
                const ExactAnswer a = scan_oracle(db, q), b = naive_evaluate(db, q);
                CHECK(a.count == b.count);
                if (std::isnan(b.value)) CHECK(std::isnan(a.value));
                else CHECK(a.value == doctest::Approx(b.value).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("q-error and percentiles")
{
    CHECK(q_error(10, 5) == 2);
    CHECK(q_error(5, 10) == 2);
    CHECK(q_error(0, 0) == 1);
    CHECK(q_error(0.2, 3) == 3);
    CHECK(percentile({5, 1, 3, 2, 4}, 0.5) == 3);
    CHECK(percentile({5, 1, 3, 2, 4}, 1) == 5);
    CHECK(percentile({5, 1, 3, 2, 4}, 0) == 1);
    CHECK(percentile({7}, 0.95) == 7);
}

TEST_CASE("generated workloads are nonempty and within bounds")
{
    SynthOptions so;
    so.tables = 4;
    so.root_rows = 100;
    const Database db = load_synthetic(generate_synthetic(so));
    WorkloadOptions wo;
    wo.queries = 50;
    wo.max_tables = 3;
    for (const Query &q : generate_workload(db, wo)) {
        CHECK(q.tables.size() <= 3);
        CHECK(db.schema.is_connected(q.table_set()));
        CHECK(scan_oracle(db, q).value >= 1);
    }
}
