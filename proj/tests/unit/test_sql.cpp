#include <doctest.h>

#include "fixtures.hpp"

using namespace rspn;
using namespace fixtures;

TEST_CASE("parsing the supported subset")
{
    const Database db = toy_db();
    const auto parse = [&](const char *sql) { return parse_query(sql, db.schema, db.catalog); };

    const Query q = parse("SELECT COUNT(*) FROM customer c JOIN \"order\" o ON o.c_id = c.c_id "
                          "WHERE c.c_region = 'EUROPE' AND o.o_channel = 'ONLINE'");
    CHECK(q.aggregate == Aggregate::Count);
    CHECK(q.tables.size() == 2);
    REQUIRE(q.predicate.conjuncts.size() == 2);
    CHECK(q.predicate.conjuncts[0] == Conjunct{"customer.c_region", Op::Eq, {code(db, "customer.c_region", "EUROPE")}});
    CHECK(q.predicate.conjuncts[1].column == "order.o_channel");

    const Query avg = parse("select avg(c_age) from customer where c_age >= 30 and c_region in ('ASIA', 'MARS');");
    CHECK(avg.aggregate == Aggregate::Avg);
    CHECK(avg.aggregate_column == "customer.c_age");
    CHECK(avg.predicate.conjuncts[0].op == Op::Ge);
    CHECK(avg.predicate.conjuncts[1].values == std::vector<double>{code(db, "customer.c_region", "ASIA")});

    const Query grp = parse("SELECT c_region, SUM(c_age) FROM customer GROUP BY c_region");
    CHECK(grp.group_by == std::vector<std::string>{"customer.c_region"});

    const Query left = parse("SELECT COUNT(*) FROM customer LEFT OUTER JOIN \"order\" ON customer.c_id = \"order\".c_id");
    CHECK(left.join_kinds[1] == JoinKind::Left);
    CHECK(left.has_outer_join());
    CHECK(left.required_tables(db.schema) == tables_of(db.schema, {"customer"}));
    const Query rejecting = parse("SELECT COUNT(*) FROM customer LEFT JOIN \"order\" ON customer.c_id = \"order\".c_id "
                                  "WHERE o_channel = 'STORE'");
    CHECK(rejecting.required_tables(db.schema) == tables_of(db.schema, {"customer", "order"}));

    const Query natural = parse("SELECT COUNT(*) FROM customer NATURAL JOIN \"order\"");
    CHECK(natural.table_set() == tables_of(db.schema, {"customer", "order"}));

    /* an unknown category matches nothing */
    const Query mars = parse("SELECT COUNT(*) FROM customer WHERE c_region = 'MARS'");
    CHECK(mars.predicate.conjuncts[0].op == Op::In);
    CHECK(mars.predicate.conjuncts[0].values.empty());
}

TEST_CASE("rejected queries")
{
    const Database db = toy_db();
    const auto parse = [&](const char *sql) { return parse_query(sql, db.schema, db.catalog); };
    CHECK_THROWS_AS(parse("SELEC COUNT(*) FROM customer"), UnsupportedQuery);
    CHECK_THROWS_AS(parse("SELECT COUNT(*) FROM customer WHERE c_age > 1 OR c_age < 0"), UnsupportedQuery);
    CHECK_THROWS_AS(parse("SELECT COUNT(*) FROM customer, \"order\""), UnsupportedQuery);
    CHECK_THROWS_AS(parse("SELECT COUNT(*) FROM customer WHERE c_id = 1"), UnsupportedQuery);
    CHECK_THROWS_AS(parse("SELECT AVG(c_region) FROM customer"), UnsupportedQuery);
    CHECK_THROWS_AS(parse("SELECT c_age, COUNT(*) FROM customer"), UnsupportedQuery);
    CHECK_THROWS_AS(parse("SELECT COUNT(*) FROM customer WHERE c_age = 'old'"), UnsupportedQuery);
    CHECK_THROWS_AS(parse("SELECT COUNT(*) FROM supplier"), InputError);
    CHECK_THROWS_AS(parse("SELECT COUNT(*) FROM customer WHERE height > 3"), InputError);
    CHECK_THROWS_AS(parse("SELECT COUNT(*) FROM customer JOIN \"order\" ON customer.c_id = \"order\".c_id "
                          "WHERE c_id > 3"),
                    InputError);
}

TEST_CASE("to_sql round trips through the parser")
{
    const Database db = store_db();
    const char *queries[] = {
        "SELECT COUNT(*) FROM customer WHERE c_age < 30",
        "SELECT AVG(ol_price) FROM orders JOIN orderline ON orderline.o_id = orders.o_id WHERE o_channel = 'ONLINE'",
        "SELECT s_region, COUNT(*) FROM state JOIN customer ON customer.s_id = state.s_id GROUP BY s_region",
        "SELECT SUM(c_age) FROM customer LEFT JOIN orders ON orders.c_id = customer.c_id WHERE c_age IN (20, 30, 40)",
    };
    for (const char *sql : queries) {
        const Query q = parse_query(sql, db.schema, db.catalog);
        const Query again = parse_query(to_sql(q, db.schema, db.catalog), db.schema, db.catalog);
        CHECK(again.aggregate == q.aggregate);
        CHECK(again.aggregate_column == q.aggregate_column);
        CHECK(again.table_set() == q.table_set());
        CHECK(again.join_kinds == q.join_kinds);
        CHECK(again.predicate == q.predicate);
        CHECK(again.group_by == q.group_by);
    }
}
