#include <doctest.h>

#include "fixtures.hpp"
#include "rspn/csv.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

using namespace rspn;
using namespace fixtures;

namespace {

std::vector<std::vector<CsvField>> read_all(const std::string &text)
{
    std::istringstream in(text);
    CsvReader r(in);
    std::vector<std::vector<CsvField>> out;
    while (auto rec = r.next()) out.push_back(*rec);
    return out;
}

std::string schema_with_fk(const std::string &fks)
{
    return R"({"tables": [
      {"name": "a", "csv": "a.csv", "primary_key": "id", "columns": [{"name": "id", "kind": "continuous"},
                                                                       {"name": "b_id", "kind": "continuous"}]},
      {"name": "b", "csv": "b.csv", "primary_key": "id", "columns": [{"name": "id", "kind": "continuous"},
                                                                       {"name": "a_id", "kind": "continuous"}]}],
      "foreign_keys": [)" + fks + "]}";
}

}

TEST_CASE("csv: quoting, NULL and the empty string")
{
    const auto rows = read_all("a,b,c\n\"x, y\",,\"\"\n\"multi\nline\",\"q\"\"q\",3\r\n\n");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1][0].text == "x, y");
    CHECK(rows[1][1].is_null());
    CHECK_FALSE(rows[1][2].is_null());
    CHECK(rows[1][2].text.empty());
    CHECK(rows[2][0].text == "multi\nline");
    CHECK(rows[2][1].text == "q\"q");
    CHECK(rows[2][2].text == "3");
    CHECK_THROWS_AS(read_all("a\n\"open"), InputError);
}

TEST_CASE("csv: numbers and escaping")
{
    double v = 0;
    CHECK(parse_number(" 12.5 ", v));
    CHECK(v == 12.5);
    CHECK(parse_number("+3", v));
    CHECK(v == 3);
    CHECK(parse_number("-1e3", v));
    CHECK(v == -1000);
    CHECK_FALSE(parse_number("abc", v));
    CHECK_FALSE(parse_number("1.2.3", v));
    CHECK_FALSE(parse_number("", v));
    CHECK_FALSE(parse_number("inf", v));
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("") == "\"\"");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("schema: validation")
{
    const SchemaGraph g = parse_schema(kToySchema, ".", false);
    CHECK(g.tables.size() == 2);
    CHECK(g.fks.size() == 1);
    CHECK_FALSE(g.multi_component);
    CHECK(g.referenced_index(g.fks[0]) == g.require_table("customer"));
    CHECK(g.table_index("ORDER") == 1);
    CHECK(g.key_columns(1).size() == 2);

    CHECK_THROWS_AS(parse_schema("{", ".", false), InputError);
    CHECK_THROWS_AS(parse_schema(R"({"tables": 3})", ".", false), InputError);
    CHECK_THROWS_AS(parse_schema(schema_with_fk(R"({"from": "a.b_id", "to": "c.id"})"), ".", false), InputError);
    CHECK_THROWS_AS(parse_schema(schema_with_fk(R"({"from": "a.nope", "to": "b.id"})"), ".", false), InputError);
    CHECK_THROWS_AS(parse_schema(schema_with_fk(R"({"from": "a.b_id", "to": "b.a_id"})"), ".", false), InputError);
    /* a.b_id -> b and b.a_id -> a form a cycle */
    CHECK_THROWS_AS(parse_schema(schema_with_fk(R"({"from": "a.b_id", "to": "b.id"}, {"from": "b.a_id", "to": "a.id"})"),
                                 ".", false),
                    InputError);
    const SchemaGraph two = parse_schema(schema_with_fk(""), ".", false);
    CHECK(two.multi_component);
    CHECK_THROWS_AS(load_schema("/nonexistent/schema.json"), InputError);

    TempDir dir;
    std::ofstream(dir.path / "schema.json") << kToySchema;
    CHECK_THROWS_AS(load_schema(dir.path / "schema.json"), InputError); /* CSV files missing */
}

TEST_CASE("ingest: encoding, tuple factors and errors")
{
    const Database db = toy_db();
    const SampleTable &c = db.table("customer");
    CHECK(c.rows() == 3);
    CHECK(db.schema.tables[0].row_count == 3);
    /* lexicographic codes at ingestion */
    CHECK(code(db, "customer.c_region", "ASIA") == 0);
    CHECK(code(db, "customer.c_region", "EUROPE") == 1);
    CHECK(db.catalog.render("customer.c_region", 0) == "ASIA");
    CHECK(db.catalog.render("customer.c_age", kNull) == "NULL");
    const auto &f = c.data[c.require("F:customer<-order")];
    CHECK(f == std::vector<double>{2, 0, 2});

    const SchemaGraph s = parse_schema(kToySchema, ".", false);
    auto broken = kToyCsv;
    broken["order"] = "o_id,c_id,o_channel\n1,7,ONLINE\n";
    CHECK_THROWS_AS(load_database(s, broken), InputError);
    broken = kToyCsv;
    broken["customer"] = "c_id,c_age,c_region\n1,20,EUROPE\n1,50,EUROPE\n";
    CHECK_THROWS_AS(load_database(s, broken), InputError);
    broken = kToyCsv;
    broken["customer"] = "c_id,age,c_region\n1,20,EUROPE\n";
    CHECK_THROWS_AS(load_database(s, broken), InputError);
    broken = kToyCsv;
    broken["customer"] = "c_id,c_age,c_region\n1,,EUROPE\n";
    CHECK_THROWS_AS(load_database(s, broken), InputError);
    broken = kToyCsv;
    broken["customer"] = "c_id,c_age,c_region\n1,old,EUROPE\n";
    CHECK_THROWS_AS(load_database(s, broken), InputError);
    broken = kToyCsv;
    broken["customer"] = "c_id,c_age,c_region\n1,20\n";
    CHECK_THROWS_AS(load_database(s, broken), InputError);
}

TEST_CASE("ingest: preseeded dictionaries keep their codes")
{
    Catalog seed;
    seed.dictionaries["customer.c_region"].intern("MARS");
    const Database db = load_database(parse_schema(kToySchema, ".", false), kToyCsv, &seed);
    CHECK(code(db, "customer.c_region", "MARS") == 0);
    CHECK(code(db, "customer.c_region", "EUROPE") == 1);
    CHECK(code(db, "customer.c_region", "ASIA") == 2);
}

TEST_CASE("full outer join of the toy tables")
{
    const Database db = toy_db();
    const TableSet both = tables_of(db.schema, {"customer", "order"});
    const SampleTable j = full_outer_join_sample(db, both, 100, 1);
    CHECK(j.rows() == 5);
    CHECK(j.full_population_size == 5);
    CHECK(full_outer_join_size(db, both) == 5);
    CHECK(j.sample_rate == 1.0);
    const auto &nc = j.data[j.require("N:customer")];
    const auto &no = j.data[j.require("N:order")];
    const auto &fp = j.data[j.require("F':customer<-order")];
    const auto &age = j.data[j.require("customer.c_age")];
    double n_order = 0, padded_age = -1, fp_sum = 0;
    for (std::size_t r = 0; r != 5; ++r) {
        CHECK(nc[r] == 1);
        n_order += no[r];
        fp_sum += fp[r];
        if (no[r] == 0) {
            padded_age = age[r];
            CHECK(fp[r] == 1);
        }
    }
    CHECK(n_order == 4);
    CHECK(padded_age == 50);
    CHECK(fp_sum == 2 + 2 + 1 + 2 + 2);
    CHECK(j.find("F:customer<-order") < 0);

    const SampleTable single = full_outer_join_sample(db, tables_of(db.schema, {"customer"}), 100, 1);
    CHECK(single.rows() == 3);
    CHECK(single.find("F:customer<-order") >= 0);
    CHECK(single.find("N:customer") < 0);

    const SampleTable sampled = full_outer_join_sample(db, both, 2, 9);
    CHECK(sampled.rows() == 2);
    CHECK(sampled.full_population_size == 5);
    CHECK(sampled.sample_rate == doctest::Approx(0.4));
}

TEST_CASE("learning view drops keys and projects functional dependencies")
{
    const char *schema = R"({"tables": [{"name": "t", "csv": "t.csv", "primary_key": "id",
        "columns": [{"name": "id", "kind": "continuous"}, {"name": "zip", "kind": "continuous"},
                    {"name": "city", "kind": "categorical"}]}],
        "functional_dependencies": [{"table": "t", "determinant": "zip", "dependent": "city"}]})";
    const SchemaGraph s = parse_schema(schema, ".", false);
    const Database db = load_database(s, {{"t", "id,zip,city\n1,10,A\n2,10,A\n3,20,B\n"}});
    const SampleTable v = learning_view(db, TableSet::single(0), 100, 1);
    CHECK(v.find("t.id") < 0);
    CHECK(v.find("t.city") < 0);
    CHECK(v.find("t.zip") >= 0);
    REQUIRE(v.fd_dictionaries.size() == 1);
    CHECK(v.fd_dictionaries[0].dictionary.at(10) == code(db, "t.city", "A"));
    CHECK(v.fd_dictionaries[0].dictionary.at(20) == code(db, "t.city", "B"));

    /* a violated FD is dropped and both columns are kept */
    const Database bad = load_database(s, {{"t", "id,zip,city\n1,10,A\n2,10,B\n"}});
    std::vector<std::string> dropped;
    const SampleTable w = apply_fd_projection(drop_key_columns(full_outer_join_sample(bad, TableSet::single(0), 100, 1)),
                                              bad.schema.fds, &dropped);
    CHECK(dropped.size() == 1);
    CHECK(w.find("t.city") >= 0);
    CHECK(w.fd_dictionaries.empty());
}
