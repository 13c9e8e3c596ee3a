#pragma once

#include "rspn/compile.hpp"
#include "rspn/ensemble.hpp"
#include "rspn/oracle.hpp"

#include <filesystem>
#include <random>

namespace fixtures {

using namespace rspn;

/// The customer/order example: three customers, four orders, customer 2 without orders.
inline const char *kToySchema = R"({
  "tables": [
    {"name": "customer", "csv": "customer.csv", "primary_key": "c_id",
     "columns": [{"name": "c_id", "kind": "continuous"},
                 {"name": "c_age", "kind": "continuous"},
                 {"name": "c_region", "kind": "categorical"}]},
    {"name": "order", "csv": "order.csv", "primary_key": "o_id",
     "columns": [{"name": "o_id", "kind": "continuous"},
                 {"name": "c_id", "kind": "continuous"},
                 {"name": "o_channel", "kind": "categorical"}]}],
  "foreign_keys": [{"from": "order.c_id", "to": "customer.c_id"}]
})";

inline const std::map<std::string, std::string> kToyCsv = {
    {"customer", "c_id,c_age,c_region\n1,20,EUROPE\n2,50,EUROPE\n3,80,ASIA\n"},
    {"order", "o_id,c_id,o_channel\n1,1,ONLINE\n2,1,STORE\n3,3,ONLINE\n4,3,STORE\n"}};

inline Database toy_db() { return load_database(parse_schema(kToySchema, ".", false), kToyCsv); }

/// State, customer, orders, orderline with a few rows each, for ensemble selection.
inline const char *kStoreSchema = R"({
  "tables": [
    {"name": "state", "csv": "state.csv", "primary_key": "s_id",
     "columns": [{"name": "s_id", "kind": "continuous"}, {"name": "s_region", "kind": "categorical"}]},
    {"name": "customer", "csv": "customer.csv", "primary_key": "c_id",
     "columns": [{"name": "c_id", "kind": "continuous"}, {"name": "s_id", "kind": "continuous"},
                 {"name": "c_age", "kind": "continuous"}]},
    {"name": "orders", "csv": "orders.csv", "primary_key": "o_id",
     "columns": [{"name": "o_id", "kind": "continuous"}, {"name": "c_id", "kind": "continuous"},
                 {"name": "o_channel", "kind": "categorical"}]},
    {"name": "orderline", "csv": "orderline.csv", "primary_key": "ol_id",
     "columns": [{"name": "ol_id", "kind": "continuous"}, {"name": "o_id", "kind": "continuous"},
                 {"name": "ol_price", "kind": "continuous"}]}],
  "foreign_keys": [{"from": "customer.s_id", "to": "state.s_id"},
                   {"from": "orders.c_id", "to": "customer.c_id"},
                   {"from": "orderline.o_id", "to": "orders.o_id"}]
})";

inline Database store_db(std::uint64_t seed = 1)
{
    std::mt19937_64 rng(seed);
    std::string s = "s_id,s_region\n", c = "c_id,s_id,c_age\n", o = "o_id,c_id,o_channel\n", ol = "ol_id,o_id,ol_price\n";
    for (int i = 1; i <= 5; ++i) s += std::to_string(i) + "," + (i % 2 ? "EAST" : "WEST") + "\n";
    int oid = 0, olid = 0;
    for (int i = 1; i <= 200; ++i) {
        c += std::to_string(i) + "," + std::to_string(1 + rng() % 5) + "," + std::to_string(18 + rng() % 60) + "\n";
        for (int k = int(rng() % 4); k; --k) {
            o += std::to_string(++oid) + "," + std::to_string(i) + "," + (rng() % 2 ? "ONLINE" : "STORE") + "\n";
            for (int l = int(rng() % 3); l; --l)
                ol += std::to_string(++olid) + "," + std::to_string(oid) + "," + std::to_string(rng() % 100) + "\n";
        }
    }
    return load_database(parse_schema(kStoreSchema, ".", false),
                         {{"state", s}, {"customer", c}, {"orders", o}, {"orderline", ol}});
}

/// Fixed table dependency values for the store schema: C-O .6, O-OL .7, S-C .6, C-OL .5, S-O .2, S-OL .1.
inline DependencyProvider store_dependencies(const SchemaGraph &schema)
{
    return [&schema](unsigned a, unsigned b) {
        std::string x = schema.tables[a].name, y = schema.tables[b].name;
        if (y < x) std::swap(x, y);
        const std::map<std::pair<std::string, std::string>, double> v = {
            {{"customer", "orders"}, 0.6}, {{"orderline", "orders"}, 0.7}, {{"customer", "state"}, 0.6},
            {{"customer", "orderline"}, 0.5}, {{"orders", "state"}, 0.2}, {{"orderline", "state"}, 0.1}};
        return v.at({x, y});
    };
}

inline TableSet tables_of(const SchemaGraph &schema, std::initializer_list<const char *> names)
{
    TableSet s;
    for (auto n : names) s.insert(schema.require_table(n));
    return s;
}

/// Model whose answers equal a scan of its learning view.
inline Rspn exact_model(const Database &db, TableSet tables)
{
    Rspn m = build_exact_rspn(learning_view(db, tables, kDefaultMaxRows, 1));
    m.tables.clear();
    for (unsigned t : tables.members()) m.tables.push_back(db.schema.tables[t].name);
    m.id.clear();
    for (const auto &t : m.tables) m.id += (m.id.empty() ? "" : "|") + t;
    return m;
}

/// Ensemble of exact models over the given table sets.
inline Ensemble exact_ensemble(const Database &db, const std::vector<TableSet> &sets)
{
    Ensemble e;
    e.schema = db.schema;
    e.catalog = db.catalog;
    for (auto s : sets) e.rspns.push_back(exact_model(db, s));
    e.base_count = e.rspns.size();
    return e;
}

/// The two-cluster customer model: 30% of rows with 80% Europeans and 15% under 30, 70% with 10% and 20%.
inline Rspn two_cluster_customers()
{
    std::vector<SampleColumn> cols(2);
    cols[0] = {"customer.c_region", "customer", "c_region", ColumnKind::Categorical};
    cols[1] = {"customer.c_age", "customer", "c_age", ColumnKind::Continuous};
    RspnBuilder b("customer", cols);
    const double eu = 1, asia = 0;
    const auto r1 = b.leaf("customer.c_region", {{eu, 240}, {asia, 60}});
    const auto a1 = b.leaf("customer.c_age", {{25, 45}, {40, 255}});
    const auto r2 = b.leaf("customer.c_region", {{eu, 70}, {asia, 630}});
    const auto a2 = b.leaf("customer.c_age", {{25, 140}, {40, 560}});
    const auto p1 = b.product({r1, a1});
    const auto p2 = b.product({r2, a2});
    return b.finish(b.sum({p1, p2}, {300, 700}), 1000, {"customer"});
}

inline double code(const Database &db, const std::string &column, const std::string &text)
{
    return *db.catalog.find(column)->code(text);
}

/// Scratch directory removed on destruction.
struct TempDir
{
    std::filesystem::path path;

    TempDir()
    {
        std::random_device rd;
        path = std::filesystem::temp_directory_path() / ("rspn_test_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}
