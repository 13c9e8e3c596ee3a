#include <doctest.h>

#include "fixtures.hpp"
#include "rspn/maintenance.hpp"
#include "rspn/synth.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

using namespace rspn;
using namespace fixtures;

namespace {

Database chain_db(std::size_t rows, std::uint64_t seed)
{
    SynthOptions so;
    so.tables = 3;
    so.root_rows = rows;
    so.chain = true;
    so.seed = seed;
    return load_synthetic(generate_synthetic(so));
}

double max_key(const Database &db, unsigned t)
{
    const auto &col = db.tables[t].data[db.tables[t].require(db.schema.tables[t].name + ".id")];
    return *std::max_element(col.begin(), col.end());
}

/// Insert feed: new root rows, children under new and old parents.
std::string insert_feed(const Database &db, int per_table, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::ostringstream out;
    std::vector<double> next(3);
    for (unsigned t = 0; t != 3; ++t) next[t] = max_key(db, t) + 1;
    std::vector<std::vector<double>> keys(3);
    for (unsigned t = 0; t != 3; ++t) {
        const auto &col = db.tables[t].data[db.tables[t].require(db.schema.tables[t].name + ".id")];
        keys[t] = col;
    }
    for (int i = 0; i != per_table; ++i)
        for (unsigned t = 0; t != 3; ++t) {
            const unsigned cat = unsigned(rng() % 8);
            const double id = next[t]++;
            out << "I,t" << t << ',' << id;
            if (t) out << ',' << keys[t - 1][rng() % keys[t - 1].size()];
            out << ",c" << cat << ',' << rng() % 100 << ',';
            if (rng() % 4) out << rng() % 5;
            if (t == 0) out << ",z" << cat / 2;
            out << '\n';
            keys[t].push_back(id);
        }
    return out.str();
}

std::vector<UpdateRecord> parse_feed(const std::string &text, const SchemaGraph &schema)
{
    std::istringstream in(text);
    return read_updates(in, schema);
}

/// Largest gap between the model's marginal counts and those of the current data.
double marginal_gap(const Database &db, const Rspn &m)
{
    TableSet set;
    for (const auto &t : m.tables) set.insert(db.schema.require_table(t));
    const SampleTable view = learning_view(db, set, kDefaultMaxRows, 1);
    double gap = std::abs(m.full_population_size - double(view.rows()));
    for (const auto &c : m.columns) {
        const auto &values = view.data[view.require(c.id)];
        std::map<double, double> counts;
        double nulls = 0;
        for (double v : values) is_null(v) ? (void)++nulls : (void)++counts[v];
        for (const auto &[v, n] : counts) {
            Predicate p;
            p.add(c.id, Op::Eq, v);
            gap = std::max(gap, std::abs(m.full_population_size * m.probability(p) - n));
        }
        Predicate p;
        p.add_flag(c.id, Op::IsNull);
        gap = std::max(gap, std::abs(m.full_population_size * m.probability(p) - nulls));
    }
    return gap;
}

}

TEST_CASE("inserts keep every model's population and marginals equal to the data")
{
    Database db = chain_db(300, 2);
    EnsembleParams p;
    p.learn.rdc_threshold = 0.999;
    p.budget_factor = 10;
    Ensemble e = build_base_ensemble(db, p);
    optimize_ensemble(e, db, p);
    Maintainer maint(db, e, 1);
    const MaintenanceStats s = maint.apply(parse_feed(insert_feed(db, 40, 3), db.schema));
    CHECK(s.inserts == 120);
    CHECK(s.deletes == 0);
    CHECK(s.model_operations > 120);
    for (const auto &m : e.rspns) {
        INFO(m.id);
        m.validate();
        TableSet set;
        for (const auto &t : m.tables) set.insert(db.schema.require_table(t));
        CHECK(m.full_population_size == double(full_outer_join_size(db, set)));
        CHECK(m.n_samples == m.full_population_size);
        CHECK(marginal_gap(db, m) < 1e-6);
    }
    CHECK(maint.dirty_tables() == std::vector<std::string>{"t0", "t1", "t2"});
}

TEST_CASE("deleting inserted rows restores the models")
{
    Database db = chain_db(200, 5);
    Ensemble e = build_base_ensemble(db, EnsembleParams{});
    const Ensemble before = e;
    const std::string feed = insert_feed(db, 25, 9);
    Maintainer maint(db, e, 1);
    maint.apply(parse_feed(feed, db.schema));
    /* reverse order so no row is deleted while still referenced */
    std::vector<std::string> lines;
    std::istringstream in(feed);
    for (std::string line; std::getline(in, line);) lines.push_back("D" + line.substr(1));
    std::reverse(lines.begin(), lines.end());
    std::string undo;
    for (const auto &l : lines) undo += l + "\n";
    const MaintenanceStats s = maint.apply(parse_feed(undo, db.schema));
    CHECK(s.deletes == 75);
    REQUIRE(e.rspns.size() == before.rspns.size());
    for (std::size_t i = 0; i != e.rspns.size(); ++i) {
        INFO(e.rspns[i].id);
        CHECK(e.rspns[i].nodes == before.rspns[i].nodes);
        CHECK(e.rspns[i].leaves == before.rspns[i].leaves);
        CHECK(e.rspns[i].full_population_size == before.rspns[i].full_population_size);
    }
}

TEST_CASE("rejected update records")
{
    Database db = chain_db(50, 1);
    Ensemble e = build_base_ensemble(db, EnsembleParams{});
    Maintainer maint(db, e, 1);
    const auto apply = [&](const char *text) { return maint.apply(parse_feed(text, db.schema)); };
    CHECK_THROWS_AS(parse_feed("X,t0,1,c1,2,3,z0\n", db.schema), InputError);
    CHECK_THROWS_AS(parse_feed("I,nope,1\n", db.schema), InputError);
    CHECK_THROWS_AS(parse_feed("I,t0,1,c1\n", db.schema), InputError);
    CHECK_THROWS_AS(apply("I,t0,1,c1,2,3,z0\n"), InputError);        /* key exists */
    CHECK_THROWS_AS(apply("D,t0,999999,c1,2,3,z0\n"), InputError);   /* no such key */
    CHECK_THROWS_AS(apply("I,t1,999999,888888,c1,2,3\n"), InputError); /* dangling parent */
    CHECK_THROWS_AS(apply("I,t0,999999,c1,abc,3,z0\n"), InputError); /* bad number */
    CHECK_THROWS_AS(apply("I,t0,999999,,2,3,z0\n"), InputError);     /* NULL in a required column */
    const double parent = db.tables[1].data[db.tables[1].require("t1.pid")][0];
    const std::string still_referenced = "D,t0," + std::to_string(std::llround(parent)) + ",c1,2,3,z0\n";
    CHECK_THROWS_AS(apply(still_referenced.c_str()), InputError);
}

TEST_CASE("write back rewrites changed tables")
{
    TempDir dir;
    SynthOptions so;
    so.tables = 2;
    so.root_rows = 40;
    write_synthetic(generate_synthetic(so), dir.path);
    Database db = load_database(load_schema(dir.path / "schema.json"));
    Ensemble e = build_base_ensemble(db, EnsembleParams{});
    Maintainer maint(db, e, 1);
    std::istringstream in("I,t1,100000,1,c5,7,\n");
    maint.apply(read_updates(in, db.schema));
    CHECK(maint.dirty_tables() == std::vector<std::string>{"t1"});
    maint.write_back();
    const Database again = load_database(load_schema(dir.path / "schema.json"));
    CHECK(again.tables[1].rows() == db.tables[1].rows());
    CHECK(table_csv(again, 1) == table_csv(db, 1));
}
