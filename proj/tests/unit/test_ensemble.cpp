#include <doctest.h>

#include "fixtures.hpp"

#include <fstream>

using namespace rspn;
using namespace fixtures;

namespace {

std::vector<std::string> ids(const Ensemble &e)
{
    std::vector<std::string> out;
    for (const auto &m : e.rspns) out.push_back(m.id);
    return out;
}

}

TEST_CASE("base construction with injected dependencies selects the three join models")
{
    const Database db = store_db();
    EnsembleParams p;
    p.dependency = store_dependencies(db.schema);
    p.budget_factor = 0;
    Ensemble e = build_base_ensemble(db, p);
    e.validate();
    CHECK(ids(e) == std::vector<std::string>{"state|customer", "customer|orders", "orders|orderline"});
    CHECK(e.base_count == 3);
    CHECK(optimize_ensemble(e, db, p) == 0);
    CHECK(e.rspns.size() == 3);

    const auto ranked = rank_candidates(e, db, p);
    REQUIRE(ranked.size() >= 2);
    CHECK(ranked[0].tables == tables_of(db.schema, {"customer", "orders", "orderline"}));
    CHECK(ranked[0].mean_rdc == doctest::Approx(0.6));
    CHECK(ranked[1].tables == tables_of(db.schema, {"state", "customer", "orders"}));
    CHECK(ranked[1].mean_rdc == doctest::Approx((0.6 + 0.6 + 0.2) / 3));
}

TEST_CASE("a threshold above every dependency leaves single-table models")
{
    const Database db = store_db();
    EnsembleParams p;
    p.dependency = store_dependencies(db.schema);
    p.learn.rdc_threshold = 0.8;
    const Ensemble e = build_base_ensemble(db, p);
    CHECK(ids(e) == std::vector<std::string>{"state", "customer", "orders", "orderline"});
}

TEST_CASE("the budget admits candidates in rank order")
{
    const Database db = store_db();
    EnsembleParams p;
    p.dependency = store_dependencies(db.schema);
    p.budget_factor = 100;
    Ensemble e = build_base_ensemble(db, p);
    const std::size_t added = optimize_ensemble(e, db, p);
    CHECK(added >= 1);
    CHECK(e.rspns[3].id == "customer|orders|orderline");
    e.validate();
}

TEST_CASE("serialization round trip and damaged files")
{
    const Database db = store_db();
    EnsembleParams p;
    p.dependency = store_dependencies(db.schema);
    const Ensemble e = build_base_ensemble(db, p);
    const std::string bytes = serialize_ensemble(e);
    const Ensemble back = deserialize_ensemble(bytes);
    CHECK(back == e);

    TempDir dir;
    save_ensemble(e, dir.path / "m.bin");
    CHECK(load_ensemble(dir.path / "m.bin") == e);
    CHECK_THROWS_AS(load_ensemble(dir.path / "missing.bin"), InputError);

    std::string flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x5a;
    CHECK_THROWS_AS(deserialize_ensemble(flipped), FormatError);
    CHECK_THROWS_AS(deserialize_ensemble(bytes.substr(0, bytes.size() - 9)), FormatError);
    CHECK_THROWS_AS(deserialize_ensemble("not a model"), FormatError);
    std::string version = bytes;
    version[8] = 99;
    CHECK_THROWS_AS(deserialize_ensemble(version), FormatError);
}

TEST_CASE("ensemble validation")
{
    const Database db = toy_db();
    Ensemble e = exact_ensemble(db, {tables_of(db.schema, {"customer"})});
    CHECK_THROWS_AS(e.validate(), InvariantViolation);
    e.rspns.push_back(exact_model(db, tables_of(db.schema, {"order"})));
    e.base_count = 2;
    CHECK_NOTHROW(e.validate());
    e.base_count = 3;
    CHECK_THROWS_AS(e.validate(), InvariantViolation);
}
