#include <doctest.h>

#include "fixtures.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sys/wait.h>

using namespace fixtures;
using nlohmann::json;

namespace {

struct Run
{
    int code = -1;
    std::string out;
};

Run cli(const std::string &args)
{
    const std::string cmd = std::string(RSPN_CLI_PATH) + " " + args + " 2>/dev/null";
    Run r;
    FILE *pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe);
    std::array<char, 4096> buf;
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string quoted(const std::filesystem::path &p) { return "'" + p.string() + "'"; }

void write_toy(const std::filesystem::path &dir)
{
    std::ofstream(dir / "schema.json") << kToySchema;
    for (const auto &[name, text] : kToyCsv) std::ofstream(dir / (name + ".csv")) << text;
}

}

TEST_CASE("learn, query and inspect through the command line")
{
    TempDir dir;
    write_toy(dir.path);
    const std::string model = quoted(dir.path / "m.bin");
    const Run learn = cli("learn --schema " + quoted(dir.path / "schema.json") + " --out " + model);
    REQUIRE(learn.code == 0);
    CHECK(json::parse(learn.out)["rspns"].get<int>() >= 1);

    const Run q = cli("query --model " + model + " --show-plan --sql \"SELECT COUNT(*) FROM customer WHERE "
                      "c_region = 'EUROPE'\"");
    REQUIRE(q.code == 0);
    const json a = json::parse(q.out);
    CHECK(a["value"].get<double>() == doctest::Approx(2).epsilon(0.05));
    CHECK(a["ci"].size() == 2);
    CHECK_FALSE(a["plan"].empty());

    const Run empty_avg = cli("query --model " + model + " --sql \"SELECT AVG(c_age) FROM customer WHERE c_age > 500\"");
    CHECK(empty_avg.code == 0);
    CHECK(json::parse(empty_avg.out)["value"].is_null());

    const Run card = cli("cardinality --model " + model + " --sql \"SELECT COUNT(*) FROM customer\"");
    REQUIRE(card.code == 0);
    CHECK(json::parse(card.out)["estimate"].get<int>() == 3);

    CHECK(cli("inspect --model " + model).code == 0);

    std::ofstream(dir.path / "empty.sql") << "-- nothing here\n\n";
    const Run ev = cli("evaluate --model " + model + " --schema " + quoted(dir.path / "schema.json") + " --workload " +
                       quoted(dir.path / "empty.sql"));
    CHECK(ev.code == 0);
    CHECK(json::parse(ev.out)["summary"]["queries"].get<int>() == 0);
}

TEST_CASE("exit codes")
{
    TempDir dir;
    write_toy(dir.path);
    const std::string model = quoted(dir.path / "m.bin");
    REQUIRE(cli("learn --schema " + quoted(dir.path / "schema.json") + " --out " + model).code == 0);
    CHECK(cli("learn --schema " + quoted(dir.path / "missing.json") + " --out " + model).code == 2);
    CHECK(cli("query --model " + model).code == 2);
    CHECK(cli("frobnicate").code == 2);
    CHECK(cli("query --model " + quoted(dir.path / "nope.bin") + " --sql \"SELECT COUNT(*) FROM customer\"").code == 2);
    CHECK(cli("query --model " + model + " --sql \"SELECT COUNT(*) FROM customer WHERE c_age > 1 OR c_age < 0\"").code ==
          3);
    CHECK(cli("query --model " + model + " --sql \"SELECT COUNT(*) FROM supplier\"").code == 2);
    std::ofstream(dir.path / "bad.bin") << "RSPNENS1 garbage";
    CHECK(cli("inspect --model " + quoted(dir.path / "bad.bin")).code == 2);
}

TEST_CASE("synthetic data, updates and drift through the command line")
{
    TempDir dir;
    const std::string schema = quoted(dir.path / "schema.json"), model = quoted(dir.path / "m.bin");
    REQUIRE(cli("synth --out " + quoted(dir.path) + " --tables 2 --rows 300 --seed 3").code == 0);
    REQUIRE(cli("learn --schema " + schema + " --out " + model).code == 0);
    std::ofstream(dir.path / "up.csv") << "I,t0,100000,c1,15,2,z0\nI,t1,100000,100000,c2,30,\n";
    const Run up = cli("update --model " + model + " --schema " + schema + " --updates " +
                       quoted(dir.path / "up.csv") + " --write-back");
    REQUIRE(up.code == 0);
    CHECK(json::parse(up.out)["inserts"].get<int>() == 2);
    /* the rewritten base data matches the updated models' schema */
    const Run drift = cli("drift --model " + model + " --schema " + schema);
    CHECK(drift.code == 0);
    const Run ev = cli("evaluate --model " + model + " --schema " + schema + " --generate 20 --threads 1");
    REQUIRE(ev.code == 0);
    CHECK(json::parse(ev.out)["summary"]["evaluated"].get<int>() == 20);
}
