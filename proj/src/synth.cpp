#include "rspn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

namespace rspn {

namespace {

struct TableRows
{
    std::vector<unsigned> latent;
};

}

SynthData generate_synthetic(const SynthOptions &o)
{
    if (o.tables < 1 || o.tables > 8) throw InputError("synthetic schema needs 1 to 8 tables");
    if (o.root_rows == 0) throw InputError("synthetic schema needs at least one root row");
    if (o.clusters < 1) throw InputError("synthetic schema needs at least one cluster");
    if (!(o.correlation >= 0 && o.correlation <= 1)) throw InputError("correlation must lie in [0,1]");
    if (!(o.null_fraction >= 0 && o.null_fraction < 1)) throw InputError("null fraction must lie in [0,1)");
    if (!(o.mean_fanout > 0)) throw InputError("mean fan-out must be positive");

    std::mt19937_64 rng(mix_seed(o.seed, 0x5e7d));
    std::uniform_real_distribution<double> unit(0, 1);
    const unsigned k = o.clusters;
    auto draw_latent = [&] { return unsigned(rng() % k); };

    std::vector<int> parent(o.tables, -1);
    for (unsigned t = 1; t < o.tables; ++t) parent[t] = o.chain ? int(t) - 1 : int(rng() % t);

    nlohmann::json schema;
    schema["tables"] = nlohmann::json::array();
    schema["foreign_keys"] = nlohmann::json::array();
    SynthData out;
    std::vector<TableRows> rows(o.tables);

    for (unsigned t = 0; t < o.tables; ++t) {
        const std::string name = "t" + std::to_string(t);
        nlohmann::json cols = nlohmann::json::array();
        cols.push_back({{"name", "id"}, {"kind", "continuous"}});
        if (parent[t] >= 0) cols.push_back({{"name", "pid"}, {"kind", "continuous"}});
        cols.push_back({{"name", "cat"}, {"kind", "categorical"}});
        cols.push_back({{"name", "num"}, {"kind", "continuous"}});
        cols.push_back({{"name", "opt"}, {"kind", "continuous"}, {"nullable", true}});
        if (t == 0) cols.push_back({{"name", "zone"}, {"kind", "categorical"}});
        schema["tables"].push_back({{"name", name}, {"csv", name + ".csv"}, {"primary_key", "id"}, {"columns", cols}});
        if (parent[t] >= 0)
            schema["foreign_keys"].push_back({{"from", name + ".pid"}, {"to", "t" + std::to_string(parent[t]) + ".id"}});

        /* parent id of every row */
        std::vector<std::size_t> pids;
        if (parent[t] < 0) {
            for (std::size_t r = 0; r != o.root_rows; ++r) rows[t].latent.push_back(draw_latent());
        } else {
            const auto &pl = rows[std::size_t(parent[t])].latent;
            for (std::size_t p = 0; p != pl.size(); ++p) {
                const double scale = k == 1 ? 1.0 : 0.25 + 1.5 * double(pl[p]) / double(k - 1);
                std::poisson_distribution<unsigned> fan(o.mean_fanout * scale);
                for (unsigned c = fan(rng); c-- > 0;) {
                    pids.push_back(p);
                    rows[t].latent.push_back(unit(rng) < o.correlation ? pl[p] : draw_latent());
                }
            }
        }

        std::ostringstream csv;
        csv << "id";
        if (parent[t] >= 0) csv << ",pid";
        csv << ",cat,num,opt";
        if (t == 0) csv << ",zone";
        csv << '\n';
        std::normal_distribution<double> noise(0, 6);
        for (std::size_t r = 0; r != rows[t].latent.size(); ++r) {
            const unsigned z = rows[t].latent[r];
            unsigned cat = unit(rng) < 0.8 ? 2 * z + unsigned(rng() % 2) : unsigned(rng() % (2 * k));
            const double num = std::clamp(std::round(10 + 20.0 * z + noise(rng)), 0.0, 20.0 * k + 20);
            csv << r + 1;
            if (parent[t] >= 0) csv << ',' << pids[r] + 1;
            csv << ",c" << cat << ',' << num << ',';
            if (unit(rng) >= o.null_fraction) csv << (z * 2 + unsigned(rng() % 3)) % 10;
            if (t == 0) csv << ",z" << cat / 2;
            csv << '\n';
        }
        out.csv[name] = csv.str();
    }
    schema["functional_dependencies"] = nlohmann::json::array({{{"table", "t0"}, {"determinant", "cat"}, {"dependent", "zone"}}});
    out.schema_json = schema.dump(2);
    return out;
}

Database load_synthetic(const SynthData &data)
{
    const SchemaGraph schema = parse_schema(data.schema_json, ".", false);
    return load_database(schema, data.csv);
}

void write_synthetic(const SynthData &data, const std::filesystem::path &dir)
{
    std::filesystem::create_directories(dir);
    auto write = [&](const std::filesystem::path &p, const std::string &text) {
        std::ofstream f(p, std::ios::binary);
        if (!f) throw InputError("cannot write " + p.string());
        f << text;
    };
    write(dir / "schema.json", data.schema_json);
    for (const auto &[name, text] : data.csv) write(dir / (name + ".csv"), text);
}

}
