#include "rspn/compile.hpp"
#include "rspn/maintenance.hpp"
#include "rspn/oracle.hpp"
#include "rspn/synth.hpp"
#include "rspn/workload.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iostream>
#include <json.hpp>
#include <spdlog/spdlog.h>
#include <thread>

using namespace rspn;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point t)
{
    return std::chrono::duration<double, std::micro>(Clock::now() - t).count();
}

json number(double v)
{
    if (!std::isfinite(v)) return nullptr;
    return v;
}

void print(const json &j) { std::cout << j.dump(2) << '\n'; }

Database load_for(const std::string &schema_path, const Ensemble &e)
{
    const SchemaGraph schema = load_schema(schema_path);
    if (schema.canonical() != e.schema.canonical())
        throw InputError("schema config '" + schema_path + "' differs from the schema the model was learned on");
    return load_database(schema, &e.catalog);
}

json estimate_json(const Estimate &est, const Query &q, bool show_plan, double latency_us)
{
    json out;
    out["aggregate"] = std::string(to_string(q.aggregate));
    out["value"] = number(est.value);
    out["ci"] = {number(est.ci_low), number(est.ci_high)};
    out["variance"] = number(est.variance);
    if (!q.group_by.empty()) {
        out["group_by"] = q.group_by;
        json groups = json::array();
        for (const auto &g : est.groups)
            groups.push_back({{"key", g.labels}, {"value", number(g.value)}, {"ci", {number(g.ci_low), number(g.ci_high)}}});
        out["groups"] = groups;
    }
    out["latency_us"] = latency_us;
    if (show_plan) out["plan"] = est.plan;
    out["warnings"] = est.warnings;
    return out;
}

/*======================================================================================================================
 * Subcommands
 *====================================================================================================================*/

struct LearnArgs
{
    std::string schema, out;
    EnsembleParams params;
};

int cmd_learn(const LearnArgs &a)
{
    const auto start = Clock::now();
    const Database db = load_database(load_schema(a.schema));
    Ensemble e = build_base_ensemble(db, a.params);
    const std::size_t added = a.params.budget_factor > 0 ? optimize_ensemble(e, db, a.params) : 0;
    e.validate();
    save_ensemble(e, a.out);
    json models = json::array();
    for (const auto &m : e.rspns)
        models.push_back({{"id", m.id},
                          {"tables", m.tables},
                          {"nodes", m.nodes.size()},
                          {"samples", m.n_samples},
                          {"population", m.full_population_size}});
    print({{"model", a.out},
           {"rspns", e.rspns.size()},
           {"base_rspns", e.base_count},
           {"added_by_budget", added},
           {"learning_seconds", std::chrono::duration<double>(Clock::now() - start).count()},
           {"models", models}});
    return 0;
}

int cmd_query(const std::string &model, const std::string &sql, double confidence, bool show_plan)
{
    const Ensemble e = load_ensemble(model);
    EngineOptions opt;
    opt.confidence_level = confidence;
    const QueryEngine engine(e, opt);
    const auto start = Clock::now();
    const Query q = engine.parse(sql);
    Estimate est;
    try {
        est = engine.execute(q);
    } catch (const EmptyCondition &ex) {
        est.value = est.ci_low = est.ci_high = est.variance = std::nan("");
        est.warnings.push_back(ex.what());
    }
    print(estimate_json(est, q, show_plan, micros_since(start)));
    return 0;
}

int cmd_cardinality(const std::string &model, const std::string &sql)
{
    const Ensemble e = load_ensemble(model);
    const QueryEngine engine(e);
    const Query q = engine.parse(sql);
    const auto start = Clock::now();
    const double v = engine.estimate_cardinality(q);
    const double us = micros_since(start);
    print({{"estimate", std::llround(v)}, {"latency_us", us}});
    return 0;
}

struct UpdateArgs
{
    std::string model, schema, updates, out;
    std::uint64_t seed = 42;
    bool write_back = false;
};

int cmd_update(const UpdateArgs &a)
{
    Ensemble e = load_ensemble(a.model);
    Database db = load_for(a.schema, e);
    const auto records = read_updates(a.updates, db.schema);
    Maintainer m(db, e, a.seed);
    const MaintenanceStats s = m.apply(records);
    for (const auto &r : e.rspns) r.validate();
    const std::string out = a.out.empty() ? a.model : a.out;
    save_ensemble(e, out);
    if (a.write_back) m.write_back();
    const double n = double(s.inserts + s.deletes);
    print({{"model", out},
           {"inserts", s.inserts},
           {"deletes", s.deletes},
           {"model_operations", s.model_operations},
           {"applied", s.applied},
           {"skipped_by_sampling", s.skipped},
           {"seconds", s.seconds},
           {"updates_per_second", s.seconds > 0 ? n / s.seconds : 0.0},
           {"tables_written", a.write_back ? m.dirty_tables() : std::vector<std::string>{}}});
    return 0;
}

struct EvalArgs
{
    std::string model, schema, workload, report_json, report_csv, aggregate = "count";
    std::size_t generate = 0;
    std::uint64_t seed = 1;
    unsigned max_tables = 4;
    double outer = 0;
    unsigned threads = 0;
};

struct EvalRow
{
    std::string sql;
    double truth = 0, estimate = 0, rel = 0, q = 1, latency_us = 0;
    std::string skipped;
};

int cmd_evaluate(const EvalArgs &a)
{
    const Ensemble e = load_ensemble(a.model);
    const Database db = load_for(a.schema, e);
    const QueryEngine engine(e);

    std::vector<std::string> texts;
    std::vector<std::optional<Query>> queries;
    if (a.generate > 0) {
        WorkloadOptions w;
        w.queries = a.generate;
        w.seed = a.seed;
        w.max_tables = std::min<unsigned>(a.max_tables, unsigned(db.schema.tables.size()));
        w.outer_join_probability = a.outer;
        if (a.aggregate == "sum") w.aggregate = Aggregate::Sum;
        else if (a.aggregate == "avg") w.aggregate = Aggregate::Avg;
        else if (a.aggregate != "count") throw InputError("--aggregate must be count, sum or avg");
        for (auto &q : generate_workload(db, w)) {
            texts.push_back(q.text);
            queries.emplace_back(std::move(q));
        }
    } else if (!a.workload.empty()) {
        texts = read_workload(a.workload);
        queries.resize(texts.size());
    } else {
        throw InputError("evaluate needs --workload or --generate");
    }

    std::vector<EvalRow> rows(texts.size());
    auto run = [&](std::size_t i) {
        EvalRow &r = rows[i];
        r.sql = texts[i];
        try {
            const Query q = queries[i] ? *queries[i] : engine.parse(texts[i]);
            r.truth = scan_oracle(db, q).value;
            const auto start = Clock::now();
            double est;
            try {
                est = engine.execute(q).value;
            } catch (const EmptyCondition &) {
                est = std::nan("");
            }
            r.latency_us = micros_since(start);
            r.estimate = est;
            if (std::isnan(r.truth) || std::isnan(est)) {
                r.rel = std::isnan(r.truth) && std::isnan(est) ? 0 : std::nan("");
                r.q = std::isnan(r.rel) ? std::nan("") : 1;
            } else {
                r.rel = r.truth != 0 ? std::abs(est - r.truth) / std::abs(r.truth) : std::abs(est);
                r.q = q_error(est, r.truth);
            }
        } catch (const std::bad_alloc &) {
            r.skipped = "out of memory";
        } catch (const Error &ex) {
            r.skipped = ex.what();
        }
    };
    const unsigned threads = std::max(1u, a.threads ? a.threads : std::thread::hardware_concurrency());
    std::vector<std::future<void>> workers;
    for (unsigned w = 0; w != threads; ++w)
        workers.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < rows.size(); i += threads) run(i);
        }));
    for (auto &f : workers) f.get();

    json per = json::array();
    std::vector<double> qs, rels;
    std::size_t skipped = 0;
    for (const auto &r : rows) {
        json j{{"sql", r.sql}};
        if (!r.skipped.empty()) {
            ++skipped;
            j["skipped"] = r.skipped;
        } else {
            j["truth"] = number(r.truth);
            j["estimate"] = number(r.estimate);
            j["relative_error"] = number(r.rel);
            j["q_error"] = number(r.q);
            j["latency_us"] = r.latency_us;
            if (std::isfinite(r.q)) qs.push_back(r.q);
            if (std::isfinite(r.rel)) rels.push_back(r.rel);
        }
        per.push_back(j);
    }
    json summary{{"queries", rows.size()}, {"evaluated", qs.size()}, {"skipped", skipped}, {"q_error_floor", 1}};
    if (!qs.empty()) {
        summary["median_q_error"] = percentile(qs, 0.5);
        summary["p90_q_error"] = percentile(qs, 0.9);
        summary["p95_q_error"] = percentile(qs, 0.95);
        summary["max_q_error"] = percentile(qs, 1.0);
    }
    if (!rels.empty()) {
        double sum = 0;
        for (double r : rels) sum += r;
        summary["mean_relative_error"] = sum / double(rels.size());
        summary["median_relative_error"] = percentile(rels, 0.5);
    }
    const json report{{"summary", summary}, {"queries", per}};
    if (!a.report_json.empty()) {
        std::ofstream f(a.report_json);
        if (!f) throw InputError("cannot write " + a.report_json);
        f << report.dump(2) << '\n';
    }
    if (!a.report_csv.empty()) {
        std::ofstream f(a.report_csv);
        if (!f) throw InputError("cannot write " + a.report_csv);
        f << "sql,truth,estimate,relative_error,q_error,latency_us,skipped\n";
        f.precision(17);
        for (const auto &r : rows) {
            f << csv_escape(r.sql) << ',';
            if (r.skipped.empty())
                f << r.truth << ',' << r.estimate << ',' << r.rel << ',' << r.q << ',' << r.latency_us << ",\n";
            else f << ",,,,," << csv_escape(r.skipped) << '\n';
        }
    }
    print(a.report_json.empty() ? report : json{{"summary", summary}, {"report", a.report_json}});
    return 0;
}

int cmd_inspect(const std::string &model)
{
    const Ensemble e = load_ensemble(model);
    json models = json::array();
    for (const auto &m : e.rspns) {
        double max_rdc = 0, sum_rdc = 0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i != m.rdc_snapshot.size(); ++i)
            for (std::size_t j = i + 1; j < m.rdc_snapshot.size(); ++j) {
                const double v = m.rdc_snapshot.at(i, j);
                max_rdc = std::max(max_rdc, v);
                sum_rdc += v;
                ++pairs;
            }
        std::vector<std::string> scope;
        for (const auto &c : m.columns) scope.push_back(c.id);
        models.push_back({{"id", m.id},
                          {"tables", m.tables},
                          {"scope", scope},
                          {"nodes", {{"sum", m.count_nodes(NodeKind::Sum)},
                                     {"product", m.count_nodes(NodeKind::Product)},
                                     {"leaf", m.count_nodes(NodeKind::Leaf)}}},
                          {"depth", m.depth()},
                          {"samples", m.n_samples},
                          {"population", m.full_population_size},
                          {"sample_rate", m.sample_rate},
                          {"fd_dictionaries", m.fd_dictionaries.size()},
                          {"rdc", {{"columns", m.rdc_snapshot.size()},
                                   {"max", max_rdc},
                                   {"mean", pairs ? sum_rdc / double(pairs) : 0.0}}}});
    }
    json deps = json::array();
    for (const auto &[k, v] : e.dependency_values) deps.push_back({{"tables", {k.first, k.second}}, {"dependency", v}});
    print({{"rspns", models},
           {"base_rspns", e.base_count},
           {"budget_factor", e.budget_factor},
           {"base_learning_seconds", e.base_cost},
           {"dependencies", deps}});
    return 0;
}

int cmd_drift(const std::string &model, const std::string &schema, std::uint64_t rows, std::uint64_t seed)
{
    const Ensemble e = load_ensemble(model);
    const Database db = load_for(schema, e);
    json out = json::array();
    for (const auto &m : e.rspns) {
        TableSet ts;
        for (const auto &t : m.tables) ts.insert(db.schema.require_table(t));
        const SampleTable fresh = learning_view(db, ts, rows, seed);
        DriftParams p;
        p.rdc_threshold = m.params.rdc_threshold;
        p.rdc = m.params.rdc;
        const auto nodes = drift_check(m, fresh, p);
        out.push_back({{"id", m.id}, {"violated_product_nodes", nodes}, {"rebuild", !nodes.empty()}});
    }
    print({{"rspns", out}});
    return 0;
}

int cmd_synth(const std::string &dir, const SynthOptions &o)
{
    const SynthData d = generate_synthetic(o);
    write_synthetic(d, dir);
    json sizes;
    for (const auto &[name, text] : d.csv)
        sizes[name] = std::max<std::ptrdiff_t>(0, std::count(text.begin(), text.end(), '\n') - 1);
    print({{"directory", dir}, {"schema", dir + "/schema.json"}, {"rows", sizes}});
    return 0;
}

}

int main(int argc, char **argv)
{
    init_logging();
    CLI::App app{"Relational sum-product network ensembles: learn, query, update, evaluate"};
    app.require_subcommand(1);

    LearnArgs learn;
    auto *c_learn = app.add_subcommand("learn", "learn an ensemble from a schema config and its CSV files");
    c_learn->add_option("--schema", learn.schema, "schema config (JSON)")->required();
    c_learn->add_option("--out", learn.out, "model file to write")->required();
    c_learn->add_option("--rdc-threshold", learn.params.learn.rdc_threshold, "independence threshold")
        ->check(CLI::Range(0.0, 1.0));
    c_learn->add_option("--min-instance-slice", learn.params.learn.min_instance_fraction,
                        "smallest cluster, as a fraction of the sample")
        ->check(CLI::Range(0.0, 1.0));
    c_learn->add_option("--budget-factor", learn.params.budget_factor, "extra budget for larger join models")
        ->check(CLI::NonNegativeNumber);
    c_learn->add_option("--max-rows", learn.params.max_rows, "sample cap per model")->check(CLI::PositiveNumber);
    c_learn->add_option("--seed", learn.params.seed, "random seed");

    std::string model, sql, schema;
    double confidence = 0.95;
    bool show_plan = false;
    auto *c_query = app.add_subcommand("query", "approximate answer of a SQL aggregate query");
    c_query->add_option("--model", model, "model file")->required();
    c_query->add_option("--sql", sql, "query text")->required();
    c_query->add_option("--confidence", confidence, "confidence level of the interval")->check(CLI::Range(0.0, 1.0));
    c_query->add_flag("--show-plan", show_plan, "print the compiled factors");

    auto *c_card = app.add_subcommand("cardinality", "estimated result size of a query");
    c_card->add_option("--model", model, "model file")->required();
    c_card->add_option("--sql", sql, "query text")->required();

    UpdateArgs upd;
    auto *c_update = app.add_subcommand("update", "apply inserts and deletes to the models");
    c_update->add_option("--model", upd.model, "model file")->required();
    c_update->add_option("--schema", upd.schema, "schema config of the current base data")->required();
    c_update->add_option("--updates", upd.updates, "update CSV: op(I/D),table,values...")->required();
    c_update->add_option("--out", upd.out, "model file to write (default: overwrite --model)");
    c_update->add_option("--seed", upd.seed, "seed for sampled updates");
    c_update->add_flag("--write-back", upd.write_back, "rewrite the changed base CSV files");

    EvalArgs ev;
    auto *c_eval = app.add_subcommand("evaluate", "compare estimates with exact answers");
    c_eval->add_option("--model", ev.model, "model file")->required();
    c_eval->add_option("--schema", ev.schema, "schema config")->required();
    auto *o_work = c_eval->add_option("--workload", ev.workload, "file with one SQL statement per line");
    auto *o_gen = c_eval->add_option("--generate", ev.generate, "number of random queries to generate");
    o_work->excludes(o_gen);
    c_eval->add_option("--seed", ev.seed, "seed of the generated workload");
    c_eval->add_option("--aggregate", ev.aggregate, "aggregate of generated queries: count, sum or avg");
    c_eval->add_option("--max-tables", ev.max_tables, "largest join of generated queries");
    c_eval->add_option("--outer-join-probability", ev.outer, "chance of a LEFT join per joined table")
        ->check(CLI::Range(0.0, 1.0));
    c_eval->add_option("--report-json", ev.report_json, "write the full report here");
    c_eval->add_option("--report-csv", ev.report_csv, "write per-query rows here");
    c_eval->add_option("--threads", ev.threads, "worker threads (default: hardware concurrency)");

    auto *c_inspect = app.add_subcommand("inspect", "model statistics");
    c_inspect->add_option("--model", model, "model file")->required();

    std::uint64_t drift_rows = 10'000, drift_seed = 7;
    auto *c_drift = app.add_subcommand("drift", "check product nodes against fresh data");
    c_drift->add_option("--model", model, "model file")->required();
    c_drift->add_option("--schema", schema, "schema config of the current base data")->required();
    c_drift->add_option("--rows", drift_rows, "fresh sample size per model")->check(CLI::PositiveNumber);
    c_drift->add_option("--seed", drift_seed, "sampling seed");

    std::string synth_dir;
    SynthOptions so;
    auto *c_synth = app.add_subcommand("synth", "write a synthetic correlated schema with data");
    c_synth->add_option("--out", synth_dir, "output directory")->required();
    c_synth->add_option("--tables", so.tables, "number of tables")->check(CLI::Range(1, 8));
    c_synth->add_option("--rows", so.root_rows, "rows of the root table")->check(CLI::PositiveNumber);
    c_synth->add_option("--fanout", so.mean_fanout, "mean children per row")->check(CLI::PositiveNumber);
    c_synth->add_option("--correlation", so.correlation, "parent-child cluster agreement")
        ->check(CLI::Range(0.0, 1.0));
    c_synth->add_option("--clusters", so.clusters, "latent clusters")->check(CLI::PositiveNumber);
    c_synth->add_option("--null-fraction", so.null_fraction, "NULL share of the nullable column")
        ->check(CLI::Range(0.0, 0.99));
    c_synth->add_flag("--chain", so.chain, "each table references the previous one");
    c_synth->add_option("--seed", so.seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*c_learn) return cmd_learn(learn);
        if (*c_query) return cmd_query(model, sql, confidence, show_plan);
        if (*c_card) return cmd_cardinality(model, sql);
        if (*c_update) return cmd_update(upd);
        if (*c_eval) return cmd_evaluate(ev);
        if (*c_inspect) return cmd_inspect(model);
        if (*c_drift) return cmd_drift(model, schema, drift_rows, drift_seed);
        if (*c_synth) return cmd_synth(synth_dir, so);
    } catch (const UnsupportedQuery &e) {
        std::cerr << "unsupported query: " << e.what() << '\n';
        return 3;
    } catch (const InvariantViolation &e) {
        std::cerr << "invariant violated: " << e.what() << '\n';
        return 4;
    } catch (const EmptyCondition &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
