#include "rspn/ensemble.hpp"

#include "rspn/learn.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <spdlog/spdlog.h>

namespace rspn {

const Rspn *Ensemble::find(std::string_view id) const
{
    for (const auto &m : rspns)
        if (m.id == id) return &m;
    return nullptr;
}

namespace {

std::pair<std::string, std::string> ordered(const std::string &a, const std::string &b)
{
    return a < b ? std::pair{a, b} : std::pair{b, a};
}

std::string model_id(const SchemaGraph &schema, TableSet tables)
{
    std::string id;
    for (unsigned t : tables.members()) id += (id.empty() ? "" : "|") + schema.tables[t].name;
    return id;
}

TableSet model_tables(const SchemaGraph &schema, const Rspn &m)
{
    TableSet s;
    for (const auto &t : m.tables) s.insert(schema.require_table(t));
    return s;
}

/// Smallest connected table set containing a and b (the tree path), or empty if they are in different components.
TableSet tree_path(const SchemaGraph &schema, unsigned a, unsigned b)
{
    const std::size_t n = schema.tables.size();
    std::vector<int> prev(n, -1);
    std::vector<bool> seen(n, false);
    std::vector<unsigned> queue{a};
    seen[a] = true;
    for (std::size_t q = 0; q != queue.size(); ++q) {
        const unsigned u = queue[q];
        for (const auto &fk : schema.fks) {
            const unsigned x = schema.referencing_index(fk), y = schema.referenced_index(fk);
            const unsigned v = x == u ? y : y == u ? x : u;
            if (v == u || seen[v]) continue;
            seen[v] = true;
            prev[v] = int(u);
            queue.push_back(v);
        }
    }
    if (!seen[b]) return {};
    TableSet path;
    for (int v = int(b); v >= 0; v = prev[std::size_t(v)]) path.insert(unsigned(v));
    return path;
}

double pair_dependency(Ensemble &ensemble, const Database &db, const EnsembleParams &params, unsigned a, unsigned b)
{
    if (a == b) return 1.0;
    const auto &na = db.schema.tables[a].name, &nb = db.schema.tables[b].name;
    if (auto v = ensemble.dependency(na, nb)) return *v;
    double value = 0;
    if (params.dependency) {
        value = params.dependency(a, b);
    } else {
        const TableSet path = tree_path(db.schema, a, b);
        if (!path.empty()) {
            const SampleTable joined = full_outer_join_sample(
                db, path, params.dependency_sample_rows, mix_seed(params.seed, path.bits()));
            value = table_dependency(na, nb, joined, params.learn.rdc);
        }
    }
    ensemble.set_dependency(na, nb, value);
    spdlog::debug("table dependency {} / {} = {:.3f}", na, nb, value);
    return value;
}

double proxy_cost(const Rspn &m) { return double(m.columns.size()) * double(m.columns.size()) * m.n_samples; }

/// Column count of the learning view of a table set, without materializing it.
std::size_t view_columns(const SchemaGraph &schema, TableSet tables)
{
    std::size_t n = 0;
    for (unsigned t : tables.members()) {
        const auto keys = schema.key_columns(t);
        for (const auto &c : schema.tables[t].columns)
            if (std::none_of(keys.begin(), keys.end(), [&](const std::string &k) { return iequals(k, c.name); })) ++n;
        for (const auto &fk : schema.fks)
            if (schema.referenced_index(fk) == t) ++n;
        for (const auto &fd : schema.fds)
            if (iequals(fd.table, schema.tables[t].name)) --n;
        if (tables.size() > 1) ++n;
    }
    return n;
}

}

std::optional<double> Ensemble::dependency(const std::string &a, const std::string &b) const
{
    auto it = dependency_values.find(ordered(a, b));
    if (it == dependency_values.end()) return std::nullopt;
    return it->second;
}

void Ensemble::set_dependency(const std::string &a, const std::string &b, double v)
{
    dependency_values[ordered(a, b)] = v;
}

void Ensemble::validate() const
{
    TableSet covered;
    for (const auto &m : rspns) {
        const TableSet s = model_tables(schema, m);
        if (!schema.is_connected(s)) throw InvariantViolation("model '" + m.id + "' spans unconnected tables");
        covered = covered | s;
        m.validate();
    }
    if (covered != schema.all_tables()) throw InvariantViolation("ensemble leaves a table without a model");
    if (base_count > rspns.size()) throw InvariantViolation("base model count exceeds the ensemble size");
}

SampleTable learning_view(const Database &db, TableSet tables, std::uint64_t max_rows, std::uint64_t seed)
{
    const SampleTable joined = full_outer_join_sample(db, tables, max_rows, seed);
    std::vector<FunctionalDependency> fds;
    for (const auto &fd : db.schema.fds)
        if (tables.contains(db.schema.require_table(fd.table))) fds.push_back(fd);
    return apply_fd_projection(drop_key_columns(joined), fds);
}

Rspn learn_for_tables(const Database &db, TableSet tables, const EnsembleParams &params)
{
    const SampleTable view = learning_view(db, tables, params.max_rows, mix_seed(params.seed, tables.bits()));
    LearnParams lp = params.learn;
    lp.seed = mix_seed(params.learn.seed, tables.bits());
    return learn_rspn(view, lp, model_id(db.schema, tables));
}

Ensemble build_base_ensemble(const Database &db, const EnsembleParams &params)
{
    params.learn.validate();
    if (params.budget_factor < 0) throw InputError("budget factor must not be negative");
    const auto start = std::chrono::steady_clock::now();

    Ensemble e;
    e.schema = db.schema;
    e.catalog = db.catalog;
    e.budget_factor = params.budget_factor;

    TableSet covered;
    for (const auto &fk : db.schema.fks) {
        const unsigned a = db.schema.referencing_index(fk), b = db.schema.referenced_index(fk);
        const double dep = pair_dependency(e, db, params, a, b);
        if (dep < params.learn.rdc_threshold) continue;
        TableSet pair;
        pair.insert(a);
        pair.insert(b);
        spdlog::info("learning join model over {} and {} (dependency {:.3f})", fk.referencing_table,
                     fk.referenced_table, dep);
        e.rspns.push_back(learn_for_tables(db, pair, params));
        covered = covered | pair;
    }
    for (unsigned t = 0; t != db.schema.tables.size(); ++t) {
        if (covered.contains(t)) continue;
        spdlog::info("learning single-table model over {}", db.schema.tables[t].name);
        e.rspns.push_back(learn_for_tables(db, TableSet::single(t), params));
    }
    e.base_count = e.rspns.size();
    for (const auto &m : e.rspns) e.base_proxy_cost += proxy_cost(m);
    e.base_cost = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return e;
}

std::vector<CandidateRspn> rank_candidates(Ensemble &ensemble, const Database &db, const EnsembleParams &params)
{
    const auto &schema = db.schema;
    std::set<std::uint64_t> modeled;
    for (const auto &m : ensemble.rspns) modeled.insert(model_tables(schema, m).bits());

    /* connected subsets, grown one neighbouring table at a time */
    std::set<std::uint64_t> level;
    for (const auto &fk : schema.fks) {
        TableSet s;
        s.insert(schema.referencing_index(fk));
        s.insert(schema.referenced_index(fk));
        level.insert(s.bits());
    }
    std::vector<TableSet> subsets;
    for (unsigned size = 3; size <= params.max_candidate_tables; ++size) {
        std::set<std::uint64_t> next;
        for (auto bits : level)
            for (const auto &fk : schema.fks) {
                const unsigned a = schema.referencing_index(fk), b = schema.referenced_index(fk);
                const TableSet s(bits);
                if (s.contains(a) == s.contains(b)) continue;
                TableSet grown = s;
                grown.insert(s.contains(a) ? b : a);
                next.insert(grown.bits());
            }
        for (auto bits : next)
            if (!modeled.contains(bits)) subsets.emplace_back(bits);
        level = std::move(next);
    }

    std::vector<CandidateRspn> out;
    for (TableSet s : subsets) {
        const auto members = s.members();
        double total = 0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i != members.size(); ++i)
            for (std::size_t j = i + 1; j != members.size(); ++j) {
                total += pair_dependency(ensemble, db, params, members[i], members[j]);
                ++pairs;
            }
        const double rows = double(std::min<std::uint64_t>(full_outer_join_size(db, s), params.max_rows));
        const double cols = double(view_columns(schema, s));
        out.push_back({s, total / double(pairs), cols * cols * rows});
    }
    std::sort(out.begin(), out.end(), [](const CandidateRspn &a, const CandidateRspn &b) {
        if (a.mean_rdc != b.mean_rdc) return a.mean_rdc > b.mean_rdc;
        if (a.estimated_cost != b.estimated_cost) return a.estimated_cost < b.estimated_cost;
        return a.tables.bits() < b.tables.bits();
    });
    return out;
}

std::size_t optimize_ensemble(Ensemble &ensemble, const Database &db, const EnsembleParams &params)
{
    if (params.budget_factor < 0) throw InputError("budget factor must not be negative");
    ensemble.budget_factor = params.budget_factor;
    const double budget = params.budget_factor * ensemble.base_proxy_cost;
    double spent = 0;
    std::size_t added = 0;
    for (const auto &c : rank_candidates(ensemble, db, params)) {
        if (spent + c.estimated_cost > budget) break;
        spdlog::info("adding model over {} (mean dependency {:.3f})", model_id(db.schema, c.tables), c.mean_rdc);
        ensemble.rspns.push_back(learn_for_tables(db, c.tables, params));
        spent += c.estimated_cost;
        ++added;
    }
    return added;
}

}
