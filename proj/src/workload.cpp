#include "rspn/workload.hpp"

#include <algorithm>
#include <fstream>
#include <random>

namespace rspn {

namespace {

struct Candidate
{
    std::string column;
    ColumnKind kind;
};

/// Tables in BFS order from a random start, growing to `size` tables through FK edges.
std::vector<unsigned> random_tables(const SchemaGraph &schema, unsigned size, std::mt19937_64 &rng)
{
    std::vector<unsigned> order{unsigned(rng() % schema.tables.size())};
    while (order.size() < size) {
        std::vector<unsigned> frontier;
        for (unsigned t = 0; t != schema.tables.size(); ++t) {
            if (std::find(order.begin(), order.end(), t) != order.end()) continue;
            for (unsigned o : order)
                if (schema.edge_between(t, o)) {
                    frontier.push_back(t);
                    break;
                }
        }
        if (frontier.empty()) break;
        order.push_back(frontier[rng() % frontier.size()]);
    }
    return order;
}

/// One row per table forming a join tuple, or nothing if the walk hits a row without partners.
std::optional<std::vector<std::size_t>> random_tuple(const Database &db, const std::vector<unsigned> &tables,
                                                     std::mt19937_64 &rng)
{
    const auto &schema = db.schema;
    std::vector<std::size_t> row(tables.size());
    const SampleTable &first = db.tables[tables[0]];
    if (first.rows() == 0) return std::nullopt;
    row[0] = rng() % first.rows();
    for (std::size_t i = 1; i != tables.size(); ++i) {
        const unsigned t = tables[i];
        std::size_t j = 0;
        std::optional<unsigned> e;
        for (; j != i; ++j)
            if ((e = schema.edge_between(t, tables[j]))) break;
        const auto &fk = schema.fks[*e];
        const SampleTable &tab = db.tables[t], &other = db.tables[tables[j]];
        const bool t_references = schema.referencing_index(fk) == t;
        const std::string mine = base_column_id(schema.tables[t].name,
                                                t_references ? fk.referencing_column : fk.referenced_column);
        const std::string theirs = base_column_id(schema.tables[tables[j]].name,
                                                  t_references ? fk.referenced_column : fk.referencing_column);
        const double key = other.data[other.require(theirs)][row[j]];
        const auto &col = tab.data[tab.require(mine)];
        std::vector<std::size_t> partners;
        for (std::size_t r = 0; r != col.size(); ++r)
            if (col[r] == key) partners.push_back(r);
        if (partners.empty()) return std::nullopt;
        row[i] = partners[rng() % partners.size()];
    }
    return row;
}

}

std::vector<Query> generate_workload(const Database &db, const WorkloadOptions &o)
{
    const auto &schema = db.schema;
    if (schema.tables.empty()) throw InputError("empty schema");
    if (o.min_tables < 1 || o.min_tables > o.max_tables) throw InputError("invalid table count range");
    if (o.min_predicates > o.max_predicates) throw InputError("invalid predicate count range");
    std::mt19937_64 rng(mix_seed(o.seed, 0x3017));
    std::uniform_real_distribution<double> unit(0, 1);

    std::vector<Query> out;
    for (std::size_t attempt = 0; out.size() < o.queries; ++attempt) {
        if (attempt > 100 * o.queries + 1000) throw InputError("could not generate the requested workload");
        const unsigned size = o.min_tables + unsigned(rng() % (o.max_tables - o.min_tables + 1));
        const auto tables = random_tables(schema, size, rng);
        if (tables.size() < o.min_tables) continue;
        const auto tuple = random_tuple(db, tables, rng);
        if (!tuple) continue;

        Query q;
        q.tables = tables;
        q.join_kinds.assign(tables.size(), JoinKind::Inner);
        for (std::size_t i = 1; i < tables.size(); ++i)
            if (unit(rng) < o.outer_join_probability) q.join_kinds[i] = JoinKind::Left;
        /* once a table is optional, everything joined through it is too (as SQL evaluates it left-deep) */
        std::vector<bool> optional(tables.size(), false);
        for (std::size_t i = 1; i < tables.size(); ++i) {
            if (q.join_kinds[i] == JoinKind::Left) optional[i] = true;
            for (std::size_t j = 0; j != i; ++j)
                if (optional[j] && schema.edge_between(tables[i], tables[j])) optional[i] = true;
            if (optional[i]) q.join_kinds[i] = JoinKind::Left;
        }

        std::vector<std::pair<std::size_t, Candidate>> candidates;
        std::vector<std::pair<std::size_t, std::string>> numeric;
        for (std::size_t i = 0; i != tables.size(); ++i) {
            const auto keys = schema.key_columns(tables[i]);
            const auto &def = schema.tables[tables[i]];
            for (const auto &c : def.columns) {
                if (std::find_if(keys.begin(), keys.end(), [&](const std::string &k) { return iequals(k, c.name); }) !=
                    keys.end())
                    continue;
                const std::string id = base_column_id(def.name, c.name);
                if (c.kind == ColumnKind::Continuous) numeric.emplace_back(i, id);
                if (optional[i]) continue;
                const SampleTable &tab = db.tables[tables[i]];
                if (is_null(tab.data[tab.require(id)][(*tuple)[i]])) continue;
                candidates.push_back({i, {id, c.kind}});
            }
        }
        if (o.aggregate != Aggregate::Count) {
            std::vector<std::pair<std::size_t, std::string>> usable;
            for (const auto &n : numeric)
                if (!optional[n.first]) usable.push_back(n);
            if (usable.empty()) continue;
            q.aggregate = o.aggregate;
            q.aggregate_column = usable[rng() % usable.size()].second;
        }

        std::shuffle(candidates.begin(), candidates.end(), rng);
        const unsigned want = o.min_predicates + unsigned(rng() % (o.max_predicates - o.min_predicates + 1));
        unsigned have = 0;
        for (const auto &[i, c] : candidates) {
            if (have >= want) break;
            const SampleTable &tab = db.tables[tables[i]];
            const auto &col = tab.data[tab.require(c.column)];
            const double v = col[(*tuple)[i]];
            if (c.kind == ColumnKind::Categorical) {
                const double r = unit(rng);
                if (r < 0.7) {
                    q.predicate.add(c.column, Op::Eq, v);
                } else if (r < 0.85) {
                    std::vector<double> values{v};
                    const double other = col[rng() % col.size()];
                    if (!is_null(other) && other != v) values.push_back(other);
                    std::sort(values.begin(), values.end());
                    q.predicate.add_in(c.column, values);
                } else {
                    const double other = col[rng() % col.size()];
                    if (is_null(other) || other == v) q.predicate.add(c.column, Op::Eq, v);
                    else q.predicate.add(c.column, Op::Ne, other);
                }
                ++have;
                continue;
            }
            const double w = col[rng() % col.size()];
            const double width = is_null(w) ? 5 : std::abs(w - v) + 1;
            const double r = unit(rng);
            if (r < 0.25) {
                q.predicate.add(c.column, Op::Eq, v);
                ++have;
            } else if (r < 0.5) {
                q.predicate.add(c.column, Op::Le, v + std::floor(width / 2));
                ++have;
            } else if (r < 0.75) {
                q.predicate.add(c.column, Op::Ge, v - std::floor(width / 2));
                ++have;
            } else {
                q.predicate.add(c.column, Op::Ge, v - std::floor(width / 2));
                ++have;
                if (have < want) {
                    q.predicate.add(c.column, Op::Lt, v + std::floor(width / 2) + 1);
                    ++have;
                }
            }
        }
        if (have < o.min_predicates) continue;
        q.text = to_sql(q, schema, db.catalog);
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<std::string> read_workload(const std::filesystem::path &file)
{
    std::ifstream in(file);
    if (!in) throw InputError("cannot open workload file " + file.string());
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) {
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        if (line.starts_with("--") || line.starts_with("#")) continue;
        out.push_back(line);
    }
    return out;
}

}
