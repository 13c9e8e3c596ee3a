#include "rspn/maintenance.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <set>
#include <spdlog/spdlog.h>
#include <sstream>
#include <unordered_map>

namespace rspn {

std::vector<UpdateRecord> read_updates(std::istream &in, const SchemaGraph &schema)
{
    CsvReader reader(in);
    std::vector<UpdateRecord> out;
    while (auto rec = reader.next()) {
        const std::string ctx = "update line " + std::to_string(reader.line());
        if (rec->size() < 2) throw InputError(ctx + ": expected op, table and values");
        UpdateRecord r;
        const std::string &op = (*rec)[0].text;
        if (iequals(op, "I") || iequals(op, "insert")) r.op = UpdateOp::Insert;
        else if (iequals(op, "D") || iequals(op, "delete")) r.op = UpdateOp::Delete;
        else throw InputError(ctx + ": unknown operation '" + op + "' (use I or D)");
        const int t = schema.table_index((*rec)[1].text);
        if (t < 0) throw InputError(ctx + ": unknown table '" + (*rec)[1].text + "'");
        r.table = schema.tables[std::size_t(t)].name;
        r.values.assign(rec->begin() + 2, rec->end());
        if (r.values.size() != schema.tables[std::size_t(t)].columns.size())
            throw InputError(ctx + ": table '" + r.table + "' has " +
                             std::to_string(schema.tables[std::size_t(t)].columns.size()) + " columns, got " +
                             std::to_string(r.values.size()) + " values");
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<UpdateRecord> read_updates(const std::filesystem::path &file, const SchemaGraph &schema)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InputError("cannot open update file " + file.string());
    return read_updates(in, schema);
}

namespace {

using Assignment = std::vector<std::int64_t>; /* row per schema table, -1 absent */
using Tuple = std::vector<double>;

/// NULL sorts first and equals NULL.
bool tuple_less(const Tuple &a, const Tuple &b)
{
    for (std::size_t i = 0; i != a.size(); ++i) {
        const bool na = is_null(a[i]), nb = is_null(b[i]);
        if (na != nb) return na;
        if (!na && a[i] != b[i]) return a[i] < b[i];
    }
    return false;
}

std::string format_number(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}

struct Maintainer::State
{
    std::vector<std::size_t> pk_column;
    std::vector<std::unordered_map<double, std::uint32_t>> pk_row;
    /* per edge: referenced key -> referencing keys */
    std::vector<std::unordered_map<double, std::vector<double>>> children;
    std::vector<std::size_t> fk_column;     /* per edge, in the referencing table */
    std::vector<std::size_t> factor_column; /* per edge, F in the referenced table */
};

Maintainer::Maintainer(Database &db, Ensemble &ensemble, std::uint64_t seed)
    : db_(db), ensemble_(ensemble), state_(std::make_unique<State>()), seed_(seed), dirty_(db.tables.size(), false)
{
    if (db.schema.canonical() != ensemble.schema.canonical())
        throw InputError("the ensemble was learned on a different schema");
    const auto &schema = db.schema;
    State &s = *state_;
    for (unsigned t = 0; t != db.tables.size(); ++t) {
        const auto &def = schema.tables[t];
        const SampleTable &tab = db.tables[t];
        s.pk_column.push_back(tab.require(base_column_id(def.name, def.primary_key)));
        auto &m = s.pk_row.emplace_back();
        const auto &pk = tab.data[s.pk_column.back()];
        for (std::uint32_t r = 0; r != pk.size(); ++r) m.emplace(pk[r], r);
    }
    for (const auto &fk : schema.fks) {
        const unsigned p = schema.referencing_index(fk), q = schema.referenced_index(fk);
        s.fk_column.push_back(db.tables[p].require(base_column_id(fk.referencing_table, fk.referencing_column)));
        s.factor_column.push_back(db.tables[q].require(factor_column_id(fk, false)));
        auto &ch = s.children.emplace_back();
        const auto &fkv = db.tables[p].data[s.fk_column.back()];
        const auto &pkv = db.tables[p].data[s.pk_column[p]];
        for (std::size_t r = 0; r != fkv.size(); ++r)
            if (!is_null(fkv[r])) ch[fkv[r]].push_back(pkv[r]);
    }
}

Maintainer::~Maintainer() = default;

MaintenanceStats Maintainer::apply(const std::vector<UpdateRecord> &records)
{
    const auto start = std::chrono::steady_clock::now();
    auto &schema = db_.schema;
    State &s = *state_;
    MaintenanceStats stats;

    /* rows joined to `row` of table u through edge e, towards table v */
    auto partners = [&](unsigned u, std::int64_t row, unsigned e, unsigned v) {
        std::vector<std::int64_t> out;
        const auto &fk = schema.fks[e];
        if (schema.referenced_index(fk) == u) {
            const double key = db_.tables[u].data[s.pk_column[u]][std::size_t(row)];
            auto it = s.children[e].find(key);
            if (it != s.children[e].end())
                for (double k : it->second) out.push_back(s.pk_row[v].at(k));
        } else {
            const double key = db_.tables[u].data[s.fk_column[e]][std::size_t(row)];
            if (!is_null(key))
                if (auto it = s.pk_row[v].find(key); it != s.pk_row[v].end()) out.push_back(it->second);
        }
        return out;
    };

    /* full outer join rows of a model's tables that contain one of the anchor rows */
    auto local_rows = [&](const Rspn &m, const std::vector<std::pair<unsigned, std::int64_t>> &anchors) {
        TableSet mt;
        for (const auto &t : m.tables) mt.insert(schema.require_table(t));
        std::set<Assignment> found;
        for (const auto &[a, x] : anchors) {
            if (!mt.contains(a)) continue;
            std::vector<unsigned> order{a};
            std::vector<std::pair<unsigned, unsigned>> link(schema.tables.size()); /* parent, edge */
            TableSet seen = TableSet::single(a);
            for (std::size_t i = 0; i != order.size(); ++i)
                for (unsigned e : schema.edges_within(mt)) {
                    const unsigned p = schema.referencing_index(schema.fks[e]), q = schema.referenced_index(schema.fks[e]);
                    if (p != order[i] && q != order[i]) continue;
                    const unsigned other = p == order[i] ? q : p;
                    if (seen.contains(other)) continue;
                    seen.insert(other);
                    link[other] = {order[i], e};
                    order.push_back(other);
                }
            Assignment cur(schema.tables.size(), -1);
            cur[a] = x;
            auto walk = [&](auto &&self, std::size_t i) -> void {
                if (i == order.size()) {
                    found.insert(cur);
                    return;
                }
                const unsigned u = order[i];
                const auto [p, e] = link[u];
                std::vector<std::int64_t> rows;
                if (cur[p] >= 0) rows = partners(p, cur[p], e, u);
                if (rows.empty()) {
                    cur[u] = -1;
                    self(self, i + 1);
                    return;
                }
                for (auto r : rows) {
                    cur[u] = r;
                    self(self, i + 1);
                }
                cur[u] = -1;
            };
            walk(walk, 1);
        }
        std::vector<Tuple> tuples;
        const bool is_join = m.tables.size() > 1;
        for (const auto &asg : found) {
            Tuple tup;
            tup.reserve(m.columns.size());
            for (const auto &c : m.columns) {
                const unsigned t = schema.require_table(c.table);
                const std::int64_t r = asg[t];
                if (c.synthetic == SyntheticKind::Indicator) {
                    tup.push_back(r >= 0 ? 1.0 : 0.0);
                } else if (c.synthetic == SyntheticKind::TupleFactor) {
                    const double f = r >= 0 ? db_.tables[t].data[s.factor_column[std::size_t(c.fk)]][std::size_t(r)] : 0;
                    if (c.join_side && is_join) tup.push_back(r >= 0 ? std::max(f, 1.0) : 1.0);
                    else tup.push_back(f);
                } else {
                    const SampleTable &tab = db_.tables[t];
                    tup.push_back(r >= 0 ? tab.data[tab.require(c.id)][std::size_t(r)] : kNull);
                }
            }
            tuples.push_back(std::move(tup));
        }
        std::sort(tuples.begin(), tuples.end(), tuple_less);
        return tuples;
    };

    for (const auto &rec : records) {
        const unsigned t = schema.require_table(rec.table);
        const auto &def = schema.tables[t];
        SampleTable &tab = db_.tables[t];
        const std::string ctx = "update of table '" + def.name + "'";

        /* the record's values in storage encoding */
        std::vector<double> values(def.columns.size());
        for (std::size_t c = 0; c != def.columns.size(); ++c) {
            const auto &meta = def.columns[c];
            const CsvField &f = rec.values[c];
            if (f.is_null()) {
                if (!meta.nullable && rec.op == UpdateOp::Insert)
                    throw InputError(ctx + ": NULL in non-nullable column '" + meta.name + "'");
                values[c] = kNull;
            } else if (meta.kind == ColumnKind::Continuous) {
                if (!parse_number(f.text, values[c]))
                    throw InputError(ctx + ": cannot parse '" + f.text + "' in column '" + meta.name + "'");
            } else if (rec.op == UpdateOp::Insert) {
                values[c] = db_.catalog.dictionaries[base_column_id(def.name, meta.name)].intern(f.text);
            } else {
                values[c] = kNull;
            }
        }
        const std::size_t pk_decl = std::size_t(def.column_index(def.primary_key));
        const double key = values[pk_decl];
        if (is_null(key)) throw InputError(ctx + ": primary key is NULL");

        std::vector<std::pair<unsigned, std::int64_t>> anchors;
        std::vector<unsigned> out_edges, in_edges;
        for (unsigned e = 0; e != schema.fks.size(); ++e) {
            if (schema.referencing_index(schema.fks[e]) == t) out_edges.push_back(e);
            if (schema.referenced_index(schema.fks[e]) == t) in_edges.push_back(e);
        }

        std::int64_t row = -1;
        if (rec.op == UpdateOp::Insert) {
            if (s.pk_row[t].count(key)) throw InputError(ctx + ": primary key " + format_number(key) + " exists");
        } else {
            auto it = s.pk_row[t].find(key);
            if (it == s.pk_row[t].end()) throw InputError(ctx + ": no row with primary key " + format_number(key));
            row = it->second;
            for (unsigned e : in_edges)
                if (tab.data[s.factor_column[e]][std::size_t(row)] > 0)
                    throw InputError(ctx + ": row " + format_number(key) + " is still referenced by '" +
                                     schema.fks[e].referencing_table + "'");
        }
        /* referenced rows */
        std::vector<std::pair<unsigned, std::int64_t>> parents;
        for (unsigned e : out_edges) {
            const auto &fk = schema.fks[e];
            const double fkv = rec.op == UpdateOp::Insert
                                   ? values[std::size_t(def.column_index(fk.referencing_column))]
                                   : tab.data[s.fk_column[e]][std::size_t(row)];
            if (is_null(fkv)) continue;
            const unsigned q = schema.referenced_index(fk);
            auto it = s.pk_row[q].find(fkv);
            if (it == s.pk_row[q].end())
                throw InputError(ctx + ": foreign key " + fk.referencing_column + " = " + format_number(fkv) +
                                 " has no row in '" + fk.referenced_table + "'");
            parents.emplace_back(q, it->second);
        }

        anchors = parents;
        if (row >= 0) anchors.emplace_back(t, row);
        std::vector<std::vector<Tuple>> before(ensemble_.rspns.size());
        for (std::size_t i = 0; i != ensemble_.rspns.size(); ++i) before[i] = local_rows(ensemble_.rspns[i], anchors);

        /* change the base data */
        if (rec.op == UpdateOp::Insert) {
            row = std::int64_t(tab.rows());
            for (std::size_t c = 0; c != def.columns.size(); ++c)
                tab.data[tab.require(base_column_id(def.name, def.columns[c].name))].push_back(values[c]);
            for (unsigned e : in_edges) tab.data[s.factor_column[e]].push_back(0);
            s.pk_row[t].emplace(key, std::uint32_t(row));
            for (std::size_t k = 0; k != out_edges.size(); ++k) {
                const unsigned e = out_edges[k];
                const double fkv = values[std::size_t(def.column_index(schema.fks[e].referencing_column))];
                if (is_null(fkv)) continue;
                s.children[e][fkv].push_back(key);
            }
            for (const auto &[q, prow] : parents)
                for (unsigned e : out_edges)
                    if (schema.referenced_index(schema.fks[e]) == q)
                        db_.tables[q].data[s.factor_column[e]][std::size_t(prow)] += 1;
            for (auto &m : ensemble_.rspns)
                for (auto &fd : m.fd_dictionaries) {
                    if (!iequals(fd.table, def.name)) continue;
                    const double det = values[std::size_t(def.column_index(fd.determinant))];
                    const double dep = values[std::size_t(def.column_index(fd.dependent))];
                    auto [it, fresh] = fd.dictionary.emplace(det, dep);
                    if (!fresh && !(it->second == dep || (is_null(it->second) && is_null(dep))))
                        spdlog::warn("insert into '{}' violates functional dependency {} -> {}", def.name,
                                     fd.determinant, fd.dependent);
                }
            ++stats.inserts;
        } else {
            for (unsigned e : out_edges) {
                const double fkv = tab.data[s.fk_column[e]][std::size_t(row)];
                if (is_null(fkv)) continue;
                auto &list = s.children[e][fkv];
                list.erase(std::find(list.begin(), list.end(), key));
                if (list.empty()) s.children[e].erase(fkv);
                const unsigned q = schema.referenced_index(schema.fks[e]);
                db_.tables[q].data[s.factor_column[e]][s.pk_row[q].at(fkv)] -= 1;
            }
            const std::size_t last = tab.rows() - 1;
            const double last_key = tab.data[s.pk_column[t]][last];
            for (auto &col : tab.data) {
                col[std::size_t(row)] = col[last];
                col.pop_back();
            }
            s.pk_row[t].erase(key);
            if (std::size_t(row) != last) s.pk_row[t][last_key] = std::uint32_t(row);
            ++stats.deletes;
        }
        tab.full_population_size = tab.rows();
        schema.tables[t].row_count = tab.rows();
        ensemble_.schema.tables[t].row_count = tab.rows();
        dirty_[t] = true;

        anchors = parents;
        if (rec.op == UpdateOp::Insert) anchors.emplace_back(t, row);
        for (std::size_t i = 0; i != ensemble_.rspns.size(); ++i) {
            Rspn &m = ensemble_.rspns[i];
            const auto after = local_rows(m, anchors);
            std::vector<Tuple> removed, added;
            std::set_difference(before[i].begin(), before[i].end(), after.begin(), after.end(),
                                std::back_inserter(removed), tuple_less);
            std::set_difference(after.begin(), after.end(), before[i].begin(), before[i].end(),
                                std::back_inserter(added), tuple_less);
            if (removed.empty() && added.empty()) continue;
            stats.model_operations += removed.size() + added.size();
            if (m.sample_rate >= 1) {
                for (const auto &tup : removed) update_tuple(m, tup, UpdateOp::Delete);
                for (const auto &tup : added) update_tuple(m, tup, UpdateOp::Insert);
                stats.applied += removed.size() + added.size();
                continue;
            }
            UpdateBatch batch;
            batch.applied_sample_rate = m.sample_rate;
            for (auto &tup : removed) batch.operations.emplace_back(UpdateOp::Delete, std::move(tup));
            for (auto &tup : added) batch.operations.emplace_back(UpdateOp::Insert, std::move(tup));
            const BatchResult r = apply_batch(m, batch, mix_seed(seed_, counter_++));
            stats.applied += r.applied;
            stats.skipped += r.skipped;
        }
    }
    ensemble_.catalog = db_.catalog;
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return stats;
}

std::vector<std::string> Maintainer::dirty_tables() const
{
    std::vector<std::string> out;
    for (std::size_t t = 0; t != dirty_.size(); ++t)
        if (dirty_[t]) out.push_back(db_.schema.tables[t].name);
    return out;
}

void Maintainer::write_back() const
{
    for (std::size_t t = 0; t != dirty_.size(); ++t) {
        if (!dirty_[t]) continue;
        const auto &path = db_.schema.tables[t].csv;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write " + path.string());
        out << table_csv(db_, unsigned(t));
    }
}

std::string table_csv(const Database &db, unsigned t)
{
    const auto &def = db.schema.tables[t];
    const SampleTable &tab = db.tables[t];
    std::vector<std::size_t> cols;
    std::ostringstream out;
    for (std::size_t c = 0; c != def.columns.size(); ++c) {
        cols.push_back(tab.require(base_column_id(def.name, def.columns[c].name)));
        out << (c ? "," : "") << csv_escape(def.columns[c].name);
    }
    out << '\n';
    for (std::size_t r = 0; r != tab.rows(); ++r) {
        for (std::size_t c = 0; c != cols.size(); ++c) {
            if (c) out << ',';
            const double v = tab.data[cols[c]][r];
            if (is_null(v)) continue;
            if (def.columns[c].kind == ColumnKind::Categorical)
                out << csv_escape(db.catalog.render(base_column_id(def.name, def.columns[c].name), v));
            else out << format_number(v);
        }
        out << '\n';
    }
    return out.str();
}

}
