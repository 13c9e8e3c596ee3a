#include "rspn/ingest.hpp"

#include "rspn/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <set>
#include <span>
#include <spdlog/spdlog.h>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace rspn {

/*======================================================================================================================
 * Dictionary, Catalog, SampleTable
 *====================================================================================================================*/

Dictionary Dictionary::from_strings(std::vector<std::string> strings)
{
    std::sort(strings.begin(), strings.end());
    strings.erase(std::unique(strings.begin(), strings.end()), strings.end());
    Dictionary d;
    d.strings_ = std::move(strings);
    for (std::uint32_t i = 0; i != d.strings_.size(); ++i) d.codes_.emplace(d.strings_[i], i);
    return d;
}

std::optional<std::uint32_t> Dictionary::code(const std::string &s) const
{
    if (auto it = codes_.find(s); it != codes_.end()) return it->second;
    return std::nullopt;
}

std::uint32_t Dictionary::intern(const std::string &s)
{
    if (auto c = code(s)) return *c;
    const auto c = std::uint32_t(strings_.size());
    strings_.push_back(s);
    codes_.emplace(s, c);
    return c;
}

const Dictionary *Catalog::find(const std::string &column_id) const
{
    auto it = dictionaries.find(column_id);
    return it == dictionaries.end() ? nullptr : &it->second;
}

std::string Catalog::render(const std::string &column_id, double value) const
{
    if (is_null(value)) return "NULL";
    if (const Dictionary *d = find(column_id)) {
        const auto code = std::uint32_t(value);
        if (code < d->size()) return d->text(code);
    }
    std::ostringstream out;
    out << value;
    return out.str();
}

std::string base_column_id(std::string_view table, std::string_view column)
{
    return std::string(table) + "." + std::string(column);
}

std::string factor_column_id(const ForeignKeyRel &fk, bool join_side)
{
    return std::string(join_side ? "F':" : "F:") + fk.referenced_table + "<-" + fk.referencing_table;
}

std::string indicator_column_id(std::string_view table) { return "N:" + std::string(table); }

int SampleTable::find(std::string_view id) const noexcept
{
    for (std::size_t i = 0; i != columns.size(); ++i)
        if (iequals(columns[i].id, id)) return int(i);
    return -1;
}

std::size_t SampleTable::require(std::string_view id) const
{
    const int i = find(id);
    if (i < 0) throw InputError("sample has no column '" + std::string(id) + "'");
    return std::size_t(i);
}

void SampleTable::add_column(SampleColumn meta, std::vector<double> values)
{
    if (!data.empty() && values.size() != rows())
        throw InvariantViolation("column '" + meta.id + "' has " + std::to_string(values.size()) + " rows, expected " +
                                 std::to_string(rows()));
    columns.push_back(std::move(meta));
    data.push_back(std::move(values));
}

void SampleTable::remove_column(std::size_t index)
{
    columns.erase(columns.begin() + std::ptrdiff_t(index));
    data.erase(data.begin() + std::ptrdiff_t(index));
}

SampleTable SampleTable::select_rows(const std::vector<std::uint32_t> &rows) const
{
    SampleTable out;
    out.origin_tables = origin_tables;
    out.columns = columns;
    out.sample_rate = sample_rate;
    out.full_population_size = full_population_size;
    out.fd_dictionaries = fd_dictionaries;
    out.data.resize(data.size());
    for (std::size_t c = 0; c != data.size(); ++c) {
        out.data[c].reserve(rows.size());
        for (auto r : rows) out.data[c].push_back(data[c][r]);
    }
    return out;
}

/*======================================================================================================================
 * Ingestion
 *====================================================================================================================*/

SampleTable ingest_table(std::istream &csv, TableDef &def, Catalog &catalog)
{
    CsvReader reader(csv);
    const std::string ctx = "table '" + def.name + "'";
    auto header = reader.next();
    if (!header) throw InputError(ctx + ": CSV is empty, a header row is required");
    if (header->size() != def.columns.size())
        throw InputError(ctx + ": CSV header has " + std::to_string(header->size()) + " columns, schema declares " +
                         std::to_string(def.columns.size()));
    for (std::size_t c = 0; c != def.columns.size(); ++c)
        if (!iequals((*header)[c].text, def.columns[c].name))
            throw InputError(ctx + ": CSV header column " + std::to_string(c + 1) + " is '" + (*header)[c].text +
                             "', schema declares '" + def.columns[c].name + "'");

    const std::size_t ncols = def.columns.size();
    std::vector<std::vector<double>> data(ncols);
    std::vector<std::vector<std::string>> strings(ncols);
    std::vector<std::vector<std::uint32_t>> string_rows(ncols);
    std::size_t row = 0;
    while (auto rec = reader.next()) {
        if (rec->size() != ncols)
            throw InputError(ctx + ": CSV line " + std::to_string(reader.line()) + " has " +
                             std::to_string(rec->size()) + " fields, expected " + std::to_string(ncols));
        for (std::size_t c = 0; c != ncols; ++c) {
            const auto &meta = def.columns[c];
            const CsvField &f = (*rec)[c];
            if (f.is_null()) {
                if (!meta.nullable)
                    throw InputError(ctx + ": CSV line " + std::to_string(reader.line()) + ", column '" + meta.name +
                                     "': NULL in a non-nullable column");
                data[c].push_back(kNull);
                continue;
            }
            if (meta.kind == ColumnKind::Continuous) {
                double v;
                if (!parse_number(f.text, v))
                    throw InputError(ctx + ": CSV line " + std::to_string(reader.line()) + ", column '" + meta.name +
                                     "': cannot parse '" + f.text + "' as a number");
                data[c].push_back(v);
            } else {
                data[c].push_back(0.0);
                strings[c].push_back(f.text);
                string_rows[c].push_back(std::uint32_t(row));
            }
        }
        ++row;
    }

    for (std::size_t c = 0; c != ncols; ++c) {
        if (def.columns[c].kind != ColumnKind::Categorical) continue;
        const std::string id = base_column_id(def.name, def.columns[c].name);
        auto it = catalog.dictionaries.find(id);
        if (it == catalog.dictionaries.end())
            it = catalog.dictionaries.emplace(id, Dictionary::from_strings(strings[c])).first;
        for (std::size_t i = 0; i != strings[c].size(); ++i)
            data[c][string_rows[c][i]] = it->second.intern(strings[c][i]);
    }

    const auto pk = std::size_t(def.column_index(def.primary_key));
    std::unordered_set<double> seen;
    seen.reserve(row);
    for (std::size_t r = 0; r != row; ++r)
        if (!seen.insert(data[pk][r]).second)
            throw InputError(ctx + ": duplicate primary key value " + std::to_string(data[pk][r]) + " in column '" +
                             def.primary_key + "'");

    SampleTable t;
    t.origin_tables = {def.name};
    t.full_population_size = row;
    def.row_count = row;
    for (std::size_t c = 0; c != ncols; ++c) {
        SampleColumn meta;
        meta.id = base_column_id(def.name, def.columns[c].name);
        meta.table = def.name;
        meta.name = def.columns[c].name;
        meta.kind = def.columns[c].kind;
        meta.nullable = def.columns[c].nullable;
        meta.is_key = c == pk;
        t.add_column(std::move(meta), std::move(data[c]));
    }
    return t;
}

SampleTable ingest_table(const std::filesystem::path &csv, TableDef &def, Catalog &catalog)
{
    std::ifstream in(csv, std::ios::binary);
    if (!in) throw InputError("table '" + def.name + "': cannot open CSV file " + csv.string());
    return ingest_table(in, def, catalog);
}

/*======================================================================================================================
 * Tuple factors
 *====================================================================================================================*/

namespace {

/// Row lookup structures for one FK edge.
struct EdgeIndex
{
    std::vector<std::int32_t> parent_of;     ///< referencing row -> referenced row, -1 for NULL
    std::vector<std::uint32_t> child_offset; ///< CSR over referenced rows
    std::vector<std::uint32_t> children;

    std::span<const std::uint32_t> children_of(std::int32_t parent) const
    {
        return {children.data() + child_offset[std::size_t(parent)],
                children.data() + child_offset[std::size_t(parent) + 1]};
    }
};

EdgeIndex build_edge_index(const SchemaGraph &schema, const std::vector<SampleTable> &tables, unsigned e)
{
    const auto &fk = schema.fks[e];
    const SampleTable &child = tables[schema.referencing_index(fk)];
    const SampleTable &parent = tables[schema.referenced_index(fk)];
    const auto &fk_col = child.data[child.require(base_column_id(fk.referencing_table, fk.referencing_column))];
    const auto &pk_col = parent.data[parent.require(base_column_id(fk.referenced_table, fk.referenced_column))];

    std::unordered_map<double, std::int32_t> pk_row;
    pk_row.reserve(pk_col.size());
    for (std::size_t r = 0; r != pk_col.size(); ++r) pk_row.emplace(pk_col[r], std::int32_t(r));

    EdgeIndex idx;
    idx.parent_of.resize(fk_col.size(), -1);
    std::vector<std::uint32_t> counts(pk_col.size() + 1, 0);
    for (std::size_t r = 0; r != fk_col.size(); ++r) {
        if (is_null(fk_col[r])) continue;
        auto it = pk_row.find(fk_col[r]);
        if (it == pk_row.end())
            throw InputError("referential integrity violated: " + fk.referencing_table + "." + fk.referencing_column +
                             " value " + std::to_string(fk_col[r]) + " not found in " + fk.referenced_table + "." +
                             fk.referenced_column);
        idx.parent_of[r] = it->second;
        ++counts[std::size_t(it->second) + 1];
    }
    idx.child_offset.resize(pk_col.size() + 1, 0);
    for (std::size_t i = 1; i <= pk_col.size(); ++i) idx.child_offset[i] = idx.child_offset[i - 1] + counts[i];
    idx.children.resize(idx.child_offset.back());
    std::vector<std::uint32_t> fill(idx.child_offset.begin(), idx.child_offset.end() - 1);
    for (std::size_t r = 0; r != fk_col.size(); ++r)
        if (idx.parent_of[r] >= 0) idx.children[fill[std::size_t(idx.parent_of[r])]++] = std::uint32_t(r);
    return idx;
}

}

void compute_tuple_factors(const SchemaGraph &schema, std::vector<SampleTable> &tables)
{
    for (unsigned e = 0; e != schema.fks.size(); ++e) {
        const auto &fk = schema.fks[e];
        const EdgeIndex idx = build_edge_index(schema, tables, e);
        SampleTable &parent = tables[schema.referenced_index(fk)];
        std::vector<double> factor(parent.rows());
        for (std::size_t r = 0; r != factor.size(); ++r)
            factor[r] = double(idx.child_offset[r + 1] - idx.child_offset[r]);
        SampleColumn meta;
        meta.id = factor_column_id(fk, false);
        meta.table = fk.referenced_table;
        meta.kind = ColumnKind::Continuous;
        meta.synthetic = SyntheticKind::TupleFactor;
        meta.fk = int(e);
        if (int existing = parent.find(meta.id); existing >= 0) parent.remove_column(std::size_t(existing));
        parent.add_column(std::move(meta), std::move(factor));
    }
}

Database load_database(const SchemaGraph &schema, const Catalog *dictionaries)
{
    Database db;
    db.schema = schema;
    if (dictionaries) db.catalog = *dictionaries;
    for (auto &def : db.schema.tables) db.tables.push_back(ingest_table(def.csv, def, db.catalog));
    for (unsigned t = 0; t != db.tables.size(); ++t)
        for (const auto &key : db.schema.key_columns(t))
            db.tables[t].columns[db.tables[t].require(base_column_id(db.schema.tables[t].name, key))].is_key = true;
    compute_tuple_factors(db.schema, db.tables);
    return db;
}

Database load_database(const SchemaGraph &schema, const std::map<std::string, std::string> &csv_text,
                       const Catalog *dictionaries)
{
    Database db;
    db.schema = schema;
    if (dictionaries) db.catalog = *dictionaries;
    for (auto &def : db.schema.tables) {
        auto it = csv_text.find(def.name);
        if (it == csv_text.end()) throw InputError("no CSV data for table '" + def.name + "'");
        std::istringstream in(it->second);
        db.tables.push_back(ingest_table(in, def, db.catalog));
    }
    for (unsigned t = 0; t != db.tables.size(); ++t)
        for (const auto &key : db.schema.key_columns(t))
            db.tables[t].columns[db.tables[t].require(base_column_id(db.schema.tables[t].name, key))].is_key = true;
    compute_tuple_factors(db.schema, db.tables);
    return db;
}

/*======================================================================================================================
 * Full outer join
 *====================================================================================================================*/

namespace {

constexpr std::uint64_t kMaxIntermediateCells = 1'000'000'000;

/// Uniform sample of fixed size over a stream (Algorithm R). Remembers each kept item's stream position so the sample
/// can be returned in stream order.
template<typename T>
class ReservoirSampler
{
    std::uint64_t capacity_;
    std::uint64_t seen_ = 0;
    std::vector<std::pair<std::uint64_t, T>> items_;
    std::mt19937_64 rng_;

  public:
    ReservoirSampler(std::uint64_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) { }

    void offer(T item)
    {
        if (items_.size() < capacity_) {
            items_.emplace_back(seen_++, std::move(item));
            return;
        }
        std::uniform_int_distribution<std::uint64_t> pick(0, seen_);
        const std::uint64_t j = pick(rng_);
        if (j < capacity_) items_[j] = {seen_, std::move(item)};
        ++seen_;
    }

    std::uint64_t seen() const noexcept { return seen_; }

    std::vector<T> take_in_stream_order()
    {
        std::sort(items_.begin(), items_.end(), [](auto &a, auto &b) { return a.first < b.first; });
        std::vector<T> out;
        out.reserve(items_.size());
        for (auto &p : items_) out.push_back(std::move(p.second));
        return out;
    }
};

struct JoinPlan
{
    std::vector<unsigned> tables;             ///< declaration order; slot i holds row ids of tables[i]
    std::vector<std::pair<unsigned, unsigned>> steps; ///< (table joined, edge used), in join order after the first
    unsigned first;

    int slot(unsigned t) const
    {
        for (std::size_t i = 0; i != tables.size(); ++i)
            if (tables[i] == t) return int(i);
        return -1;
    }
};

JoinPlan plan_join(const SchemaGraph &schema, TableSet set)
{
    if (set.empty()) throw InputError("full outer join over an empty table set");
    if (!schema.is_connected(set)) throw InputError("table set is not connected by foreign keys");
    JoinPlan p;
    p.tables = set.members();
    p.first = p.tables.front();
    TableSet joined = TableSet::single(p.first);
    while (joined != set) {
        bool progressed = false;
        for (unsigned t : p.tables) {
            if (joined.contains(t)) continue;
            for (unsigned e : schema.edges_within(set)) {
                const unsigned a = schema.referencing_index(schema.fks[e]), b = schema.referenced_index(schema.fks[e]);
                if ((a == t && joined.contains(b)) || (b == t && joined.contains(a))) {
                    p.steps.emplace_back(t, e);
                    joined.insert(t);
                    progressed = true;
                    break;
                }
            }
            if (progressed) break;
        }
        if (!progressed) throw InvariantViolation("join planning stalled on a connected table set");
    }
    return p;
}

/// Runs the left-deep full outer join; the last step streams into `sink`.
template<typename Sink>
void run_join(const Database &db, const JoinPlan &plan, Sink &&sink)
{
    const std::size_t stride = plan.tables.size();
    const int first_slot = plan.slot(plan.first);
    std::vector<std::int32_t> tuples;
    auto emit_to = [&](std::vector<std::int32_t> &out, const std::int32_t *t) {
        out.insert(out.end(), t, t + stride);
        if (out.size() > kMaxIntermediateCells)
            throw InputError("full outer join too large to materialize in memory");
    };

    const std::size_t first_rows = db.tables[plan.first].rows();
    std::vector<std::int32_t> scratch(stride, -1);

    if (plan.steps.empty()) {
        for (std::size_t r = 0; r != first_rows; ++r) {
            scratch[std::size_t(first_slot)] = std::int32_t(r);
            sink(scratch.data());
        }
        return;
    }

    tuples.reserve(first_rows * stride);
    for (std::size_t r = 0; r != first_rows; ++r) {
        scratch[std::size_t(first_slot)] = std::int32_t(r);
        emit_to(tuples, scratch.data());
    }

    for (std::size_t s = 0; s != plan.steps.size(); ++s) {
        const auto [y, e] = plan.steps[s];
        const bool last = s + 1 == plan.steps.size();
        const auto &fk = db.schema.fks[e];
        const EdgeIndex idx = build_edge_index(db.schema, db.tables, e);
        const bool y_is_child = db.schema.referencing_index(fk) == y;
        const unsigned x = y_is_child ? db.schema.referenced_index(fk) : db.schema.referencing_index(fk);
        const auto sy = std::size_t(plan.slot(y)), sx = std::size_t(plan.slot(x));

        std::vector<std::int32_t> next;
        auto emit = [&](const std::int32_t *t) {
            if (last) sink(t);
            else emit_to(next, t);
        };

        const std::size_t n = tuples.size() / stride;
        for (std::size_t i = 0; i != n; ++i) {
            std::copy_n(tuples.data() + i * stride, stride, scratch.data());
            const std::int32_t xr = scratch[sx];
            if (y_is_child) {
                if (xr >= 0) {
                    auto kids = idx.children_of(xr);
                    if (!kids.empty()) {
                        for (auto c : kids) {
                            scratch[sy] = std::int32_t(c);
                            emit(scratch.data());
                        }
                        continue;
                    }
                }
                scratch[sy] = -1;
                emit(scratch.data());
            } else {
                scratch[sy] = xr >= 0 ? idx.parent_of[std::size_t(xr)] : -1;
                emit(scratch.data());
            }
        }
        /* rows of the new table that matched nothing so far */
        std::fill(scratch.begin(), scratch.end(), -1);
        const std::size_t y_rows = db.tables[y].rows();
        for (std::size_t r = 0; r != y_rows; ++r) {
            const bool unmatched = y_is_child ? idx.parent_of[r] < 0 : idx.child_offset[r + 1] == idx.child_offset[r];
            if (!unmatched) continue;
            scratch[sy] = std::int32_t(r);
            emit(scratch.data());
        }
        scratch[sy] = -1;
        if (!last) tuples = std::move(next);
    }
}

}

std::uint64_t full_outer_join_size(const Database &db, TableSet table_set)
{
    const JoinPlan plan = plan_join(db.schema, table_set);
    std::uint64_t count = 0;
    run_join(db, plan, [&](const std::int32_t *) {
        if (__builtin_add_overflow(count, 1, &count)) throw InputError("join-size counting overflow");
    });
    return count;
}

SampleTable full_outer_join_sample(const Database &db, TableSet table_set, std::uint64_t max_rows, std::uint64_t seed)
{
    if (max_rows == 0) throw InputError("max_rows must be positive");
    const JoinPlan plan = plan_join(db.schema, table_set);
    const std::size_t stride = plan.tables.size();
    const bool is_join = stride > 1;

    ReservoirSampler<std::vector<std::int32_t>> reservoir(max_rows, seed);
    run_join(db, plan, [&](const std::int32_t *t) { reservoir.offer(std::vector<std::int32_t>(t, t + stride)); });
    const std::uint64_t population = reservoir.seen();
    const auto rows = reservoir.take_in_stream_order();

    SampleTable out;
    for (unsigned t : plan.tables) out.origin_tables.push_back(db.schema.tables[t].name);
    out.full_population_size = population;
    out.sample_rate = population == 0 ? 1.0 : double(rows.size()) / double(population);

    for (std::size_t slot = 0; slot != stride; ++slot) {
        const unsigned t = plan.tables[slot];
        const SampleTable &base = db.tables[t];
        const std::string &tname = db.schema.tables[t].name;

        if (is_join) {
            SampleColumn meta;
            meta.id = indicator_column_id(tname);
            meta.table = tname;
            meta.kind = ColumnKind::Continuous;
            meta.synthetic = SyntheticKind::Indicator;
            std::vector<double> values(rows.size());
            for (std::size_t i = 0; i != rows.size(); ++i) values[i] = rows[i][slot] >= 0 ? 1.0 : 0.0;
            out.add_column(std::move(meta), std::move(values));
        }
        for (std::size_t c = 0; c != base.columns.size(); ++c) {
            SampleColumn meta = base.columns[c];
            std::vector<double> values(rows.size());
            const auto &src = base.data[c];
            if (meta.synthetic == SyntheticKind::TupleFactor) {
                const auto &fk = db.schema.fks[std::size_t(meta.fk)];
                const bool internal = table_set.contains(db.schema.referencing_index(fk)) && is_join;
                for (std::size_t i = 0; i != rows.size(); ++i) {
                    const std::int32_t r = rows[i][slot];
                    if (internal) values[i] = r >= 0 ? std::max(src[std::size_t(r)], 1.0) : 1.0;
                    else values[i] = r >= 0 ? src[std::size_t(r)] : 0.0;
                }
                if (internal) {
                    meta.id = factor_column_id(fk, true);
                    meta.join_side = true;
                }
            } else {
                for (std::size_t i = 0; i != rows.size(); ++i) {
                    const std::int32_t r = rows[i][slot];
                    values[i] = r >= 0 ? src[std::size_t(r)] : kNull;
                }
                if (is_join) meta.nullable = true;
            }
            out.add_column(std::move(meta), std::move(values));
        }
    }
    return out;
}

/*======================================================================================================================
 * Learning views
 *====================================================================================================================*/

SampleTable apply_fd_projection(const SampleTable &table, const std::vector<FunctionalDependency> &fds,
                                std::vector<std::string> *dropped)
{
    SampleTable out = table;
    for (const auto &decl : fds) {
        const int a = out.find(base_column_id(decl.table, decl.determinant));
        const int b = out.find(base_column_id(decl.table, decl.dependent));
        if (a < 0 || b < 0) continue;
        const std::string name = decl.table + "." + decl.determinant + " -> " + decl.dependent;

        FunctionalDependency fd = decl;
        fd.dictionary.clear();
        bool violated = false;
        const auto &av = out.data[std::size_t(a)];
        const auto &bv = out.data[std::size_t(b)];
        for (std::size_t r = 0; r != av.size() && !violated; ++r) {
            if (is_null(av[r])) {
                violated = !is_null(bv[r]);
                continue;
            }
            auto [it, inserted] = fd.dictionary.emplace(av[r], bv[r]);
            if (!inserted && !(it->second == bv[r] || (is_null(it->second) && is_null(bv[r])))) violated = true;
        }
        if (violated) {
            spdlog::warn("functional dependency {} is violated by the data; keeping both columns", name);
            if (dropped) dropped->push_back(name);
            continue;
        }
        out.remove_column(std::size_t(b));
        out.fd_dictionaries.push_back(std::move(fd));
    }
    return out;
}

SampleTable drop_key_columns(const SampleTable &table)
{
    SampleTable out = table;
    for (std::size_t c = out.columns.size(); c-- > 0;)
        if (out.columns[c].is_key) out.remove_column(c);
    return out;
}

}
