#include "rspn/schema.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace rspn {

bool iequals(std::string_view a, std::string_view b) noexcept
{
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
        return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
    });
}

std::vector<unsigned> TableSet::members() const
{
    std::vector<unsigned> out;
    for (std::uint64_t b = bits_; b; b &= b - 1) out.push_back(unsigned(std::countr_zero(b)));
    return out;
}

int TableDef::column_index(std::string_view column) const noexcept
{
    for (std::size_t i = 0; i != columns.size(); ++i)
        if (iequals(columns[i].name, column)) return int(i);
    return -1;
}

const ColumnMeta &TableDef::column(std::string_view column) const
{
    const int i = column_index(column);
    if (i < 0) throw InputError("table '" + name + "' has no column '" + std::string(column) + "'");
    return columns[std::size_t(i)];
}

int SchemaGraph::table_index(std::string_view name) const noexcept
{
    for (std::size_t i = 0; i != tables.size(); ++i)
        if (iequals(tables[i].name, name)) return int(i);
    return -1;
}

unsigned SchemaGraph::require_table(std::string_view name) const
{
    const int i = table_index(name);
    if (i < 0) throw InputError("unknown table '" + std::string(name) + "'");
    return unsigned(i);
}

std::vector<unsigned> SchemaGraph::edges_within(TableSet set) const
{
    std::vector<unsigned> out;
    for (unsigned e = 0; e != fks.size(); ++e)
        if (set.contains(referencing_index(fks[e])) && set.contains(referenced_index(fks[e]))) out.push_back(e);
    return out;
}

std::optional<unsigned> SchemaGraph::edge_between(unsigned a, unsigned b) const
{
    for (unsigned e = 0; e != fks.size(); ++e) {
        const unsigned from = referencing_index(fks[e]), to = referenced_index(fks[e]);
        if ((from == a && to == b) || (from == b && to == a)) return e;
    }
    return std::nullopt;
}

bool SchemaGraph::is_connected(TableSet set) const
{
    if (set.empty()) return false;
    TableSet reached = TableSet::single(set.members().front());
    for (bool grew = true; grew;) {
        grew = false;
        for (unsigned e : edges_within(set)) {
            const unsigned a = referencing_index(fks[e]), b = referenced_index(fks[e]);
            if (reached.contains(a) != reached.contains(b)) {
                reached.insert(a);
                reached.insert(b);
                grew = true;
            }
        }
    }
    return reached == set;
}

TableSet SchemaGraph::all_tables() const
{
    TableSet s;
    for (unsigned t = 0; t != tables.size(); ++t) s.insert(t);
    return s;
}

std::vector<std::string> SchemaGraph::key_columns(unsigned table) const
{
    std::vector<std::string> keys{tables[table].primary_key};
    for (const auto &fk : fks)
        if (iequals(fk.referencing_table, tables[table].name)) keys.push_back(fk.referencing_column);
    return keys;
}

std::string SchemaGraph::canonical() const
{
    std::ostringstream out;
    for (const auto &t : tables) {
        out << "T " << t.name << " pk=" << t.primary_key << '\n';
        for (const auto &c : t.columns) out << "  C " << c.name << ' ' << to_string(c.kind) << ' ' << c.nullable << '\n';
    }
    for (const auto &fk : fks)
        out << "FK " << fk.referencing_table << '.' << fk.referencing_column << "->" << fk.referenced_table << '.'
            << fk.referenced_column << '\n';
    for (const auto &fd : fds) out << "FD " << fd.table << '.' << fd.determinant << "->" << fd.dependent << '\n';
    return out.str();
}

namespace {

std::pair<std::string, std::string> split_qualified(const std::string &text, const char *what)
{
    const auto dot = text.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == text.size())
        throw InputError(std::string(what) + " '" + text + "' must have the form table.column");
    return {text.substr(0, dot), text.substr(dot + 1)};
}

template<typename T>
T get_field(const nlohmann::json &obj, const char *key, const std::string &context)
{
    if (!obj.contains(key)) throw InputError(context + ": missing field '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception &) {
        throw InputError(context + ": field '" + key + "' has the wrong type");
    }
}

}

SchemaGraph parse_schema(const std::string &json_text, const std::filesystem::path &base_dir, bool check_files)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error &e) {
        throw InputError(std::string("schema config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("tables") || !doc["tables"].is_array())
        throw InputError("schema config must be an object with a 'tables' array");

    SchemaGraph g;
    for (const auto &jt : doc["tables"]) {
        TableDef t;
        t.name = get_field<std::string>(jt, "name", "table");
        const std::string ctx = "table '" + t.name + "'";
        if (g.table_index(t.name) >= 0) throw InputError(ctx + ": declared twice");
        t.csv = base_dir / get_field<std::string>(jt, "csv", ctx);
        t.primary_key = get_field<std::string>(jt, "primary_key", ctx);
        if (!jt.contains("columns") || !jt["columns"].is_array() || jt["columns"].empty())
            throw InputError(ctx + ": 'columns' must be a non-empty array");
        for (const auto &jc : jt["columns"]) {
            ColumnMeta c;
            c.name = get_field<std::string>(jc, "name", ctx + " column");
            c.kind = column_kind_from_string(get_field<std::string>(jc, "kind", ctx + " column '" + c.name + "'"));
            c.nullable = jc.value("nullable", false);
            if (t.column_index(c.name) >= 0) throw InputError(ctx + ": column '" + c.name + "' declared twice");
            t.columns.push_back(std::move(c));
        }
        const int pk = t.column_index(t.primary_key);
        if (pk < 0) throw InputError(ctx + ": primary key '" + t.primary_key + "' is not a declared column");
        if (t.columns[std::size_t(pk)].kind != ColumnKind::Continuous)
            throw InputError(ctx + ": primary key '" + t.primary_key + "' must be a numeric (continuous) column");
        if (t.columns[std::size_t(pk)].nullable)
            throw InputError(ctx + ": primary key '" + t.primary_key + "' cannot be nullable");
        if (check_files && !std::filesystem::exists(t.csv))
            throw InputError(ctx + ": CSV file " + t.csv.string() + " not found");
        g.tables.push_back(std::move(t));
    }
    if (g.tables.size() > 64) throw InputError("at most 64 tables are supported");

    if (doc.contains("foreign_keys")) {
        for (const auto &jf : doc["foreign_keys"]) {
            const auto from = get_field<std::string>(jf, "from", "foreign key");
            const auto to = get_field<std::string>(jf, "to", "foreign key");
            const std::string ctx = "foreign key " + from + " -> " + to;
            auto [ft, fc] = split_qualified(from, "foreign key source");
            auto [tt, tc] = split_qualified(to, "foreign key target");
            const int fi = g.table_index(ft), ti = g.table_index(tt);
            if (fi < 0) throw InputError(ctx + ": dangling FK, table '" + ft + "' not declared");
            if (ti < 0) throw InputError(ctx + ": dangling FK, table '" + tt + "' not declared");
            if (fi == ti) throw InputError(ctx + ": self-referencing foreign keys are not supported");
            const auto &from_table = g.tables[std::size_t(fi)];
            const auto &to_table = g.tables[std::size_t(ti)];
            const int fci = from_table.column_index(fc);
            if (fci < 0) throw InputError(ctx + ": dangling FK, column '" + fc + "' not in table '" + ft + "'");
            if (to_table.column_index(tc) < 0)
                throw InputError(ctx + ": dangling FK, column '" + tc + "' not in table '" + tt + "'");
            if (!iequals(to_table.primary_key, tc))
                throw InputError(ctx + ": referenced column '" + tc + "' is not the primary key of '" + tt + "'");
            if (from_table.columns[std::size_t(fci)].kind != ColumnKind::Continuous)
                throw InputError(ctx + ": foreign key column '" + fc + "' must be numeric (continuous)");
            if (g.edge_between(unsigned(fi), unsigned(ti)))
                throw InputError(ctx + ": only one foreign key per table pair is supported");
            g.fks.push_back({from_table.name, from_table.columns[std::size_t(fci)].name, to_table.name,
                             to_table.primary_key});
        }
    }

    /* The join machinery walks FK trees; a cycle would make join orders ambiguous. */
    {
        std::vector<unsigned> parent(g.tables.size());
        for (unsigned i = 0; i != parent.size(); ++i) parent[i] = i;
        auto find = [&](unsigned x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (const auto &fk : g.fks) {
            const unsigned a = find(g.referencing_index(fk)), b = find(g.referenced_index(fk));
            if (a == b)
                throw InputError("foreign key " + fk.referencing_table + "." + fk.referencing_column +
                                 " closes a cycle in the FK graph; only tree-shaped schemas are supported");
            parent[a] = b;
        }
        std::set<unsigned> roots;
        for (unsigned i = 0; i != parent.size(); ++i) roots.insert(find(i));
        g.multi_component = roots.size() > 1;
    }

    if (doc.contains("functional_dependencies")) {
        for (const auto &jd : doc["functional_dependencies"]) {
            FunctionalDependency fd;
            fd.table = get_field<std::string>(jd, "table", "functional dependency");
            fd.determinant = get_field<std::string>(jd, "determinant", "functional dependency");
            fd.dependent = get_field<std::string>(jd, "dependent", "functional dependency");
            const std::string ctx = "functional dependency " + fd.table + "." + fd.determinant + " -> " + fd.dependent;
            const int ti = g.table_index(fd.table);
            if (ti < 0) throw InputError(ctx + ": table '" + fd.table + "' not declared");
            const auto &t = g.tables[std::size_t(ti)];
            if (t.column_index(fd.determinant) < 0)
                throw InputError(ctx + ": FD column '" + fd.determinant + "' not found in table '" + t.name + "'");
            if (t.column_index(fd.dependent) < 0)
                throw InputError(ctx + ": FD column '" + fd.dependent + "' not found in table '" + t.name + "'");
            if (iequals(fd.determinant, fd.dependent)) throw InputError(ctx + ": determinant and dependent coincide");
            for (const auto &key : g.key_columns(unsigned(ti)))
                if (iequals(key, fd.dependent))
                    throw InputError(ctx + ": key column '" + key + "' cannot be an FD dependent");
            fd.table = t.name;
            fd.determinant = t.column(fd.determinant).name;
            fd.dependent = t.column(fd.dependent).name;
            g.fds.push_back(std::move(fd));
        }
    }
    return g;
}

SchemaGraph load_schema(const std::filesystem::path &config_file)
{
    std::ifstream in(config_file);
    if (!in) throw InputError("schema config " + config_file.string() + " not found");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_schema(buffer.str(), config_file.parent_path(), true);
}

}
