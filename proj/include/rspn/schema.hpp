#pragma once

#include "rspn/common.hpp"

#include <bit>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rspn {

struct ColumnMeta
{
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    bool nullable = false;

    friend bool operator==(const ColumnMeta &, const ColumnMeta &) = default;
};

struct TableDef
{
    std::string name;
    std::filesystem::path csv;
    std::vector<ColumnMeta> columns;
    std::string primary_key;
    std::uint64_t row_count = 0; ///< filled in at ingestion

    /// Index of the column with this name (case-insensitive), or -1.
    int column_index(std::string_view column) const noexcept;
    const ColumnMeta &column(std::string_view column) const;

    friend bool operator==(const TableDef &, const TableDef &) = default;
};

/// referencing_table.referencing_column -> referenced_table.referenced_column (the latter is its primary key).
/// In tuple-factor notation the referenced table is S and the referencing table is P: F_{S<-P} lives on S.
struct ForeignKeyRel
{
    std::string referencing_table;
    std::string referencing_column;
    std::string referenced_table;
    std::string referenced_column;

    friend bool operator==(const ForeignKeyRel &, const ForeignKeyRel &) = default;
};

/// determinant -> dependent within one table. The dictionary maps each observed determinant value to its dependent
/// value (both in the storage encoding of their columns) and is filled in when data is ingested.
struct FunctionalDependency
{
    std::string table;
    std::string determinant;
    std::string dependent;
    std::map<double, double> dictionary;

    friend bool operator==(const FunctionalDependency &, const FunctionalDependency &) = default;
};

/// Set of table indices into SchemaGraph::tables, as a bitmask (at most 64 tables).
class TableSet
{
    std::uint64_t bits_ = 0;

  public:
    constexpr TableSet() = default;
    constexpr explicit TableSet(std::uint64_t bits) : bits_(bits) { }
    static TableSet single(unsigned t) { return TableSet(std::uint64_t(1) << t); }

    bool contains(unsigned t) const noexcept { return bits_ >> t & 1; }
    void insert(unsigned t) noexcept { bits_ |= std::uint64_t(1) << t; }
    void erase(unsigned t) noexcept { bits_ &= ~(std::uint64_t(1) << t); }
    bool empty() const noexcept { return bits_ == 0; }
    unsigned size() const noexcept { return unsigned(std::popcount(bits_)); }
    std::uint64_t bits() const noexcept { return bits_; }

    bool is_subset_of(TableSet o) const noexcept { return (bits_ & ~o.bits_) == 0; }
    bool intersects(TableSet o) const noexcept { return (bits_ & o.bits_) != 0; }

    friend TableSet operator|(TableSet a, TableSet b) { return TableSet(a.bits_ | b.bits_); }
    friend TableSet operator&(TableSet a, TableSet b) { return TableSet(a.bits_ & b.bits_); }
    friend TableSet operator-(TableSet a, TableSet b) { return TableSet(a.bits_ & ~b.bits_); }
    friend bool operator==(TableSet, TableSet) = default;
    friend auto operator<=>(TableSet, TableSet) = default;

    /// Indices in ascending (declaration) order.
    std::vector<unsigned> members() const;
};

struct SchemaGraph
{
    std::vector<TableDef> tables;
    std::vector<ForeignKeyRel> fks;
    std::vector<FunctionalDependency> fds;
    bool multi_component = false; ///< the FK graph has more than one connected component

    int table_index(std::string_view name) const noexcept;
    unsigned require_table(std::string_view name) const;
    const TableDef &table(std::string_view name) const { return tables[require_table(name)]; }

    unsigned referencing_index(const ForeignKeyRel &fk) const { return require_table(fk.referencing_table); }
    unsigned referenced_index(const ForeignKeyRel &fk) const { return require_table(fk.referenced_table); }

    /// FK edges with both endpoints in the set.
    std::vector<unsigned> edges_within(TableSet set) const;
    /// The FK edge between two tables, if any (either direction).
    std::optional<unsigned> edge_between(unsigned a, unsigned b) const;
    bool is_connected(TableSet set) const;
    TableSet all_tables() const;

    /// The column names of a table that serve as join keys (its primary key and its FK columns).
    std::vector<std::string> key_columns(unsigned table) const;

    /// Canonical text form used for the schema digest stored with persisted ensembles.
    std::string canonical() const;

    friend bool operator==(const SchemaGraph &, const SchemaGraph &) = default;
};

/// Reads and validates a JSON schema configuration. CSV paths are resolved relative to the config file and must exist.
///
/// {
///   "tables": [ { "name": "customer", "csv": "customer.csv", "primary_key": "c_id",
///                 "columns": [ { "name": "c_id", "kind": "continuous" },
///                              { "name": "c_region", "kind": "categorical", "nullable": true } ] } ],
///   "foreign_keys": [ { "from": "orders.c_id", "to": "customer.c_id" } ],
///   "functional_dependencies": [ { "table": "customer", "determinant": "zip", "dependent": "city" } ]
/// }
SchemaGraph load_schema(const std::filesystem::path &config_file);

/// Same validation on an already-parsed configuration; CSV existence is only checked when check_files is set.
SchemaGraph parse_schema(const std::string &json_text, const std::filesystem::path &base_dir, bool check_files);

/// Case-insensitive ASCII comparison for identifiers.
bool iequals(std::string_view a, std::string_view b) noexcept;

}
