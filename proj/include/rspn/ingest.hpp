#pragma once

#include "rspn/table.hpp"

#include <filesystem>
#include <istream>

namespace rspn {

/// Parses a CSV whose header matches the table's declared columns (same names, same order, case-insensitive).
/// Categorical strings are encoded through the catalog; the primary key must be unique and non-NULL.
/// Sets def.row_count.
SampleTable ingest_table(const std::filesystem::path &csv, TableDef &def, Catalog &catalog);
SampleTable ingest_table(std::istream &csv, TableDef &def, Catalog &catalog);

/// Adds F:S<-P to every referenced table S, counting the referencing rows per key. Checks referential integrity.
void compute_tuple_factors(const SchemaGraph &schema, std::vector<SampleTable> &tables);

/// Ingests every table of the schema and computes tuple factors. Existing dictionaries (e.g. those of a saved
/// ensemble) keep their codes; strings they lack are appended.
Database load_database(const SchemaGraph &schema, const Catalog *dictionaries = nullptr);

/// Builds a database from in-memory CSV text (table name -> CSV). Used by tests and the synthetic generator.
Database load_database(const SchemaGraph &schema, const std::map<std::string, std::string> &csv_text,
                       const Catalog *dictionaries = nullptr);

inline constexpr std::uint64_t kDefaultMaxRows = 10'000'000;

/// Full outer join of a connected set of tables along their FK edges, with an indicator column N:T per table and
/// tuple-factor columns (F' for edges inside the join, raw F for edges leaving it). Tables are joined left-deep in
/// declaration order. If the join has more than max_rows rows a uniform reservoir sample of max_rows rows is kept.
/// For a single table this is the table itself (sampled the same way).
SampleTable full_outer_join_sample(const Database &db, TableSet table_set, std::uint64_t max_rows, std::uint64_t seed);

/// Exact size of the full outer join without keeping rows.
std::uint64_t full_outer_join_size(const Database &db, TableSet table_set);

/// Removes FD-dependent columns from the learning view and records the dictionaries. An FD violated by the data is
/// dropped with a warning and both columns are kept. Returns the names of FDs that were dropped.
SampleTable apply_fd_projection(const SampleTable &table, const std::vector<FunctionalDependency> &fds,
                                std::vector<std::string> *dropped = nullptr);

/// Removes primary-key and foreign-key columns, which identify rows but carry no distribution worth learning.
SampleTable drop_key_columns(const SampleTable &table);

}
