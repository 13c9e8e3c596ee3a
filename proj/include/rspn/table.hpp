#pragma once

#include "rspn/schema.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace rspn {

/// String <-> code mapping of one categorical column. Codes assigned at ingestion follow lexicographic order of the
/// strings; strings first seen later (updates) are appended.
class Dictionary
{
    std::vector<std::string> strings_;
    std::unordered_map<std::string, std::uint32_t> codes_;

  public:
    Dictionary() = default;
    /// Builds a dictionary over the distinct strings in lexicographic order.
    static Dictionary from_strings(std::vector<std::string> strings);

    std::optional<std::uint32_t> code(const std::string &s) const;
    std::uint32_t intern(const std::string &s);
    const std::string &text(std::uint32_t code) const { return strings_.at(code); }
    std::size_t size() const noexcept { return strings_.size(); }
    const std::vector<std::string> &strings() const noexcept { return strings_; }

    friend bool operator==(const Dictionary &a, const Dictionary &b) { return a.strings_ == b.strings_; }
};

/// Dictionaries of all categorical base columns, keyed by "table.column".
struct Catalog
{
    std::map<std::string, Dictionary> dictionaries;

    const Dictionary *find(const std::string &column_id) const;
    /// Human-readable form of a stored value (dictionary text for categoricals, "NULL" for the sentinel).
    std::string render(const std::string &column_id, double value) const;

    friend bool operator==(const Catalog &, const Catalog &) = default;
};

enum class SyntheticKind : std::uint8_t { None, TupleFactor, Indicator };

struct SampleColumn
{
    std::string id;    ///< globally unique id, e.g. "customer.c_age", "F:customer<-orders", "N:orders"
    std::string table; ///< owning table
    std::string name;  ///< column name within its table; empty for synthetic columns
    ColumnKind kind = ColumnKind::Continuous;
    bool nullable = false;
    SyntheticKind synthetic = SyntheticKind::None;
    int fk = -1;             ///< FK edge of a tuple factor
    bool join_side = false;  ///< tuple factor of an edge inside the join (F', at least 1)
    bool is_key = false;     ///< primary key or foreign key column

    friend bool operator==(const SampleColumn &, const SampleColumn &) = default;
};

std::string base_column_id(std::string_view table, std::string_view column);
std::string factor_column_id(const ForeignKeyRel &fk, bool join_side);
std::string indicator_column_id(std::string_view table);

/// A materialized table or (sampled) full outer join, stored column-major.
struct SampleTable
{
    std::vector<std::string> origin_tables; ///< in schema declaration order
    std::vector<SampleColumn> columns;
    std::vector<std::vector<double>> data; ///< data[column][row]
    double sample_rate = 1.0;
    std::uint64_t full_population_size = 0; ///< exact row count of the unsampled table or join
    std::vector<FunctionalDependency> fd_dictionaries;

    std::size_t rows() const noexcept { return data.empty() ? 0 : data.front().size(); }
    int find(std::string_view id) const noexcept;
    std::size_t require(std::string_view id) const;
    void add_column(SampleColumn meta, std::vector<double> values);
    void remove_column(std::size_t index);
    /// New table with the selected rows (in the given order), same columns and metadata.
    SampleTable select_rows(const std::vector<std::uint32_t> &rows) const;
};

/// All base tables of a schema after ingestion and tuple-factor computation.
struct Database
{
    SchemaGraph schema;
    std::vector<SampleTable> tables; ///< aligned with schema.tables
    Catalog catalog;

    const SampleTable &table(std::string_view name) const { return tables[schema.require_table(name)]; }
};

}
