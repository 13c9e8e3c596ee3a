#pragma once

#include "rspn/rspn.hpp"

namespace rspn {

enum class Aggregate : std::uint8_t { Count, Sum, Avg };
enum class JoinKind : std::uint8_t { Inner, Left, Right, Full };

std::string_view to_string(Aggregate a) noexcept;
std::string_view to_string(JoinKind k) noexcept;

/// Normalized form of a query in the supported subset:
///
///   query     = SELECT [col {, col} ,] agg FROM table [alias] {join} [WHERE cond] [GROUP BY col {, col}] [;]
///   agg       = COUNT(*) | SUM(col) | AVG(col)
///   join      = [NATURAL] [INNER | LEFT [OUTER] | RIGHT [OUTER] | FULL [OUTER]] JOIN table [alias] [ON cond]
///             | , table [alias]
///   cond      = conjunct {AND conjunct} | ( cond )
///   conjunct  = col op literal | literal op col | col IN ( literal {, literal} ) | col = col
///   op        = = | <> | != | < | <= | > | >=
///
/// Column-to-column equalities (in ON or WHERE) must name a declared foreign key. Every FK edge between the queried
/// tables joins them; tables joined with a comma need an explicit condition.
struct Query
{
    std::string text;
    Aggregate aggregate = Aggregate::Count;
    std::string aggregate_column;           ///< column id for SUM/AVG
    std::vector<unsigned> tables;           ///< FROM order
    std::vector<JoinKind> join_kinds;       ///< per table; the first entry is Inner
    Predicate predicate;                    ///< storage encoding
    std::vector<std::string> group_by;      ///< column ids

    TableSet table_set() const;
    bool has_outer_join() const;
    /// Tables whose rows must be present in a result row. Null-supplying sides of outer joins are optional, except
    /// where a WHERE conjunct rejects NULL on them.
    TableSet required_tables(const SchemaGraph &schema) const;
};

/// Parses and validates a query. Syntax errors and constructs outside the subset raise UnsupportedQuery; unknown
/// tables or columns raise InputError. String literals are mapped through the catalog dictionaries.
Query parse_query(std::string_view text, const SchemaGraph &schema, const Catalog &catalog);

/// SQL text for a query (tables by name, categorical constants as quoted strings).
std::string to_sql(const Query &query, const SchemaGraph &schema, const Catalog &catalog);

/// Table index owning a column id such as "customer.c_age".
unsigned column_table(const SchemaGraph &schema, std::string_view column_id);

}
