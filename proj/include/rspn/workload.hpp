#pragma once

#include "rspn/sql.hpp"

namespace rspn {

struct WorkloadOptions
{
    std::size_t queries = 100;
    unsigned min_tables = 1, max_tables = 4;
    unsigned min_predicates = 1, max_predicates = 5;
    Aggregate aggregate = Aggregate::Count;
    double outer_join_probability = 0; ///< per joined table, chance of a LEFT join (no predicates on that side)
    std::uint64_t seed = 1;
};

/// Random queries over connected table subsets. Each query's constants come from one row of its join, so every
/// inner-join query has a nonempty result. Range predicates count one per bound.
std::vector<Query> generate_workload(const Database &db, const WorkloadOptions &options);

/// Reads one SQL statement per non-empty line; lines starting with "--" or "#" are skipped.
std::vector<std::string> read_workload(const std::filesystem::path &file);

}
