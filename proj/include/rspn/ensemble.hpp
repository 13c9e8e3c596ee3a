#pragma once

#include "rspn/ingest.hpp"
#include "rspn/rspn.hpp"

#include <filesystem>
#include <functional>
#include <map>

namespace rspn {

/// Dependency value of two tables (by schema index). Tests inject fixed values through this.
using DependencyProvider = std::function<double(unsigned, unsigned)>;

struct EnsembleParams
{
    LearnParams learn;
    double budget_factor = 0.5;
    std::uint64_t max_rows = kDefaultMaxRows;
    std::uint64_t seed = 42;
    std::uint64_t dependency_sample_rows = 10'000; ///< join sample used for table dependency values
    unsigned max_candidate_tables = 4;
    DependencyProvider dependency; ///< empty: computed from data
};

struct Ensemble
{
    SchemaGraph schema;
    Catalog catalog;
    std::vector<Rspn> rspns;
    std::map<std::pair<std::string, std::string>, double> dependency_values; ///< key ordered (smaller name first)
    double base_cost = 0;       ///< learning wall time of the base ensemble, seconds
    double base_proxy_cost = 0; ///< sum of cols^2 * rows over the base ensemble
    double budget_factor = 0;
    std::size_t base_count = 0; ///< the first base_count models form the base ensemble

    const Rspn *find(std::string_view id) const;
    std::optional<double> dependency(const std::string &a, const std::string &b) const;
    void set_dependency(const std::string &a, const std::string &b, double v);
    /// Every schema table is covered and every model's tables are connected. Throws InvariantViolation.
    void validate() const;

    friend bool operator==(const Ensemble &, const Ensemble &) = default;
};

/// Learning view of a table set: sampled full outer join with key columns dropped and FDs projected.
SampleTable learning_view(const Database &db, TableSet tables, std::uint64_t max_rows, std::uint64_t seed);

/// Learns one model over a table set.
Rspn learn_for_tables(const Database &db, TableSet tables, const EnsembleParams &params);

/// A join model per FK edge whose table dependency reaches the RDC threshold, then a single-table model for every
/// table no join model covers.
Ensemble build_base_ensemble(const Database &db, const EnsembleParams &params);

struct CandidateRspn
{
    TableSet tables;
    double mean_rdc = 0;
    double estimated_cost = 0; ///< cols^2 * rows
};

/// Connected table subsets of size 3..max_candidate_tables not already modeled, best first: higher mean pairwise
/// dependency, then lower estimated cost, then lower table bitmask.
std::vector<CandidateRspn> rank_candidates(Ensemble &ensemble, const Database &db, const EnsembleParams &params);

/// Adds candidates in rank order while the accumulated proxy cost stays within budget_factor times the base proxy
/// cost; stops at the first candidate that does not fit. Returns the number of models added.
std::size_t optimize_ensemble(Ensemble &ensemble, const Database &db, const EnsembleParams &params);

/// Versioned binary container. Layout: magic "RSPNENS1", u32 version, u64 schema digest, schema, catalog, ensemble
/// fields, models, u64 FNV-1a checksum of everything before it. Integers and doubles are little-endian.
void save_ensemble(const Ensemble &ensemble, const std::filesystem::path &path);
Ensemble load_ensemble(const std::filesystem::path &path);
std::string serialize_ensemble(const Ensemble &ensemble);
Ensemble deserialize_ensemble(const std::string &bytes);

inline constexpr std::uint32_t kFormatVersion = 1;

}
