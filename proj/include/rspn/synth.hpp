#pragma once

#include "rspn/ingest.hpp"

#include <filesystem>

namespace rspn {

/// Random tree schema whose rows are drawn from latent clusters. A child row's cluster follows its parent's with
/// probability `correlation`, and the number of children a row gets grows with its cluster, so attributes are
/// correlated both within and across tables and with the tuple factors.
struct SynthOptions
{
    unsigned tables = 3;          ///< 1..8
    std::size_t root_rows = 5000;
    double mean_fanout = 2.0;
    double correlation = 0.8;
    unsigned clusters = 4;
    double null_fraction = 0.1;   ///< of the nullable column of every table
    bool chain = false;           ///< each table references the previous one; otherwise a random earlier one
    std::uint64_t seed = 1;
};

struct SynthData
{
    std::string schema_json;                 ///< CSV paths are "<table>.csv"
    std::map<std::string, std::string> csv;  ///< table name -> CSV text
};

SynthData generate_synthetic(const SynthOptions &options);

/// Parses the generated schema and loads the tables.
Database load_synthetic(const SynthData &data);

/// Writes schema.json and one CSV per table into a directory (created if needed).
void write_synthetic(const SynthData &data, const std::filesystem::path &dir);

}
