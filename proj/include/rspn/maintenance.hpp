#pragma once

#include "rspn/csv.hpp"
#include "rspn/ensemble.hpp"
#include "rspn/update.hpp"

#include <istream>
#include <memory>

namespace rspn {

/// One row of an update feed: "I" or "D", the table name, then the row's values in declared column order.
struct UpdateRecord
{
    UpdateOp op = UpdateOp::Insert;
    std::string table;
    std::vector<CsvField> values;
};

/// Parses an update feed (no header). Throws InputError on unknown tables, bad ops or wrong field counts.
std::vector<UpdateRecord> read_updates(std::istream &in, const SchemaGraph &schema);
std::vector<UpdateRecord> read_updates(const std::filesystem::path &file, const SchemaGraph &schema);

struct MaintenanceStats
{
    std::size_t inserts = 0, deletes = 0;
    std::size_t model_operations = 0; ///< tuple inserts and deletes issued to models
    std::size_t applied = 0, skipped = 0;
    double seconds = 0;
};

/// Keeps base tables and an ensemble in step under row inserts and deletes. A changed row also changes the tuple
/// factors of the rows it references, so for every model the join rows around the changed row and its referenced rows
/// are computed before and after the change; the rows that differ are deleted from and inserted into the model.
class Maintainer
{
    struct State;
    Database &db_;
    Ensemble &ensemble_;
    std::unique_ptr<State> state_;
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    std::vector<bool> dirty_;

  public:
    Maintainer(Database &db, Ensemble &ensemble, std::uint64_t seed = 42);
    ~Maintainer();

    /// Applies records in order. An insert with an existing key, a delete of a missing key, a dangling foreign key
    /// or a delete of a row that is still referenced raises InputError; records before it stay applied.
    MaintenanceStats apply(const std::vector<UpdateRecord> &records);

    /// Tables changed since construction.
    std::vector<std::string> dirty_tables() const;
    /// Rewrites the CSV of every changed table at its schema path.
    void write_back() const;
};

/// CSV text of a base table in its declared column order, with a header.
std::string table_csv(const Database &db, unsigned table);

}
