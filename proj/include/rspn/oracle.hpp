#pragma once

#include "rspn/sql.hpp"

namespace rspn {

struct ExactGroup
{
    std::vector<double> key; ///< NaN for NULL
    double value = 0;
    double count = 0; ///< rows in the group (rows with a non-NULL aggregate column for SUM/AVG)
};

/// Exact answer of a query. AVG over no rows is NaN.
struct ExactAnswer
{
    double value = 0;
    double count = 0;
    std::vector<ExactGroup> groups; ///< ascending keys, NULL last
};

/// Scan oracle: dynamic program over the query's join tree. A result row is a row of the full outer join of the query
/// tables in which every required table is present and the predicate holds.
ExactAnswer scan_oracle(const Database &db, const Query &query);

/// Nested-loop evaluation of the query as SQL defines it, joining in FROM order. Throws InputError once the
/// intermediate result exceeds max_rows. Meant as a cross-check of scan_oracle on small data.
ExactAnswer naive_evaluate(const Database &db, const Query &query, std::size_t max_rows = 5'000'000);

/// q-error with both sides floored at 1.
double q_error(double estimate, double truth) noexcept;

/// Nearest-rank percentile (p in [0,1]) of a nonempty sample.
double percentile(std::vector<double> values, double p);

}
