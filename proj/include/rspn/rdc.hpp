#pragma once

#include "rspn/table.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rspn {

struct RdcParams
{
    unsigned num_features = 20;         ///< k
    double projection_scale = 1.0 / 6;  ///< variance of the random projection weights
    std::uint64_t seed = 0x5eed;
    std::size_t sample_cap = 10'000;

    void validate() const;

    friend bool operator==(const RdcParams &, const RdcParams &) = default;
};

/// Symmetric matrix of dependence values over a list of column ids. The diagonal is 1.
struct RdcMatrix
{
    std::vector<std::string> columns;
    std::vector<double> values; ///< row-major, columns.size() squared

    std::size_t size() const noexcept { return columns.size(); }
    double at(std::size_t i, std::size_t j) const { return values[i * columns.size() + j]; }
    int index(std::string_view id) const noexcept;
    /// Value for two column ids, or nullopt if either is not in the matrix.
    std::optional<double> get(std::string_view a, std::string_view b) const;

    friend bool operator==(const RdcMatrix &, const RdcMatrix &) = default;
};

/// Normalized ranks in (0,1]: average rank of ties divided by n. NULLs form one tied group ranked below every value.
std::vector<double> copula_ranks(std::span<const double> x);

/// Randomized dependence coefficient of two paired columns. The random projection of each argument is seeded from
/// (params.seed, its id), and the arguments are put in a canonical order first, so rdc(x, y) == rdc(y, x) bit for bit.
/// Rows are sorted by their rank pairs before the features are built, so row order does not matter either.
double rdc(std::span<const double> x, std::span<const double> y, const RdcParams &params,
           std::string_view x_id = "", std::string_view y_id = "");

/// All pairwise values over the given columns, restricted to the given rows (all rows if empty). At most
/// params.sample_cap rows are used, drawn without replacement.
RdcMatrix pairwise_rdc(const SampleTable &table, std::span<const std::uint32_t> rows,
                       std::span<const std::size_t> columns, const RdcParams &params);

/// Pairwise values over every non-key column of the table.
RdcMatrix pairwise_rdc(const SampleTable &table, const RdcParams &params);

/// Maximum value over column pairs (c of t1, c' of t2), computed on a sample that covers both tables. Key columns and
/// synthetic columns do not take part. Returns 1 when t1 and t2 name the same table.
double table_dependency(const std::string &t1, const std::string &t2, const SampleTable &joined,
                        const RdcParams &params);

}
