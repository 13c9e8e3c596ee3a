#pragma once

#include "rspn/rspn.hpp"

namespace rspn {

enum class UpdateOp : std::uint8_t { Insert, Delete };

/// Routes one tuple (aligned with model.columns) down the tree and adjusts counts: nearest centroid at sum nodes
/// (ties to the lower child index), every child at product nodes, the value's count at leaves. Deletes that would take
/// a count below zero clamp at zero with a warning. When adjust_population is set, the population moves by
/// 1/sample_rate.
void update_tuple(Rspn &model, std::span<const double> tuple, UpdateOp op, bool adjust_population = true);

struct UpdateBatch
{
    std::vector<std::pair<UpdateOp, std::vector<double>>> operations;
    double applied_sample_rate = 1.0;
};

struct BatchResult
{
    std::size_t applied = 0;
    std::size_t skipped = 0;
};

/// Applies each operation with probability sample_rate (seeded). The population moves by one per operation whether
/// or not it was sampled. The batch rate must equal the model's rate.
BatchResult apply_batch(Rspn &model, const UpdateBatch &batch, std::uint64_t seed);

/// Index of each model column in the table; throws InputError if one is missing.
std::vector<std::size_t> map_columns(const Rspn &model, const SampleTable &table);

/// The table row projected onto the model's columns.
std::vector<double> model_tuple(const std::vector<std::size_t> &mapping, const SampleTable &table, std::size_t row);

struct DriftParams
{
    double rdc_threshold = 0.3;
    /// Product nodes that receive fewer fresh rows than this are not tested; RDC on few rows overstates dependence.
    std::size_t min_rows = 2000;
    /// RDC estimates of one distribution scatter by a few hundredths between samples; a split is reported once the
    /// cross-child RDC reaches rdc_threshold + margin.
    double margin = 0.1;
    RdcParams rdc;
};

/// Product nodes (in node-index order) whose children now depend on each other in the fresh sample: the largest RDC
/// between columns of different children reaches the threshold plus the margin. Fresh rows are routed as updates would
/// be. Product nodes created by the independence fallback are skipped; they never passed a dependence test.
std::vector<std::uint32_t> drift_check(const Rspn &model, const SampleTable &fresh, const DriftParams &params);

}
