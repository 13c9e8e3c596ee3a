#pragma once

#include "rspn/rspn.hpp"

namespace rspn {

/// Learns a model over every column of the table (callers pass the learning view: keys dropped, FDs projected).
/// Recursion on (rows, columns): one column -> leaf; RDC graph disconnected -> product over its components; fewer
/// rows than min_instance_fraction of the sample -> product of univariate leaves; otherwise k-means -> sum node.
Rspn learn_rspn(const SampleTable &data, const LearnParams &params, std::string id = {});

struct Clustering
{
    unsigned clusters = 1;
    std::vector<unsigned> assignment;           ///< per row
    std::vector<std::vector<double>> centroids; ///< per cluster, per feature
};

/// k-means over column-major features (features[f][row]) with k-means++ seeding. Empty clusters are re-seeded once at
/// the point farthest from its center and then dropped; the returned clusters are nonempty and numbered densely.
Clustering cluster_rows(const std::vector<std::vector<double>> &features, unsigned k, std::uint64_t seed,
                        unsigned max_iterations = 50);

/// Exact value counts, or equal-frequency bins when a continuous column has more than distinct_limit distinct values.
Leaf fit_leaf(std::span<const double> values, ColumnKind kind, std::size_t distinct_limit);

}
