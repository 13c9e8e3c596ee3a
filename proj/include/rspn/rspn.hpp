#pragma once

#include "rspn/kernels.hpp"
#include "rspn/rdc.hpp"
#include "rspn/table.hpp"

#include <bitset>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rspn {

inline constexpr std::size_t kMaxScope = 256;
using Scope = std::bitset<kMaxScope>;

/*======================================================================================================================
 * Predicates and targets
 *====================================================================================================================*/

/// NotNull and IsNull are produced by the compiler (outer joins, NULL groups); SQL comparisons never match NULL.
enum class Op : std::uint8_t { Eq, Ne, Lt, Le, Gt, Ge, In, NotNull, IsNull };

std::string_view to_string(Op op) noexcept;

struct Conjunct
{
    std::string column;         ///< column id
    Op op = Op::Eq;
    std::vector<double> values; ///< one constant, or the IN list (storage encoding)

    friend bool operator==(const Conjunct &, const Conjunct &) = default;
};

struct Predicate
{
    std::vector<Conjunct> conjuncts;

    Predicate &add(std::string column, Op op, double value)
    {
        conjuncts.push_back({std::move(column), op, {value}});
        return *this;
    }
    Predicate &add_in(std::string column, std::vector<double> values)
    {
        conjuncts.push_back({std::move(column), Op::In, std::move(values)});
        return *this;
    }
    Predicate &add_flag(std::string column, Op op)
    {
        conjuncts.push_back({std::move(column), op, {}});
        return *this;
    }
    Predicate &append(const Predicate &other)
    {
        conjuncts.insert(conjuncts.end(), other.conjuncts.begin(), other.conjuncts.end());
        return *this;
    }
    bool mentions(std::string_view column) const;

    friend bool operator==(const Predicate &, const Predicate &) = default;
};

/// Whether a single value satisfies a conjunct (NULL never does, except for IsNull).
bool satisfies(const Conjunct &c, double value) noexcept;

using kernels::ValueTransform;

/// One column's contribution to a target: g(value)^power, g given by the transform.
struct TargetTerm
{
    std::string column;
    ValueTransform transform = ValueTransform::Identity;
    int power = 1;

    friend bool operator==(const TargetTerm &, const TargetTerm &) = default;
};

/// Product of per-column terms; the empty product is the constant 1. Each column appears at most once.
struct TargetExpr
{
    std::vector<TargetTerm> terms;

    static TargetExpr one() { return {}; }
    TargetExpr &times(std::string column, ValueTransform t = ValueTransform::Identity, int power = 1);
    /// The same expression with every power doubled.
    TargetExpr squared() const;

    friend bool operator==(const TargetExpr &, const TargetExpr &) = default;
};

/*======================================================================================================================
 * Model
 *====================================================================================================================*/

/// Value distribution of one column inside one cluster. Counts are integral numbers of sample rows kept as doubles so
/// that insert and delete are exact inverses.
struct Leaf
{
    std::uint16_t column = 0;
    std::vector<double> values;  ///< sorted distinct non-NULL values (exact mode)
    std::vector<double> counts;  ///< per value, or per bin in binned mode
    std::vector<double> bin_lower, bin_upper, bin_distinct; ///< non-empty only in binned mode
    double null_count = 0;

    bool binned() const noexcept { return !bin_lower.empty(); }
    double total() const noexcept;
    double non_null_total() const noexcept;

    friend bool operator==(const Leaf &, const Leaf &) = default;
};

enum class NodeKind : std::uint8_t { Leaf, Sum, Product };

struct Node
{
    NodeKind kind = NodeKind::Leaf;
    Scope scope;
    std::vector<std::uint32_t> children;
    std::uint32_t leaf = 0;                    ///< index into Rspn::leaves for leaf nodes
    std::vector<double> cluster_sizes;         ///< sum nodes
    std::vector<std::vector<double>> centroids; ///< sum nodes, per child, over the scope columns in ascending order
    bool forced = false; ///< product node emitted by the independence fallback rather than a dependence test

    friend bool operator==(const Node &, const Node &) = default;
};

/// Monotone map of a column's values onto [0,1] (empirical CDF at mid-ranks), frozen when the model is learned so that
/// updates route tuples in the same feature space the clusters were found in. NULL maps to 0.
struct RankTransform
{
    std::vector<double> knots; ///< sorted distinct values (or quantiles when there are many)
    std::vector<double> ranks; ///< rank of each knot

    static RankTransform fit(std::span<const double> values, std::size_t max_knots = 2048);
    double operator()(double v) const noexcept;

    friend bool operator==(const RankTransform &, const RankTransform &) = default;
};

struct LearnParams
{
    double rdc_threshold = 0.3;
    double min_instance_fraction = 0.01;
    std::size_t distinct_value_limit = 100'000;
    unsigned cluster_count = 2;
    std::uint64_t seed = 42;
    RdcParams rdc;

    void validate() const;

    friend bool operator==(const LearnParams &, const LearnParams &) = default;
};

class Rspn
{
  public:
    std::string id;                  ///< e.g. "customer|orders"
    std::vector<std::string> tables; ///< declaration order
    std::vector<SampleColumn> columns;
    std::vector<RankTransform> transforms; ///< aligned with columns
    std::vector<Node> nodes;
    std::vector<Leaf> leaves;
    std::uint32_t root = 0;
    double n_samples = 0;
    double full_population_size = 0;
    double sample_rate = 1.0;
    std::vector<FunctionalDependency> fd_dictionaries;
    RdcMatrix rdc_snapshot;
    LearnParams params;

    int column_index(std::string_view id) const noexcept;
    bool has_column(std::string_view id) const noexcept { return column_index(id) >= 0; }
    bool covers(std::string_view table) const noexcept;

    /// Rewrites conjuncts on FD-dependent columns into IN-conjuncts on their determinants.
    Predicate translate_fd_predicate(const Predicate &pred) const;

    /// P(pred). FD-dependent columns are translated first.
    double probability(const Predicate &pred) const;
    /// E[target * 1_pred], unnormalized.
    double expectation(const TargetExpr &target, const Predicate &pred) const;
    /// E[target * 1_pred] with all target powers doubled.
    double second_moment(const TargetExpr &target, const Predicate &pred) const;
    /// E[target | pred and every target column non-NULL]. Throws EmptyCondition if that condition has probability 0.
    double conditional_expectation(const TargetExpr &target, const Predicate &pred) const;

    /// Most probable value of a column under evidence (max-product evaluation). Ties go to the smaller value.
    double mpe(const Predicate &evidence, std::string_view target) const;
    /// Most probable complete assignment (one value per scope column, NULL allowed) under evidence.
    std::vector<double> mpe_assignment(const Predicate &evidence) const;
    /// Probability of a complete assignment, as used to check MPE results.
    double assignment_probability(const std::vector<double> &assignment) const;

    /// Sum-node weight of a child (cluster size over the total).
    double weight(const Node &sum, std::size_t child) const;

    /// Structural checks: completeness, decomposability, scope bookkeeping, count sanity. Throws InvariantViolation.
    void validate() const;

    std::size_t count_nodes(NodeKind kind) const;
    std::size_t depth() const;

    friend bool operator==(const Rspn &, const Rspn &) = default;

  private:
    struct Eval;
    double evaluate(const TargetExpr &target, const Predicate &pred) const;
};

/// Single-leaf-per-column model whose sum nodes hold one cluster per distinct row. Every probability and expectation
/// of such a model equals a scan of the rows it was built from.
Rspn build_exact_rspn(const SampleTable &data, std::string id = {});

/// Hand construction of a model from explicit pieces, used for worked examples.
class RspnBuilder
{
    Rspn model_;

  public:
    RspnBuilder(std::string id, std::vector<SampleColumn> columns);
    /// Leaf from a value -> count map plus NULL count.
    std::uint32_t leaf(std::string_view column, const std::vector<std::pair<double, double>> &value_counts,
                       double null_count = 0);
    std::uint32_t product(std::vector<std::uint32_t> children);
    std::uint32_t sum(std::vector<std::uint32_t> children, std::vector<double> cluster_sizes);
    /// Finishes the model. Transforms are fitted on the leaf values.
    Rspn finish(std::uint32_t root, double full_population_size, std::vector<std::string> tables);
};

}
