#pragma once

#include "rspn/confidence.hpp"
#include "rspn/ensemble.hpp"
#include "rspn/sql.hpp"

namespace rspn {

/// One term of a compiled expression: a known population size, or an expectation E[target * 1_pred] over one model,
/// possibly inverted.
struct Factor
{
    enum class Kind : std::uint8_t { Constant, Expectation };

    Kind kind = Kind::Constant;
    std::string role; ///< "|J|", "Q", "Q_L", "Q_R" or "Q_O'"
    std::size_t rspn = 0;
    double constant = 0;
    TargetExpr target;
    Predicate predicate;
    bool reciprocal = false;
};

/// Product of factors (reciprocal ones inverted).
struct FactorExpr
{
    std::vector<Factor> factors;
    std::string case_label; ///< "Case 1", "Case 2" or "Case 3"

    double value(const Ensemble &ensemble) const;
    UncertainFactor uncertain(const Ensemble &ensemble) const;
    std::vector<std::string> describe(const Ensemble &ensemble) const;
};

struct PlanStep
{
    std::size_t rspn = 0;
    TableSet handled; ///< query tables the model answers for
    TableSet overlap; ///< of those, tables an earlier step already covered
    double score = 0; ///< sum of pairwise RDC over the filter columns it handles
};

struct Plan
{
    std::vector<PlanStep> steps;
    /// Largest table dependency between filter columns that no single step handles together (-1 when none).
    double independence_risk = -1;
};

/// AVG(column) as E[column * W * 1_pred] / E[W * 1_pred] on one model, W being the multiplicity weight.
struct AvgExpr
{
    std::size_t rspn = 0;
    std::string column;
    TargetExpr weight;
    Predicate predicate; ///< includes column IS NOT NULL
    std::vector<std::string> dropped; ///< predicate columns outside the model's tables
    double dropped_dependency = -1;   ///< largest known table dependency between the column and a dropped one

    double value(const Ensemble &ensemble) const;
    UncertainFactor uncertain(const Ensemble &ensemble) const;
};

struct GroupResult
{
    std::vector<double> key;          ///< storage encoding, NaN for the NULL group
    std::vector<std::string> labels;  ///< rendered values
    double value = 0, variance = 0, ci_low = 0, ci_high = 0;
};

struct Estimate
{
    double value = 0;
    double variance = 0;
    double ci_low = 0, ci_high = 0;
    std::vector<GroupResult> groups;
    std::vector<std::string> plan;     ///< factor provenance, one line per factor
    std::vector<std::string> warnings;
};

struct EngineOptions
{
    double confidence_level = 0.95;
    double min_group_count = 0.5; ///< groups whose estimated count falls below this are omitted
    std::size_t max_groups = 100'000;
};

class QueryEngine
{
    const Ensemble &ensemble_;
    EngineOptions options_;

  public:
    explicit QueryEngine(const Ensemble &ensemble, EngineOptions options = {});

    Query parse(std::string_view sql) const;

    /// Greedy cover of the query tables. At each step the model with the highest sum of pairwise RDC over the filter
    /// columns it handles (at least one of each pair in a not yet covered table) wins; ties go to the model covering
    /// more uncovered query tables, then to fewer tables, then to the smaller id.
    Plan select_rspns(const Query &query) const;
    /// A plan over models named by id, in order (for forcing a compilation).
    Plan plan_with(const Query &query, const std::vector<std::string> &ids) const;

    /// COUNT under the query's predicate plus `extra`.
    FactorExpr compile_count(const Query &query, const Plan &plan, const Predicate &extra = {}) const;
    /// AVG over the query's aggregate column; the model is picked by RDC between the column and the filter columns.
    AvgExpr compile_avg(const Query &query, const Predicate &extra = {}) const;

    Estimate execute(const Query &query) const;
    Estimate execute(std::string_view sql) const { return execute(parse(sql)); }

    /// COUNT estimate rounded to the nearest integer, at least 1.
    double estimate_cardinality(const Query &query) const;
    double estimate_cardinality(std::string_view sql) const { return estimate_cardinality(parse(sql)); }

    /// E[target | evidence] on the model with the strongest RDC between target and evidence columns.
    double regress(const std::string &target, const Predicate &evidence) const;
    /// Most probable value of target under evidence on the same model choice.
    double classify(const std::string &target, const Predicate &evidence) const;

    const Ensemble &ensemble() const noexcept { return ensemble_; }
};

}
