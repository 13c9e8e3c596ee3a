#pragma once

#include "rspn/rspn.hpp"

#include <span>
#include <utility>

namespace rspn {

enum class FactorKind : std::uint8_t { Probability, ConditionalExpectation, Constant };

/// An estimator's point value and variance; factors are treated as independent of each other.
struct UncertainFactor
{
    double mean = 0;
    double variance = 0;
    FactorKind kind = FactorKind::Constant;

    static UncertainFactor constant(double v) { return {v, 0, FactorKind::Constant}; }
};

/// Variance of a sample proportion: p(1-p)/n.
double variance_of_probability(double p, double n_samples);

/// Variance of the estimate of E[target | pred]: (E[target^2 | pred] - E[target | pred]^2) / (n * P(pred')), where
/// pred' adds NotNull for the target columns. Throws EmptyCondition when P(pred') is zero.
double variance_of_cond_expectation(const Rspn &model, const TargetExpr &target, const Predicate &pred);

/// E[target * 1_pred] as P(pred') * E[target | pred'], each with its own variance, combined as a product.
UncertainFactor uncertain_expectation(const Rspn &model, const TargetExpr &target, const Predicate &pred);

/// Product of independent estimators, folded left with V(XY) = V(X)V(Y) + V(X)E(Y)^2 + V(Y)E(X)^2.
UncertainFactor combine_product(std::span<const UncertainFactor> factors);

/// 1/X by the delta method: V(1/X) ~ V(X)/E(X)^4. Throws EmptyCondition when E(X) is zero.
UncertainFactor reciprocal(const UncertainFactor &f);

/// mean -/+ z * sqrt(variance) with z the standard normal quantile for the two-sided level.
std::pair<double, double> confidence_interval(const UncertainFactor &estimate, double level = 0.95);

}
