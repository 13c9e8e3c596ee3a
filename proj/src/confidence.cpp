#include "rspn/confidence.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>

namespace rspn {

double variance_of_probability(double p, double n_samples)
{
    if (!(n_samples >= 1)) throw InputError("variance of a probability needs at least one sample");
    p = std::clamp(p, 0.0, 1.0);
    return p * (1 - p) / n_samples;
}

namespace {

Predicate with_support(const TargetExpr &target, const Predicate &pred)
{
    Predicate support = pred;
    for (const auto &t : target.terms) support.add_flag(t.column, Op::NotNull);
    return support;
}

}

double variance_of_cond_expectation(const Rspn &model, const TargetExpr &target, const Predicate &pred)
{
    const Predicate support = with_support(target, pred);
    const double p = model.probability(support);
    if (!(p > 0)) throw EmptyCondition("conditional variance under a condition of probability zero");
    const double m1 = model.expectation(target, pred) / p;
    const double m2 = model.second_moment(target, pred) / p;
    const double n_eff = std::max(1.0, model.n_samples * p);
    return std::max(0.0, m2 - m1 * m1) / n_eff;
}

UncertainFactor uncertain_expectation(const Rspn &model, const TargetExpr &target, const Predicate &pred)
{
    const Predicate support = with_support(target, pred);
    const double p = model.probability(support);
    const double n = std::max(1.0, model.n_samples);
    UncertainFactor prob{p, variance_of_probability(p, n), FactorKind::Probability};
    if (target.terms.empty() || !(p > 0)) return prob;
    const double m1 = model.expectation(target, pred) / p;
    const double m2 = model.second_moment(target, pred) / p;
    UncertainFactor cond{m1, std::max(0.0, m2 - m1 * m1) / std::max(1.0, n * p), FactorKind::ConditionalExpectation};
    const UncertainFactor parts[] = {prob, cond};
    return combine_product(parts);
}

UncertainFactor combine_product(std::span<const UncertainFactor> factors)
{
    UncertainFactor acc = UncertainFactor::constant(1.0);
    for (const auto &f : factors) {
        const double v = acc.variance * f.variance + acc.variance * f.mean * f.mean + f.variance * acc.mean * acc.mean;
        acc.mean *= f.mean;
        acc.variance = std::max(0.0, v);
        if (f.kind != FactorKind::Constant) acc.kind = FactorKind::ConditionalExpectation;
    }
    if (factors.size() == 1) acc.kind = factors.front().kind;
    return acc;
}

UncertainFactor reciprocal(const UncertainFactor &f)
{
    if (f.mean == 0) throw EmptyCondition("reciprocal of an estimate that is zero");
    const double m2 = f.mean * f.mean;
    return {1.0 / f.mean, f.variance / (m2 * m2), f.kind};
}

std::pair<double, double> confidence_interval(const UncertainFactor &estimate, double level)
{
    if (!(level > 0 && level < 1)) throw InputError("confidence level must lie strictly between 0 and 1");
    if (!(estimate.variance > 0)) return {estimate.mean, estimate.mean};
    const boost::math::normal_distribution<double> normal;
    const double z = boost::math::quantile(normal, 0.5 + level / 2);
    const double half = z * std::sqrt(estimate.variance);
    return {estimate.mean - half, estimate.mean + half};
}

}
