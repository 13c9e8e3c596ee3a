#include "rspn/rspn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace rspn {

std::string_view to_string(Op op) noexcept
{
    switch (op) {
        case Op::Eq: return "=";
        case Op::Ne: return "<>";
        case Op::Lt: return "<";
        case Op::Le: return "<=";
        case Op::Gt: return ">";
        case Op::Ge: return ">=";
        case Op::In: return "IN";
        case Op::NotNull: return "IS NOT NULL";
        case Op::IsNull: return "IS NULL";
    }
    return "?";
}

bool Predicate::mentions(std::string_view column) const
{
    return std::any_of(conjuncts.begin(), conjuncts.end(), [&](const Conjunct &c) { return c.column == column; });
}

bool satisfies(const Conjunct &c, double v) noexcept
{
    if (c.op == Op::IsNull) return is_null(v);
    if (is_null(v)) return false;
    switch (c.op) {
        case Op::Eq: return v == c.values.front();
        case Op::Ne: return v != c.values.front();
        case Op::Lt: return v < c.values.front();
        case Op::Le: return v <= c.values.front();
        case Op::Gt: return v > c.values.front();
        case Op::Ge: return v >= c.values.front();
        case Op::In: return std::find(c.values.begin(), c.values.end(), v) != c.values.end();
        case Op::NotNull: return true;
        case Op::IsNull: break;
    }
    return false;
}

TargetExpr &TargetExpr::times(std::string column, ValueTransform t, int power)
{
    for (const auto &term : terms)
        if (term.column == column) throw InvariantViolation("target mentions column '" + column + "' twice");
    terms.push_back({std::move(column), t, power});
    return *this;
}

TargetExpr TargetExpr::squared() const
{
    TargetExpr out = *this;
    for (auto &t : out.terms) t.power *= 2;
    return out;
}

double Leaf::non_null_total() const noexcept { return std::accumulate(counts.begin(), counts.end(), 0.0); }

double Leaf::total() const noexcept { return non_null_total() + null_count; }

/*======================================================================================================================
 * Rank transform
 *====================================================================================================================*/

RankTransform RankTransform::fit(std::span<const double> values, std::size_t max_knots)
{
    std::vector<double> v;
    v.reserve(values.size());
    for (double x : values)
        if (!is_null(x)) v.push_back(x);
    std::sort(v.begin(), v.end());
    RankTransform t;
    const double n = double(values.size());
    const double nulls = double(values.size() - v.size());
    for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i;
        while (j < v.size() && v[j] == v[i]) ++j;
        t.knots.push_back(v[i]);
        t.ranks.push_back((nulls + double(i) + double(j - i) / 2.0) / n);
        i = j;
    }
    if (t.knots.size() > max_knots && max_knots >= 2) {
        RankTransform thin;
        for (std::size_t k = 0; k != max_knots; ++k) {
            const std::size_t i = k * (t.knots.size() - 1) / (max_knots - 1);
            thin.knots.push_back(t.knots[i]);
            thin.ranks.push_back(t.ranks[i]);
        }
        return thin;
    }
    return t;
}

double RankTransform::operator()(double v) const noexcept
{
    if (is_null(v) || knots.empty()) return 0.0;
    auto it = std::lower_bound(knots.begin(), knots.end(), v);
    if (it == knots.end()) return ranks.back();
    const std::size_t i = std::size_t(it - knots.begin());
    if (*it == v || i == 0) return ranks[i];
    const double f = (v - knots[i - 1]) / (knots[i] - knots[i - 1]);
    return ranks[i - 1] + f * (ranks[i] - ranks[i - 1]);
}

void LearnParams::validate() const
{
    if (!(min_instance_fraction > 0 && min_instance_fraction < 1))
        throw InputError("min instance fraction must lie in (0,1)");
    if (!(rdc_threshold > 0 && rdc_threshold < 1)) throw InputError("RDC threshold must lie in (0,1)");
    if (cluster_count < 2) throw InputError("cluster count must be at least 2");
    if (distinct_value_limit < 1) throw InputError("distinct value limit must be positive");
    rdc.validate();
}

/*======================================================================================================================
 * Column conditions: the conjuncts on one column folded into a range, an allow list, and an exclusion list
 *====================================================================================================================*/

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ColumnCondition
{
    bool active = false;
    bool want_null = false;
    bool empty = false;
    double lo = -kInf, hi = kInf;
    bool lo_incl = true, hi_incl = true;
    bool has_allowed = false;
    std::vector<double> allowed;  ///< sorted
    std::vector<double> excluded; ///< sorted

    bool value_ok(double v) const noexcept
    {
        if (v < lo || (v == lo && !lo_incl)) return false;
        if (v > hi || (v == hi && !hi_incl)) return false;
        if (has_allowed && !std::binary_search(allowed.begin(), allowed.end(), v)) return false;
        return !std::binary_search(excluded.begin(), excluded.end(), v);
    }

    void add(const Conjunct &c)
    {
        active = true;
        auto sorted_set = [](std::vector<double> s) {
            s.erase(std::remove_if(s.begin(), s.end(), [](double x) { return rspn::is_null(x); }), s.end());
            std::sort(s.begin(), s.end());
            s.erase(std::unique(s.begin(), s.end()), s.end());
            return s;
        };
        switch (c.op) {
            case Op::IsNull: want_null = true; return;
            case Op::NotNull: return;
            case Op::Eq:
            case Op::In: {
                auto s = sorted_set(c.values);
                if (has_allowed) {
                    std::vector<double> both;
                    std::set_intersection(allowed.begin(), allowed.end(), s.begin(), s.end(), std::back_inserter(both));
                    allowed = std::move(both);
                } else {
                    allowed = std::move(s);
                    has_allowed = true;
                }
                return;
            }
            case Op::Ne: {
                if (rspn::is_null(c.values.front())) {
                    empty = true;
                    return;
                }
                excluded.insert(std::upper_bound(excluded.begin(), excluded.end(), c.values.front()),
                                c.values.front());
                return;
            }
            default: break;
        }
        const double v = c.values.front();
        if (rspn::is_null(v)) {
            empty = true;
            return;
        }
        if (c.op == Op::Lt || c.op == Op::Le) {
            const bool incl = c.op == Op::Le;
            if (v < hi || (v == hi && !incl)) {
                hi = v;
                hi_incl = incl;
            }
        } else {
            const bool incl = c.op == Op::Ge;
            if (v > lo || (v == lo && !incl)) {
                lo = v;
                lo_incl = incl;
            }
        }
    }

    /// Only IsNull: selects exactly the NULL mass.
    bool only_null() const noexcept
    {
        return want_null && !has_allowed && excluded.empty() && lo == -kInf && hi == kInf;
    }
};

inline double apply_transform(ValueTransform t, double v) noexcept
{
    switch (t) {
        case ValueTransform::Reciprocal: return 1.0 / v;
        case ValueTransform::AtLeastOne: return std::max(v, 1.0);
        case ValueTransform::Identity: break;
    }
    return v;
}

inline double term_value(const TargetTerm &t, double v) noexcept
{
    const double g = apply_transform(t.transform, v);
    double r = g;
    for (int p = 1; p < t.power; ++p) r *= g;
    return r;
}

/// Mean of g(x)^p for x uniform on [a,b].
double uniform_moment(const TargetTerm &t, double a, double b)
{
    if (!(b > a)) return term_value(t, a);
    if (t.transform == ValueTransform::Identity) {
        if (t.power == 1) return (a + b) / 2;
        if (t.power == 2) return (a * a + a * b + b * b) / 3;
    }
    if (t.transform == ValueTransform::Reciprocal && a > 0) {
        if (t.power == 1) return std::log(b / a) / (b - a);
        if (t.power == 2) return 1.0 / (a * b);
    }
    /* Simpson's rule for the remaining combinations */
    return (term_value(t, a) + 4 * term_value(t, (a + b) / 2) + term_value(t, b)) / 6;
}

/// Sum over the leaf of count * (term value or 1) restricted to the condition.
double leaf_sum(const Leaf &leaf, const ColumnCondition &cond, const TargetTerm *term)
{
    if (!cond.active) {
        if (leaf.binned()) {
            double s = 0;
            for (std::size_t b = 0; b != leaf.counts.size(); ++b)
                s += leaf.counts[b] * (term ? uniform_moment(*term, leaf.bin_lower[b], leaf.bin_upper[b]) : 1.0);
            return term ? s : s + leaf.null_count;
        }
        if (!term) return kernels::sum(leaf.counts) + leaf.null_count;
        return kernels::moment(leaf.values, leaf.counts, term->transform, term->power);
    }
    if (cond.empty) return 0.0;
    if (cond.want_null) return cond.only_null() && !term ? leaf.null_count : 0.0;

    auto weight = [&](double v) { return term ? term_value(*term, v) : 1.0; };

    if (leaf.binned()) {
        double s = 0;
        for (std::size_t b = 0; b != leaf.counts.size(); ++b) {
            const double lower = leaf.bin_lower[b], upper = leaf.bin_upper[b], count = leaf.counts[b];
            if (count == 0) continue;
            if (lower == upper) {
                if (cond.value_ok(lower)) s += count * weight(lower);
                continue;
            }
            const double per_value = count / std::max(leaf.bin_distinct[b], 1.0);
            if (cond.has_allowed) {
                for (double v : cond.allowed)
                    if (v >= lower && v <= upper && cond.value_ok(v)) s += per_value * weight(v);
                continue;
            }
            const double a = std::max(lower, cond.lo), z = std::min(upper, cond.hi);
            if (z < a) continue;
            const double frac = z > a ? (z - a) / (upper - lower) : 0.0;
            s += count * frac * (term ? uniform_moment(*term, a, z) : 1.0);
            for (double v : cond.excluded)
                if (v >= a && v <= z) s -= per_value * weight(v);
        }
        return std::max(s, 0.0);
    }

    const auto &vals = leaf.values;
    if (cond.has_allowed) {
        double s = 0;
        for (double v : cond.allowed) {
            if (!cond.value_ok(v)) continue;
            auto it = std::lower_bound(vals.begin(), vals.end(), v);
            if (it != vals.end() && *it == v) s += leaf.counts[std::size_t(it - vals.begin())] * weight(v);
        }
        return s;
    }
    auto first = cond.lo_incl ? std::lower_bound(vals.begin(), vals.end(), cond.lo)
                              : std::upper_bound(vals.begin(), vals.end(), cond.lo);
    auto last = cond.hi_incl ? std::upper_bound(vals.begin(), vals.end(), cond.hi)
                             : std::lower_bound(vals.begin(), vals.end(), cond.hi);
    if (last <= first) return 0.0;
    const std::size_t i0 = std::size_t(first - vals.begin()), n = std::size_t(last - first);
    double s = term ? kernels::moment({vals.data() + i0, n}, {leaf.counts.data() + i0, n}, term->transform, term->power)
                    : kernels::sum({leaf.counts.data() + i0, n});
    for (double v : cond.excluded) {
        auto it = std::lower_bound(first, last, v);
        if (it != last && *it == v) s -= leaf.counts[std::size_t(it - vals.begin())] * weight(v);
    }
    return s;
}

/// Value with the largest count among those satisfying the condition; NULL only wins outright.
std::pair<double, double> leaf_mode(const Leaf &leaf, const ColumnCondition &cond)
{
    const double total = leaf.total();
    if (total <= 0) return {0.0, kNull};
    double best = -1, best_value = kNull;
    if (cond.active && cond.want_null) return {cond.only_null() ? leaf.null_count / total : 0.0, kNull};
    if (leaf.binned()) {
        for (std::size_t b = 0; b != leaf.counts.size(); ++b) {
            const double mid = (leaf.bin_lower[b] + leaf.bin_upper[b]) / 2;
            const double mass = leaf.counts[b] / std::max(leaf.bin_distinct[b], 1.0);
            if ((!cond.active || cond.value_ok(mid)) && mass > best) {
                best = mass;
                best_value = mid;
            }
        }
    } else {
        for (std::size_t i = 0; i != leaf.values.size(); ++i)
            if ((!cond.active || cond.value_ok(leaf.values[i])) && leaf.counts[i] > best) {
                best = leaf.counts[i];
                best_value = leaf.values[i];
            }
    }
    if (!cond.active && leaf.null_count > best) {
        best = leaf.null_count;
        best_value = kNull;
    }
    return {std::max(best, 0.0) / total, best_value};
}

}

/*======================================================================================================================
 * Evaluation
 *====================================================================================================================*/

struct Rspn::Eval
{
    const Rspn &m;
    std::vector<ColumnCondition> cond;
    std::vector<const TargetTerm *> term;
    Scope relevant;

    Eval(const Rspn &model, const TargetExpr &target, const Predicate &pred)
        : m(model), cond(model.columns.size()), term(model.columns.size(), nullptr)
    {
        for (const auto &c : pred.conjuncts) {
            const auto i = resolve(c.column);
            cond[i].add(c);
            relevant.set(i);
        }
        for (const auto &t : target.terms) {
            const auto i = resolve(t.column);
            if (term[i]) throw InvariantViolation("target mentions column '" + t.column + "' twice");
            term[i] = &t;
            relevant.set(i);
        }
    }

    std::size_t resolve(const std::string &column) const
    {
        const int i = m.column_index(column);
        if (i < 0) throw InputError("column '" + column + "' is not in the scope of model '" + m.id + "'");
        return std::size_t(i);
    }

    double node(std::uint32_t i) const
    {
        const Node &n = m.nodes[i];
        if ((n.scope & relevant).none()) return 1.0;
        switch (n.kind) {
            case NodeKind::Leaf: {
                const Leaf &leaf = m.leaves[n.leaf];
                const double total = leaf.total();
                if (total <= 0) return 0.0;
                return leaf_sum(leaf, cond[leaf.column], term[leaf.column]) / total;
            }
            case NodeKind::Product: {
                double p = 1.0;
                for (auto c : n.children) {
                    p *= node(c);
                    if (p == 0.0) break;
                }
                return p;
            }
            case NodeKind::Sum: {
                const double total = std::accumulate(n.cluster_sizes.begin(), n.cluster_sizes.end(), 0.0);
                if (total <= 0) return 0.0;
                double s = 0.0;
                for (std::size_t k = 0; k != n.children.size(); ++k)
                    if (n.cluster_sizes[k] > 0) s += n.cluster_sizes[k] * node(n.children[k]);
                return s / total;
            }
        }
        return 0.0;
    }

    /// Max-product pass. Returns (score, assignment of the target column or all columns when target < 0).
    double max_node(std::uint32_t i, int target, std::vector<double> &assignment) const
    {
        const Node &n = m.nodes[i];
        switch (n.kind) {
            case NodeKind::Leaf: {
                const Leaf &leaf = m.leaves[n.leaf];
                if (target >= 0 && leaf.column != target) {
                    const double total = leaf.total();
                    return total > 0 ? leaf_sum(leaf, cond[leaf.column], nullptr) / total : 0.0;
                }
                auto [score, value] = leaf_mode(leaf, cond[leaf.column]);
                assignment[leaf.column] = value;
                return score;
            }
            case NodeKind::Product: {
                double p = 1.0;
                for (auto c : n.children) {
                    if (target >= 0 && !m.nodes[c].scope.test(std::size_t(target)) && (m.nodes[c].scope & relevant).none())
                        continue;
                    p *= max_node(c, target, assignment);
                }
                return p;
            }
            case NodeKind::Sum: {
                const double total = std::accumulate(n.cluster_sizes.begin(), n.cluster_sizes.end(), 0.0);
                double best = -1;
                std::vector<double> best_assignment = assignment;
                for (std::size_t k = 0; k != n.children.size(); ++k) {
                    if (n.cluster_sizes[k] <= 0) continue;
                    std::vector<double> a = assignment;
                    const double s = n.cluster_sizes[k] / total * max_node(n.children[k], target, a);
                    bool better = s > best;
                    if (!better && s == best && target >= 0) {
                        const double v = a[std::size_t(target)], bv = best_assignment[std::size_t(target)];
                        better = !is_null(v) && (is_null(bv) || v < bv);
                    }
                    if (better) {
                        best = s;
                        best_assignment = std::move(a);
                    }
                }
                assignment = std::move(best_assignment);
                return std::max(best, 0.0);
            }
        }
        return 0.0;
    }
};

int Rspn::column_index(std::string_view id_) const noexcept
{
    for (std::size_t i = 0; i != columns.size(); ++i)
        if (iequals(columns[i].id, id_)) return int(i);
    return -1;
}

bool Rspn::covers(std::string_view table) const noexcept
{
    return std::any_of(tables.begin(), tables.end(), [&](const std::string &t) { return iequals(t, table); });
}

Predicate Rspn::translate_fd_predicate(const Predicate &pred) const
{
    Predicate out;
    for (const auto &c : pred.conjuncts) {
        const FunctionalDependency *fd = nullptr;
        if (!has_column(c.column))
            for (const auto &d : fd_dictionaries)
                if (iequals(base_column_id(d.table, d.dependent), c.column)) fd = &d;
        if (!fd) {
            out.conjuncts.push_back(c);
            continue;
        }
        const std::string det = base_column_id(fd->table, fd->determinant);
        const bool has_null_image =
            std::any_of(fd->dictionary.begin(), fd->dictionary.end(), [](auto &kv) { return is_null(kv.second); });
        if (c.op == Op::IsNull) {
            if (has_null_image)
                throw UnsupportedQuery("IS NULL on '" + c.column + "' cannot be expressed through its determinant");
            out.add_flag(det, Op::IsNull);
            continue;
        }
        std::vector<double> keep;
        for (const auto &[a, b] : fd->dictionary)
            if (satisfies(c, b)) keep.push_back(a);
        out.add_in(det, std::move(keep));
    }
    return out;
}

double Rspn::evaluate(const TargetExpr &target, const Predicate &pred) const
{
    const Predicate translated = translate_fd_predicate(pred);
    Eval e(*this, target, translated);
    return e.node(root);
}

double Rspn::probability(const Predicate &pred) const { return evaluate(TargetExpr::one(), pred); }

double Rspn::expectation(const TargetExpr &target, const Predicate &pred) const { return evaluate(target, pred); }

double Rspn::second_moment(const TargetExpr &target, const Predicate &pred) const
{
    return evaluate(target.squared(), pred);
}

double Rspn::conditional_expectation(const TargetExpr &target, const Predicate &pred) const
{
    Predicate support = pred;
    for (const auto &t : target.terms) support.add_flag(t.column, Op::NotNull);
    const double p = probability(support);
    if (!(p > 0)) throw EmptyCondition("conditional expectation under a condition of probability zero");
    return expectation(target, pred) / p;
}

double Rspn::mpe(const Predicate &evidence, std::string_view target) const
{
    const int t = column_index(target);
    if (t < 0) throw InputError("column '" + std::string(target) + "' is not in the scope of model '" + id + "'");
    const Predicate translated = translate_fd_predicate(evidence);
    if (!(probability(translated) > 0)) throw EmptyCondition("MPE evidence has probability zero");
    Eval e(*this, TargetExpr::one(), translated);
    e.relevant.set(std::size_t(t));
    std::vector<double> assignment(columns.size(), kNull);
    e.max_node(root, t, assignment);
    return assignment[std::size_t(t)];
}

std::vector<double> Rspn::mpe_assignment(const Predicate &evidence) const
{
    const Predicate translated = translate_fd_predicate(evidence);
    if (!(probability(translated) > 0)) throw EmptyCondition("MPE evidence has probability zero");
    Eval e(*this, TargetExpr::one(), translated);
    std::vector<double> assignment(columns.size(), kNull);
    e.max_node(root, -1, assignment);
    return assignment;
}

double Rspn::assignment_probability(const std::vector<double> &assignment) const
{
    Predicate p;
    for (std::size_t c = 0; c != columns.size() && c != assignment.size(); ++c) {
        if (is_null(assignment[c])) p.add_flag(columns[c].id, Op::IsNull);
        else p.add(columns[c].id, Op::Eq, assignment[c]);
    }
    return probability(p);
}

double Rspn::weight(const Node &sum, std::size_t child) const
{
    const double total = std::accumulate(sum.cluster_sizes.begin(), sum.cluster_sizes.end(), 0.0);
    return total > 0 ? sum.cluster_sizes[child] / total : 0.0;
}

void Rspn::validate() const
{
    auto fail = [&](const std::string &what) { throw InvariantViolation("model '" + id + "': " + what); };
    if (columns.size() > kMaxScope) fail("too many columns");
    if (transforms.size() != columns.size()) fail("rank transforms do not match the columns");
    if (root >= nodes.size()) fail("root out of range");
    Scope all;
    for (std::size_t c = 0; c != columns.size(); ++c) all.set(c);
    if (nodes[root].scope != all) fail("root scope differs from the model columns");
    std::vector<int> parents(nodes.size(), 0);
    for (std::size_t i = 0; i != nodes.size(); ++i) {
        const Node &n = nodes[i];
        for (auto c : n.children) {
            if (c >= nodes.size() || c == i) fail("child index out of range");
            ++parents[c];
        }
        switch (n.kind) {
            case NodeKind::Leaf: {
                if (n.leaf >= leaves.size()) fail("leaf index out of range");
                const Leaf &leaf = leaves[n.leaf];
                if (n.scope.count() != 1 || !n.scope.test(leaf.column)) fail("leaf scope mismatch");
                if (leaf.null_count < 0) fail("negative NULL count");
                for (double c : leaf.counts)
                    if (c < 0) fail("negative leaf count");
                if (!leaf.binned()) {
                    if (leaf.values.size() != leaf.counts.size()) fail("leaf values and counts differ in length");
                    if (!std::is_sorted(leaf.values.begin(), leaf.values.end()) ||
                        std::adjacent_find(leaf.values.begin(), leaf.values.end()) != leaf.values.end())
                        fail("leaf values not strictly sorted");
                } else {
                    if (leaf.bin_upper.size() != leaf.counts.size() || leaf.bin_lower.size() != leaf.counts.size() ||
                        leaf.bin_distinct.size() != leaf.counts.size())
                        fail("bin arrays differ in length");
                    for (std::size_t b = 0; b != leaf.counts.size(); ++b) {
                        if (leaf.bin_lower[b] > leaf.bin_upper[b]) fail("bin bounds reversed");
                        if (b && leaf.bin_lower[b] < leaf.bin_upper[b - 1]) fail("bins overlap");
                    }
                }
                break;
            }
            case NodeKind::Sum: {
                if (n.children.size() < 2) fail("sum node with fewer than two children");
                if (n.cluster_sizes.size() != n.children.size() || n.centroids.size() != n.children.size())
                    fail("sum node bookkeeping does not match its children");
                for (double s : n.cluster_sizes)
                    if (s < 0) fail("negative cluster size");
                for (auto c : n.children)
                    if (nodes[c].scope != n.scope) fail("sum node children differ in scope (completeness)");
                for (const auto &centroid : n.centroids)
                    if (centroid.size() != n.scope.count()) fail("centroid dimension differs from the scope");
                break;
            }
            case NodeKind::Product: {
                if (n.children.size() < 2) fail("product node with fewer than two children");
                Scope seen;
                for (auto c : n.children) {
                    if ((seen & nodes[c].scope).any()) fail("product node children overlap (decomposability)");
                    seen |= nodes[c].scope;
                }
                if (seen != n.scope) fail("product node children do not cover its scope");
                break;
            }
        }
    }
    for (std::size_t i = 0; i != nodes.size(); ++i)
        if ((i == root) != (parents[i] == 0) || parents[i] > 1) fail("nodes do not form a tree");
}

std::size_t Rspn::count_nodes(NodeKind kind) const
{
    return std::size_t(std::count_if(nodes.begin(), nodes.end(), [&](const Node &n) { return n.kind == kind; }));
}

std::size_t Rspn::depth() const
{
    std::vector<std::pair<std::uint32_t, std::size_t>> stack{{root, 1}};
    std::size_t best = 0;
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        for (auto c : nodes[i].children) stack.emplace_back(c, d + 1);
    }
    return best;
}

/*======================================================================================================================
 * Builders
 *====================================================================================================================*/

namespace {

/// Mean rank of a column under the distribution of a subtree.
double mean_rank(const Rspn &m, std::uint32_t node, std::size_t column)
{
    const Node &n = m.nodes[node];
    switch (n.kind) {
        case NodeKind::Leaf: {
            const Leaf &leaf = m.leaves[n.leaf];
            const double total = leaf.total();
            if (total <= 0) return 0.0;
            const auto &t = m.transforms[column];
            double s = 0;
            if (leaf.binned()) {
                for (std::size_t b = 0; b != leaf.counts.size(); ++b)
                    s += leaf.counts[b] * t((leaf.bin_lower[b] + leaf.bin_upper[b]) / 2);
            } else {
                for (std::size_t i = 0; i != leaf.values.size(); ++i) s += leaf.counts[i] * t(leaf.values[i]);
            }
            return s / total;
        }
        case NodeKind::Product:
            for (auto c : n.children)
                if (m.nodes[c].scope.test(column)) return mean_rank(m, c, column);
            return 0.0;
        case NodeKind::Sum: {
            double s = 0;
            for (std::size_t k = 0; k != n.children.size(); ++k) s += m.weight(n, k) * mean_rank(m, n.children[k], column);
            return s;
        }
    }
    return 0.0;
}

/// Number of sample rows represented by a subtree.
double node_mass(const Rspn &m, std::uint32_t node)
{
    const Node &n = m.nodes[node];
    switch (n.kind) {
        case NodeKind::Leaf: return m.leaves[n.leaf].total();
        case NodeKind::Product: return node_mass(m, n.children.front());
        case NodeKind::Sum: return std::accumulate(n.cluster_sizes.begin(), n.cluster_sizes.end(), 0.0);
    }
    return 0.0;
}

void fill_centroids(Rspn &m)
{
    for (auto &n : m.nodes) {
        if (n.kind != NodeKind::Sum || !n.centroids.empty()) continue;
        for (auto child : n.children) {
            std::vector<double> c;
            for (std::size_t col = 0; col != m.columns.size(); ++col)
                if (n.scope.test(col)) c.push_back(mean_rank(m, child, col));
            n.centroids.push_back(std::move(c));
        }
    }
}

}

RspnBuilder::RspnBuilder(std::string id, std::vector<SampleColumn> columns)
{
    if (columns.size() > kMaxScope) throw InputError("a model supports at most 256 columns");
    model_.id = std::move(id);
    model_.columns = std::move(columns);
}

std::uint32_t RspnBuilder::leaf(std::string_view column, const std::vector<std::pair<double, double>> &value_counts,
                                double null_count)
{
    const int c = model_.column_index(column);
    if (c < 0) throw InputError("builder: unknown column '" + std::string(column) + "'");
    Leaf leaf;
    leaf.column = std::uint16_t(c);
    std::map<double, double> merged;
    for (auto [v, n] : value_counts) merged[v] += n;
    for (auto [v, n] : merged) {
        leaf.values.push_back(v);
        leaf.counts.push_back(n);
    }
    leaf.null_count = null_count;
    model_.leaves.push_back(std::move(leaf));
    Node node;
    node.kind = NodeKind::Leaf;
    node.leaf = std::uint32_t(model_.leaves.size() - 1);
    node.scope.set(std::size_t(c));
    model_.nodes.push_back(std::move(node));
    return std::uint32_t(model_.nodes.size() - 1);
}

std::uint32_t RspnBuilder::product(std::vector<std::uint32_t> children)
{
    Node node;
    node.kind = NodeKind::Product;
    for (auto c : children) node.scope |= model_.nodes.at(c).scope;
    node.children = std::move(children);
    model_.nodes.push_back(std::move(node));
    return std::uint32_t(model_.nodes.size() - 1);
}

std::uint32_t RspnBuilder::sum(std::vector<std::uint32_t> children, std::vector<double> cluster_sizes)
{
    Node node;
    node.kind = NodeKind::Sum;
    node.scope = model_.nodes.at(children.at(0)).scope;
    node.children = std::move(children);
    node.cluster_sizes = std::move(cluster_sizes);
    model_.nodes.push_back(std::move(node));
    return std::uint32_t(model_.nodes.size() - 1);
}

Rspn RspnBuilder::finish(std::uint32_t root, double full_population_size, std::vector<std::string> tables)
{
    Rspn m = std::move(model_);
    m.root = root;
    m.tables = std::move(tables);
    m.transforms.resize(m.columns.size());
    for (std::size_t c = 0; c != m.columns.size(); ++c) {
        std::vector<double> values;
        for (const auto &leaf : m.leaves) {
            if (leaf.column != c) continue;
            for (std::size_t i = 0; i != leaf.values.size(); ++i)
                values.insert(values.end(), std::size_t(leaf.counts[i]), leaf.values[i]);
            values.insert(values.end(), std::size_t(leaf.null_count), kNull);
        }
        m.transforms[c] = RankTransform::fit(values);
    }
    fill_centroids(m);
    const double n = node_mass(m, root);
    m.n_samples = n;
    m.full_population_size = full_population_size;
    m.sample_rate = full_population_size > 0 ? std::min(1.0, n / full_population_size) : 1.0;
    m.rdc_snapshot.columns.clear();
    for (const auto &c : m.columns) m.rdc_snapshot.columns.push_back(c.id);
    m.rdc_snapshot.values.assign(m.columns.size() * m.columns.size(), 0.0);
    for (std::size_t c = 0; c != m.columns.size(); ++c) m.rdc_snapshot.values[c * m.columns.size() + c] = 1.0;
    m.validate();
    return m;
}

Rspn build_exact_rspn(const SampleTable &data, std::string id)
{
    if (data.rows() == 0) throw InputError("cannot build a model from an empty table");
    if (id.empty())
        for (const auto &t : data.origin_tables) id += (id.empty() ? "" : "|") + t;
    RspnBuilder b(id, data.columns);

    /* distinct rows in first-appearance order, NULLs compared as equal */
    auto key_less = [&](std::uint32_t a, std::uint32_t z) {
        for (const auto &col : data.data) {
            const double x = col[a], y = col[z];
            if (is_null(x) || is_null(y)) {
                if (is_null(x) != is_null(y)) return is_null(x);
                continue;
            }
            if (x != y) return x < y;
        }
        return false;
    };
    std::map<std::uint32_t, double, decltype(key_less)> groups(key_less);
    std::vector<std::uint32_t> order;
    for (std::uint32_t r = 0; r != data.rows(); ++r) {
        auto [it, inserted] = groups.emplace(r, 0.0);
        it->second += 1;
        if (inserted) order.push_back(r);
    }

    auto row_model = [&](std::uint32_t r, double mult) {
        std::vector<std::uint32_t> leaves;
        for (std::size_t c = 0; c != data.columns.size(); ++c) {
            const double v = data.data[c][r];
            if (is_null(v)) leaves.push_back(b.leaf(data.columns[c].id, {}, mult));
            else leaves.push_back(b.leaf(data.columns[c].id, {{v, mult}}));
        }
        return leaves.size() == 1 ? leaves.front() : b.product(std::move(leaves));
    };
    std::uint32_t root;
    if (order.size() == 1) {
        root = row_model(order.front(), groups.begin()->second);
    } else {
        std::vector<std::uint32_t> children;
        std::vector<double> sizes;
        for (auto r : order) {
            const double mult = groups.find(r)->second;
            children.push_back(row_model(r, mult));
            sizes.push_back(mult);
        }
        root = b.sum(std::move(children), std::move(sizes));
    }
    const double population = data.full_population_size ? double(data.full_population_size) : double(data.rows());
    Rspn m = b.finish(root, population, data.origin_tables);
    m.n_samples = double(data.rows());
    m.sample_rate = data.sample_rate;
    m.fd_dictionaries = data.fd_dictionaries;
    /* transforms from the actual rows */
    for (std::size_t c = 0; c != data.columns.size(); ++c) m.transforms[c] = RankTransform::fit(data.data[c]);
    for (auto &n : m.nodes) n.centroids.clear();
    fill_centroids(m);
    if (data.rows() >= 2) m.rdc_snapshot = pairwise_rdc(data, {}, [&] {
        std::vector<std::size_t> all(data.columns.size());
        std::iota(all.begin(), all.end(), std::size_t(0));
        return all;
    }(), m.params.rdc);
    return m;
}

}
