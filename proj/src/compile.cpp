#include "rspn/compile.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <spdlog/spdlog.h>

namespace rspn {

namespace {

TableSet model_set(const SchemaGraph &schema, const Rspn &m)
{
    TableSet s;
    for (const auto &t : m.tables) s.insert(schema.require_table(t));
    return s;
}

/// The model column a filter on `column` is answered through: itself, or its FD determinant.
std::string mapped_column(const Rspn &m, const std::string &column)
{
    if (m.has_column(column)) return column;
    for (const auto &fd : m.fd_dictionaries)
        if (iequals(base_column_id(fd.table, fd.dependent), column)) return base_column_id(fd.table, fd.determinant);
    return {};
}

double snapshot_rdc(const Rspn &m, const std::string &a, const std::string &b)
{
    const std::string x = mapped_column(m, a), y = mapped_column(m, b);
    if (x.empty() || y.empty()) return 0;
    if (x == y) return 1;
    return m.rdc_snapshot.get(x, y).value_or(0);
}

/// Tables of `within` reachable from `from` without crossing edge `skip`.
TableSet reach(const SchemaGraph &schema, TableSet within, unsigned from, int skip)
{
    TableSet seen = TableSet::single(from);
    for (bool grew = true; grew;) {
        grew = false;
        for (unsigned e : schema.edges_within(within)) {
            if (int(e) == skip) continue;
            const unsigned a = schema.referencing_index(schema.fks[e]), b = schema.referenced_index(schema.fks[e]);
            if (seen.contains(a) != seen.contains(b)) {
                seen.insert(a);
                seen.insert(b);
                grew = true;
            }
        }
    }
    return seen;
}

/// Smallest connected subset of `within` containing `needed`.
TableSet closure(const SchemaGraph &schema, TableSet within, TableSet needed)
{
    TableSet s = within;
    for (bool shrunk = true; shrunk;) {
        shrunk = false;
        for (unsigned t : s.members()) {
            if (needed.contains(t)) continue;
            unsigned degree = 0;
            for (unsigned e : schema.edges_within(s))
                if (schema.referencing_index(schema.fks[e]) == t || schema.referenced_index(schema.fks[e]) == t) ++degree;
            if (degree <= 1) {
                s.erase(t);
                shrunk = true;
            }
        }
    }
    return s;
}

/// 1/F' for every edge of the model's join that multiplies the tuples of X: the edge's endpoint nearer to X is the
/// referenced table.
TargetExpr multiplicity_terms(const SchemaGraph &schema, const Rspn &m, TableSet x)
{
    TargetExpr t;
    const TableSet mt = model_set(schema, m);
    const unsigned anchor = x.members().front();
    for (unsigned e : schema.edges_within(mt)) {
        const auto &fk = schema.fks[e];
        const unsigned referencing = schema.referencing_index(fk), referenced = schema.referenced_index(fk);
        if (x.contains(referencing) && x.contains(referenced)) continue;
        if (!reach(schema, mt, anchor, int(e)).contains(referenced)) continue;
        const std::string col = factor_column_id(fk, true);
        if (!m.has_column(col)) throw InvariantViolation("model '" + m.id + "' lacks tuple factor '" + col + "'");
        t.times(col, ValueTransform::Reciprocal);
    }
    return t;
}

Predicate table_predicate(const SchemaGraph &schema, const Rspn &m, TableSet x, const Predicate &pred,
                          TableSet required)
{
    Predicate out;
    for (const auto &c : pred.conjuncts)
        if (x.contains(column_table(schema, c.column))) out.conjuncts.push_back(c);
    if (m.tables.size() > 1)
        for (unsigned t : (x & required).members()) out.add(indicator_column_id(schema.tables[t].name), Op::Eq, 1.0);
    return out;
}

std::vector<std::string> filter_columns(const Query &q)
{
    std::vector<std::string> cols;
    for (const auto &c : q.predicate.conjuncts)
        if (std::find(cols.begin(), cols.end(), c.column) == cols.end()) cols.push_back(c.column);
    for (const auto &g : q.group_by)
        if (std::find(cols.begin(), cols.end(), g) == cols.end()) cols.push_back(g);
    return cols;
}

std::string render_predicate(const Predicate &p)
{
    std::ostringstream out;
    for (std::size_t i = 0; i != p.conjuncts.size(); ++i) {
        const auto &c = p.conjuncts[i];
        out << (i ? " AND " : "") << c.column << ' ' << to_string(c.op);
        if (c.op == Op::In) {
            out << " (";
            for (std::size_t k = 0; k != c.values.size(); ++k) out << (k ? "," : "") << c.values[k];
            out << ')';
        } else if (!c.values.empty()) {
            out << ' ' << c.values.front();
        }
    }
    return out.str();
}

std::string render_target(const TargetExpr &t)
{
    if (t.terms.empty()) return "1";
    std::ostringstream out;
    for (std::size_t i = 0; i != t.terms.size(); ++i) {
        const auto &term = t.terms[i];
        out << (i ? " * " : "");
        switch (term.transform) {
            case ValueTransform::Identity: out << term.column; break;
            case ValueTransform::Reciprocal: out << "1/" << term.column; break;
            case ValueTransform::AtLeastOne: out << "max(" << term.column << ",1)"; break;
        }
        if (term.power != 1) out << '^' << term.power;
    }
    return out.str();
}

double factor_value(const Ensemble &e, const Factor &f)
{
    if (f.kind == Factor::Kind::Constant) return f.constant;
    return e.rspns[f.rspn].expectation(f.target, f.predicate);
}

}

/*======================================================================================================================
 * Expressions
 *====================================================================================================================*/

double FactorExpr::value(const Ensemble &ensemble) const
{
    double v = 1;
    for (const auto &f : factors) {
        const double x = factor_value(ensemble, f);
        if (f.reciprocal) {
            if (x == 0) return 0; /* the overlap is empty in this model, so is the result */
            v /= x;
        } else {
            v *= x;
        }
    }
    if (v < 0) {
        spdlog::warn("negative intermediate estimate {} clamped to 0", v);
        v = 0;
    }
    return v;
}

UncertainFactor FactorExpr::uncertain(const Ensemble &ensemble) const
{
    std::vector<UncertainFactor> parts;
    for (const auto &f : factors) {
        if (f.kind == Factor::Kind::Constant) {
            parts.push_back(UncertainFactor::constant(f.constant));
            continue;
        }
        UncertainFactor u = uncertain_expectation(ensemble.rspns[f.rspn], f.target, f.predicate);
        if (f.reciprocal) {
            if (u.mean == 0) return UncertainFactor::constant(0);
            u = reciprocal(u);
        }
        parts.push_back(u);
    }
    return combine_product(parts);
}

std::vector<std::string> FactorExpr::describe(const Ensemble &ensemble) const
{
    std::vector<std::string> out;
    for (const auto &f : factors) {
        std::ostringstream line;
        line << case_label << " | " << f.role << " | ";
        if (f.kind == Factor::Kind::Constant) {
            line << "constant " << f.constant;
        } else {
            line << ensemble.rspns[f.rspn].id << " | " << (f.reciprocal ? "1 / " : "") << "E[" << render_target(f.target)
                 << " * 1{" << render_predicate(f.predicate) << "}]";
        }
        out.push_back(line.str());
    }
    return out;
}

double AvgExpr::value(const Ensemble &ensemble) const
{
    const Rspn &m = ensemble.rspns[rspn];
    TargetExpr num = weight;
    num.times(column);
    const double d = m.expectation(weight, predicate);
    if (!(d > 0)) throw EmptyCondition("AVG over an empty selection");
    return m.expectation(num, predicate) / d;
}

UncertainFactor AvgExpr::uncertain(const Ensemble &ensemble) const
{
    const Rspn &m = ensemble.rspns[rspn];
    const double mu = value(ensemble);
    const double d = m.expectation(weight, predicate);
    /* ratio estimator: E[W^2 (A - mu)^2 1_C] / (n E[W 1_C]^2) */
    const TargetExpr w2 = weight.squared();
    TargetExpr w2a = w2, w2a2 = w2;
    w2a.times(column);
    w2a2.times(column, ValueTransform::Identity, 2);
    const double s = m.expectation(w2a2, predicate) - 2 * mu * m.expectation(w2a, predicate) +
                     mu * mu * m.expectation(w2, predicate);
    const double var = std::max(0.0, s) / (std::max(1.0, m.n_samples) * d * d);
    return {mu, var, FactorKind::ConditionalExpectation};
}

/*======================================================================================================================
 * Engine
 *====================================================================================================================*/

QueryEngine::QueryEngine(const Ensemble &ensemble, EngineOptions options) : ensemble_(ensemble), options_(options)
{
    if (ensemble_.rspns.empty()) throw InputError("ensemble has no models");
}

Query QueryEngine::parse(std::string_view sql) const { return parse_query(sql, ensemble_.schema, ensemble_.catalog); }

namespace {

double independence_risk(const Ensemble &e, const Query &q, const Plan &plan)
{
    const auto &schema = e.schema;
    TableSet filtered;
    for (const auto &c : filter_columns(q)) filtered.insert(column_table(schema, c));
    double risk = -1;
    const auto members = filtered.members();
    for (std::size_t i = 0; i != members.size(); ++i)
        for (std::size_t j = i + 1; j != members.size(); ++j) {
            bool together = false;
            for (const auto &s : plan.steps)
                together |= s.handled.contains(members[i]) && s.handled.contains(members[j]);
            if (together) continue;
            if (auto d = e.dependency(schema.tables[members[i]].name, schema.tables[members[j]].name))
                risk = std::max(risk, *d);
        }
    return risk;
}

}

Plan QueryEngine::select_rspns(const Query &q) const
{
    const auto &schema = ensemble_.schema;
    const TableSet qs = q.table_set();
    const auto cols = filter_columns(q);
    std::vector<unsigned> col_table;
    for (const auto &c : cols) col_table.push_back(column_table(schema, c));

    Plan plan;
    TableSet covered;
    while (covered != qs) {
        const TableSet uncovered = qs - covered;
        int best = -1;
        double best_score = 0;
        unsigned best_new = 0;
        PlanStep best_step;
        for (std::size_t r = 0; r != ensemble_.rspns.size(); ++r) {
            const Rspn &m = ensemble_.rspns[r];
            const TableSet mt = model_set(schema, m);
            const TableSet x = mt & qs;
            if (!x.intersects(uncovered)) continue;
            if (!covered.empty() && !schema.is_connected(covered | x)) continue;
            double score = 0;
            for (std::size_t i = 0; i != cols.size(); ++i)
                for (std::size_t j = i + 1; j != cols.size(); ++j) {
                    if (!x.contains(col_table[i]) || !x.contains(col_table[j])) continue;
                    if (!uncovered.contains(col_table[i]) && !uncovered.contains(col_table[j])) continue;
                    score += snapshot_rdc(m, cols[i], cols[j]);
                }
            const unsigned fresh = (x & uncovered).size();
            bool better = best < 0;
            if (!better) {
                const Rspn &b = ensemble_.rspns[std::size_t(best)];
                if (score != best_score) better = score > best_score;
                else if (fresh != best_new) better = fresh > best_new;
                else if (m.tables.size() != b.tables.size()) better = m.tables.size() < b.tables.size();
                else better = m.id < b.id;
            }
            if (better) {
                best = int(r);
                best_score = score;
                best_new = fresh;
                best_step = {r, x, x & covered, score};
            }
        }
        if (best < 0) {
            std::string missing;
            for (unsigned t : uncovered.members()) missing += (missing.empty() ? "" : ", ") + schema.tables[t].name;
            throw UnsupportedQuery("no model covers table(s) " + missing);
        }
        plan.steps.push_back(best_step);
        covered = covered | best_step.handled;
    }
    plan.independence_risk = independence_risk(ensemble_, q, plan);
    return plan;
}

Plan QueryEngine::plan_with(const Query &q, const std::vector<std::string> &ids) const
{
    const auto &schema = ensemble_.schema;
    const TableSet qs = q.table_set();
    Plan plan;
    TableSet covered;
    for (const auto &id : ids) {
        std::size_t r = 0;
        while (r != ensemble_.rspns.size() && ensemble_.rspns[r].id != id) ++r;
        if (r == ensemble_.rspns.size()) throw InputError("no model with id '" + id + "'");
        const TableSet x = model_set(schema, ensemble_.rspns[r]) & qs;
        if (!x.intersects(qs - covered)) throw InputError("model '" + id + "' adds no query table to the plan");
        if (!covered.empty() && !schema.is_connected(covered | x))
            throw InputError("model '" + id + "' is not connected to the earlier plan steps");
        plan.steps.push_back({r, x, x & covered, 0});
        covered = covered | x;
    }
    if (covered != qs) throw InputError("the given models do not cover every query table");
    plan.independence_risk = independence_risk(ensemble_, q, plan);
    return plan;
}

FactorExpr QueryEngine::compile_count(const Query &q, const Plan &plan, const Predicate &extra) const
{
    const auto &schema = ensemble_.schema;
    const TableSet qs = q.table_set();
    const TableSet required = q.required_tables(schema);
    Predicate pred = q.predicate;
    pred.append(extra);
    if (plan.steps.empty()) throw InvariantViolation("empty plan");

    FactorExpr expr;
    std::map<unsigned, std::size_t> owner; /* table -> index of the factor that introduced it */
    TableSet covered;

    const PlanStep &first = plan.steps.front();
    const Rspn &m0 = ensemble_.rspns[first.rspn];
    const bool single = plan.steps.size() == 1;
    expr.case_label = !single ? "Case 3" : model_set(schema, m0) == qs ? "Case 1" : "Case 2";
    {
        Factor pop;
        pop.kind = Factor::Kind::Constant;
        pop.role = "|J|";
        pop.constant = m0.full_population_size;
        pop.rspn = first.rspn;
        expr.factors.push_back(pop);
        Factor f;
        f.kind = Factor::Kind::Expectation;
        f.role = single ? "Q" : "Q_L";
        f.rspn = first.rspn;
        f.target = multiplicity_terms(schema, m0, first.handled);
        f.predicate = table_predicate(schema, m0, first.handled, pred, required);
        expr.factors.push_back(std::move(f));
        for (unsigned t : first.handled.members()) owner[t] = 1;
        covered = first.handled;
    }

    auto add_fanout = [&](unsigned a, unsigned e) {
        /* the referenced table a is already covered: its owner counts one result row per referencing row */
        const auto &fk = schema.fks[e];
        const unsigned b = schema.referencing_index(fk);
        Factor &f = expr.factors[owner.at(a)];
        const std::string col = factor_column_id(fk, false);
        if (!ensemble_.rspns[f.rspn].has_column(col))
            throw InvariantViolation("model '" + ensemble_.rspns[f.rspn].id + "' lacks tuple factor '" + col + "'");
        f.target.times(col, required.contains(b) ? ValueTransform::Identity : ValueTransform::AtLeastOne);
    };

    for (std::size_t s = 1; s < plan.steps.size(); ++s) {
        const PlanStep &step = plan.steps[s];
        const Rspn &m = ensemble_.rspns[step.rspn];
        const TableSet x = step.handled;
        const TableSet o = x & covered;
        const TableSet fresh = x - covered;

        Factor num;
        num.kind = Factor::Kind::Expectation;
        num.role = "Q_R";
        num.rspn = step.rspn;
        num.target = multiplicity_terms(schema, m, x);
        num.predicate = table_predicate(schema, m, x, pred, required);

        Factor den;
        den.kind = Factor::Kind::Expectation;
        den.role = "Q_O'";
        den.rspn = step.rspn;
        den.reciprocal = true;

        if (!o.empty()) {
            TableSet extended = o;
            for (unsigned e : schema.edges_within(x)) {
                const unsigned a = schema.referenced_index(schema.fks[e]), b = schema.referencing_index(schema.fks[e]);
                if (o.contains(a) && fresh.contains(b)) {
                    add_fanout(a, e);
                    extended.insert(b);
                }
            }
            den.target = multiplicity_terms(schema, m, extended);
            den.predicate = table_predicate(schema, m, o, pred, required);
            if (m.tables.size() > 1)
                for (unsigned b : ((extended - o) & required).members())
                    den.predicate.add(indicator_column_id(schema.tables[b].name), Op::Eq, 1.0);
        } else {
            std::optional<unsigned> link;
            for (unsigned e : schema.edges_within(covered | x)) {
                const unsigned a = schema.referencing_index(schema.fks[e]), b = schema.referenced_index(schema.fks[e]);
                if ((covered.contains(a) && fresh.contains(b)) || (covered.contains(b) && fresh.contains(a))) link = e;
            }
            if (!link) throw UnsupportedQuery("no foreign key links the plan's models (cross product)");
            const auto &fk = schema.fks[*link];
            const unsigned referenced = schema.referenced_index(fk), referencing = schema.referencing_index(fk);
            if (covered.contains(referenced)) {
                add_fanout(referenced, *link);
                const TableSet bset = TableSet::single(referencing);
                den.target = multiplicity_terms(schema, m, bset);
                den.predicate = table_predicate(schema, m, bset, Predicate{}, required);
            } else {
                /* the new side is referenced: weight its rows by how many covered rows point at them */
                const std::string col = factor_column_id(fk, false);
                if (!m.has_column(col))
                    throw InvariantViolation("model '" + m.id + "' lacks tuple factor '" + col + "'");
                num.target.times(col);
                const TableSet sset = TableSet::single(referenced);
                den.target = multiplicity_terms(schema, m, sset);
                den.target.times(col);
                den.predicate = table_predicate(schema, m, sset, Predicate{}, required);
            }
        }
        expr.factors.push_back(std::move(num));
        const std::size_t num_index = expr.factors.size() - 1;
        expr.factors.push_back(std::move(den));
        for (unsigned t : fresh.members()) owner[t] = num_index;
        covered = covered | x;
    }
    return expr;
}

AvgExpr QueryEngine::compile_avg(const Query &q, const Predicate &extra) const
{
    const auto &schema = ensemble_.schema;
    if (q.aggregate == Aggregate::Count) throw InputError("compile_avg needs a SUM or AVG query");
    const std::string &a = q.aggregate_column;
    const TableSet qs = q.table_set();
    const TableSet required = q.required_tables(schema) | TableSet::single(column_table(schema, a));
    Predicate pred = q.predicate;
    pred.append(extra);

    int best = -1;
    double best_score = 0;
    unsigned best_size = 0;
    for (std::size_t r = 0; r != ensemble_.rspns.size(); ++r) {
        const Rspn &m = ensemble_.rspns[r];
        if (!m.has_column(a)) continue;
        const TableSet x = model_set(schema, m) & qs;
        double score = 0;
        std::set<std::string> seen;
        for (const auto &c : pred.conjuncts)
            if (x.contains(column_table(schema, c.column)) && seen.insert(c.column).second)
                score += snapshot_rdc(m, a, c.column);
        bool better = best < 0;
        if (!better) {
            const Rspn &b = ensemble_.rspns[std::size_t(best)];
            if (score != best_score) better = score > best_score;
            else if (x.size() != best_size) better = x.size() > best_size;
            else if (m.tables.size() != b.tables.size()) better = m.tables.size() < b.tables.size();
            else better = m.id < b.id;
        }
        if (better) {
            best = int(r);
            best_score = score;
            best_size = x.size();
        }
    }
    if (best < 0) throw UnsupportedQuery("no model contains column '" + a + "'");

    AvgExpr out;
    out.rspn = std::size_t(best);
    out.column = a;
    const Rspn &m = ensemble_.rspns[out.rspn];
    const TableSet x = model_set(schema, m) & qs;
    out.weight = multiplicity_terms(schema, m, x);
    /* query tables outside the model multiply the rows they reference */
    for (unsigned e = 0; e != schema.fks.size(); ++e) {
        const auto &fk = schema.fks[e];
        const unsigned referenced = schema.referenced_index(fk), referencing = schema.referencing_index(fk);
        if (x.contains(referenced) && qs.contains(referencing) && !x.contains(referencing))
            out.weight.times(factor_column_id(fk, false),
                             required.contains(referencing) ? ValueTransform::Identity : ValueTransform::AtLeastOne);
    }
    out.predicate = table_predicate(schema, m, x, pred, required);
    out.predicate.add_flag(a, Op::NotNull);

    const unsigned at = column_table(schema, a);
    for (const auto &c : pred.conjuncts) {
        const unsigned t = column_table(schema, c.column);
        if (x.contains(t)) continue;
        if (std::find(out.dropped.begin(), out.dropped.end(), c.column) == out.dropped.end())
            out.dropped.push_back(c.column);
        if (auto d = ensemble_.dependency(schema.tables[at].name, schema.tables[t].name))
            out.dropped_dependency = std::max(out.dropped_dependency, *d);
    }
    return out;
}

namespace {

struct GroupDomain
{
    std::vector<double> values;
    bool has_null = false;
};

GroupDomain group_domain(const Ensemble &e, const std::vector<std::size_t> &models, const std::string &column)
{
    GroupDomain d;
    std::set<double> values;
    bool handled = false;
    for (auto r : models) {
        const Rspn &m = e.rspns[r];
        const int idx = m.column_index(column);
        if (idx >= 0) {
            handled = true;
            for (const auto &leaf : m.leaves) {
                if (leaf.column != idx) continue;
                if (leaf.binned())
                    throw UnsupportedQuery("unsupported: GROUP BY on column '" + column +
                                           "', whose distribution is binned");
                values.insert(leaf.values.begin(), leaf.values.end());
                if (leaf.null_count > 0) d.has_null = true;
            }
            continue;
        }
        for (const auto &fd : m.fd_dictionaries)
            if (iequals(base_column_id(fd.table, fd.dependent), column)) {
                handled = true;
                for (const auto &[k, v] : fd.dictionary) {
                    if (is_null(v)) d.has_null = true;
                    else values.insert(v);
                }
            }
    }
    if (!handled) throw UnsupportedQuery("no model in the plan holds GROUP BY column '" + column + "'");
    d.values.assign(values.begin(), values.end());
    return d;
}

}

Estimate QueryEngine::execute(const Query &q) const
{
    const Plan plan = select_rspns(q);
    Estimate est;
    if (plan.independence_risk >= ensemble_.rspns.front().params.rdc_threshold)
        est.warnings.push_back("filter columns handled by different models have table dependency " +
                               std::to_string(plan.independence_risk) + "; the independence assumption may not hold");

    std::optional<AvgExpr> avg_template;
    if (q.aggregate != Aggregate::Count) {
        /* pick the AVG model with the group columns counted as filter columns */
        Predicate probe;
        for (const auto &g : q.group_by) probe.add_flag(g, Op::NotNull);
        avg_template = compile_avg(q, probe);
        if (!avg_template->dropped.empty()) {
            std::string list;
            for (const auto &c : avg_template->dropped) list += (list.empty() ? "" : ", ") + c;
            est.warnings.push_back("AVG(" + q.aggregate_column + ") ignores filters on " + list +
                                   (avg_template->dropped_dependency >= 0
                                        ? " (table dependency " + std::to_string(avg_template->dropped_dependency) + ")"
                                        : std::string()));
        }
    }

    auto evaluate = [&](const Predicate &extra, double *count_out) -> UncertainFactor {
        if (q.aggregate == Aggregate::Count) {
            const FactorExpr expr = compile_count(q, plan, extra);
            UncertainFactor u = expr.uncertain(ensemble_);
            u.mean = expr.value(ensemble_);
            if (count_out) *count_out = u.mean;
            return u;
        }
        AvgExpr avg = *avg_template;
        const auto &schema = ensemble_.schema;
        const TableSet x = model_set(schema, ensemble_.rspns[avg.rspn]) & q.table_set();
        for (const auto &c : extra.conjuncts)
            if (x.contains(column_table(schema, c.column))) avg.predicate.conjuncts.push_back(c);
        Predicate count_extra = extra;
        if (q.aggregate == Aggregate::Sum) count_extra.add_flag(q.aggregate_column, Op::NotNull);
        const FactorExpr count = compile_count(q, plan, count_extra);
        const double n = count.value(ensemble_);
        if (count_out) *count_out = n;
        if (q.aggregate == Aggregate::Avg) return avg.uncertain(ensemble_);
        if (n == 0) return UncertainFactor::constant(0);
        UncertainFactor cu = count.uncertain(ensemble_);
        cu.mean = n;
        UncertainFactor au;
        try {
            au = avg.uncertain(ensemble_);
        } catch (const EmptyCondition &) {
            return UncertainFactor::constant(0);
        }
        const UncertainFactor parts[] = {cu, au};
        UncertainFactor s = combine_product(parts);
        s.mean = n * au.mean;
        return s;
    };

    {
        const FactorExpr expr = compile_count(q, plan);
        est.plan = expr.describe(ensemble_);
        if (avg_template) {
            std::ostringstream line;
            line << "AVG | " << ensemble_.rspns[avg_template->rspn].id << " | E[" << q.aggregate_column << " * "
                 << render_target(avg_template->weight) << " * 1{" << render_predicate(avg_template->predicate)
                 << "}] / E[" << render_target(avg_template->weight) << " * 1{...}]";
            est.plan.push_back(line.str());
        }
    }

    auto finish = [&](const UncertainFactor &u, double &value, double &variance, double &lo, double &hi) {
        value = u.mean;
        variance = u.variance;
        UncertainFactor c = u;
        const auto [l, h] = confidence_interval(c, options_.confidence_level);
        lo = std::min(l, value);
        hi = std::max(h, value);
    };

    if (q.group_by.empty()) {
        finish(evaluate({}, nullptr), est.value, est.variance, est.ci_low, est.ci_high);
        return est;
    }

    std::vector<std::size_t> models;
    for (const auto &s : plan.steps) models.push_back(s.rspn);
    if (avg_template) models.push_back(avg_template->rspn);
    std::vector<GroupDomain> domains;
    std::size_t combos = 1;
    for (const auto &g : q.group_by) {
        domains.push_back(group_domain(ensemble_, models, g));
        const std::size_t n = domains.back().values.size() + (domains.back().has_null ? 1 : 0);
        combos *= std::max<std::size_t>(n, 1);
        if (combos > options_.max_groups)
            throw UnsupportedQuery("GROUP BY would enumerate more than " + std::to_string(options_.max_groups) +
                                   " groups");
    }
    if (combos == 0) return est;

    std::vector<std::size_t> digit(domains.size(), 0);
    double total_value = 0;
    UncertainFactor total{0, 0, FactorKind::ConditionalExpectation};
    for (std::size_t k = 0; k != combos; ++k) {
        Predicate extra;
        GroupResult g;
        for (std::size_t i = 0; i != domains.size(); ++i) {
            const auto &d = domains[i];
            if (digit[i] < d.values.size()) {
                const double v = d.values[digit[i]];
                extra.add(q.group_by[i], Op::Eq, v);
                g.key.push_back(v);
            } else {
                extra.add_flag(q.group_by[i], Op::IsNull);
                g.key.push_back(kNull);
            }
            g.labels.push_back(ensemble_.catalog.render(q.group_by[i], g.key.back()));
        }
        for (std::size_t i = domains.size(); i-- > 0;) {
            const std::size_t n = domains[i].values.size() + (domains[i].has_null ? 1 : 0);
            if (++digit[i] < n) break;
            digit[i] = 0;
        }

        double count = 0;
        UncertainFactor u;
        try {
            u = evaluate(extra, &count);
        } catch (const EmptyCondition &) {
            continue;
        }
        if (count < options_.min_group_count) continue;
        finish(u, g.value, g.variance, g.ci_low, g.ci_high);
        total_value += g.value;
        total.variance += g.variance;
        est.groups.push_back(std::move(g));
    }
    if (q.aggregate != Aggregate::Avg) {
        est.value = total_value;
        total.mean = total_value;
        finish(total, est.value, est.variance, est.ci_low, est.ci_high);
    } else {
        finish(evaluate({}, nullptr), est.value, est.variance, est.ci_low, est.ci_high);
    }
    return est;
}

double QueryEngine::estimate_cardinality(const Query &query) const
{
    Query q = query;
    q.aggregate = Aggregate::Count;
    q.aggregate_column.clear();
    const Plan plan = select_rspns(q);
    const double v = compile_count(q, plan).value(ensemble_);
    return std::max(1.0, std::round(v));
}

namespace {

struct MlChoice
{
    std::size_t rspn = 0;
    Predicate evidence;
    TargetExpr weight;
};

MlChoice choose_for(const Ensemble &e, const std::string &target, const Predicate &evidence)
{
    const auto &schema = e.schema;
    int best = -1;
    double best_score = 0;
    std::size_t best_handled = 0;
    for (std::size_t r = 0; r != e.rspns.size(); ++r) {
        const Rspn &m = e.rspns[r];
        if (!m.has_column(target)) continue;
        double score = 0;
        std::size_t handled = 0;
        for (const auto &c : evidence.conjuncts) {
            if (mapped_column(m, c.column).empty()) continue;
            ++handled;
            score += snapshot_rdc(m, target, c.column);
        }
        bool better = best < 0;
        if (!better) {
            const Rspn &b = e.rspns[std::size_t(best)];
            if (score != best_score) better = score > best_score;
            else if (handled != best_handled) better = handled > best_handled;
            else if (m.tables.size() != b.tables.size()) better = m.tables.size() < b.tables.size();
            else better = m.id < b.id;
        }
        if (better) {
            best = int(r);
            best_score = score;
            best_handled = handled;
        }
    }
    if (best < 0) throw UnsupportedQuery("no model contains column '" + target + "'");

    MlChoice out;
    out.rspn = std::size_t(best);
    const Rspn &m = e.rspns[out.rspn];
    TableSet needed = TableSet::single(column_table(schema, target));
    for (const auto &c : evidence.conjuncts) {
        if (mapped_column(m, c.column).empty()) {
            spdlog::warn("evidence on '{}' is outside model '{}' and is ignored", c.column, m.id);
            continue;
        }
        out.evidence.conjuncts.push_back(c);
        needed.insert(column_table(schema, c.column));
    }
    const TableSet x = closure(schema, model_set(schema, m), needed);
    out.weight = multiplicity_terms(schema, m, x);
    if (m.tables.size() > 1)
        for (unsigned t : x.members()) out.evidence.add(indicator_column_id(schema.tables[t].name), Op::Eq, 1.0);
    return out;
}

}

double QueryEngine::regress(const std::string &target, const Predicate &evidence) const
{
    const MlChoice c = choose_for(ensemble_, target, evidence);
    const Rspn &m = ensemble_.rspns[c.rspn];
    Predicate pred = c.evidence;
    pred.add_flag(target, Op::NotNull);
    const double d = m.expectation(c.weight, pred);
    if (!(d > 0)) throw EmptyCondition("regression evidence has probability zero");
    TargetExpr num = c.weight;
    num.times(target);
    return m.expectation(num, pred) / d;
}

double QueryEngine::classify(const std::string &target, const Predicate &evidence) const
{
    const MlChoice c = choose_for(ensemble_, target, evidence);
    return ensemble_.rspns[c.rspn].mpe(c.evidence, target);
}

}
