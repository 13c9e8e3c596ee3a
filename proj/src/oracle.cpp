#include "rspn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace rspn {

double q_error(double estimate, double truth) noexcept
{
    const double e = std::max(1.0, estimate), t = std::max(1.0, truth);
    return std::max(e / t, t / e);
}

double percentile(std::vector<double> values, double p)
{
    if (values.empty()) throw InputError("percentile of an empty sample");
    std::sort(values.begin(), values.end());
    const double rank = std::ceil(std::clamp(p, 0.0, 1.0) * double(values.size()));
    return values[std::size_t(std::max(rank, 1.0)) - 1];
}

namespace {

/// Rows of the referencing table per referenced row, and the referenced row of each referencing row (-1: none).
struct EdgeRows
{
    std::vector<std::vector<std::uint32_t>> referencing_of;
    std::vector<std::int64_t> referenced_of;
};

EdgeRows index_edge(const Database &db, const ForeignKeyRel &fk)
{
    const auto &schema = db.schema;
    const SampleTable &s = db.tables[schema.referenced_index(fk)];
    const SampleTable &p = db.tables[schema.referencing_index(fk)];
    const auto &pk = s.data[s.require(base_column_id(fk.referenced_table, fk.referenced_column))];
    const auto &fkcol = p.data[p.require(base_column_id(fk.referencing_table, fk.referencing_column))];
    std::unordered_map<double, std::uint32_t> row_of;
    for (std::uint32_t r = 0; r != pk.size(); ++r) row_of.emplace(pk[r], r);
    EdgeRows out;
    out.referencing_of.resize(pk.size());
    out.referenced_of.assign(fkcol.size(), -1);
    for (std::uint32_t r = 0; r != fkcol.size(); ++r) {
        if (is_null(fkcol[r])) continue;
        auto it = row_of.find(fkcol[r]);
        if (it == row_of.end()) continue;
        out.referenced_of[r] = it->second;
        out.referencing_of[it->second].push_back(r);
    }
    return out;
}

struct Moments
{
    double count = 0, sum = 0;
};

class TreeDp
{
    const Database &db_;
    const Query &q_;
    TableSet tables_, required_;
    std::string agg_column_;
    unsigned root_;
    std::map<unsigned, int> parent_;          /* -1 for the root */
    std::map<unsigned, unsigned> parent_edge_;
    std::map<unsigned, std::vector<unsigned>> children_;
    std::vector<unsigned> order_;             /* BFS from the root */
    std::map<unsigned, EdgeRows> edges_;

    std::span<const std::uint32_t> partners(unsigned t, std::uint32_t row, unsigned edge, std::uint32_t &single) const
    {
        const auto &fk = db_.schema.fks[edge];
        const EdgeRows &ix = edges_.at(edge);
        if (db_.schema.referenced_index(fk) == t) return ix.referencing_of[row];
        const std::int64_t r = ix.referenced_of[row];
        if (r < 0) return {};
        single = std::uint32_t(r);
        return {&single, 1};
    }

  public:
    TreeDp(const Database &db, const Query &q) : db_(db), q_(q)
    {
        const auto &schema = db.schema;
        tables_ = q.table_set();
        required_ = q.required_tables(schema);
        if (q.aggregate != Aggregate::Count) {
            agg_column_ = q.aggregate_column;
            required_.insert(column_table(schema, agg_column_));
        }
        root_ = q.tables.front();
        parent_[root_] = -1;
        order_.push_back(root_);
        for (std::size_t i = 0; i != order_.size(); ++i) {
            const unsigned t = order_[i];
            for (unsigned e : schema.edges_within(tables_)) {
                const unsigned a = schema.referencing_index(schema.fks[e]), b = schema.referenced_index(schema.fks[e]);
                if (a != t && b != t) continue;
                const unsigned other = a == t ? b : a;
                if (parent_.count(other)) continue;
                parent_[other] = int(t);
                parent_edge_[other] = e;
                children_[t].push_back(other);
                order_.push_back(other);
            }
        }
        if (order_.size() != tables_.size()) throw UnsupportedQuery("query tables are not connected by foreign keys");
        for (unsigned e : schema.edges_within(tables_)) edges_.emplace(e, index_edge(db, schema.fks[e]));
    }

    Moments run(const Predicate &extra) const
    {
        const auto &schema = db_.schema;
        Predicate pred = q_.predicate;
        pred.append(extra);
        if (!agg_column_.empty()) pred.add_flag(agg_column_, Op::NotNull);

        std::map<unsigned, std::vector<char>> pass;
        std::map<unsigned, bool> null_ok;
        for (unsigned t : order_) {
            const SampleTable &tab = db_.tables[t];
            pass[t].assign(tab.rows(), 1);
            null_ok[t] = !required_.contains(t);
        }
        for (const auto &c : pred.conjuncts) {
            const unsigned t = column_table(schema, c.column);
            if (!tables_.contains(t)) continue;
            const SampleTable &tab = db_.tables[t];
            const auto &col = tab.data[tab.require(c.column)];
            auto &p = pass[t];
            for (std::size_t r = 0; r != col.size(); ++r)
                if (p[r] && !satisfies(c, col[r])) p[r] = 0;
            if (!satisfies(c, kNull)) null_ok[t] = false;
        }

        /* subtree_null_ok[t]: every table of t's subtree may be NULL-padded */
        std::map<unsigned, bool> subtree_null_ok;
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            bool ok = null_ok.at(*it);
            for (unsigned ch : children_.count(*it) ? children_.at(*it) : std::vector<unsigned>{})
                ok = ok && subtree_null_ok.at(ch);
            subtree_null_ok[*it] = ok;
        }

        std::map<unsigned, std::vector<Moments>> dp;
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            const unsigned t = *it;
            const SampleTable &tab = db_.tables[t];
            const std::vector<double> *agg = nullptr;
            if (!agg_column_.empty() && column_table(schema, agg_column_) == t) agg = &tab.data[tab.require(agg_column_)];
            auto &out = dp[t];
            out.resize(tab.rows());
            for (std::uint32_t r = 0; r != tab.rows(); ++r) {
                if (!pass.at(t)[r]) continue;
                Moments m{1, agg ? (*agg)[r] : 0};
                if (children_.count(t))
                    for (unsigned ch : children_.at(t)) {
                        std::uint32_t single = 0;
                        const auto rows = partners(t, r, parent_edge_.at(ch), single);
                        Moments sub;
                        if (rows.empty()) sub.count = subtree_null_ok.at(ch) ? 1 : 0;
                        for (auto y : rows) {
                            sub.count += dp.at(ch)[y].count;
                            sub.sum += dp.at(ch)[y].sum;
                        }
                        m = {m.count * sub.count, m.sum * sub.count + m.count * sub.sum};
                        if (m.count == 0) break;
                    }
                out[r] = m;
            }
        }

        Moments total;
        for (const auto &m : dp.at(root_)) {
            total.count += m.count;
            total.sum += m.sum;
        }
        /* rows whose topmost present table u lies below the root: u's row has no partner in u's parent */
        for (unsigned u : order_) {
            if (u == root_) continue;
            bool outside_ok = true;
            for (unsigned t : order_) {
                bool inside = false;
                for (int a = int(t); a >= 0; a = parent_.at(unsigned(a)))
                    if (unsigned(a) == u) inside = true;
                if (!inside) outside_ok = outside_ok && null_ok.at(t);
            }
            if (!outside_ok) continue;
            const unsigned e = parent_edge_.at(u);
            for (std::uint32_t r = 0; r != dp.at(u).size(); ++r) {
                std::uint32_t single = 0;
                if (!partners(u, r, e, single).empty()) continue;
                total.count += dp.at(u)[r].count;
                total.sum += dp.at(u)[r].sum;
            }
        }
        return total;
    }
};

double finish(Aggregate a, const Moments &m)
{
    switch (a) {
        case Aggregate::Count: return m.count;
        case Aggregate::Sum: return m.sum;
        case Aggregate::Avg: return m.count > 0 ? m.sum / m.count : kNull;
    }
    return kNull;
}

/// Orders keys ascending with NULL last.
struct KeyLess
{
    bool operator()(const std::vector<double> &a, const std::vector<double> &b) const
    {
        for (std::size_t i = 0; i != a.size(); ++i) {
            const bool na = is_null(a[i]), nb = is_null(b[i]);
            if (na != nb) return nb;
            if (!na && a[i] != b[i]) return a[i] < b[i];
        }
        return false;
    }
};

}

ExactAnswer scan_oracle(const Database &db, const Query &q)
{
    TreeDp dp(db, q);
    ExactAnswer out;
    const Moments all = dp.run({});
    out.count = all.count;
    out.value = finish(q.aggregate, all);
    if (q.group_by.empty()) return out;

    std::vector<std::vector<double>> domains;
    std::size_t combos = 1;
    for (const auto &g : q.group_by) {
        const unsigned t = column_table(db.schema, g);
        const SampleTable &tab = db.tables[t];
        const auto &col = tab.data[tab.require(g)];
        std::vector<double> d;
        for (double v : col)
            if (!is_null(v)) d.push_back(v);
        std::sort(d.begin(), d.end());
        d.erase(std::unique(d.begin(), d.end()), d.end());
        d.push_back(kNull);
        combos *= d.size();
        if (combos > 1'000'000) throw InputError("GROUP BY has too many value combinations for the scan oracle");
        domains.push_back(std::move(d));
    }
    std::vector<std::size_t> digit(domains.size(), 0);
    for (std::size_t k = 0; k != combos; ++k) {
        Predicate extra;
        std::vector<double> key;
        for (std::size_t i = 0; i != domains.size(); ++i) {
            const double v = domains[i][digit[i]];
            key.push_back(v);
            if (is_null(v)) extra.add_flag(q.group_by[i], Op::IsNull);
            else extra.add(q.group_by[i], Op::Eq, v);
        }
        for (std::size_t i = domains.size(); i-- > 0;) {
            if (++digit[i] < domains[i].size()) break;
            digit[i] = 0;
        }
        const Moments m = dp.run(extra);
        if (m.count > 0) out.groups.push_back({std::move(key), finish(q.aggregate, m), m.count});
    }
    std::sort(out.groups.begin(), out.groups.end(),
              [](const ExactGroup &a, const ExactGroup &b) { return KeyLess{}(a.key, b.key); });
    return out;
}

/*======================================================================================================================
 * Nested loops
 *====================================================================================================================*/

namespace {

bool accepts(const Conjunct &c, double v)
{
    if (c.op == Op::IsNull) return std::isnan(v);
    if (std::isnan(v)) return false;
    if (c.op == Op::NotNull) return true;
    if (c.op == Op::In) {
        for (double x : c.values)
            if (x == v) return true;
        return false;
    }
    const double k = c.values.at(0);
    if (c.op == Op::Eq) return v == k;
    if (c.op == Op::Ne) return v != k;
    if (c.op == Op::Lt) return v < k;
    if (c.op == Op::Le) return v <= k;
    if (c.op == Op::Gt) return v > k;
    return v >= k;
}

}

ExactAnswer naive_evaluate(const Database &db, const Query &q, std::size_t max_rows)
{
    const auto &schema = db.schema;
    const std::size_t width = q.tables.size();
    using Row = std::vector<std::int64_t>;
    std::vector<Row> rows;
    for (std::size_t r = 0; r != db.tables[q.tables[0]].rows(); ++r) rows.push_back({std::int64_t(r)});

    auto key_of = [&](unsigned table, const std::string &column, std::int64_t row) {
        const SampleTable &t = db.tables[table];
        return t.data[t.require(base_column_id(schema.tables[table].name, column))][std::size_t(row)];
    };

    for (std::size_t i = 1; i != width; ++i) {
        const unsigned t = q.tables[i];
        struct Cond
        {
            std::size_t pos;
            std::string left_column, right_column;
        };
        std::vector<Cond> conds;
        for (std::size_t j = 0; j != i; ++j)
            for (const auto &fk : schema.fks) {
                const unsigned a = schema.referencing_index(fk), b = schema.referenced_index(fk);
                if (a == q.tables[j] && b == t) conds.push_back({j, fk.referencing_column, fk.referenced_column});
                if (b == q.tables[j] && a == t) conds.push_back({j, fk.referenced_column, fk.referencing_column});
            }
        const JoinKind kind = q.join_kinds[i];
        const std::size_t n = db.tables[t].rows();
        std::vector<char> right_matched(n, 0);
        std::vector<Row> next;
        for (const Row &l : rows) {
            bool matched = false;
            for (std::size_t y = 0; y != n; ++y) {
                bool ok = true;
                for (const auto &c : conds) {
                    if (l[c.pos] < 0) {
                        ok = false;
                        break;
                    }
                    const double lv = key_of(q.tables[c.pos], c.left_column, l[c.pos]);
                    const double rv = key_of(t, c.right_column, std::int64_t(y));
                    if (std::isnan(lv) || std::isnan(rv) || lv != rv) {
                        ok = false;
                        break;
                    }
                }
                if (!ok) continue;
                matched = true;
                right_matched[y] = 1;
                Row r = l;
                r.push_back(std::int64_t(y));
                next.push_back(std::move(r));
            }
            if (!matched && (kind == JoinKind::Left || kind == JoinKind::Full)) {
                Row r = l;
                r.push_back(-1);
                next.push_back(std::move(r));
            }
            if (next.size() > max_rows) throw InputError("naive evaluation exceeds its row limit");
        }
        if (kind == JoinKind::Right || kind == JoinKind::Full)
            for (std::size_t y = 0; y != n; ++y)
                if (!right_matched[y]) {
                    Row r(i, -1);
                    r.push_back(std::int64_t(y));
                    next.push_back(std::move(r));
                }
        rows = std::move(next);
    }

    auto value_of = [&](const Row &r, const std::string &column) {
        const unsigned t = column_table(schema, column);
        const auto pos = std::size_t(std::find(q.tables.begin(), q.tables.end(), t) - q.tables.begin());
        if (r[pos] < 0) return kNull;
        const SampleTable &tab = db.tables[t];
        return tab.data[tab.require(column)][std::size_t(r[pos])];
    };

    struct Acc
    {
        double rows = 0, count = 0, sum = 0;
    };
    std::map<std::vector<double>, Acc, KeyLess> groups;
    Acc total;
    for (const Row &r : rows) {
        bool ok = true;
        for (const auto &c : q.predicate.conjuncts)
            if (!accepts(c, value_of(r, c.column))) {
                ok = false;
                break;
            }
        if (!ok) continue;
        std::vector<double> key;
        for (const auto &g : q.group_by) key.push_back(value_of(r, g));
        Acc &acc = groups[key];
        acc.rows += 1;
        total.rows += 1;
        if (q.aggregate == Aggregate::Count) {
            acc.count += 1;
            total.count += 1;
            continue;
        }
        const double v = value_of(r, q.aggregate_column);
        if (std::isnan(v)) continue;
        acc.count += 1;
        acc.sum += v;
        total.count += 1;
        total.sum += v;
    }

    auto value = [&](const Acc &a) {
        switch (q.aggregate) {
            case Aggregate::Count: return a.count;
            case Aggregate::Sum: return a.sum;
            case Aggregate::Avg: return a.count > 0 ? a.sum / a.count : kNull;
        }
        return kNull;
    };
    ExactAnswer out;
    out.count = total.count;
    out.value = value(total);
    if (!q.group_by.empty())
        for (const auto &[key, acc] : groups)
            if (acc.count > 0) out.groups.push_back({key, value(acc), acc.count});
    return out;
}

}
