#include "rspn/update.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <spdlog/spdlog.h>

namespace rspn {

namespace {

std::size_t nearest_child(const Rspn &model, const Node &sum, std::span<const double> tuple)
{
    std::vector<double> point;
    for (std::size_t c = 0; c != model.columns.size(); ++c)
        if (sum.scope.test(c)) point.push_back(model.transforms[c](tuple[c]));
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k != sum.centroids.size(); ++k) {
        double d = 0;
        for (std::size_t f = 0; f != point.size(); ++f) {
            const double x = point[f] - sum.centroids[k][f];
            d += x * x;
        }
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

void adjust(double &count, double delta, const char *what, const std::string &model_id)
{
    if (delta < 0 && count <= 0) {
        spdlog::warn("model '{}': delete found an empty {}; count stays at zero", model_id, what);
        count = 0;
        return;
    }
    count += delta;
}

void update_leaf(Leaf &leaf, double v, double delta, const std::string &model_id)
{
    if (is_null(v)) {
        adjust(leaf.null_count, delta, "NULL count", model_id);
        return;
    }
    if (leaf.binned()) {
        auto it = std::upper_bound(leaf.bin_lower.begin(), leaf.bin_lower.end(), v);
        std::size_t b = it == leaf.bin_lower.begin() ? 0 : std::size_t(it - leaf.bin_lower.begin()) - 1;
        if (delta > 0) {
            /* values outside the learned range widen the edge bins */
            if (v < leaf.bin_lower[b]) leaf.bin_lower[b] = v;
            if (v > leaf.bin_upper[b] && b + 1 == leaf.counts.size()) leaf.bin_upper[b] = v;
        }
        adjust(leaf.counts[b], delta, "bin", model_id);
        return;
    }
    auto it = std::lower_bound(leaf.values.begin(), leaf.values.end(), v);
    const auto i = std::size_t(it - leaf.values.begin());
    if (it == leaf.values.end() || *it != v) {
        if (delta < 0) {
            spdlog::warn("model '{}': delete of a value the leaf does not hold; ignored", model_id);
            return;
        }
        leaf.values.insert(it, v);
        leaf.counts.insert(leaf.counts.begin() + std::ptrdiff_t(i), delta);
        return;
    }
    adjust(leaf.counts[i], delta, "value", model_id);
    if (leaf.counts[i] == 0) {
        leaf.values.erase(leaf.values.begin() + std::ptrdiff_t(i));
        leaf.counts.erase(leaf.counts.begin() + std::ptrdiff_t(i));
    }
}

void descend(Rspn &model, std::uint32_t index, std::span<const double> tuple, double delta)
{
    Node &n = model.nodes[index];
    switch (n.kind) {
        case NodeKind::Leaf: update_leaf(model.leaves[n.leaf], tuple[model.leaves[n.leaf].column], delta, model.id); return;
        case NodeKind::Product:
            for (auto c : n.children) descend(model, c, tuple, delta);
            return;
        case NodeKind::Sum: {
            const std::size_t k = nearest_child(model, n, tuple);
            adjust(n.cluster_sizes[k], delta, "cluster", model.id);
            descend(model, n.children[k], tuple, delta);
            return;
        }
    }
}

}

void update_tuple(Rspn &model, std::span<const double> tuple, UpdateOp op, bool adjust_population)
{
    if (tuple.size() != model.columns.size())
        throw InputError("update tuple has " + std::to_string(tuple.size()) + " values, model '" + model.id +
                         "' has " + std::to_string(model.columns.size()) + " columns");
    const double delta = op == UpdateOp::Insert ? 1.0 : -1.0;
    if (op == UpdateOp::Delete && model.full_population_size <= 0)
        throw InputError("delete from model '" + model.id + "' whose population is empty");
    descend(model, model.root, tuple, delta);
    model.n_samples = std::max(0.0, model.n_samples + delta);
    if (adjust_population)
        model.full_population_size = std::max(0.0, model.full_population_size + delta / model.sample_rate);
}

BatchResult apply_batch(Rspn &model, const UpdateBatch &batch, std::uint64_t seed)
{
    if (std::abs(batch.applied_sample_rate - model.sample_rate) > 1e-12 * std::max(1.0, model.sample_rate))
        throw InputError("update batch sample rate " + std::to_string(batch.applied_sample_rate) +
                         " differs from the rate of model '" + model.id + "' (" + std::to_string(model.sample_rate) +
                         ")");
    BatchResult r;
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution keep(std::min(1.0, batch.applied_sample_rate));
    for (const auto &[op, tuple] : batch.operations) {
        const bool apply = batch.applied_sample_rate >= 1.0 || keep(rng);
        if (apply) {
            update_tuple(model, tuple, op, false);
            ++r.applied;
        } else {
            ++r.skipped;
        }
        model.full_population_size = std::max(0.0, model.full_population_size + (op == UpdateOp::Insert ? 1.0 : -1.0));
    }
    return r;
}

std::vector<std::size_t> map_columns(const Rspn &model, const SampleTable &table)
{
    std::vector<std::size_t> out;
    for (const auto &c : model.columns) {
        const int i = table.find(c.id);
        if (i < 0) throw InputError("table lacks column '" + c.id + "' of model '" + model.id + "'");
        out.push_back(std::size_t(i));
    }
    return out;
}

std::vector<double> model_tuple(const std::vector<std::size_t> &mapping, const SampleTable &table, std::size_t row)
{
    std::vector<double> t(mapping.size());
    for (std::size_t c = 0; c != mapping.size(); ++c) t[c] = table.data[mapping[c]][row];
    return t;
}

std::vector<std::uint32_t> drift_check(const Rspn &model, const SampleTable &fresh, const DriftParams &params)
{
    const auto mapping = map_columns(model, fresh);
    std::vector<std::vector<std::uint32_t>> routed(model.nodes.size());
    std::vector<double> tuple;
    for (std::uint32_t r = 0; r != fresh.rows(); ++r) {
        tuple = model_tuple(mapping, fresh, r);
        std::vector<std::uint32_t> stack{model.root};
        while (!stack.empty()) {
            const auto i = stack.back();
            stack.pop_back();
            const Node &n = model.nodes[i];
            routed[i].push_back(r);
            if (n.kind == NodeKind::Product) stack.insert(stack.end(), n.children.begin(), n.children.end());
            else if (n.kind == NodeKind::Sum) stack.push_back(n.children[nearest_child(model, n, tuple)]);
        }
    }

    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i != model.nodes.size(); ++i) {
        const Node &n = model.nodes[i];
        if (n.kind != NodeKind::Product || n.forced || routed[i].size() < params.min_rows) continue;
        std::vector<std::size_t> cols;
        std::vector<std::size_t> owner;
        for (std::size_t k = 0; k != n.children.size(); ++k)
            for (std::size_t c = 0; c != model.columns.size(); ++c)
                if (model.nodes[n.children[k]].scope.test(c)) {
                    cols.push_back(mapping[c]);
                    owner.push_back(k);
                }
        const RdcMatrix m = pairwise_rdc(fresh, routed[i], cols, params.rdc);
        double worst = 0;
        for (std::size_t a = 0; a != cols.size(); ++a)
            for (std::size_t b = a + 1; b != cols.size(); ++b)
                if (owner[a] != owner[b]) worst = std::max(worst, m.at(a, b));
        if (worst >= params.rdc_threshold + params.margin) {
            spdlog::info("model '{}': product node {} now has cross-child RDC {:.3f}", model.id, i, worst);
            out.push_back(i);
        }
    }
    return out;
}

}
