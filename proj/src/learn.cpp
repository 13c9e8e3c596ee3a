#include "rspn/learn.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <spdlog/spdlog.h>

namespace rspn {

Leaf fit_leaf(std::span<const double> values, ColumnKind kind, std::size_t distinct_limit)
{
    Leaf leaf;
    std::vector<double> v;
    v.reserve(values.size());
    for (double x : values) {
        if (is_null(x)) leaf.null_count += 1;
        else v.push_back(x);
    }
    std::sort(v.begin(), v.end());
    for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i;
        while (j < v.size() && v[j] == v[i]) ++j;
        leaf.values.push_back(v[i]);
        leaf.counts.push_back(double(j - i));
        i = j;
    }
    if (kind != ColumnKind::Continuous || leaf.values.size() <= distinct_limit) return leaf;

    /* equal-frequency bins over the sorted values; equal values never straddle two bins */
    const double per_bin = double(v.size()) / double(distinct_limit);
    std::vector<double> lower, upper, counts, distinct;
    std::size_t i = 0, d = 0;
    while (d < leaf.values.size()) {
        const double target = per_bin * double(lower.size() + 1);
        lower.push_back(leaf.values[d]);
        double count = 0, nd = 0;
        while (d < leaf.values.size() && (count == 0 || double(i) + leaf.counts[d] <= target + 0.5)) {
            count += leaf.counts[d];
            i += std::size_t(leaf.counts[d]);
            nd += 1;
            ++d;
        }
        upper.push_back(leaf.values[d - 1]);
        counts.push_back(count);
        distinct.push_back(nd);
    }
    leaf.values.clear();
    leaf.counts = std::move(counts);
    leaf.bin_lower = std::move(lower);
    leaf.bin_upper = std::move(upper);
    leaf.bin_distinct = std::move(distinct);
    return leaf;
}

namespace {

/// Squared distances of every row to one center.
void distances_to(const std::vector<std::vector<double>> &features, const std::vector<double> &center,
                  std::vector<double> &out)
{
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t f = 0; f != features.size(); ++f) kernels::accumulate_sq_diff(out, features[f], center[f]);
}

std::vector<double> row_point(const std::vector<std::vector<double>> &features, std::size_t row)
{
    std::vector<double> p(features.size());
    for (std::size_t f = 0; f != features.size(); ++f) p[f] = features[f][row];
    return p;
}

}

Clustering cluster_rows(const std::vector<std::vector<double>> &features, unsigned k, std::uint64_t seed,
                        unsigned max_iterations)
{
    Clustering out;
    const std::size_t n = features.empty() ? 0 : features.front().size();
    out.assignment.assign(n, 0);
    if (n == 0 || k < 2) {
        out.centroids.push_back(std::vector<double>(features.size(), 0.0));
        if (n) {
            for (std::size_t f = 0; f != features.size(); ++f)
                out.centroids[0][f] = std::accumulate(features[f].begin(), features[f].end(), 0.0) / double(n);
        }
        return out;
    }

    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> centers;
    std::vector<double> best(n, std::numeric_limits<double>::infinity()), d(n);
    std::vector<unsigned> arg(n, 0);

    /* k-means++ */
    centers.push_back(row_point(features, std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)));
    distances_to(features, centers.back(), best);
    while (centers.size() < k) {
        const double total = std::accumulate(best.begin(), best.end(), 0.0);
        std::size_t pick = 0;
        if (total > 0) {
            double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (pick = 0; pick + 1 < n; ++pick) {
                r -= best[pick];
                if (r < 0) break;
            }
        }
        centers.push_back(row_point(features, pick));
        distances_to(features, centers.back(), d);
        for (std::size_t i = 0; i != n; ++i) best[i] = std::min(best[i], d[i]);
    }

    auto assign = [&] {
        std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
        for (unsigned j = 0; j != centers.size(); ++j) {
            distances_to(features, centers[j], d);
            kernels::argmin_update(best, arg, d, j);
        }
    };
    auto recenter = [&](std::vector<double> &sizes) {
        sizes.assign(centers.size(), 0.0);
        for (auto &c : centers) std::fill(c.begin(), c.end(), 0.0);
        for (std::size_t i = 0; i != n; ++i) sizes[arg[i]] += 1;
        for (std::size_t f = 0; f != features.size(); ++f)
            for (std::size_t i = 0; i != n; ++i) centers[arg[i]][f] += features[f][i];
        for (std::size_t j = 0; j != centers.size(); ++j)
            if (sizes[j] > 0)
                for (auto &x : centers[j]) x /= sizes[j];
    };
    auto lloyd = [&](std::vector<double> &sizes) {
        std::vector<unsigned> previous;
        for (unsigned it = 0; it != max_iterations; ++it) {
            assign();
            if (arg == previous) break;
            previous = arg;
            recenter(sizes);
        }
        recenter(sizes);
    };

    std::vector<double> sizes;
    lloyd(sizes);
    if (std::find(sizes.begin(), sizes.end(), 0.0) != sizes.end()) {
        /* re-seed each empty cluster once at the row farthest from its own center */
        for (std::size_t j = 0; j != centers.size(); ++j) {
            if (sizes[j] > 0) continue;
            std::size_t far = 0;
            double far_d = -1;
            for (std::size_t i = 0; i != n; ++i)
                if (best[i] > far_d) {
                    far_d = best[i];
                    far = i;
                }
            centers[j] = row_point(features, far);
            best[far] = -1;
        }
        lloyd(sizes);
    }

    /* drop clusters that are still empty */
    std::vector<unsigned> remap(centers.size(), 0);
    for (std::size_t j = 0; j != centers.size(); ++j) {
        if (sizes[j] == 0) continue;
        remap[j] = unsigned(out.centroids.size());
        out.centroids.push_back(centers[j]);
    }
    out.clusters = unsigned(out.centroids.size());
    for (std::size_t i = 0; i != n; ++i) out.assignment[i] = remap[arg[i]];
    return out;
}

namespace {

class Learner
{
    const SampleTable &data_;
    const LearnParams &params_;
    Rspn &model_;
    std::vector<std::vector<double>> ranks_; ///< per column, per row
    double min_rows_;

  public:
    Learner(const SampleTable &data, const LearnParams &params, Rspn &model)
        : data_(data), params_(params), model_(model)
    {
        ranks_.resize(data.columns.size());
        for (std::size_t c = 0; c != data.columns.size(); ++c) {
            ranks_[c].resize(data.rows());
            for (std::size_t r = 0; r != data.rows(); ++r) ranks_[c][r] = model.transforms[c](data.data[c][r]);
        }
        min_rows_ = params.min_instance_fraction * double(data.rows());
    }

    std::uint32_t learn(const std::vector<std::uint32_t> &rows, const std::vector<std::size_t> &cols,
                        std::uint64_t seed)
    {
        if (cols.size() == 1) return leaf(rows, cols.front());
        if (double(rows.size()) < min_rows_ || rows.size() < 2) return independent(rows, cols, true);

        RdcParams rp = params_.rdc;
        rp.seed = mix_seed(params_.rdc.seed, seed);
        const RdcMatrix m = pairwise_rdc(data_, rows, cols, rp);
        const auto components = connected_components(m, cols.size());
        if (components.size() > 1) {
            std::vector<std::uint32_t> children;
            for (std::size_t i = 0; i != components.size(); ++i) {
                std::vector<std::size_t> sub;
                for (auto c : components[i]) sub.push_back(cols[c]);
                children.push_back(learn(rows, sub, mix_seed(seed, 2 * i + 1)));
            }
            return product(std::move(children), false);
        }

        std::vector<std::vector<double>> features(cols.size());
        for (std::size_t f = 0; f != cols.size(); ++f) {
            features[f].resize(rows.size());
            for (std::size_t i = 0; i != rows.size(); ++i) features[f][i] = ranks_[cols[f]][rows[i]];
        }
        const Clustering cl = cluster_rows(features, params_.cluster_count, seed);
        if (cl.clusters < 2) return independent(rows, cols, true);

        std::vector<std::vector<std::uint32_t>> parts(cl.clusters);
        for (std::size_t i = 0; i != rows.size(); ++i) parts[cl.assignment[i]].push_back(rows[i]);
        Node node;
        node.kind = NodeKind::Sum;
        for (auto c : cols) node.scope.set(c);
        for (std::size_t j = 0; j != parts.size(); ++j) {
            node.children.push_back(learn(parts[j], cols, mix_seed(seed, 2 * j + 2)));
            node.cluster_sizes.push_back(double(parts[j].size()));
            node.centroids.push_back(cl.centroids[j]);
        }
        model_.nodes.push_back(std::move(node));
        return std::uint32_t(model_.nodes.size() - 1);
    }

  private:
    static std::vector<std::vector<std::size_t>> connected_components(const RdcMatrix &m, std::size_t n,
                                                                      double threshold)
    {
        std::vector<int> comp(n, -1);
        std::vector<std::vector<std::size_t>> out;
        for (std::size_t s = 0; s != n; ++s) {
            if (comp[s] >= 0) continue;
            out.emplace_back();
            std::vector<std::size_t> stack{s};
            comp[s] = int(out.size() - 1);
            while (!stack.empty()) {
                const auto v = stack.back();
                stack.pop_back();
                out.back().push_back(v);
                for (std::size_t w = 0; w != n; ++w)
                    if (comp[w] < 0 && m.at(v, w) >= threshold) {
                        comp[w] = comp[s];
                        stack.push_back(w);
                    }
            }
            std::sort(out.back().begin(), out.back().end());
        }
        return out;
    }

    std::vector<std::vector<std::size_t>> connected_components(const RdcMatrix &m, std::size_t n) const
    {
        return connected_components(m, n, params_.rdc_threshold);
    }

    std::uint32_t leaf(const std::vector<std::uint32_t> &rows, std::size_t col)
    {
        std::vector<double> values(rows.size());
        for (std::size_t i = 0; i != rows.size(); ++i) values[i] = data_.data[col][rows[i]];
        Leaf leaf = fit_leaf(values, data_.columns[col].kind, params_.distinct_value_limit);
        leaf.column = std::uint16_t(col);
        model_.leaves.push_back(std::move(leaf));
        Node node;
        node.kind = NodeKind::Leaf;
        node.leaf = std::uint32_t(model_.leaves.size() - 1);
        node.scope.set(col);
        model_.nodes.push_back(std::move(node));
        return std::uint32_t(model_.nodes.size() - 1);
    }

    std::uint32_t independent(const std::vector<std::uint32_t> &rows, const std::vector<std::size_t> &cols,
                              bool forced)
    {
        if (cols.size() == 1) return leaf(rows, cols.front());
        std::vector<std::uint32_t> children;
        for (auto c : cols) children.push_back(leaf(rows, c));
        return product(std::move(children), forced);
    }

    std::uint32_t product(std::vector<std::uint32_t> children, bool forced)
    {
        Node node;
        node.kind = NodeKind::Product;
        node.forced = forced;
        for (auto c : children) node.scope |= model_.nodes[c].scope;
        node.children = std::move(children);
        model_.nodes.push_back(std::move(node));
        return std::uint32_t(model_.nodes.size() - 1);
    }
};

}

Rspn learn_rspn(const SampleTable &data, const LearnParams &params, std::string id)
{
    params.validate();
    if (data.rows() == 0) throw InputError("cannot learn a model from an empty sample");
    if (data.columns.empty()) throw InputError("cannot learn a model without columns");
    if (data.columns.size() > kMaxScope) throw InputError("a model supports at most 256 columns");
    if (data.rows() > std::numeric_limits<std::uint32_t>::max()) throw InputError("sample too large");

    Rspn m;
    if (id.empty())
        for (const auto &t : data.origin_tables) id += (id.empty() ? "" : "|") + t;
    m.id = std::move(id);
    m.tables = data.origin_tables;
    m.columns = data.columns;
    m.params = params;
    m.n_samples = double(data.rows());
    m.full_population_size = data.full_population_size ? double(data.full_population_size) : double(data.rows());
    m.sample_rate = data.sample_rate;
    m.fd_dictionaries = data.fd_dictionaries;
    for (const auto &col : data.data) m.transforms.push_back(RankTransform::fit(col));

    std::vector<std::size_t> all_cols(data.columns.size());
    std::iota(all_cols.begin(), all_cols.end(), std::size_t(0));
    m.rdc_snapshot = pairwise_rdc(data, {}, all_cols, params.rdc);

    std::vector<std::uint32_t> rows(data.rows());
    std::iota(rows.begin(), rows.end(), 0u);
    Learner learner(data, params, m);
    m.root = learner.learn(rows, all_cols, params.seed);
    m.validate();
    spdlog::debug("learned model '{}': {} nodes ({} sum, {} product), {} sample rows", m.id, m.nodes.size(),
                  m.count_nodes(NodeKind::Sum), m.count_nodes(NodeKind::Product), data.rows());
    return m;
}

}
