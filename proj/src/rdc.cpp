#include "rspn/rdc.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <random>

namespace rspn {

namespace {

constexpr double kRidge = 1e-9;

using Matrix = Eigen::MatrixXd;

}

void RdcParams::validate() const
{
    if (num_features < 1) throw InputError("RDC needs at least one random feature");
    if (!(projection_scale > 0)) throw InputError("RDC projection scale must be positive");
    if (sample_cap < 2) throw InputError("RDC sample cap must be at least 2");
}

int RdcMatrix::index(std::string_view id) const noexcept
{
    for (std::size_t i = 0; i != columns.size(); ++i)
        if (columns[i] == id) return int(i);
    return -1;
}

std::optional<double> RdcMatrix::get(std::string_view a, std::string_view b) const
{
    const int i = index(a), j = index(b);
    if (i < 0 || j < 0) return std::nullopt;
    return at(std::size_t(i), std::size_t(j));
}

std::vector<double> copula_ranks(std::span<const double> x)
{
    const std::size_t n = x.size();
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    /* NULL (NaN) sorts first as one group */
    auto less = [&](std::uint32_t a, std::uint32_t b) {
        const bool na = is_null(x[a]), nb = is_null(x[b]);
        if (na || nb) return na && !nb;
        return x[a] < x[b];
    };
    std::stable_sort(order.begin(), order.end(), less);
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && !less(order[i], order[j])) ++j;
        const double avg = (double(i + 1) + double(j)) / 2.0; // ranks i+1..j
        for (std::size_t t = i; t != j; ++t) ranks[order[t]] = avg / double(n);
        i = j;
    }
    return ranks;
}

namespace {

/// sin(u * w0 + w1) for k projections drawn from the argument's seed. Columns are centered afterwards.
Matrix random_features(std::span<const double> u, std::uint64_t seed, const RdcParams &params)
{
    const unsigned k = params.num_features;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(params.projection_scale));
    std::vector<double> w0(k), w1(k);
    for (unsigned j = 0; j != k; ++j) {
        w0[j] = normal(rng);
        w1[j] = normal(rng);
    }
    Matrix f(Eigen::Index(u.size()), Eigen::Index(k));
    for (unsigned j = 0; j != k; ++j)
        for (std::size_t i = 0; i != u.size(); ++i) f(Eigen::Index(i), j) = std::sin(u[i] * w0[j] + w1[j]);
    f.rowwise() -= f.colwise().mean();
    return f;
}

std::uint64_t projection_seed(const RdcParams &params, std::string_view id)
{
    return mix_seed(params.seed, fnv1a(id));
}

/// Cxx^(-1/2) with ridge on the eigenvalues.
Matrix inverse_sqrt(const Matrix &cov)
{
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    Eigen::VectorXd d = eig.eigenvalues().unaryExpr([](double l) { return 1.0 / std::sqrt(std::max(l, 0.0) + kRidge); });
    return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
}

double largest_canonical_correlation(const Matrix &wx, const Matrix &cxy, const Matrix &wy)
{
    const Matrix m = wx * cxy * wy;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m.transpose() * m, Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().maxCoeff();
    return std::clamp(std::sqrt(std::max(top, 0.0)), 0.0, 1.0);
}

bool is_constant(std::span<const double> ranks)
{
    return std::all_of(ranks.begin(), ranks.end(), [&](double r) { return r == ranks.front(); });
}

std::vector<std::uint32_t> subsample(std::size_t n, std::size_t cap, std::uint64_t seed)
{
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    if (n <= cap) return idx;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i != cap; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}

double rdc(std::span<const double> x, std::span<const double> y, const RdcParams &params, std::string_view x_id,
           std::string_view y_id)
{
    params.validate();
    if (x.size() != y.size()) throw InputError("rdc: columns have different lengths");
    if (x.size() < 2) throw InputError("rdc: at least two paired rows are required");

    std::vector<double> xs(x.begin(), x.end()), ys(y.begin(), y.end());
    if (x.size() > params.sample_cap) {
        const auto keep = subsample(x.size(), params.sample_cap, params.seed);
        xs.clear();
        ys.clear();
        for (auto i : keep) {
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
    }
    const auto rx = copula_ranks(xs), ry = copula_ranks(ys);
    if (is_constant(rx) || is_constant(ry)) return 0.0;

    std::vector<std::pair<double, double>> a(rx.size()), b(rx.size());
    for (std::size_t i = 0; i != rx.size(); ++i) {
        a[i] = {rx[i], ry[i]};
        b[i] = {ry[i], rx[i]};
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    bool swap = y_id < x_id;
    if (x_id == y_id) swap = b < a;
    const auto &pairs = swap ? b : a;
    const std::string_view first_id = swap ? y_id : x_id, second_id = swap ? x_id : y_id;

    std::vector<double> u(pairs.size()), v(pairs.size());
    for (std::size_t i = 0; i != pairs.size(); ++i) {
        u[i] = pairs[i].first;
        v[i] = pairs[i].second;
    }
    const Matrix fx = random_features(u, projection_seed(params, first_id), params);
    const Matrix fy = random_features(v, projection_seed(params, second_id), params);
    const double scale = 1.0 / double(u.size() - 1);
    const Matrix cxx = (fx.transpose() * fx) * scale;
    const Matrix cyy = (fy.transpose() * fy) * scale;
    const Matrix cxy = (fx.transpose() * fy) * scale;
    return largest_canonical_correlation(inverse_sqrt(cxx), cxy, inverse_sqrt(cyy));
}

RdcMatrix pairwise_rdc(const SampleTable &table, std::span<const std::uint32_t> rows,
                       std::span<const std::size_t> columns, const RdcParams &params)
{
    params.validate();
    RdcMatrix out;
    const std::size_t m = columns.size();
    for (auto c : columns) out.columns.push_back(table.columns[c].id);
    out.values.assign(m * m, 0.0);
    for (std::size_t i = 0; i != m; ++i) out.values[i * m + i] = 1.0;
    if (m < 2) return out;

    std::vector<std::uint32_t> all;
    if (rows.empty()) {
        all.resize(table.rows());
        std::iota(all.begin(), all.end(), 0u);
        rows = all;
    }
    if (rows.size() < 2) return out;
    const auto pick = subsample(rows.size(), params.sample_cap, params.seed);
    const std::size_t n = pick.size();
    const auto k = Eigen::Index(params.num_features);

    Matrix features(Eigen::Index(n), Eigen::Index(m) * k);
    std::vector<bool> constant(m);
    std::vector<double> values(n);
    for (std::size_t c = 0; c != m; ++c) {
        const auto &col = table.data[columns[c]];
        for (std::size_t i = 0; i != n; ++i) values[i] = col[rows[pick[i]]];
        const auto ranks = copula_ranks(values);
        constant[c] = is_constant(ranks);
        features.middleCols(Eigen::Index(c) * k, k) =
            random_features(ranks, projection_seed(params, out.columns[c]), params);
    }
    Matrix cov = Matrix::Zero(features.cols(), features.cols());
    cov.selfadjointView<Eigen::Lower>().rankUpdate(features.transpose(), 1.0 / double(n - 1));
    cov = cov.selfadjointView<Eigen::Lower>();

    std::vector<Matrix> whiten(m);
    for (std::size_t c = 0; c != m; ++c)
        if (!constant[c]) whiten[c] = inverse_sqrt(cov.block(Eigen::Index(c) * k, Eigen::Index(c) * k, k, k));
    for (std::size_t i = 0; i != m; ++i)
        for (std::size_t j = i + 1; j != m; ++j) {
            double v = 0.0;
            if (!constant[i] && !constant[j])
                v = largest_canonical_correlation(
                    whiten[i], cov.block(Eigen::Index(i) * k, Eigen::Index(j) * k, k, k), whiten[j]);
            out.values[i * m + j] = out.values[j * m + i] = v;
        }
    return out;
}

RdcMatrix pairwise_rdc(const SampleTable &table, const RdcParams &params)
{
    if (table.rows() == 0) throw InputError("pairwise RDC needs a nonempty table");
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c != table.columns.size(); ++c)
        if (!table.columns[c].is_key) cols.push_back(c);
    return pairwise_rdc(table, {}, cols, params);
}

double table_dependency(const std::string &t1, const std::string &t2, const SampleTable &joined,
                        const RdcParams &params)
{
    if (iequals(t1, t2)) return 1.0;
    std::vector<std::size_t> cols;
    std::vector<int> side;
    for (std::size_t c = 0; c != joined.columns.size(); ++c) {
        const auto &meta = joined.columns[c];
        if (meta.is_key || meta.synthetic != SyntheticKind::None) continue;
        if (iequals(meta.table, t1)) side.push_back(1);
        else if (iequals(meta.table, t2)) side.push_back(2);
        else continue;
        cols.push_back(c);
    }
    if (joined.rows() < 2) return 0.0;
    const RdcMatrix m = pairwise_rdc(joined, {}, cols, params);
    double best = 0.0;
    for (std::size_t i = 0; i != cols.size(); ++i)
        for (std::size_t j = 0; j != cols.size(); ++j)
            if (side[i] == 1 && side[j] == 2) best = std::max(best, m.at(i, j));
    return best;
}

}
