#include "rspn/ensemble.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rspn {

namespace {

constexpr char kMagic[8] = {'R', 'S', 'P', 'N', 'E', 'N', 'S', '1'};

static_assert(std::endian::native == std::endian::little, "the model format is written on little-endian hosts");

class Writer
{
    std::string out_;

  public:
    void raw(const void *p, std::size_t n) { out_.append(static_cast<const char *>(p), n); }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void boolean(bool v) { u8(v ? 1 : 0); }
    void str(const std::string &s)
    {
        u64(s.size());
        raw(s.data(), s.size());
    }
    void doubles(const std::vector<double> &v)
    {
        u64(v.size());
        raw(v.data(), v.size() * sizeof(double));
    }
    void strings(const std::vector<std::string> &v)
    {
        u64(v.size());
        for (const auto &s : v) str(s);
    }
    std::string &bytes() { return out_; }
};

class Reader
{
    const std::string &in_;
    std::size_t pos_ = 0;
    std::size_t end_;

  public:
    Reader(const std::string &in, std::size_t end) : in_(in), end_(end) { }

    void raw(void *p, std::size_t n)
    {
        if (n > end_ - pos_) throw FormatError("model file is truncated");
        std::memcpy(p, in_.data() + pos_, n);
        pos_ += n;
    }
    std::uint8_t u8()
    {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }
    std::uint32_t u32()
    {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    std::uint64_t u64()
    {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    double f64()
    {
        double v;
        raw(&v, 8);
        return v;
    }
    bool boolean() { return u8() != 0; }
    std::size_t length(std::size_t element_size)
    {
        const std::uint64_t n = u64();
        if (element_size && n > (end_ - pos_) / element_size) throw FormatError("model file is truncated");
        return std::size_t(n);
    }
    std::string str()
    {
        std::string s(length(1), '\0');
        raw(s.data(), s.size());
        return s;
    }
    std::vector<double> doubles()
    {
        std::vector<double> v(length(sizeof(double)));
        raw(v.data(), v.size() * sizeof(double));
        return v;
    }
    std::vector<std::string> strings()
    {
        std::vector<std::string> v(length(8));
        for (auto &s : v) s = str();
        return v;
    }
    bool done() const noexcept { return pos_ == end_; }
};

template<typename E>
E checked_enum(std::uint8_t v, std::uint8_t max, const char *what)
{
    if (v > max) throw FormatError(std::string("model file holds an invalid ") + what);
    return E(v);
}

void write_fd(Writer &w, const FunctionalDependency &fd)
{
    w.str(fd.table);
    w.str(fd.determinant);
    w.str(fd.dependent);
    w.u64(fd.dictionary.size());
    for (const auto &[a, b] : fd.dictionary) {
        w.f64(a);
        w.f64(b);
    }
}

FunctionalDependency read_fd(Reader &r)
{
    FunctionalDependency fd;
    fd.table = r.str();
    fd.determinant = r.str();
    fd.dependent = r.str();
    const std::size_t n = r.length(16);
    for (std::size_t i = 0; i != n; ++i) {
        const double a = r.f64();
        fd.dictionary.emplace(a, r.f64());
    }
    return fd;
}

void write_schema(Writer &w, const SchemaGraph &s)
{
    w.u64(s.tables.size());
    for (const auto &t : s.tables) {
        w.str(t.name);
        w.str(t.csv.string());
        w.str(t.primary_key);
        w.u64(t.row_count);
        w.u64(t.columns.size());
        for (const auto &c : t.columns) {
            w.str(c.name);
            w.u8(std::uint8_t(c.kind));
            w.boolean(c.nullable);
        }
    }
    w.u64(s.fks.size());
    for (const auto &fk : s.fks) {
        w.str(fk.referencing_table);
        w.str(fk.referencing_column);
        w.str(fk.referenced_table);
        w.str(fk.referenced_column);
    }
    w.u64(s.fds.size());
    for (const auto &fd : s.fds) write_fd(w, fd);
    w.boolean(s.multi_component);
}

SchemaGraph read_schema(Reader &r)
{
    SchemaGraph s;
    s.tables.resize(r.length(8));
    for (auto &t : s.tables) {
        t.name = r.str();
        t.csv = r.str();
        t.primary_key = r.str();
        t.row_count = r.u64();
        t.columns.resize(r.length(10));
        for (auto &c : t.columns) {
            c.name = r.str();
            c.kind = checked_enum<ColumnKind>(r.u8(), 1, "column kind");
            c.nullable = r.boolean();
        }
    }
    s.fks.resize(r.length(32));
    for (auto &fk : s.fks) {
        fk.referencing_table = r.str();
        fk.referencing_column = r.str();
        fk.referenced_table = r.str();
        fk.referenced_column = r.str();
    }
    s.fds.resize(r.length(32));
    for (auto &fd : s.fds) fd = read_fd(r);
    s.multi_component = r.boolean();
    return s;
}

void write_rdc_params(Writer &w, const RdcParams &p)
{
    w.u32(p.num_features);
    w.f64(p.projection_scale);
    w.u64(p.seed);
    w.u64(p.sample_cap);
}

RdcParams read_rdc_params(Reader &r)
{
    RdcParams p;
    p.num_features = r.u32();
    p.projection_scale = r.f64();
    p.seed = r.u64();
    p.sample_cap = r.u64();
    return p;
}

void write_model(Writer &w, const Rspn &m)
{
    w.str(m.id);
    w.strings(m.tables);
    w.u64(m.columns.size());
    for (const auto &c : m.columns) {
        w.str(c.id);
        w.str(c.table);
        w.str(c.name);
        w.u8(std::uint8_t(c.kind));
        w.boolean(c.nullable);
        w.u8(std::uint8_t(c.synthetic));
        w.u64(std::uint64_t(std::int64_t(c.fk)));
        w.boolean(c.join_side);
        w.boolean(c.is_key);
    }
    for (const auto &t : m.transforms) {
        w.doubles(t.knots);
        w.doubles(t.ranks);
    }
    w.u64(m.nodes.size());
    for (const auto &n : m.nodes) {
        w.u8(std::uint8_t(n.kind));
        for (std::size_t word = 0; word != kMaxScope / 64; ++word) {
            std::uint64_t bits = 0;
            for (std::size_t b = 0; b != 64; ++b)
                if (n.scope.test(word * 64 + b)) bits |= std::uint64_t(1) << b;
            w.u64(bits);
        }
        w.u64(n.children.size());
        for (auto c : n.children) w.u32(c);
        w.u32(n.leaf);
        w.doubles(n.cluster_sizes);
        w.u64(n.centroids.size());
        for (const auto &c : n.centroids) w.doubles(c);
        w.boolean(n.forced);
    }
    w.u64(m.leaves.size());
    for (const auto &l : m.leaves) {
        w.u32(l.column);
        w.doubles(l.values);
        w.doubles(l.counts);
        w.doubles(l.bin_lower);
        w.doubles(l.bin_upper);
        w.doubles(l.bin_distinct);
        w.f64(l.null_count);
    }
    w.u32(m.root);
    w.f64(m.n_samples);
    w.f64(m.full_population_size);
    w.f64(m.sample_rate);
    w.u64(m.fd_dictionaries.size());
    for (const auto &fd : m.fd_dictionaries) write_fd(w, fd);
    w.strings(m.rdc_snapshot.columns);
    w.doubles(m.rdc_snapshot.values);
    w.f64(m.params.rdc_threshold);
    w.f64(m.params.min_instance_fraction);
    w.u64(m.params.distinct_value_limit);
    w.u32(m.params.cluster_count);
    w.u64(m.params.seed);
    write_rdc_params(w, m.params.rdc);
}

Rspn read_model(Reader &r)
{
    Rspn m;
    m.id = r.str();
    m.tables = r.strings();
    m.columns.resize(r.length(20));
    if (m.columns.size() > kMaxScope) throw FormatError("model file holds too many columns");
    for (auto &c : m.columns) {
        c.id = r.str();
        c.table = r.str();
        c.name = r.str();
        c.kind = checked_enum<ColumnKind>(r.u8(), 1, "column kind");
        c.nullable = r.boolean();
        c.synthetic = checked_enum<SyntheticKind>(r.u8(), 2, "column role");
        c.fk = int(std::int64_t(r.u64()));
        c.join_side = r.boolean();
        c.is_key = r.boolean();
    }
    m.transforms.resize(m.columns.size());
    for (auto &t : m.transforms) {
        t.knots = r.doubles();
        t.ranks = r.doubles();
    }
    m.nodes.resize(r.length(40));
    for (auto &n : m.nodes) {
        n.kind = checked_enum<NodeKind>(r.u8(), 2, "node kind");
        for (std::size_t word = 0; word != kMaxScope / 64; ++word) {
            const std::uint64_t bits = r.u64();
            for (std::size_t b = 0; b != 64; ++b)
                if (bits >> b & 1) n.scope.set(word * 64 + b);
        }
        n.children.resize(r.length(4));
        for (auto &c : n.children) {
            c = r.u32();
            if (c >= m.nodes.size()) throw FormatError("model file holds a dangling node reference");
        }
        n.leaf = r.u32();
        n.cluster_sizes = r.doubles();
        n.centroids.resize(r.length(8));
        for (auto &c : n.centroids) c = r.doubles();
        n.forced = r.boolean();
    }
    m.leaves.resize(r.length(44));
    for (auto &l : m.leaves) {
        const std::uint32_t col = r.u32();
        if (col >= m.columns.size()) throw FormatError("model file holds a leaf over an unknown column");
        l.column = std::uint16_t(col);
        l.values = r.doubles();
        l.counts = r.doubles();
        l.bin_lower = r.doubles();
        l.bin_upper = r.doubles();
        l.bin_distinct = r.doubles();
        l.null_count = r.f64();
    }
    for (const auto &n : m.nodes)
        if (n.kind == NodeKind::Leaf && n.leaf >= m.leaves.size())
            throw FormatError("model file holds a dangling leaf reference");
    m.root = r.u32();
    if (m.root >= m.nodes.size()) throw FormatError("model file holds an invalid root");
    m.n_samples = r.f64();
    m.full_population_size = r.f64();
    m.sample_rate = r.f64();
    m.fd_dictionaries.resize(r.length(32));
    for (auto &fd : m.fd_dictionaries) fd = read_fd(r);
    m.rdc_snapshot.columns = r.strings();
    m.rdc_snapshot.values = r.doubles();
    if (m.rdc_snapshot.values.size() != m.rdc_snapshot.columns.size() * m.rdc_snapshot.columns.size())
        throw FormatError("model file holds a malformed dependence matrix");
    m.params.rdc_threshold = r.f64();
    m.params.min_instance_fraction = r.f64();
    m.params.distinct_value_limit = r.u64();
    m.params.cluster_count = r.u32();
    m.params.seed = r.u64();
    m.params.rdc = read_rdc_params(r);
    return m;
}

}

std::string serialize_ensemble(const Ensemble &e)
{
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u32(kFormatVersion);
    w.u64(fnv1a(e.schema.canonical()));
    write_schema(w, e.schema);

    w.u64(e.catalog.dictionaries.size());
    for (const auto &[column, dict] : e.catalog.dictionaries) {
        w.str(column);
        w.strings(dict.strings());
    }
    w.u64(e.dependency_values.size());
    for (const auto &[key, v] : e.dependency_values) {
        w.str(key.first);
        w.str(key.second);
        w.f64(v);
    }
    w.f64(e.base_cost);
    w.f64(e.base_proxy_cost);
    w.f64(e.budget_factor);
    w.u64(e.base_count);
    w.u64(e.rspns.size());
    for (const auto &m : e.rspns) write_model(w, m);

    const std::uint64_t checksum = fnv1a(w.bytes());
    w.u64(checksum);
    return std::move(w.bytes());
}

Ensemble deserialize_ensemble(const std::string &bytes)
{
    if (bytes.size() < sizeof kMagic + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw FormatError("not an ensemble file");
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + sizeof kMagic, 4);
    if (version != kFormatVersion)
        throw FormatError("unsupported version " + std::to_string(version) + " (this build reads version " +
                          std::to_string(kFormatVersion) + ")");
    if (bytes.size() < sizeof kMagic + 4 + 16) throw FormatError("model file is truncated");

    const std::size_t body_end = bytes.size() - 8;
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + body_end, 8);
    if (fnv1a(std::string_view(bytes).substr(0, body_end)) != stored)
        throw FormatError("model file is corrupt or truncated (checksum mismatch)");

    Reader r(bytes, body_end);
    char magic[sizeof kMagic];
    r.raw(magic, sizeof magic);
    r.u32();
    const std::uint64_t digest = r.u64();

    Ensemble e;
    e.schema = read_schema(r);
    if (fnv1a(e.schema.canonical()) != digest) throw FormatError("model file schema digest does not match");

    const std::size_t dicts = r.length(16);
    for (std::size_t i = 0; i != dicts; ++i) {
        std::string column = r.str();
        Dictionary d;
        for (const auto &s : r.strings()) d.intern(s);
        e.catalog.dictionaries.emplace(std::move(column), std::move(d));
    }
    const std::size_t deps = r.length(24);
    for (std::size_t i = 0; i != deps; ++i) {
        std::string a = r.str(), b = r.str();
        e.dependency_values[{std::move(a), std::move(b)}] = r.f64();
    }
    e.base_cost = r.f64();
    e.base_proxy_cost = r.f64();
    e.budget_factor = r.f64();
    e.base_count = r.u64();
    e.rspns.resize(r.length(16));
    for (auto &m : e.rspns) m = read_model(r);
    if (!r.done()) throw FormatError("model file has trailing bytes");
    return e;
}

void save_ensemble(const Ensemble &ensemble, const std::filesystem::path &path)
{
    const std::string bytes = serialize_ensemble(ensemble);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write model file " + path.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw InputError("failed writing model file " + path.string());
}

Ensemble load_ensemble(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open model file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_ensemble(ss.str());
}

}
