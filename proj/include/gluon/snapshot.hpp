#ifndef GLUON_SNAPSHOT_HPP
#define GLUON_SNAPSHOT_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gluon/field.hpp"

namespace gluon {

// Binary state snapshot.  Layout (little-endian):
//   magic "GLUF1"
//   u64 nchart;  per chart: i64 kind, i64 n0, i64 n1, i64 n2
//   u64 len, config text bytes
//   f64 epsilon, f64 tau
//   u64 nfields; per field: u64 namelen, name bytes, i32 variance,
//                per chart nc*nn f64 values
namespace detail {

constexpr char kSnapshotMagic[5] = {'G', 'L', 'U', 'F', '1'};

inline void put_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), std::streamsize(n));
}
template <class T>
void put_scalar(std::ostream& out, T v) {
    put_bytes(out, &v, sizeof(T));
}
inline void get_bytes(std::istream& in, void* p, std::size_t n,
                      const std::string& what) {
    in.read(static_cast<char*>(p), std::streamsize(n));
    if (!in) fail(Stage::io, 4, "snapshot truncated while reading " + what);
}
template <class T>
T get_scalar(std::istream& in, const std::string& what) {
    T v;
    get_bytes(in, &v, sizeof(T), what);
    return v;
}

}  // namespace detail

inline void save_snapshot(const std::string& path, const Atlas& at,
                          const std::string& config_text, double tau,
                          const std::vector<std::pair<std::string, const Field*>>& fields) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Stage::io, 4, "cannot open snapshot '" + path + "' for writing");
    using namespace detail;
    put_bytes(out, kSnapshotMagic, 5);
    put_scalar<std::uint64_t>(out, at.charts.size());
    for (const Chart& c : at.charts) {
        put_scalar<std::int64_t>(out, std::int64_t(c.kind));
        for (int a = 0; a < 3; ++a) put_scalar<std::int64_t>(out, c.n[a]);
    }
    put_scalar<std::uint64_t>(out, config_text.size());
    put_bytes(out, config_text.data(), config_text.size());
    put_scalar<double>(out, at.eps);
    put_scalar<double>(out, tau);
    put_scalar<std::uint64_t>(out, fields.size());
    for (const auto& [name, f] : fields) {
        put_scalar<std::uint64_t>(out, name.size());
        put_bytes(out, name.data(), name.size());
        put_scalar<std::int32_t>(out, std::int32_t(f->var));
        for (std::size_t ci = 0; ci < at.charts.size(); ++ci)
            put_bytes(out, f->data[ci].data(), f->data[ci].size() * sizeof(double));
    }
    out.flush();
    if (!out) fail(Stage::io, 4, "write failure on snapshot '" + path + "'");
}

struct SnapshotMeta {
    std::string config_text;
    double epsilon = 0.0;
    double tau = 0.0;
};

namespace detail {

inline std::ifstream open_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Stage::io, 4, "cannot open snapshot '" + path + "'");
    char magic[5];
    get_bytes(in, magic, 5, "magic");
    if (std::memcmp(magic, kSnapshotMagic, 5) != 0)
        fail(Stage::io, 4, "'" + path + "' is not a state snapshot (bad magic)");
    return in;
}

struct ChartEntry {
    std::int64_t kind, n[3];
};

inline std::vector<ChartEntry> read_chart_table(std::istream& in) {
    auto nchart = get_scalar<std::uint64_t>(in, "chart count");
    if (nchart > 64) fail(Stage::io, 4, "snapshot chart table implausibly large");
    std::vector<ChartEntry> table(nchart);
    for (auto& e : table) {
        e.kind = get_scalar<std::int64_t>(in, "chart kind");
        for (int a = 0; a < 3; ++a) e.n[a] = get_scalar<std::int64_t>(in, "chart size");
    }
    return table;
}

inline SnapshotMeta read_meta(std::istream& in) {
    SnapshotMeta meta;
    auto len = get_scalar<std::uint64_t>(in, "config length");
    if (len > (1u << 20)) fail(Stage::io, 4, "snapshot config text implausibly large");
    meta.config_text.resize(len);
    if (len) get_bytes(in, meta.config_text.data(), len, "config text");
    meta.epsilon = get_scalar<double>(in, "epsilon");
    meta.tau = get_scalar<double>(in, "tau");
    return meta;
}

}  // namespace detail

// Reads only the embedded configuration and scalars; used to rebuild the
// atlas before loading the field payload.
inline SnapshotMeta snapshot_meta(const std::string& path) {
    std::ifstream in = detail::open_snapshot(path);
    detail::read_chart_table(in);
    return detail::read_meta(in);
}

inline std::map<std::string, Field> load_snapshot(const std::string& path,
                                                  const Atlas& at,
                                                  SnapshotMeta* meta_out = nullptr) {
    using namespace detail;
    std::ifstream in = open_snapshot(path);
    std::vector<ChartEntry> table = read_chart_table(in);
    if (table.size() != at.charts.size())
        fail(Stage::io, 4, "snapshot chart count does not match the atlas");
    for (std::size_t ci = 0; ci < table.size(); ++ci) {
        const Chart& c = at.charts[ci];
        bool ok = table[ci].kind == std::int64_t(c.kind);
        for (int a = 0; a < 3; ++a) ok = ok && table[ci].n[a] == c.n[a];
        if (!ok)
            fail(Stage::io, 4, "snapshot chart " + std::to_string(ci) +
                                   " does not match the atlas (kind or grid size)");
    }
    SnapshotMeta meta = read_meta(in);
    if (meta_out) *meta_out = meta;
    auto nfields = get_scalar<std::uint64_t>(in, "field count");
    if (nfields > 256) fail(Stage::io, 4, "snapshot field table implausibly large");
    std::map<std::string, Field> fields;
    for (std::uint64_t q = 0; q < nfields; ++q) {
        auto namelen = get_scalar<std::uint64_t>(in, "field name length");
        if (namelen > 4096) fail(Stage::io, 4, "snapshot field name implausibly large");
        std::string name(namelen, '\0');
        if (namelen) get_bytes(in, name.data(), namelen, "field name");
        auto vraw = get_scalar<std::int32_t>(in, "field variance");
        if (vraw < 0 || vraw > std::int32_t(Variance::sym2_up))
            fail(Stage::io, 4, "snapshot field '" + name + "' has unknown variance");
        Field f(at, Variance(vraw));
        for (std::size_t ci = 0; ci < at.charts.size(); ++ci)
            get_bytes(in, f.data[ci].data(), f.data[ci].size() * sizeof(double),
                      "field '" + name + "' payload");
        fields.emplace(name, std::move(f));
    }
    return fields;
}

}  // namespace gluon

#endif
