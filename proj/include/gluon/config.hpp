#ifndef GLUON_CONFIG_HPP
#define GLUON_CONFIG_HPP

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gluon/lich.hpp"

namespace gluon {

// Minimal configuration-file parser: [section] headers, key = value lines,
// values are numbers, quoted strings, booleans, or single-line numeric
// arrays.  Comments start with '#'.
struct ConfigValue {
    enum class Kind { number, string, boolean, array } kind = Kind::number;
    double num = 0.0;
    std::string str;
    bool flag = false;
    std::vector<double> arr;
};

using ConfigMap = std::map<std::string, ConfigValue>;

namespace detail {

inline std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline bool parse_number(const std::string& s, double& out) {
    const char* c = s.c_str();
    char* end = nullptr;
    out = std::strtod(c, &end);
    return end && *end == '\0' && end != c;
}

}  // namespace detail

inline ConfigMap parse_config_text(const std::string& text) {
    ConfigMap out;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) {
            // keep '#' inside quotes
            std::size_t q1 = line.find('"');
            if (q1 == std::string::npos || hash < q1) line = line.substr(0, hash);
        }
        line = detail::strip(line);
        if (line.empty()) continue;
        auto bad = [&](const std::string& msg) {
            fail(Stage::config, 2,
                 "config line " + std::to_string(lineno) + ": " + msg);
        };
        if (line.front() == '[') {
            if (line.back() != ']') bad("unterminated section header");
            section = detail::strip(line.substr(1, line.size() - 2));
            if (section.empty()) bad("empty section name");
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) bad("expected key = value");
        std::string key = detail::strip(line.substr(0, eq));
        std::string val = detail::strip(line.substr(eq + 1));
        if (key.empty()) bad("empty key");
        if (val.empty()) bad("empty value for '" + key + "'");
        std::string full = section.empty() ? key : section + "." + key;
        ConfigValue v;
        if (val.front() == '"') {
            if (val.size() < 2 || val.back() != '"') bad("unterminated string");
            v.kind = ConfigValue::Kind::string;
            v.str = val.substr(1, val.size() - 2);
        } else if (val == "true" || val == "false") {
            v.kind = ConfigValue::Kind::boolean;
            v.flag = val == "true";
        } else if (val.front() == '[') {
            if (val.back() != ']') bad("arrays must close on the same line");
            v.kind = ConfigValue::Kind::array;
            std::string body = val.substr(1, val.size() - 2);
            std::istringstream items(body);
            std::string item;
            while (std::getline(items, item, ',')) {
                item = detail::strip(item);
                if (item.empty()) continue;
                double d;
                if (!detail::parse_number(item, d))
                    bad("bad array element '" + item + "' for '" + key + "'");
                v.arr.push_back(d);
            }
        } else {
            if (!detail::parse_number(val, v.num))
                bad("bad value '" + val + "' for '" + key + "'");
        }
        out[full] = v;
    }
    return out;
}

struct RunConfig {
    double epsilon = 0.1;
    double tau = 0.0;
    int threads = 0;
    std::uint64_t seed = 12345;
    GridSize grid;
    ModelSpec side1, side2;
    LinearSolveConfig solver;
    LichConfig lich;
    std::string out_dir = "out";
    double r_out = 8.0;
    std::vector<double> sweep_epsilons;
    std::string probes = "none";      // pre-solve gate: none | ckv | kid
    double probe_annulus_r1 = 1.0;    // inner radius of the diagnostic annulus
    std::string raw_text;

    bool ae() const { return side1.kind == ModelKind::euclidean_ae; }
};

namespace detail {

inline void cfg_bad(const std::string& key, const std::string& what) {
    fail(Stage::config, 2, "config key '" + key + "': " + what);
}

inline double get_num(const ConfigMap& m, const std::string& key, double dflt) {
    auto it = m.find(key);
    if (it == m.end()) return dflt;
    if (it->second.kind != ConfigValue::Kind::number) cfg_bad(key, "expected a number");
    return it->second.num;
}

inline std::string get_str(const ConfigMap& m, const std::string& key,
                           const std::string& dflt) {
    auto it = m.find(key);
    if (it == m.end()) return dflt;
    if (it->second.kind != ConfigValue::Kind::string) cfg_bad(key, "expected a string");
    return it->second.str;
}

inline std::vector<double> get_arr(const ConfigMap& m, const std::string& key) {
    auto it = m.find(key);
    if (it == m.end()) return {};
    if (it->second.kind != ConfigValue::Kind::array) cfg_bad(key, "expected an array");
    return it->second.arr;
}

inline ModelKind parse_model_kind(const std::string& key, const std::string& s) {
    if (s == "flat_torus") return ModelKind::flat_torus;
    if (s == "bumpy_torus") return ModelKind::bumpy_torus;
    if (s == "round_sphere") return ModelKind::round_sphere;
    if (s == "schwarzschild_tube") return ModelKind::schwarzschild_tube;
    if (s == "euclidean_ae") return ModelKind::euclidean_ae;
    cfg_bad(key, "unknown model kind '" + s + "'");
    return ModelKind::flat_torus;
}

inline SeedKind parse_seed_kind(const std::string& key, const std::string& s) {
    if (s == "none") return SeedKind::none;
    if (s == "constant") return SeedKind::constant;
    if (s == "projected") return SeedKind::projected;
    cfg_bad(key, "unknown seed kind '" + s + "' (none, constant, projected)");
    return SeedKind::none;
}

inline ModelSpec parse_side(const ConfigMap& m, const std::string& sec) {
    ModelSpec s;
    s.kind = parse_model_kind(sec + ".kind", get_str(m, sec + ".kind", "flat_torus"));
    s.period = get_num(m, sec + ".period", 4.0);
    s.sphere_radius = get_num(m, sec + ".sphere_radius", 1.0);
    s.tube_eps = get_num(m, sec + ".tube_eps", 0.1);
    s.seed_kind =
        parse_seed_kind(sec + ".seed_kind", get_str(m, sec + ".seed_kind", "none"));
    std::vector<double> seed = get_arr(m, sec + ".seed");
    if (!seed.empty()) {
        if (seed.size() != 6)
            cfg_bad(sec + ".seed", "expected 6 symmetric components (00,01,02,11,12,22)");
        for (int q = 0; q < 6; ++q) s.seed[std::size_t(q)] = seed[std::size_t(q)];
    }
    std::vector<double> bc = get_arr(m, sec + ".bumps_center");
    std::vector<double> bw = get_arr(m, sec + ".bumps_width");
    std::vector<double> ba = get_arr(m, sec + ".bumps_amp");
    if (bc.size() != 3 * bw.size() || bw.size() != ba.size())
        cfg_bad(sec + ".bumps_center",
                "bump arrays disagree: need 3 center entries per width/amp entry");
    for (std::size_t q = 0; q < bw.size(); ++q) {
        Bump b;
        b.center = Vec3{bc[3 * q], bc[3 * q + 1], bc[3 * q + 2]};
        b.width = bw[q];
        b.amp = ba[q];
        s.bumps.push_back(b);
    }
    return s;
}

}  // namespace detail

inline RunConfig config_from_map(const ConfigMap& m, const std::string& raw) {
    RunConfig c;
    c.raw_text = raw;
    c.epsilon = detail::get_num(m, "epsilon", c.epsilon);
    c.tau = detail::get_num(m, "tau", c.tau);
    c.threads = int(detail::get_num(m, "threads", 0));
    c.seed = std::uint64_t(detail::get_num(m, "seed", 12345));
    c.grid.bulk = int(detail::get_num(m, "grid.bulk", c.grid.bulk));
    c.grid.neck_t = int(detail::get_num(m, "grid.neck_t", c.grid.neck_t));
    c.grid.neck_theta1 = int(detail::get_num(m, "grid.neck_theta1", c.grid.neck_theta1));
    c.grid.neck_theta2 = int(detail::get_num(m, "grid.neck_theta2", c.grid.neck_theta2));
    c.side1 = detail::parse_side(m, "side1");
    c.side2 = detail::parse_side(m, "side2");
    c.solver.tol = detail::get_num(m, "solver.tol", c.solver.tol);
    c.solver.max_iter = int(detail::get_num(m, "solver.max_iter", c.solver.max_iter));
    c.solver.precond = detail::get_str(m, "solver.precond", c.solver.precond);
    c.solver.max_restarts =
        int(detail::get_num(m, "solver.max_restarts", c.solver.max_restarts));
    c.solver.restart = int(detail::get_num(m, "solver.restart", c.solver.restart));
    c.lich.max_iters = int(detail::get_num(m, "lich.max_iters", c.lich.max_iters));
    c.lich.tol_increment =
        detail::get_num(m, "lich.tol_increment", c.lich.tol_increment);
    c.lich.ball_exponent =
        detail::get_num(m, "lich.ball_exponent", c.lich.ball_exponent);
    c.lich.damping = detail::get_num(m, "lich.damping", c.lich.damping);
    c.lich.trivial_floor =
        detail::get_num(m, "lich.trivial_floor", c.lich.trivial_floor);
    c.lich.inner = c.solver;
    c.out_dir = detail::get_str(m, "output.dir", c.out_dir);
    c.r_out = detail::get_num(m, "r_out", c.r_out);
    c.sweep_epsilons = detail::get_arr(m, "sweep.epsilons");
    c.probes = detail::get_str(m, "probes", c.probes);
    c.probe_annulus_r1 = detail::get_num(m, "probe_annulus_r1", c.probe_annulus_r1);
    return c;
}

// Structural validation; every failure names the violated requirement and
// the offending key.
inline void validate_run_config(const RunConfig& c) {
    using detail::cfg_bad;
    if (!(c.epsilon > 0.0) || c.epsilon > std::exp(-1.0))
        cfg_bad("epsilon", "must satisfy 0 < epsilon <= exp(-1) ~= 0.3679, got " +
                               std::to_string(c.epsilon));
    if (!std::isfinite(c.tau)) cfg_bad("tau", "must be finite");
    if (c.threads < 0 || c.threads > 256) cfg_bad("threads", "must lie in [0, 256]");
    if (c.grid.bulk < 12 || c.grid.bulk % 2 != 0)
        cfg_bad("grid.bulk", "must be an even integer >= 12");
    if (c.grid.neck_t < 32) cfg_bad("grid.neck_t", "must be >= 32");
    if (c.grid.neck_theta1 < 6) cfg_bad("grid.neck_theta1", "must be >= 6");
    if (c.grid.neck_theta2 < 8 || c.grid.neck_theta2 % 2 != 0)
        cfg_bad("grid.neck_theta2", "must be an even integer >= 8 (the cross-pole "
                                    "ghost exchange needs a half turn)");
    if (c.side2.kind == ModelKind::euclidean_ae)
        cfg_bad("side2.kind", "the asymptotically euclidean side must be side1");
    if (c.ae() && c.tau != 0.0)
        cfg_bad("tau", "an asymptotically euclidean side forces tau = 0");
    if (c.ae() && !(c.r_out >= std::exp(1.0)))
        cfg_bad("r_out", "must be >= e so the outer band exists");
    validate_model(c.side1);
    validate_model(c.side2);
    if (c.out_dir.empty()) cfg_bad("output.dir", "must not be empty");
    for (double e : c.sweep_epsilons)
        if (!(e > 0.0) || e > std::exp(-1.0))
            cfg_bad("sweep.epsilons", "every entry must lie in (0, exp(-1)]");
    if (c.probes != "none" && c.probes != "ckv" && c.probes != "kid")
        cfg_bad("probes", "must be one of none, ckv, kid");
    if (!(c.probe_annulus_r1 > 0.0))
        cfg_bad("probe_annulus_r1", "must be positive");
}

inline RunConfig parse_run_config_text(const std::string& text) {
    RunConfig c = config_from_map(parse_config_text(text), text);
    validate_run_config(c);
    return c;
}

inline RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Stage::config, 2, "cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config_text(ss.str());
}

}  // namespace gluon

#endif
