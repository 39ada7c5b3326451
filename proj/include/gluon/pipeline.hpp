#ifndef GLUON_PIPELINE_HPP
#define GLUON_PIPELINE_HPP

#include <cmath>
#include <filesystem>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gluon/config.hpp"
#include "gluon/constraints.hpp"
#include "gluon/csv.hpp"
#include "gluon/momentum.hpp"
#include "gluon/snapshot.hpp"

namespace gluon {

// Constant part of a model's seed with its coordinate trace removed; this is
// the matrix carried through the neck transport.
inline Sym3 seed_matrix(const ModelSpec& s) {
    if (s.seed_kind == SeedKind::none) return Sym3{0, 0, 0, 0, 0, 0};
    Sym3 t = s.seed;
    double tr3 = (t[0] + t[3] + t[5]) / 3.0;
    t[0] -= tr3;
    t[3] -= tr3;
    t[5] -= tr3;
    return t;
}

inline bool is_bulk_chart(const Chart& c) {
    return c.kind == ChartKind::bulk1 || c.kind == ChartKind::bulk2 ||
           c.kind == ChartKind::ae_end;
}

// Pointwise metric norm of a field value: |f| for scalars, g-norm for
// vectors/one-forms/symmetric tensors.
inline double pointwise_gnorm(const MetricField& m, const Field& f, int ci,
                              std::size_t idx) {
    switch (f.var) {
        case Variance::scalar:
            return std::abs(f.comp(ci, 0)[idx]);
        case Variance::vector_up: {
            Sym3 g = m.g_at(ci, idx);
            double acc = 0.0;
            for (int p = 0; p < 3; ++p)
                for (int q = 0; q < 3; ++q)
                    acc += g[std::size_t(sym_idx(p, q))] * f.comp(ci, p)[idx] *
                           f.comp(ci, q)[idx];
            return std::sqrt(std::max(acc, 0.0));
        }
        case Variance::one_form: {
            Sym3 gi = m.ginv_at(ci, idx);
            double acc = 0.0;
            for (int p = 0; p < 3; ++p)
                for (int q = 0; q < 3; ++q)
                    acc += gi[std::size_t(sym_idx(p, q))] * f.comp(ci, p)[idx] *
                           f.comp(ci, q)[idx];
            return std::sqrt(std::max(acc, 0.0));
        }
        case Variance::sym2_low: {
            Sym3 t;
            for (int q = 0; q < 6; ++q) t[std::size_t(q)] = f.comp(ci, q)[idx];
            return std::sqrt(std::max(norm2_sym_node(m.ginv_at(ci, idx), t), 0.0));
        }
        case Variance::sym2_up: {
            Sym3 t;
            for (int q = 0; q < 6; ++q) t[std::size_t(q)] = f.comp(ci, q)[idx];
            return std::sqrt(std::max(norm2_sym_node(m.g_at(ci, idx), t), 0.0));
        }
    }
    return 0.0;
}

// sup over owner nodes of w^s |f|_g, optionally restricted to side charts.
inline double weighted_sup_gnorm(const MetricField& m, const Field& f, const Field* w,
                                 double s, bool bulk_only) {
    const Atlas& at = *m.atlas;
    double best = 0.0;
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        if (bulk_only && !is_bulk_chart(c)) continue;
        const double* wd = w ? w->comp(int(ci), 0) : nullptr;
        double mx = reduce_max(
            c.nn(),
            [&, wd](std::size_t lo, std::size_t hi) {
                double b = 0.0;
                for (std::size_t idx = lo; idx < hi; ++idx) {
                    if (!c.owns(idx)) continue;
                    double v = pointwise_gnorm(m, f, int(ci), idx);
                    if (wd) v *= std::pow(wd[idx], s);
                    b = std::max(b, v);
                }
                return b;
            },
            0.0);
        best = std::max(best, mx);
    }
    return best;
}

inline double min_owner_scalar(const Atlas& at, const Field& f) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        const double* d = f.comp(int(ci), 0);
        double mn = -reduce_max(
            c.nn(),
            [&, d](std::size_t lo, std::size_t hi) {
                double b = -std::numeric_limits<double>::infinity();
                for (std::size_t idx = lo; idx < hi; ++idx)
                    if (c.owns(idx)) b = std::max(b, -d[idx]);
                return b;
            },
            -std::numeric_limits<double>::infinity());
        best = std::min(best, mn);
    }
    return best;
}

struct VerifyReport {
    double mu_trace_sup = 0.0;   // trace of the corrected tensor, glued metric
    double mu_div_sup = 0.0;     // divergence of the corrected tensor
    double licn_residual_sup = 0.0;     // raw conformal-factor equation residual
    double fixed_point_residual = 0.0;  // residual of the equation actually solved
    double rho_sup = 0.0, rho_sup_bulk = 0.0;
    double rho_excess_bulk = 0.0;  // scalar constraint minus the inherited part
    double j_sup = 0.0, j_sup_bulk = 0.0;
    double cmc_dev = 0.0;
    double min_u = 0.0, v_sup = 0.0, v_weighted = 0.0;
    double x_weighted = 0.0, w_weighted = 0.0;  // interior-weighted correction/source
    double apriori_ratio = 0.0;                 // x_weighted / w_weighted
};

// All state of one glued run at one value of epsilon.  Atlases are held by
// pointer so fields can reference them stably while Run itself moves.
struct Run {
    RunConfig cfg;

    std::unique_ptr<Atlas> sum_atlas[2];
    std::unique_ptr<MetricField> sum_metric[2];
    Field sum_mu[2];
    MomentumReport sum_mom[2];
    bool sum_projected[2] = {false, false};
    Sym3 M[2] = {Sym3{0, 0, 0, 0, 0, 0}, Sym3{0, 0, 0, 0, 0, 0}};

    std::unique_ptr<Atlas> atlas;
    std::unique_ptr<MetricField> metric;
    Field weight;
    ProtoTT proto;

    Field W;  // momentum right-hand side (raised divergence of the seed)
    Field mu_tt, X;
    MomentumReport mom;

    LichSetup setup;
    Field v;
    LichReport lich;

    VerifyReport ver;
};

// Glued atlas + metric + weight, deterministic from the configuration alone.
inline void build_glued(Run& r) {
    const RunConfig& cfg = r.cfg;
    r.atlas = std::make_unique<Atlas>(make_glued_atlas(cfg.epsilon, cfg.grid,
                                                       cfg.side1.period, cfg.side2.period,
                                                       cfg.ae(), cfg.r_out));
    r.metric =
        std::make_unique<MetricField>(assemble_glued_metric(*r.atlas, cfg.side1, cfg.side2));
    r.weight = weight_field(*r.atlas);
}

// Diagnostic annulus region: a coordinate box inscribed in the spherical
// shell r in [r1, 2 r1] around the model's gluing point.
inline Atlas make_probe_annulus_atlas(const ModelSpec& s, double r1, int n) {
    if (n < 6)
        fail(Stage::probes, 2,
             "probe region too thin: need at least 6 cells across, got " +
                 std::to_string(n));
    Vec3 ctr{0.0, 0.0, 0.0};
    if (s.kind == ModelKind::flat_torus || s.kind == ModelKind::bumpy_torus)
        ctr = torus_center(s);
    Vec3 lo, hi;
    for (int a = 0; a < 3; ++a) {
        lo[std::size_t(a)] = ctr[std::size_t(a)] + 0.60 * r1;
        hi[std::size_t(a)] = lo[std::size_t(a)] + 0.55 * r1;
    }
    return make_box_open_atlas(n, lo, hi);
}

inline KidReport kid_annulus_probe(const ModelSpec& s, double r1, int n,
                                   std::uint64_t seed) {
    Atlas at = make_probe_annulus_atlas(s, r1, n);
    MetricField m = model_metric(s, at);
    return kid_probe_time_symmetric(m, seed);
}

// ---------------------------------------------------------------------------
// Stages.

// Unconditional pre-glue nondegeneracy check, run on a coarse fixed-size
// instance of each closed summand model (degeneracy is a property of the
// model, not of the run resolution, and the coarse spectrum separates the
// two cases by two orders of magnitude).  Flat translation symmetries —
// kernel dimension up to 3 — do not obstruct the correction solve, because
// its right-hand side is the divergence of a trace-free seed and therefore
// integrates to zero against them; a larger symmetry algebra (the sphere
// carries 10 conformal generators) refuses the construction.
inline void summand_symmetry_gate(const ModelSpec& s, int side, std::uint64_t seed) {
    bool closed = s.kind == ModelKind::flat_torus || s.kind == ModelKind::bumpy_torus ||
                  s.kind == ModelKind::round_sphere;
    if (!closed) return;
    Atlas at = instantiate(s, 3, 3, 0, 12);
    MetricField m = model_metric(s, at);
    LinearSolveConfig inner;
    inner.tol = 1e-6;
    inner.max_iter = 600;
    CkvReport g = smallest_vector_eigs(m, 8, 3, 2e-3, inner, seed);
    if (g.kernel_dim > 3)
        fail(Stage::probes, 3,
             "side " + std::to_string(side + 1) + " summand (" +
                 model_kind_name(s.kind) +
                 ") carries conformal symmetries beyond translations: kernel dimension " +
                 std::to_string(g.kernel_dim) + ", smallest eigenvalue " +
                 fmt_g17(g.eigs.empty() ? 0.0 : g.eigs.front()) + " below threshold " +
                 fmt_g17(g.threshold) + "; refusing to glue");
}

inline void stage_glue(Run& r) {
    const RunConfig& cfg = r.cfg;
    const ModelSpec* specs[2] = {&cfg.side1, &cfg.side2};

    for (int sd = 0; sd < 2; ++sd) {
        const ModelSpec& s = *specs[sd];
        r.sum_atlas[sd] = std::make_unique<Atlas>(instantiate(s, 3, 3, 0, cfg.grid.bulk));
        r.sum_metric[sd] = std::make_unique<MetricField>(model_metric(s, *r.sum_atlas[sd]));
        r.M[sd] = seed_matrix(s);
    }

    for (int sd = 0; sd < 2; ++sd)
        summand_symmetry_gate(*specs[sd], sd, r.cfg.seed + 777 + std::uint64_t(sd));
    if (cfg.probes == "kid") {
        for (int sd = 0; sd < 2; ++sd) {
            KidReport kid =
                kid_annulus_probe(*specs[sd], cfg.probe_annulus_r1, cfg.grid.bulk,
                                  cfg.seed + 4242 + std::uint64_t(sd));
            if (kid.kid_dim > 0)
                fail(Stage::probes, 3,
                     "side " + std::to_string(sd + 1) + " summand (" +
                         model_kind_name(specs[sd]->kind) +
                         ") carries lapse obstructions on the diagnostic annulus: "
                         "kernel dimension " +
                         std::to_string(kid.kid_dim) + "; refusing to glue");
        }
    }

    // Seeds, projected per summand where requested.
    for (int sd = 0; sd < 2; ++sd) {
        const ModelSpec& s = *specs[sd];
        r.sum_mu[sd] = tt_seed(s, *r.sum_metric[sd]);
        if (s.seed_kind == SeedKind::projected) {
            Field x = vector_field(*r.sum_atlas[sd]);
            r.sum_mom[sd] =
                solve_momentum(*r.sum_metric[sd], r.sum_mu[sd], x, cfg.solver, true);
            r.sum_mu[sd] = corrected_tt(*r.sum_metric[sd], r.sum_mu[sd], x);
            momentum_diagnostics(*r.sum_metric[sd], r.sum_mu[sd], r.sum_mom[sd]);
            r.sum_projected[sd] = true;
        }
    }

    // Capability: the construction needs an exactly flat unit ball around the
    // gluing point of both sides.
    for (int sd = 0; sd < 2; ++sd)
        if (!glueable(*specs[sd]))
            fail(Stage::gluing, 2,
                 "side " + std::to_string(sd + 1) + " model (" +
                     model_kind_name(specs[sd]->kind) +
                     ") cannot be glued: the unit ball around its gluing point is "
                     "not flat in chart coordinates");

    build_glued(r);
    const Field* f1 = cfg.side1.seed_kind != SeedKind::none ? &r.sum_mu[0] : nullptr;
    const Field* f2 = cfg.side2.seed_kind != SeedKind::none ? &r.sum_mu[1] : nullptr;
    r.proto = assemble_proto_tt(*r.atlas, *r.metric, cfg.side1, cfg.side2, r.M[0],
                                r.M[1], f1, f2);
}

inline void stage_momentum(Run& r) {
    r.W = momentum_rhs(*r.metric, r.proto.combined);
    r.X = vector_field(*r.atlas);
    r.mom = solve_momentum(*r.metric, r.proto.combined, r.X, r.cfg.solver, true);
    r.mu_tt = corrected_tt(*r.metric, r.proto.combined, r.X);
    momentum_diagnostics(*r.metric, r.mu_tt, r.mom);
}

inline void stage_lich(Run& r) {
    r.setup = build_lich_setup(*r.metric, r.proto, r.mu_tt, r.cfg.side1, r.cfg.side2,
                               r.cfg.tau);
    r.v = scalar_field(*r.atlas);
    r.lich = picard_solve(*r.metric, r.setup, r.cfg.lich, r.v);
}

inline void stage_verify(Run& r) {
    const Atlas& at = *r.atlas;
    const MetricField& m = *r.metric;
    VerifyReport& ver = r.ver;

    if (!r.setup.potential.atlas)  // standalone verify run: rebuild the setup
        r.setup = build_lich_setup(m, r.proto, r.mu_tt, r.cfg.side1, r.cfg.side2,
                                   r.cfg.tau);

    Field tr = trace(m, r.mu_tt);
    ver.mu_trace_sup = sup_norm(at, tr);
    Field div = momentum_rhs(m, r.mu_tt);
    ver.mu_div_sup = sup_gnorm_vec(m, div);

    Field u = scalar_field(at);
    u.copy_from(r.v);
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        double* d = u.comp(int(ci), 0);
        std::size_t nn = at.charts[ci].nn();
        for (std::size_t idx = 0; idx < nn; ++idx) d[idx] += 1.0;
    }
    Field licn = licn_apply(m, r.setup, u);
    ver.licn_residual_sup = sup_norm(at, licn);

    // Residual of the equation the nonlinear stage actually solves:
    // licn(1+v) minus the inherited source (1+v) * deficit_sum.  Recomputed
    // here so a resumed run reports it without the solver's bookkeeping.
    Field fp = scalar_field(at);
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        double* o = fp.comp(int(ci), 0);
        const double* ln = licn.comp(int(ci), 0);
        const double* uu = u.comp(int(ci), 0);
        const double* dd = r.setup.deficit_sum.comp(int(ci), 0);
        for (std::size_t idx = 0; idx < c.nn(); ++idx)
            o[idx] = c.computes(idx) ? ln[idx] - uu[idx] * dd[idx] : 0.0;
    }
    ver.fixed_point_residual = sup_norm(at, fp);

    ver.v_sup = sup_norm(at, r.v);
    ver.v_weighted = weighted_sup_gnorm(m, r.v, &r.weight, 0.5, false);
    ver.min_u = min_owner_scalar(at, u);

    PhysicalData d = conformal_reconstruct(m, r.mu_tt, r.v, r.cfg.tau);
    Field rho = hamiltonian(d);
    Field j = momentum_J(d);
    ver.cmc_dev = cmc_deviation(d);
    ver.rho_sup = sup_norm(at, rho);
    ver.rho_sup_bulk = weighted_sup_gnorm(m, rho, nullptr, 0.0, true);
    ver.j_sup = weighted_sup_gnorm(d.g, j, nullptr, 0.0, false);
    ver.j_sup_bulk = weighted_sup_gnorm(d.g, j, nullptr, 0.0, true);

    // Scalar constraint relative to the part inherited from the summand data:
    // rho_inherited = -8 u^{-4} * deficit_sum.
    Field excess = scalar_field(at);
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        double* e = excess.comp(int(ci), 0);
        const double* rh = rho.comp(int(ci), 0);
        const double* uu = u.comp(int(ci), 0);
        const double* dd = r.setup.deficit_sum.comp(int(ci), 0);
        for (std::size_t idx = 0; idx < c.nn(); ++idx)
            e[idx] = c.computes(idx)
                         ? rh[idx] + 8.0 * std::pow(uu[idx], -4.0) * dd[idx]
                         : 0.0;
    }
    ver.rho_excess_bulk = weighted_sup_gnorm(m, excess, nullptr, 0.0, true);

    if (r.X.atlas) {
        if (!r.W.atlas)  // resumed from a snapshot, which stores no right-hand side
            r.W = momentum_rhs(m, r.proto.combined);
        ver.x_weighted = weighted_sup_gnorm(m, r.X, &r.weight, 0.75, false);
        ver.w_weighted = weighted_sup_gnorm(m, r.W, &r.weight, 2.75, false);
        ver.apriori_ratio =
            ver.w_weighted > 0.0 ? ver.x_weighted / ver.w_weighted : 0.0;
    }
}

// ---------------------------------------------------------------------------
// Snapshot plumbing.

inline void save_run_snapshot(const Run& r, const std::string& path) {
    std::vector<std::pair<std::string, const Field*>> fields;
    auto add = [&](const char* n, const Field& f) {
        if (f.atlas) fields.emplace_back(n, &f);
    };
    add("proto_combined", r.proto.combined);
    add("proto_side1", r.proto.side1);
    add("proto_side2", r.proto.side2);
    add("mu_tt", r.mu_tt);
    add("correction_x", r.X);
    add("v", r.v);
    save_snapshot(path, *r.atlas, r.cfg.raw_text, r.cfg.tau, fields);
}

inline Run load_run(const std::string& path) {
    Run r;
    SnapshotMeta meta = snapshot_meta(path);
    r.cfg = parse_run_config_text(meta.config_text);
    r.cfg.epsilon = meta.epsilon;
    r.cfg.tau = meta.tau;
    if (!(r.cfg.epsilon > 0.0) || r.cfg.epsilon > std::exp(-1.0))
        fail(Stage::io, 4, "snapshot epsilon out of range");
    build_glued(r);
    auto fields = load_snapshot(path, *r.atlas);
    auto take = [&](const char* name, Field& dst, Variance expect) {
        auto it = fields.find(name);
        if (it == fields.end()) return false;
        if (it->second.var != expect)
            fail(Stage::io, 4,
                 std::string("snapshot field '") + name + "' has unexpected type");
        dst = std::move(it->second);
        return true;
    };
    bool ok = take("proto_combined", r.proto.combined, Variance::sym2_low);
    ok = take("proto_side1", r.proto.side1, Variance::sym2_low) && ok;
    ok = take("proto_side2", r.proto.side2, Variance::sym2_low) && ok;
    if (!ok) fail(Stage::io, 4, "snapshot lacks the glued seed fields");
    take("mu_tt", r.mu_tt, Variance::sym2_low);
    take("correction_x", r.X, Variance::vector_up);
    take("v", r.v, Variance::scalar);
    return r;
}

// ---------------------------------------------------------------------------
// Report rows.

inline const std::vector<std::string>& summary_header() {
    static const std::vector<std::string> h = {
        "epsilon",        "total_nodes",    "mom_skipped",   "mom_iters",
        "mom_restarts",   "mom_rel_residual", "div_before",  "div_after",
        "trace_after",    "lich_iters",     "lich_damped",   "ball_radius",
        "v_sup",          "v_weighted",     "min_u",         "fixed_point_residual",
        "licn_residual",  "rho_sup",        "rho_bulk",      "rho_excess_bulk",
        "j_sup",          "j_bulk",         "cmc_dev",       "x_weighted",
        "w_weighted",     "apriori_ratio"};
    return h;
}

inline std::vector<double> summary_row(const Run& r) {
    return {r.cfg.epsilon,
            double(r.atlas->total_nodes()),
            r.mom.skipped_zero_rhs ? 1.0 : 0.0,
            double(r.mom.cg.iters),
            double(r.mom.cg.restarts),
            r.mom.cg.rel_residual,
            r.mom.div_before_sup,
            r.mom.div_after_sup,
            r.mom.trace_after_sup,
            double(r.lich.iters),
            r.lich.damped ? 1.0 : 0.0,
            r.lich.ball_radius,
            r.ver.v_sup,
            r.ver.v_weighted,
            r.ver.min_u,
            r.ver.fixed_point_residual,
            r.ver.licn_residual_sup,
            r.ver.rho_sup,
            r.ver.rho_sup_bulk,
            r.ver.rho_excess_bulk,
            r.ver.j_sup,
            r.ver.j_sup_bulk,
            r.ver.cmc_dev,
            r.ver.x_weighted,
            r.ver.w_weighted,
            r.ver.apriori_ratio};
}

inline void write_momentum_csv(const std::string& path, const Run& r) {
    CsvFile csv(path, {"epsilon", "skipped", "iters", "restarts", "rel_residual",
                       "rhs_l2", "div_before", "div_after", "trace_after"});
    csv.row_num({r.cfg.epsilon, r.mom.skipped_zero_rhs ? 1.0 : 0.0,
                 double(r.mom.cg.iters), double(r.mom.cg.restarts),
                 r.mom.cg.rel_residual, r.mom.rhs_l2, r.mom.div_before_sup,
                 r.mom.div_after_sup, r.mom.trace_after_sup});
}

inline void write_lich_csv(const std::string& path, const Run& r) {
    const Atlas& at = *r.atlas;
    double vw = weighted_sup_gnorm(*r.metric, r.v, &r.weight, 0.5, false);
    double min_u = 1.0 + (r.v.atlas ? min_owner_scalar(at, r.v) : 0.0);
    CsvFile csv(path, {"epsilon", "picard_iters", "v_sup", "v_weighted",
                       "residual_sup", "min_u", "ball_radius"});
    csv.row_num({r.cfg.epsilon, double(r.lich.iters), r.lich.v_sup, vw,
                 r.lich.fixed_point_residual, min_u, r.lich.ball_radius});
}

inline void write_verify_csv(const std::string& path, const Run& r) {
    CsvFile csv(path,
                {"epsilon", "mu_trace_sup", "mu_div_sup", "licn_residual",
                 "fixed_point_residual", "rho_sup", "rho_bulk", "rho_excess_bulk",
                 "j_sup", "j_bulk", "cmc_dev", "min_u", "v_sup", "v_weighted",
                 "x_weighted", "w_weighted", "apriori_ratio"});
    csv.row_num({r.cfg.epsilon, r.ver.mu_trace_sup, r.ver.mu_div_sup,
                 r.ver.licn_residual_sup, r.ver.fixed_point_residual, r.ver.rho_sup,
                 r.ver.rho_sup_bulk, r.ver.rho_excess_bulk, r.ver.j_sup,
                 r.ver.j_sup_bulk, r.ver.cmc_dev, r.ver.min_u, r.ver.v_sup,
                 r.ver.v_weighted, r.ver.x_weighted, r.ver.w_weighted,
                 r.ver.apriori_ratio});
}

// ---------------------------------------------------------------------------
// Drivers.

inline std::string out_path(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

// Full pipeline at one epsilon; all stages in order.
inline Run run_pipeline_single(const RunConfig& cfg) {
    Run r;
    r.cfg = cfg;
    stage_glue(r);
    stage_momentum(r);
    stage_lich(r);
    stage_verify(r);
    return r;
}

// Sweep driver: one row per epsilon in summary.csv plus a final-state
// snapshot per member.  Falls back to the single configured epsilon when no
// sweep list is given.
inline void run_sweep(const RunConfig& cfg0) {
    std::vector<double> eps = cfg0.sweep_epsilons;
    if (eps.empty()) eps.push_back(cfg0.epsilon);
    CsvFile summary(out_path(cfg0, "summary.csv"), summary_header());
    for (std::size_t k = 0; k < eps.size(); ++k) {
        RunConfig cfg = cfg0;
        cfg.epsilon = eps[k];
        Run r = run_pipeline_single(cfg);
        save_run_snapshot(r, out_path(cfg0, "state_" + std::to_string(k) + ".gluf"));
        summary.row_num(summary_row(r));
    }
}

// Probe reports without any gating: conformal-symmetry spectrum per closed
// summand and the lapse-obstruction spectrum on each diagnostic annulus.
inline void run_probes(const RunConfig& cfg) {
    std::vector<std::string> header = {"probe", "side",      "model",
                                       "resolution", "threshold", "dim"};
    for (int q = 0; q < 12; ++q) header.push_back("s" + std::to_string(q));
    CsvFile csv(out_path(cfg, "probes.csv"), header);
    const ModelSpec* specs[2] = {&cfg.side1, &cfg.side2};
    for (int sd = 0; sd < 2; ++sd) {
        const ModelSpec& s = *specs[sd];
        bool closed = s.kind == ModelKind::flat_torus ||
                      s.kind == ModelKind::bumpy_torus ||
                      s.kind == ModelKind::round_sphere;
        if (closed) {
            Atlas at = instantiate(s, 3, 3, 0, cfg.grid.bulk);
            MetricField m = model_metric(s, at);
            CkvReport rep = ckv_probe(m, cfg.seed + std::uint64_t(sd));
            std::vector<std::string> cells = {"ckv",
                                              std::to_string(sd + 1),
                                              model_kind_name(s.kind),
                                              std::to_string(cfg.grid.bulk),
                                              fmt_g17(rep.threshold),
                                              std::to_string(rep.kernel_dim)};
            for (int q = 0; q < 12; ++q)
                cells.push_back(fmt_g17(q < int(rep.eigs.size()) ? rep.eigs[std::size_t(q)]
                                                                 : 0.0));
            csv.row(cells);
        }
        KidReport kid = kid_annulus_probe(s, cfg.probe_annulus_r1, cfg.grid.bulk,
                                          cfg.seed + 4242 + std::uint64_t(sd));
        std::vector<std::string> cells = {"kid",
                                          std::to_string(sd + 1),
                                          model_kind_name(s.kind),
                                          std::to_string(cfg.grid.bulk),
                                          fmt_g17(kid.threshold),
                                          std::to_string(kid.kid_dim)};
        for (int q = 0; q < 12; ++q)
            cells.push_back(
                fmt_g17(q < int(kid.svals.size()) ? kid.svals[std::size_t(q)] : 0.0));
        csv.row(cells);
    }
}

// Neck profile functions sampled on the tube grid of the configured epsilon.
inline void dump_profile(const RunConfig& cfg) {
    double e = cfg.epsilon;
    double tl = std::log(e);
    double ht = -2.0 * tl / cfg.grid.neck_t;
    CsvFile csv(out_path(cfg, "profile.csv"),
                {"t", "eta_up", "eta_down", "u_side1", "u_side2", "u_eps", "chi_up",
                 "b_cut", "phi2", "a_cut", "rho"});
    for (int i = 0; i < cfg.grid.neck_t; ++i) {
        double t = tl + (i + 0.5) * ht;
        csv.row_num({t, profile::eta(t, e), profile::eta(-t, e),
                     profile::u_summand(t, e, +1), profile::u_summand(t, e, -1),
                     profile::neck_conformal_factor(t, e), profile::cutoff_chi(t),
                     profile::b_cut(t, e), profile::phi2(t, e), profile::a_cut(t, e),
                     profile::weight_tube(t, e)});
    }
}

}  // namespace gluon

#endif
