// Command-line front end for the gluing workbench.
//
// Subcommands mirror the pipeline stages: glue assembles the joined data,
// solve-momentum corrects the transported seed, solve-lich settles the
// conformal factor, verify recomputes every residual from scratch, sweep runs
// the whole pipeline over a list of neck sizes, probes reports degeneracy
// spectra without solving, and dump-profile tabulates the neck profile
// functions.  Stage subcommands can resume from a state snapshot (--in).
//
// Exit codes: 0 success, 2 configuration or capability, 3 degeneracy refusal,
// 4 solver or I/O failure, 5 verification failure.

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "gluon/pipeline.hpp"

namespace {

using namespace gluon;

struct Opts {
    std::string config;
    std::string in;
    std::string out;
    double epsilon = -1.0;  // sentinel: not given
    int threads = -1;       // sentinel: not given (0 = keep environment default)
    long long seed = -1;    // sentinel: not given
};

void apply_overrides(RunConfig& cfg, const Opts& o, bool allow_epsilon) {
    if (o.epsilon > 0.0) {
        if (!allow_epsilon)
            fail(Stage::config, 2,
                 "--epsilon conflicts with --in: the snapshot pins the neck size");
        cfg.epsilon = o.epsilon;
    }
    if (!o.out.empty()) cfg.out_dir = o.out;
    if (o.threads >= 0) cfg.threads = o.threads;
    if (o.seed >= 0) cfg.seed = std::uint64_t(o.seed);
    validate_run_config(cfg);
}

RunConfig config_from_opts(const Opts& o) {
    RunConfig cfg = parse_run_config(o.config);
    apply_overrides(cfg, o, true);
    return cfg;
}

// Build a Run either fresh from a configuration file or resumed from a state
// snapshot, then advance it through the requested stage (1 glue, 2 momentum,
// 3 conformal factor, 4 verification).  Resumed runs redo the requested stage
// and fill in any missing earlier ones.
Run make_run(const Opts& o, int upto) {
    Run r;
    if (!o.in.empty()) {
        r = load_run(o.in);
        apply_overrides(r.cfg, o, false);
        if (r.cfg.threads > 0) set_threads(r.cfg.threads);
    } else {
        if (o.config.empty())
            fail(Stage::config, 2, "either --config or --in is required");
        r.cfg = config_from_opts(o);
        if (r.cfg.threads > 0) set_threads(r.cfg.threads);
        stage_glue(r);
    }
    if (upto >= 2 && (upto == 2 || !r.mu_tt.atlas)) stage_momentum(r);
    if (upto >= 3 && (upto == 3 || !r.v.atlas)) stage_lich(r);
    if (upto >= 4) stage_verify(r);
    return r;
}

void write_glue_csv(const std::string& path, const Run& r) {
    double proto_trace_sup =
        sup_norm(*r.atlas, trace(*r.metric, r.proto.combined));
    CsvFile csv(path, {"epsilon", "total_nodes", "side1_projected",
                       "side1_div_after", "side2_projected", "side2_div_after",
                       "proto_trace_sup"});
    csv.row_num({r.cfg.epsilon, double(r.atlas->total_nodes()),
                 r.sum_projected[0] ? 1.0 : 0.0, r.sum_mom[0].div_after_sup,
                 r.sum_projected[1] ? 1.0 : 0.0, r.sum_mom[1].div_after_sup,
                 proto_trace_sup});
}

int cmd_glue(const Opts& o) {
    Run r = make_run(o, 1);
    save_run_snapshot(r, out_path(r.cfg, "glue.gluf"));
    write_glue_csv(out_path(r.cfg, "glue.csv"), r);
    std::printf("glue: epsilon %.6g, %zu nodes -> %s\n", r.cfg.epsilon,
                r.atlas->total_nodes(), out_path(r.cfg, "glue.gluf").c_str());
    return 0;
}

int cmd_momentum(const Opts& o) {
    Run r = make_run(o, 2);
    save_run_snapshot(r, out_path(r.cfg, "momentum.gluf"));
    write_momentum_csv(out_path(r.cfg, "momentum.csv"), r);
    std::printf(
        "solve-momentum: %s, div sup %.3e -> %.3e (%d iterations)\n",
        r.mom.skipped_zero_rhs ? "skipped (zero source)" : "solved",
        r.mom.div_before_sup, r.mom.div_after_sup, r.mom.cg.iters);
    return 0;
}

int cmd_lich(const Opts& o) {
    Run r = make_run(o, 3);
    save_run_snapshot(r, out_path(r.cfg, "lich.gluf"));
    write_lich_csv(out_path(r.cfg, "lich.csv"), r);
    std::printf(
        "solve-lich: %d iterations%s, sup|v| %.3e, residual %.3e\n",
        r.lich.iters, r.lich.damped ? " (damped retry)" : "", r.lich.v_sup,
        r.lich.fixed_point_residual);
    return 0;
}

int cmd_verify(const Opts& o) {
    Run r = make_run(o, 4);
    write_verify_csv(out_path(r.cfg, "verify.csv"), r);
    std::printf("verify: rho sup %.3e (side charts %.3e), J sup %.3e, "
                "trace sup %.3e, min u %.6g\n",
                r.ver.rho_sup, r.ver.rho_sup_bulk, r.ver.j_sup,
                r.ver.mu_trace_sup, r.ver.min_u);
    return 0;
}

int cmd_sweep(const Opts& o) {
    RunConfig cfg = config_from_opts(o);
    if (cfg.threads > 0) set_threads(cfg.threads);
    run_sweep(cfg);
    std::size_t n = cfg.sweep_epsilons.empty() ? 1 : cfg.sweep_epsilons.size();
    std::printf("sweep: %zu member%s -> %s\n", n, n == 1 ? "" : "s",
                out_path(cfg, "summary.csv").c_str());
    return 0;
}

int cmd_probes(const Opts& o) {
    RunConfig cfg = config_from_opts(o);
    if (cfg.threads > 0) set_threads(cfg.threads);
    run_probes(cfg);
    std::printf("probes: %s\n", out_path(cfg, "probes.csv").c_str());
    return 0;
}

int cmd_profile(const Opts& o) {
    RunConfig cfg = config_from_opts(o);
    dump_profile(cfg);
    std::printf("dump-profile: %s\n", out_path(cfg, "profile.csv").c_str());
    return 0;
}

void add_common(CLI::App* sub, Opts& o, bool with_in) {
    auto* oc = sub->add_option("--config", o.config, "configuration file");
    auto* oe =
        sub->add_option("--epsilon", o.epsilon, "override the neck size epsilon");
    sub->add_option("--out", o.out, "override the output directory");
    sub->add_option("--threads", o.threads, "worker threads (0 = environment)");
    sub->add_option("--seed", o.seed, "override the probe seed");
    if (with_in) {
        auto* oi = sub->add_option("--in", o.in, "resume from a state snapshot");
        oi->excludes(oc);
        oi->excludes(oe);
    } else {
        oc->required();
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical workbench for glued initial data"};
    app.require_subcommand(1);
    Opts o;

    CLI::App* s_glue = app.add_subcommand("glue", "assemble the joined data");
    CLI::App* s_mom =
        app.add_subcommand("solve-momentum", "correct the transported seed");
    CLI::App* s_lich =
        app.add_subcommand("solve-lich", "settle the conformal factor");
    CLI::App* s_verify =
        app.add_subcommand("verify", "recompute all residuals from scratch");
    CLI::App* s_sweep =
        app.add_subcommand("sweep", "full pipeline over a list of neck sizes");
    CLI::App* s_probes =
        app.add_subcommand("probes", "degeneracy spectra, no solving");
    CLI::App* s_prof =
        app.add_subcommand("dump-profile", "tabulate the neck profile functions");

    add_common(s_glue, o, false);
    add_common(s_mom, o, true);
    add_common(s_lich, o, true);
    add_common(s_verify, o, true);
    add_common(s_sweep, o, false);
    add_common(s_probes, o, false);
    add_common(s_prof, o, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(s_glue)) return cmd_glue(o);
        if (app.got_subcommand(s_mom)) return cmd_momentum(o);
        if (app.got_subcommand(s_lich)) return cmd_lich(o);
        if (app.got_subcommand(s_verify)) return cmd_verify(o);
        if (app.got_subcommand(s_sweep)) return cmd_sweep(o);
        if (app.got_subcommand(s_probes)) return cmd_probes(o);
        if (app.got_subcommand(s_prof)) return cmd_profile(o);
    } catch (const gluon::Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", gluon::stage_name(e.stage),
                     e.what());
        return e.exit_code;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
    return 0;
}
