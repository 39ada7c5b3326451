#ifndef GLUON_MOMENTUM_HPP
#define GLUON_MOMENTUM_HPP

#include <cmath>

#include "gluon/geometry.hpp"
#include "gluon/krylov.hpp"
#include "gluon/probes.hpp"

namespace gluon {

// sup over owner nodes of the pointwise g-norm of a vector field.
inline double sup_gnorm_vec(const MetricField& m, const Field& v) {
    const Atlas& at = *m.atlas;
    double best = 0.0;
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        double mx = reduce_max(
            c.nn(),
            [&](std::size_t lo, std::size_t hi) {
                double w = 0.0;
                for (std::size_t idx = lo; idx < hi; ++idx) {
                    if (!c.owns(idx)) continue;
                    Sym3 gn = m.g_at(int(ci), idx);
                    double acc = 0.0;
                    for (int p = 0; p < 3; ++p)
                        for (int q = 0; q < 3; ++q)
                            acc += gn[std::size_t(sym_idx(p, q))] * v.comp(int(ci), p)[idx] *
                                   v.comp(int(ci), q)[idx];
                    w = std::max(w, std::sqrt(std::max(acc, 0.0)));
                }
                return w;
            },
            0.0);
        best = std::max(best, mx);
    }
    return best;
}

// Right-hand side of the correction equation: the divergence of mu with an
// index raised, so that L X = div mu makes mu + D X divergence free.
inline Field momentum_rhs(const MetricField& m, Field& mu_low) {
    fill_fringe(mu_low);
    Field mu_up = raise_sym(m, mu_low);
    return divergence_sym(m, mu_up);
}

struct MomentumReport {
    CgReport cg;
    double rhs_l2 = 0.0;
    double div_before_sup = 0.0;
    double div_after_sup = 0.0;
    double trace_after_sup = 0.0;
    int gate_kernel_dim = 0;
    double gate_smallest = 0.0;
    double gate_threshold = 0.0;
    bool gate_checked = false;
    bool skipped_zero_rhs = false;
};

// Solve L X = div mu for the correction vector field.  Refuses (exit 3 via
// Error) when the operator has a detected symmetry kernel, the right-hand
// side actually requires a solve, and the caller did not force; a forced run
// deflates the detected kernel from the solve instead.  Refuses (exit 4)
// when CG fails.
inline MomentumReport solve_momentum(const MetricField& m, Field& mu_low, Field& X,
                                     const LinearSolveConfig& cfg, bool run_gate = true,
                                     bool force = false) {
    MomentumReport rep;
    Field rhs = momentum_rhs(m, mu_low);
    rep.rhs_l2 = std::sqrt(std::max(ip_vector(m, rhs, rhs, true), 0.0));
    rep.div_before_sup = sup_gnorm_vec(m, rhs);

    double md = mean_diag(m);
    double mu_scale = l2_norm_sym(m, mu_low);
    X.set_zero();
    if (rep.rhs_l2 <= 1e-13 * md * mu_scale || mu_scale == 0.0) {
        rep.skipped_zero_rhs = true;
        rep.cg.converged = true;
        return rep;
    }

    std::vector<Field> kernel;
    if (run_gate) {
        CkvReport gate = ckv_gate(m);
        rep.gate_checked = true;
        rep.gate_kernel_dim = gate.kernel_dim;
        rep.gate_smallest = gate.eigs.empty() ? 0.0 : gate.eigs.front();
        rep.gate_threshold = gate.threshold;
        if (gate.kernel_dim > 0) {
            if (!force)
                fail(Stage::momentum, 3,
                     "conformal symmetries obstruct the correction solve (kernel dim " +
                         std::to_string(gate.kernel_dim) + ", smallest eigenvalue " +
                         std::to_string(rep.gate_smallest) + " below threshold " +
                         std::to_string(gate.threshold) +
                         "); kernel detected without force flag");
            kernel = std::move(gate.near_kernel);
        }
    }

    VectorLaplacian L(m);
    auto apply = [&](Field& x, Field& out) { L.apply(x, out); };
    auto ip = [&](const Field& a, const Field& b) { return ip_vector(m, a, b); };
    // Forced runs project the solve orthogonal to the detected kernel.
    auto proj = [&](Field& v) {
        for (const Field& k : kernel) v.axpy(-ip_vector(m, v, k), k);
    };
    proj(rhs);
    Field inv_diag = cfg.precond == "none" ? Field() : inverse_diag_field(m, cfg.precond);
    // GMRES with deep restarts: the composite operator across seam
    // interpolation is not symmetric enough for CG on glued atlases, and its
    // band of near-null grid modes on the neck needs Krylov depth close to
    // the full iteration count before the residual can pass through it.
    rep.cg = gmres_field(apply, ip, proj, rhs, X,
                         cfg.precond == "none" ? nullptr : &inv_diag, cfg);
    if (!rep.cg.converged)
        fail(Stage::momentum, 4,
             "correction solve did not converge (relative residual " +
                 std::to_string(rep.cg.rel_residual) + " after " +
                 std::to_string(rep.cg.iters) + " iterations, " +
                 std::to_string(rep.cg.restarts) + " restarts)");
    return rep;
}

// mu + D X; trace-free by construction of both terms.
inline Field corrected_tt(const MetricField& m, const Field& mu_low, Field& X) {
    Field dx = conformal_killing(m, X);
    fill_fringe(dx);
    Field out = sym_field(*m.atlas);
    out.copy_from(mu_low);
    out.axpy(1.0, dx);
    return out;
}

// Fills in the after-correction diagnostics of a report.
inline void momentum_diagnostics(const MetricField& m, Field& mu_corr, MomentumReport& rep) {
    Field div_after = momentum_rhs(m, mu_corr);
    rep.div_after_sup = sup_gnorm_vec(m, div_after);
    Field tr = trace(m, mu_corr);
    rep.trace_after_sup = sup_norm(*m.atlas, tr);
}

}  // namespace gluon

#endif
