#ifndef GLUON_LICH_HPP
#define GLUON_LICH_HPP

#include <cmath>
#include <vector>

#include "gluon/glue.hpp"
#include "gluon/krylov.hpp"

namespace gluon {

// Constants of the conformally formulated scalar constraint in dimension m.
struct LichConstants {
    double c;      // (m-2)/(4(m-1))
    double p;      // (3m-2)/(m-2)
    double q;      // (m+2)/(m-2)
    double theta;  // (m-1)/m
    double b;      // c*p
};

inline LichConstants lich_constants(int m) {
    if (m < 3) fail(Stage::lichnerowicz, 2, "dimension must be at least 3");
    LichConstants k;
    k.c = double(m - 2) / (4.0 * double(m - 1));
    k.p = double(3 * m - 2) / double(m - 2);
    k.q = double(m + 2) / double(m - 2);
    k.theta = double(m - 1) / double(m);
    k.b = k.c * k.p;
    return k;
}

// Nonlinear remainders beyond the linearization at u = 1:
//   h(v) = (1+v)^{-p} - 1 + p v,   f(v) = (1+v)^q - 1 - q v.
inline double remainder_h(double v, double p) {
    return std::pow(1.0 + v, -p) - 1.0 + p * v;
}
inline double remainder_f(double v, double q) {
    return std::pow(1.0 + v, q) - 1.0 - q * v;
}

// Pointwise ingredients of the scalar solve on the glued atlas, all frozen
// before iterating.
struct LichSetup {
    LichConstants k;
    double tau = 0.0;
    Field potential;    // W >= 0 in the model operator  lap v - W v
    Field r_disc;       // discrete scalar curvature of the glued metric
    Field mu2;          // |mu_eps|^2 in the glued metric (corrected tensor)
    Field deficit_sum;  // sum_i chi_i * c * (|mu_i|^2 - theta tau^2 - R_i)
};

// Analytic scalar curvature of summand i at a point of its own bulk chart;
// zero away from the bump support, hence zero on every other chart.
inline double summand_curvature_analytic(const ModelSpec& ms, const Vec3& x) {
    double p = bump_sum(ms, x);
    double f = 1.0 + p;
    return -8.0 * std::pow(f, -5.0) * bump_sum_laplacian(ms, x);
}

inline LichSetup build_lich_setup(const MetricField& m, const ProtoTT& proto,
                                  const Field& mu_corrected, const ModelSpec& m1,
                                  const ModelSpec& m2, double tau) {
    const Atlas& at = *m.atlas;
    LichSetup s;
    s.k = lich_constants(at.dim_m);
    s.tau = tau;
    s.r_disc = scalar_curvature(m);
    s.mu2 = norm2_sym(m, mu_corrected);
    Field mu2_1 = norm2_sym(m, proto.side1);
    Field mu2_2 = norm2_sym(m, proto.side2);
    Field chi1 = side_cutoff_field(at, 1);
    Field chi2 = side_cutoff_field(at, 2);
    s.potential = scalar_field(at);
    s.deficit_sum = scalar_field(at);
    double tau2 = tau * tau;
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        std::size_t nn = c.nn();
        double* W = s.potential.comp(int(ci), 0);
        double* D = s.deficit_sum.comp(int(ci), 0);
        const double* x1 = chi1.comp(int(ci), 0);
        const double* x2 = chi2.comp(int(ci), 0);
        const double* q1 = mu2_1.comp(int(ci), 0);
        const double* q2 = mu2_2.comp(int(ci), 0);
        for (std::size_t idx = 0; idx < nn; ++idx) {
            W[idx] = s.k.b * (x1[idx] * q1[idx] + x2[idx] * q2[idx]) +
                     s.k.c * s.k.q * s.k.theta * tau2;
            double r1 = 0.0, r2 = 0.0;
            if (c.kind == ChartKind::bulk1 || c.kind == ChartKind::bulk2) {
                int i, j, k;
                c.unpack(idx, i, j, k);
                Vec3 xi = c.coords(i, j, k);
                double ran = summand_curvature_analytic(
                    c.kind == ChartKind::bulk1 ? m1 : m2, xi);
                (c.kind == ChartKind::bulk1 ? r1 : r2) = ran;
            }
            double d1v = s.k.c * (q1[idx] - s.k.theta * tau2 - r1);
            double d2v = s.k.c * (q2[idx] - s.k.theta * tau2 - r2);
            D[idx] = x1[idx] * d1v + x2[idx] * d2v;
        }
    }
    return s;
}

// Model linear operator: lap v - W v.
struct LichOperator {
    const MetricField* m;
    const Field* W;
    ScalarLaplacian lap;

    LichOperator(const MetricField& mf, const Field& pot)
        : m(&mf), W(&pot), lap(mf) {}

    void apply(Field& v, Field& out) {
        lap.apply(v, out);
        const Atlas& at = *m->atlas;
        for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
            const Chart& c = at.charts[ci];
            std::size_t nn = c.nn();
            double* o = out.comp(int(ci), 0);
            const double* w = W->comp(int(ci), 0);
            const double* vv = v.comp(int(ci), 0);
            parallel_for(nn, [&, o, w, vv](std::size_t b, std::size_t e) {
                for (std::size_t idx = b; idx < e; ++idx)
                    if (c.computes(idx)) o[idx] -= w[idx] * vv[idx];
            });
        }
    }
};

inline void linearized_apply(const MetricField& m, const LichSetup& s, Field& v,
                             Field& out) {
    LichOperator op(m, s.potential);
    out.set_zero();
    op.apply(v, out);
}

// Pointwise source F(v): defined so that identically
//   lap v - W v - F(v) = licn(1+v) - (1+v) * deficit_sum,
// where licn is the full discrete conformal scalar operator.  Contains no
// derivatives of v.  Fails (exit 5) if 1+v leaves the positive cone.
inline Field error_term(const MetricField& m, const LichSetup& s, const Field& v) {
    const Atlas& at = *m.atlas;
    Field out = scalar_field(at);
    const LichConstants& k = s.k;
    double tau2 = s.tau * s.tau;
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        std::size_t nn = c.nn();
        double* o = out.comp(int(ci), 0);
        const double* vv = v.comp(int(ci), 0);
        const double* R = s.r_disc.comp(int(ci), 0);
        const double* M = s.mu2.comp(int(ci), 0);
        const double* W = s.potential.comp(int(ci), 0);
        const double* D = s.deficit_sum.comp(int(ci), 0);
        for (std::size_t idx = 0; idx < nn; ++idx) {
            if (!c.computes(idx)) {
                o[idx] = 0.0;
                continue;
            }
            double vn = vv[idx];
            if (!(1.0 + vn > 1e-6))
                fail(Stage::lichnerowicz, 5,
                     "conformal factor lost positivity at " + c.describe_node(idx));
            double lin = k.c * R[idx] + k.b * M[idx] + k.c * k.q * k.theta * tau2;
            o[idx] = (lin - W[idx]) * vn + k.c * (R[idx] - M[idx] + k.theta * tau2) -
                     k.c * M[idx] * remainder_h(vn, k.p) +
                     k.c * k.theta * tau2 * remainder_f(vn, k.q) +
                     (1.0 + vn) * D[idx];
        }
    }
    return out;
}

// Full discrete conformal scalar operator at u = 1 + v:
//   licn(u) = lap u - c R u + c |mu|^2 u^{-p} - c theta tau^2 u^{q}.
inline Field licn_apply(const MetricField& m, const LichSetup& s, Field& u) {
    const Atlas& at = *m.atlas;
    Field out = scalar_field(at);
    out.set_zero();
    ScalarLaplacian lap(m);
    lap.apply(u, out);
    const LichConstants& k = s.k;
    double tau2 = s.tau * s.tau;
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        std::size_t nn = c.nn();
        double* o = out.comp(int(ci), 0);
        const double* uu = u.comp(int(ci), 0);
        const double* R = s.r_disc.comp(int(ci), 0);
        const double* M = s.mu2.comp(int(ci), 0);
        for (std::size_t idx = 0; idx < nn; ++idx) {
            if (!c.computes(idx)) continue;
            double un = uu[idx];
            o[idx] += -k.c * R[idx] * un + k.c * M[idx] * std::pow(un, -k.p) -
                      k.c * k.theta * tau2 * std::pow(un, k.q);
        }
    }
    return out;
}

struct LichConfig {
    int max_iters = 100;
    double tol_increment = 1e-10;  // sup-norm stop for v_{k+1} - v_k
    double ball_exponent = 0.45;   // contraction ball radius eps^exponent
    double damping = 0.5;
    int divergence_streak = 3;
    double trivial_floor = 0.1;    // |F(0)| level accepted as v = 0 when the
                                   // potential vanishes on a closed atlas
    LinearSolveConfig inner;
};

struct LichReport {
    int iters = 0;
    bool converged = false;
    bool damped = false;
    double ball_radius = 0.0;
    double v_sup = 0.0;
    double final_increment = 0.0;
    double fixed_point_residual = 0.0;  // sup | (lap - W)v - F(v) |, owner nodes
    std::vector<double> increments;
    CgReport last_cg;
};

// Picard iteration v_{k+1} = solve(lap - W, F(v_k)) inside the ball
// |v| <= eps^0.45, with one damped retry; divergence is three consecutive
// increment growths.
inline LichReport picard_solve(const MetricField& m, const LichSetup& s,
                               const LichConfig& cfg, Field& v) {
    const Atlas& at = *m.atlas;
    LichReport rep;
    rep.ball_radius = std::pow(at.eps > 0.0 ? at.eps : 0.1, cfg.ball_exponent);

    // With no potential the linear operator is a bare Laplacian.  A Robin
    // outer edge still makes it invertible; on a closed atlas the constants
    // are in its kernel, so either the data is already consistent with the
    // trivial factor at the discretization floor, or we must refuse.
    bool robin_edge = false;
    for (const Chart& c : at.charts) robin_edge = robin_edge || c.robin_nu != 0.0;
    if (sup_norm(at, s.potential) == 0.0 && !robin_edge) {
        v.set_zero();
        Field f0 = error_term(m, s, v);
        double f0sup = sup_norm(at, f0);
        if (f0sup <= cfg.trivial_floor) {
            rep.iters = 1;
            rep.converged = true;
            rep.fixed_point_residual = f0sup;
            rep.increments.push_back(0.0);
            return rep;
        }
        fail(Stage::lichnerowicz, 3,
             "model operator has no potential (no seed energy and zero mean "
             "curvature) and the data needs a correction (|F(0)| = " +
                 std::to_string(f0sup) + "); the linear solve would be singular");
    }

    LichOperator L(m, s.potential);
    auto apply_neg = [&](Field& x, Field& out) {
        L.apply(x, out);
        out.scale(-1.0);
    };
    auto ip = [&](const Field& a, const Field& b) { return ip_scalar(m, a, b); };
    auto noproj = [](Field&) {};
    Field inv_diag = inverse_diag_field(m, cfg.inner.precond == "none"
                                               ? "neck_weighted_diagonal"
                                               : cfg.inner.precond);

    auto run = [&](double damping) -> bool {
        v.set_zero();
        rep.increments.clear();
        Field vnew = scalar_field(at);
        Field rhs = scalar_field(at);
        Field diff = scalar_field(at);
        double prev_inc = 0.0;
        int growth_streak = 0;
        for (rep.iters = 1; rep.iters <= cfg.max_iters; ++rep.iters) {
            Field f = error_term(m, s, v);
            rhs.copy_from(f);
            rhs.scale(-1.0);  // solve (-lap + W) vnew = -F
            vnew.set_zero();
            // Seam interpolation leaves the composite Helmholtz operator
            // slightly nonsymmetric, which stalls CG on glued atlases; GMRES
            // minimizes the true residual regardless.
            rep.last_cg = gmres_field(apply_neg, ip, noproj, rhs, vnew, &inv_diag, cfg.inner);
            if (!rep.last_cg.converged)
                fail(Stage::lichnerowicz, 4,
                     "inner linear solve stalled (relative residual " +
                         std::to_string(rep.last_cg.rel_residual) + ")");
            if (damping != 1.0) {
                // vnew <- (1-d) v + d vnew
                vnew.scale(damping);
                vnew.axpy(1.0 - damping, v);
            }
            diff.copy_from(vnew);
            diff.axpy(-1.0, v);
            double inc = sup_norm(at, diff);
            rep.increments.push_back(inc);
            v.copy_from(vnew);
            rep.v_sup = sup_norm(at, v);
            rep.final_increment = inc;
            if (rep.v_sup > rep.ball_radius) return false;  // left the ball
            if (inc <= cfg.tol_increment) {
                rep.converged = true;
                return true;
            }
            if (rep.iters > 1 && inc > prev_inc) {
                if (++growth_streak >= cfg.divergence_streak) return false;
            } else {
                growth_streak = 0;
            }
            prev_inc = inc;
        }
        return false;  // out of iterations
    };

    if (!run(1.0)) {
        rep.damped = true;
        rep.converged = false;
        if (!run(cfg.damping))
            fail(Stage::lichnerowicz, 5,
                 "fixed-point iteration failed to settle (last increment " +
                     std::to_string(rep.final_increment) + ", sup|v| " +
                     std::to_string(rep.v_sup) + ", ball " +
                     std::to_string(rep.ball_radius) + ")");
    }

    // residual of the discrete fixed-point equation at the final iterate
    Field lv = scalar_field(at);
    linearized_apply(m, s, v, lv);
    Field f = error_term(m, s, v);
    lv.axpy(-1.0, f);
    rep.fixed_point_residual = sup_norm(at, lv);
    return rep;
}

}  // namespace gluon

#endif
