#ifndef GLUON_GLUE_HPP
#define GLUON_GLUE_HPP

#include <cmath>

#include "gluon/models.hpp"

namespace gluon {

// Glued metric, one closed form per chart kind:
//  - tube charts carry u_eps(t)^4 (dt^2 + dOmega^2); near either mouth this
//    is exactly the flat metric of that side, mid-neck it interpolates;
//  - bulk charts carry psi(r) (1+p)^4 delta, where psi encodes the neck seen
//    from outside (psi == 1 from r = 1 out) and p is that side's bump
//    potential (supported outside the unit ball, so the factors never act
//    together).
inline Sym3 glued_metric_at(const Atlas& at, const Chart& c, const Vec3& xi,
                            const ModelSpec& m1, const ModelSpec& m2) {
    double eps = at.eps;
    switch (c.kind) {
        case ChartKind::neck:
        case ChartKind::ae_end: {
            double u = profile::neck_conformal_factor(xi[0], eps);
            double u2 = u * u;
            double w = u2 * u2;
            double st = std::sin(xi[1]);
            return Sym3{w, 0, 0, w, 0, w * st * st};
        }
        case ChartKind::bulk1:
        case ChartKind::bulk2: {
            const ModelSpec& ms = (c.kind == ChartKind::bulk1) ? m1 : m2;
            Vec3 d = box_offset(c, xi);
            double r = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            r = std::max(r, 1e-12);
            double psi = profile::psi_bulk(r, eps, c.side);
            double f = 1.0 + bump_sum(ms, xi);
            double f2 = f * f;
            double w = psi * f2 * f2;
            return Sym3{w, 0, 0, w, 0, w};
        }
        default:
            fail(Stage::gluing, 4, "glued metric requested on a non-glued chart");
    }
}

inline MetricField assemble_glued_metric(const Atlas& at, const ModelSpec& m1,
                                         const ModelSpec& m2) {
    return MetricField(
        at,
        [&](int chart, const Vec3& xi) {
            return glued_metric_at(at, at.charts[std::size_t(chart)], xi, m1, m2);
        },
        Stage::gluing);
}

// Interior distance weight rho_eps: eps cosh t through the tube, 1 in the
// outer bulk, monotone in between.
inline Field weight_field(const Atlas& at) {
    Field w = scalar_field(at);
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        std::size_t nn = c.nn();
        double* o = w.comp(int(ci), 0);
        for (std::size_t idx = 0; idx < nn; ++idx) {
            int i, j, k;
            c.unpack(idx, i, j, k);
            if (c.kind == ChartKind::neck || c.kind == ChartKind::ae_end) {
                o[idx] = profile::weight_tube(c.coord(0, i), at.eps);
            } else {
                Vec3 d = box_offset(c, c.coords(i, j, k));
                double r = std::max(std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]),
                                    1e-12);
                o[idx] = profile::weight_bulk(r, at.eps);
            }
        }
    }
    return w;
}

// Side cutoff on the glued atlas: side 1 gets chi(t), side 2 gets chi(-t),
// with t the side-1 tube coordinate (t = log(eps/r) seen from side 1).
// The two fields sum to 1 everywhere.
inline Field side_cutoff_field(const Atlas& at, int side) {
    Field w = scalar_field(at);
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        std::size_t nn = c.nn();
        double* o = w.comp(int(ci), 0);
        for (std::size_t idx = 0; idx < nn; ++idx) {
            int i, j, k;
            c.unpack(idx, i, j, k);
            double t1;
            if (c.kind == ChartKind::neck || c.kind == ChartKind::ae_end) {
                t1 = c.coord(0, i);
            } else {
                Vec3 d = box_offset(c, c.coords(i, j, k));
                double r = std::max(std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]),
                                    1e-12);
                t1 = double(c.side) * std::log(at.eps / r);
            }
            o[idx] = profile::cutoff_chi(side == 1 ? t1 : -t1);
        }
    }
    return w;
}

struct ProtoTT {
    Field combined;  // chi-weighted sum of both transported seeds, trace removed
    Field side1;     // unweighted transported side-1 tensor
    Field side2;     // unweighted transported side-2 tensor
};

namespace detail {

// Transported seed of one side at a tube-coordinate node: pull the constant
// box-coordinate matrix back through x = eps e^{-s t} n(theta) and apply the
// conformal factor (u_side / u_eps)^2.
inline Sym3 tube_transported_seed(double eps, int side, const Vec3& tth, const Sym3& M) {
    Mat3 J;
    tube_to_box(eps, side, tth, &J);
    Sym3 t = sym_congruence(J, M);
    double us = profile::u_summand(tth[0], eps, side);
    double ue = profile::neck_conformal_factor(tth[0], eps);
    double fac = (us / ue) * (us / ue);
    for (double& v : t) v *= fac;
    return t;
}

}  // namespace detail

// Proto transverse-traceless tensor on the glued atlas.  Each side's seed is
// transported into every chart with the conformal weight (u_i/u_eps)^2 and
// blended with the side cutoffs; the result has exact pointwise zero g-trace.
// When a side supplies a full summand field (same grid as its bulk chart),
// that field replaces the constant matrix on its own bulk chart.
inline ProtoTT assemble_proto_tt(const Atlas& at, const MetricField& g,
                                 const ModelSpec& m1, const ModelSpec& m2,
                                 const Sym3& M1, const Sym3& M2,
                                 const Field* field1 = nullptr,
                                 const Field* field2 = nullptr) {
    ProtoTT out{sym_field(at), sym_field(at), sym_field(at)};
    out.combined.set_zero();
    out.side1.set_zero();
    out.side2.set_zero();
    double eps = at.eps;
    (void)m1;
    (void)m2;
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        std::size_t nn = c.nn();
        const Field* own_field =
            (c.kind == ChartKind::bulk1) ? field1 : (c.kind == ChartKind::bulk2) ? field2
                                                                                 : nullptr;
        if (own_field && own_field->atlas->charts[0].n[0] != c.n[0])
            fail(Stage::gluing, 4, "summand seed grid does not match the bulk chart");
        parallel_for(nn, [&, ci](std::size_t b, std::size_t e) {
            for (std::size_t idx = b; idx < e; ++idx) {
                int i, j, k;
                c.unpack(idx, i, j, k);
                Vec3 xi = c.coords(i, j, k);
                Sym3 t1{0, 0, 0, 0, 0, 0}, t2{0, 0, 0, 0, 0, 0};
                double chi1, chi2;
                if (c.kind == ChartKind::neck || c.kind == ChartKind::ae_end) {
                    t1 = detail::tube_transported_seed(eps, +1, xi, M1);
                    t2 = detail::tube_transported_seed(eps, -1, xi, M2);
                    chi1 = profile::cutoff_chi(xi[0]);
                    chi2 = profile::cutoff_chi(-xi[0]);
                } else {
                    int s = c.side;
                    Vec3 d = box_offset(c, xi);
                    double r = std::max(
                        std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]), 1e-12);
                    double tloc = std::log(eps / r);
                    chi1 = profile::cutoff_chi(s == +1 ? tloc : -tloc);
                    chi2 = 1.0 - chi1;
                    // near side: own seed scaled by (u_near/u_eps)^2 = r/u_eps^2
                    double ue = profile::neck_conformal_factor(double(s) * tloc, eps);
                    double fac_near = r / (ue * ue);
                    Sym3 near_seed;
                    if (own_field) {
                        for (int q = 0; q < 6; ++q)
                            near_seed[std::size_t(q)] = own_field->comp(0, q)[idx];
                    } else {
                        near_seed = (s == +1) ? M1 : M2;
                    }
                    for (double& v : near_seed) v *= fac_near;
                    // far side: Kelvin inversion through the neck
                    Mat3 Jk;
                    stereo_flip(eps, d, &Jk);
                    Sym3 far_seed = sym_congruence(Jk, (s == +1) ? M2 : M1);
                    double uf = profile::u_summand(double(s) * tloc, eps, -s);
                    double fac_far = (uf / ue) * (uf / ue);
                    for (double& v : far_seed) v *= fac_far;
                    if (s == +1) {
                        t1 = near_seed;
                        t2 = far_seed;
                    } else {
                        t1 = far_seed;
                        t2 = near_seed;
                    }
                }
                Sym3 sum;
                for (int q = 0; q < 6; ++q) {
                    out.side1.comp(int(ci), q)[idx] = t1[std::size_t(q)];
                    out.side2.comp(int(ci), q)[idx] = t2[std::size_t(q)];
                    sum[std::size_t(q)] =
                        chi1 * t1[std::size_t(q)] + chi2 * t2[std::size_t(q)];
                }
                Sym3 gn = g.g_at(int(ci), idx);
                double tr = trace_node(g.ginv_at(int(ci), idx), sum);
                for (int q = 0; q < 6; ++q)
                    out.combined.comp(int(ci), q)[idx] =
                        sum[std::size_t(q)] - (tr / 3.0) * gn[std::size_t(q)];
            }
        });
    }
    return out;
}

}  // namespace gluon

#endif
