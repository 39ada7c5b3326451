#ifndef GLUON_CONSTRAINTS_HPP
#define GLUON_CONSTRAINTS_HPP

#include <cmath>

#include "gluon/geometry.hpp"

namespace gluon {

// Physical initial data set: metric plus second fundamental form, constant
// mean curvature tau.
struct PhysicalData {
    MetricField g;
    Field pi;  // lower symmetric
    double tau = 0.0;
};

// Undo the conformal split: g_phys = (1+v)^4 g, pi = (1+v)^{-2} mu + (tau/3) g_phys.
inline PhysicalData conformal_reconstruct(const MetricField& m, const Field& mu_corr,
                                          Field& v, double tau) {
    const Atlas& at = *m.atlas;
    fill_fringe(v);
    Field gphys = sym_field(at);
    Field pi = sym_field(at);
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        std::size_t nn = c.nn();
        const double* vv = v.comp(int(ci), 0);
        for (std::size_t idx = 0; idx < nn; ++idx) {
            double u = 1.0 + vv[idx];
            if (c.cls(idx) >= NodeClass::fringe && !(u > 0.0))
                fail(Stage::verification, 5,
                     "conformal factor not positive at " + c.describe_node(idx));
            double u2 = u * u;
            double u4 = u2 * u2;
            for (int q = 0; q < 6; ++q) {
                double gp = u4 * m.g.comp(int(ci), q)[idx];
                gphys.comp(int(ci), q)[idx] = gp;
                pi.comp(int(ci), q)[idx] =
                    mu_corr.comp(int(ci), q)[idx] / (u2 != 0.0 ? u2 : 1.0) +
                    (tau / 3.0) * gp;
            }
        }
    }
    return PhysicalData{MetricField(at, gphys, Stage::verification), std::move(pi), tau};
}

// Scalar constraint R - |pi|^2 + (tr pi)^2, at compute nodes (vacuum, zero
// cosmological constant: this should vanish on solutions).
inline Field hamiltonian(const PhysicalData& d) {
    const MetricField& m = d.g;
    const Atlas& at = *m.atlas;
    Field out = scalar_curvature(m);
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        std::size_t nn = c.nn();
        double* o = out.comp(int(ci), 0);
        parallel_for(nn, [&, ci, o](std::size_t b, std::size_t e) {
            for (std::size_t idx = b; idx < e; ++idx) {
                if (!c.computes(idx)) continue;
                Sym3 p;
                for (int q = 0; q < 6; ++q) p[std::size_t(q)] = d.pi.comp(int(ci), q)[idx];
                Sym3 gi = m.ginv_at(int(ci), idx);
                double tr = trace_node(gi, p);
                o[idx] += -norm2_sym_node(gi, p) + tr * tr;
            }
        });
    }
    return out;
}

// Momentum constraint (div pi)_flat - d(tr pi), a one-form at compute nodes.
inline Field momentum_J(PhysicalData& d) {
    const MetricField& m = d.g;
    const Atlas& at = *m.atlas;
    fill_fringe(d.pi);
    Field pi_up = raise_sym(m, d.pi);
    Field div_up = divergence_sym(m, pi_up);
    fill_fringe(div_up);
    Field div_low = one_form_field(at);
    lower_vec_into(m, div_up, div_low);
    Field tr = trace(m, d.pi);
    fill_fringe(tr);
    Field out = one_form_field(at);
    out.set_zero();
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        std::size_t nn = c.nn();
        const double* trc = tr.comp(int(ci), 0);
        parallel_for(nn, [&, ci, trc](std::size_t b, std::size_t e) {
            for (std::size_t idx = b; idx < e; ++idx) {
                if (!c.computes(idx)) continue;
                int i, j, k;
                c.unpack(idx, i, j, k);
                for (int a = 0; a < 3; ++a)
                    out.comp(int(ci), a)[idx] =
                        div_low.comp(int(ci), a)[idx] - d1(c, trc, 1.0, i, j, k, a);
            }
        });
    }
    return out;
}

// sup |tr pi - tau| over owner nodes: the constant-mean-curvature check.
inline double cmc_deviation(const PhysicalData& d) {
    const MetricField& m = d.g;
    const Atlas& at = *m.atlas;
    Field tr = trace(m, d.pi);
    double best = 0.0;
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        const double* trc = tr.comp(int(ci), 0);
        double mx = reduce_max(
            c.nn(),
            [&, trc](std::size_t lo, std::size_t hi) {
                double w = 0.0;
                for (std::size_t idx = lo; idx < hi; ++idx)
                    if (c.owns(idx)) w = std::max(w, std::fabs(trc[idx] - d.tau));
                return w;
            },
            0.0);
        best = std::max(best, mx);
    }
    return best;
}

}  // namespace gluon

#endif
