#ifndef GLUON_METRIC_HPP
#define GLUON_METRIC_HPP

#include <functional>
#include <string>
#include <vector>

#include "gluon/field.hpp"
#include "gluon/stencil.hpp"

namespace gluon {

// Metric with cached inverse, volume element and Christoffel symbols.
// The metric evaluator is a closed form per chart, so values exist at every
// node (fringe included); caches are stencil-built with one-sided fallbacks
// at true chart edges.  Positive-definiteness is checked at every non-dead
// node and failures report the offending location.
struct MetricField {
    const Atlas* atlas = nullptr;
    Field g;      // sym2_low
    Field ginv;   // sym2_up
    Field sqrtg;  // scalar
    // Gamma^i_{jk}: [chart][(i*6 + sym(j,k)) * nn + node]
    std::vector<std::vector<double>> gam;

    MetricField() = default;

    MetricField(const Atlas& at,
                const std::function<Sym3(int chart, const Vec3& xi)>& eval,
                Stage err_stage = Stage::gluing)
        : atlas(&at), g(at, Variance::sym2_low), ginv(at, Variance::sym2_up),
          sqrtg(at, Variance::scalar) {
        for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
            const Chart& c = at.charts[ci];
            std::size_t nn = c.nn();
            for (std::size_t idx = 0; idx < nn; ++idx) {
                int i, j, k;
                c.unpack(idx, i, j, k);
                Sym3 gn = eval(int(ci), c.coords(i, j, k));
                double det = sym_det(gn);
                if (c.cls(idx) >= NodeClass::fringe) {
                    if (!(det > 0.0) || !sym_is_spd(gn))
                        fail(err_stage, 4,
                             "metric not positive definite at " + c.describe_node(idx));
                }
                Sym3 gi = det != 0.0 ? sym_inverse(gn, det) : Sym3{1, 0, 0, 1, 0, 1};
                for (int q = 0; q < 6; ++q) {
                    g.comp(int(ci), q)[idx] = gn[std::size_t(q)];
                    ginv.comp(int(ci), q)[idx] = gi[std::size_t(q)];
                }
                sqrtg.comp(int(ci), 0)[idx] = det > 0.0 ? std::sqrt(det) : 1.0;
            }
        }
        build_christoffel();
    }

    // Same caches, but from stored component values (e.g. a conformally
    // rescaled metric) instead of a closed form.
    MetricField(const Atlas& at, const Field& gvals, Stage err_stage)
        : atlas(&at), g(at, Variance::sym2_low), ginv(at, Variance::sym2_up),
          sqrtg(at, Variance::scalar) {
        g.copy_from(gvals);
        for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
            const Chart& c = at.charts[ci];
            std::size_t nn = c.nn();
            for (std::size_t idx = 0; idx < nn; ++idx) {
                Sym3 gn = g_at(int(ci), idx);
                double det = sym_det(gn);
                if (c.cls(idx) >= NodeClass::fringe) {
                    if (!(det > 0.0) || !sym_is_spd(gn))
                        fail(err_stage, 4,
                             "metric not positive definite at " + c.describe_node(idx));
                }
                Sym3 gi = det != 0.0 ? sym_inverse(gn, det) : Sym3{1, 0, 0, 1, 0, 1};
                for (int q = 0; q < 6; ++q) ginv.comp(int(ci), q)[idx] = gi[std::size_t(q)];
                sqrtg.comp(int(ci), 0)[idx] = det > 0.0 ? std::sqrt(det) : 1.0;
            }
        }
        build_christoffel();
    }

    double* gamma(int chart, int i, int s) {
        return gam[std::size_t(chart)].data() +
               (std::size_t(i) * 6 + std::size_t(s)) * atlas->charts[std::size_t(chart)].nn();
    }
    const double* gamma(int chart, int i, int s) const {
        return gam[std::size_t(chart)].data() +
               (std::size_t(i) * 6 + std::size_t(s)) * atlas->charts[std::size_t(chart)].nn();
    }

    Sym3 g_at(int chart, std::size_t idx) const {
        Sym3 s;
        for (int q = 0; q < 6; ++q) s[std::size_t(q)] = g.comp(chart, q)[idx];
        return s;
    }
    Sym3 ginv_at(int chart, std::size_t idx) const {
        Sym3 s;
        for (int q = 0; q < 6; ++q) s[std::size_t(q)] = ginv.comp(chart, q)[idx];
        return s;
    }

  private:
    void build_christoffel() {
        const Atlas& at = *atlas;
        gam.resize(at.charts.size());
        for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
            const Chart& c = at.charts[ci];
            std::size_t nn = c.nn();
            gam[ci].assign(18 * nn, 0.0);
            const double* gc[6];
            for (int q = 0; q < 6; ++q) gc[q] = g.comp(int(ci), q);
            double* gm = gam[ci].data();
            const Field& gi = ginv;
            int cid = int(ci);
            const Chart* cp = &c;
            parallel_for(nn, [=, &gi](std::size_t b, std::size_t e) {
                for (std::size_t idx = b; idx < e; ++idx) {
                    int i, j, k;
                    cp->unpack(idx, i, j, k);
                    // dg[a][q] = d_a g_q
                    double dg[3][6];
                    for (int a = 0; a < 3; ++a)
                        for (int q = 0; q < 6; ++q)
                            dg[a][q] = d1(*cp, gc[q], pole_parity(Variance::sym2_low, q),
                                          i, j, k, a, false);
                    for (int ui = 0; ui < 3; ++ui)
                        for (int uj = 0; uj < 3; ++uj)
                            for (int uk = uj; uk < 3; ++uk) {
                                double acc = 0.0;
                                for (int l = 0; l < 3; ++l) {
                                    double term = dg[uj][sym_idx(l, uk)] +
                                                  dg[uk][sym_idx(l, uj)] -
                                                  dg[l][sym_idx(uj, uk)];
                                    acc += gi.comp(cid, sym_idx(ui, l))[idx] * term;
                                }
                                gm[(std::size_t(ui) * 6 + std::size_t(sym_idx(uj, uk))) * nn +
                                   idx] = 0.5 * acc;
                            }
                }
            });
        }
    }
};

}  // namespace gluon

#endif
