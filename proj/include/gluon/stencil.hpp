#ifndef GLUON_STENCIL_HPP
#define GLUON_STENCIL_HPP

#include <cassert>
#include <cmath>

#include "gluon/chart.hpp"

// Second-order finite differences on one chart.  Neighbor access resolves
// periodic wrap, the staggered cross-pole reflection on tube charts (with the
// component's parity sign and the half-turn azimuth shift), and the Robin
// ghost at an asymptotically flat truncation boundary.  At genuine open
// boundaries the derivative switches to 2nd-order one-sided formulas.
//
// Conventions: `par` is the pole parity of the fetched component
// (pole_parity(var, c)); it is ignored away from pole reflections.

namespace gluon {

inline double axis_fetch(const Chart& c, const double* f, double par,
                         int i, int j, int k, int axis, int off) {
    int idx[3] = {i, j, k};
    int p = idx[axis] + off;
    int n = c.n[axis];
    if (axis == 1 && c.pole_axis) {
        bool flip = false;
        if (p < 0) {
            p = -1 - p;
            flip = true;
        } else if (p >= n) {
            p = 2 * n - 1 - p;
            flip = true;
        }
        if (flip) {
            int k2 = k + c.n[2] / 2;
            if (k2 >= c.n[2]) k2 -= c.n[2];
            return par * f[c.node(i, p, k2)];
        }
        idx[1] = p;
        return f[c.node(idx[0], idx[1], idx[2])];
    }
    if (c.periodic[axis]) {
        if (p < 0) p += n;
        else if (p >= n) p -= n;
        idx[axis] = p;
        return f[c.node(idx[0], idx[1], idx[2])];
    }
    if (axis == 0 && c.robin_low_t && p < 0) {
        // Ghost closure for the decay condition d_t f = nu f at the low-t face:
        // each step below the grid multiplies by (1 - nu h/2)/(1 + nu h/2).
        double cr = (1.0 - 0.5 * c.robin_nu * c.h[0]) / (1.0 + 0.5 * c.robin_nu * c.h[0]);
        double v = f[c.node(0, j, k)];
        for (int q = 0; q < -p; ++q) v *= cr;
        return v;
    }
    assert(p >= 0 && p < n);
    idx[axis] = p;
    return f[c.node(idx[0], idx[1], idx[2])];
}

// True whether centered differencing at this position must fall back to a
// one-sided formula (open boundary without ghosts).
inline bool open_low(const Chart& c, int axis) {
    if (c.periodic[axis]) return false;
    if (axis == 1 && c.pole_axis) return false;
    return true;
}

// First derivative.  `use_robin_ghost` selects the ghost closure at a Robin
// boundary (primary-field passes); flux-style outer passes set it false and
// go one-sided there instead.
inline double d1(const Chart& c, const double* f, double par, int i, int j, int k,
                 int axis, bool use_robin_ghost = true) {
    int pos = axis == 0 ? i : axis == 1 ? j : k;
    int n = c.n[axis];
    double h = c.h[axis];
    if (open_low(c, axis)) {
        bool robin_here = axis == 0 && c.robin_low_t && use_robin_ghost;
        if (pos == 0 && !robin_here) {
            double f0 = axis_fetch(c, f, par, i, j, k, axis, 0);
            double f1 = axis_fetch(c, f, par, i, j, k, axis, 1);
            double f2 = axis_fetch(c, f, par, i, j, k, axis, 2);
            return (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
        }
        if (pos == n - 1) {
            double f0 = axis_fetch(c, f, par, i, j, k, axis, 0);
            double f1 = axis_fetch(c, f, par, i, j, k, axis, -1);
            double f2 = axis_fetch(c, f, par, i, j, k, axis, -2);
            return (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h);
        }
    }
    double fp = axis_fetch(c, f, par, i, j, k, axis, 1);
    double fm = axis_fetch(c, f, par, i, j, k, axis, -1);
    return (fp - fm) / (2.0 * h);
}

// Second derivative along one axis (utility; the operator cores use nested
// first derivatives in divergence form instead).
inline double d2(const Chart& c, const double* f, double par, int i, int j, int k,
                 int axis) {
    int pos = axis == 0 ? i : axis == 1 ? j : k;
    int n = c.n[axis];
    double h = c.h[axis];
    if (open_low(c, axis) && !(axis == 0 && c.robin_low_t)) {
        if (pos == 0) {
            double f0 = axis_fetch(c, f, par, i, j, k, axis, 0);
            double f1 = axis_fetch(c, f, par, i, j, k, axis, 1);
            double f2 = axis_fetch(c, f, par, i, j, k, axis, 2);
            double f3 = axis_fetch(c, f, par, i, j, k, axis, 3);
            return (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / (h * h);
        }
        if (pos == n - 1) {
            double f0 = axis_fetch(c, f, par, i, j, k, axis, 0);
            double f1 = axis_fetch(c, f, par, i, j, k, axis, -1);
            double f2 = axis_fetch(c, f, par, i, j, k, axis, -2);
            double f3 = axis_fetch(c, f, par, i, j, k, axis, -3);
            return (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / (h * h);
        }
    }
    double fp = axis_fetch(c, f, par, i, j, k, axis, 1);
    double f0 = axis_fetch(c, f, par, i, j, k, axis, 0);
    double fm = axis_fetch(c, f, par, i, j, k, axis, -1);
    return (fp - 2.0 * f0 + fm) / (h * h);
}

// Resolve a single-axis neighbor offset into concrete indices, accumulating
// the multiplicative factor from the pole reflection parity or the Robin
// ghost decay.  Returns the factor; `idx` is updated in place.  Callers must
// keep offsets within range at genuine open boundaries.
inline double resolve_step(const Chart& c, double par, int idx[3], int axis, int off,
                           bool use_robin_ghost = true) {
    int p = idx[axis] + off;
    int n = c.n[axis];
    if (axis == 1 && c.pole_axis) {
        if (p < 0 || p >= n) {
            idx[1] = p < 0 ? -1 - p : 2 * n - 1 - p;
            idx[2] += c.n[2] / 2;
            if (idx[2] >= c.n[2]) idx[2] -= c.n[2];
            return par;
        }
        idx[1] = p;
        return 1.0;
    }
    if (c.periodic[axis]) {
        if (p < 0) p += n;
        else if (p >= n) p -= n;
        idx[axis] = p;
        return 1.0;
    }
    if (axis == 0 && c.robin_low_t && use_robin_ghost && p < 0) {
        double cr = (1.0 - 0.5 * c.robin_nu * c.h[0]) / (1.0 + 0.5 * c.robin_nu * c.h[0]);
        double fac = 1.0;
        for (int q = 0; q < -p; ++q) fac *= cr;
        idx[0] = 0;
        return fac;
    }
    assert(p >= 0 && p < n);
    idx[axis] = p;
    return 1.0;
}

// Fetch f at a two-axis displaced neighbor, resolving each axis in turn.
inline double fetch2(const Chart& c, const double* f, double par, int i, int j, int k,
                     int axis_a, int off_a, int axis_b, int off_b,
                     bool use_robin_ghost = true) {
    int idx[3] = {i, j, k};
    double fac = resolve_step(c, par, idx, axis_a, off_a, use_robin_ghost);
    fac *= resolve_step(c, par, idx, axis_b, off_b, use_robin_ghost);
    return fac * f[c.node(idx[0], idx[1], idx[2])];
}

namespace detail_stencil {
// Per-axis first-derivative weight pattern at this position: centered in the
// interior (and across ghosts), one-sided at open boundaries.
struct AxisPattern {
    int off[3];
    double w[3];
    int count;
};

inline AxisPattern d1_pattern(const Chart& c, int pos, int axis, bool use_robin_ghost) {
    double h = c.h[axis];
    if (open_low(c, axis)) {
        bool robin_here = axis == 0 && c.robin_low_t && use_robin_ghost;
        if (pos == 0 && !robin_here)
            return AxisPattern{{0, 1, 2}, {-1.5 / h, 2.0 / h, -0.5 / h}, 3};
        if (pos == c.n[axis] - 1)
            return AxisPattern{{0, -1, -2}, {1.5 / h, -2.0 / h, 0.5 / h}, 3};
    }
    return AxisPattern{{-1, 1, 0}, {-0.5 / h, 0.5 / h, 0.0}, 2};
}
}  // namespace detail_stencil

// Mixed second derivative d^2 f / (dx_a dx_b), a != b, composing the per-axis
// first-derivative patterns with two-axis neighbor resolution.
inline double mixed_d2(const Chart& c, const double* f, double par, int i, int j, int k,
                       int axis_a, int axis_b, bool use_robin_ghost = true) {
    int pa = axis_a == 0 ? i : axis_a == 1 ? j : k;
    int pb = axis_b == 0 ? i : axis_b == 1 ? j : k;
    detail_stencil::AxisPattern wa = detail_stencil::d1_pattern(c, pa, axis_a, use_robin_ghost);
    detail_stencil::AxisPattern wb = detail_stencil::d1_pattern(c, pb, axis_b, use_robin_ghost);
    double acc = 0.0;
    for (int p = 0; p < wa.count; ++p)
        for (int q = 0; q < wb.count; ++q) {
            if (wa.w[p] == 0.0 || wb.w[q] == 0.0) continue;
            acc += wa.w[p] * wb.w[q] *
                   fetch2(c, f, par, i, j, k, axis_a, wa.off[p], axis_b, wb.off[q],
                          use_robin_ghost);
        }
    return acc;
}

// d/dx_axis of the product a*b fetched consistently at the neighbors
// (used for divergence-form fluxes: a = sqrt(det g), b = vector component).
inline double d1_prod(const Chart& c, const double* a, double par_a,
                      const double* b, double par_b, int i, int j, int k, int axis) {
    int pos = axis == 0 ? i : axis == 1 ? j : k;
    int n = c.n[axis];
    double h = c.h[axis];
    if (open_low(c, axis)) {
        if (pos == 0) {
            double p0 = axis_fetch(c, a, par_a, i, j, k, axis, 0) *
                        axis_fetch(c, b, par_b, i, j, k, axis, 0);
            double p1 = axis_fetch(c, a, par_a, i, j, k, axis, 1) *
                        axis_fetch(c, b, par_b, i, j, k, axis, 1);
            double p2 = axis_fetch(c, a, par_a, i, j, k, axis, 2) *
                        axis_fetch(c, b, par_b, i, j, k, axis, 2);
            return (-3.0 * p0 + 4.0 * p1 - p2) / (2.0 * h);
        }
        if (pos == n - 1) {
            double p0 = axis_fetch(c, a, par_a, i, j, k, axis, 0) *
                        axis_fetch(c, b, par_b, i, j, k, axis, 0);
            double p1 = axis_fetch(c, a, par_a, i, j, k, axis, -1) *
                        axis_fetch(c, b, par_b, i, j, k, axis, -1);
            double p2 = axis_fetch(c, a, par_a, i, j, k, axis, -2) *
                        axis_fetch(c, b, par_b, i, j, k, axis, -2);
            return (3.0 * p0 - 4.0 * p1 + p2) / (2.0 * h);
        }
    }
    double pp = axis_fetch(c, a, par_a, i, j, k, axis, 1) *
                axis_fetch(c, b, par_b, i, j, k, axis, 1);
    double pm = axis_fetch(c, a, par_a, i, j, k, axis, -1) *
                axis_fetch(c, b, par_b, i, j, k, axis, -1);
    return (pp - pm) / (2.0 * h);
}

}  // namespace gluon

#endif
