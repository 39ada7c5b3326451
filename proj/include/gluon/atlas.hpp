#ifndef GLUON_ATLAS_HPP
#define GLUON_ATLAS_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gluon/chart.hpp"
#include "gluon/core.hpp"
#include "gluon/interp.hpp"
#include "gluon/maps.hpp"

namespace gluon {

// Overset fill: a seam maps every fringe node of one chart to a 4^3 Lagrange
// stencil in a donor chart, together with the chart-transition Jacobian at the
// target point.  Seams fill in ascending stage order; stage-0 seams draw only
// from donor nodes that are stencil-computed (interior/owner), stage-1 seams
// may also draw from fringe nodes already filled at stage 0.
struct SeamTarget {
    int32_t node = 0;
    int32_t first = 0;      // slice into Seam::points
    Mat3 jac{};             // d(donor coords)/d(target coords)
    Mat3 jac_inv{};
};

struct Seam {
    int target_chart = 0;
    int donor_chart = 0;
    int stage = 0;
    std::vector<SeamTarget> targets;
    std::vector<StencilPoint> points;  // 64 per target
};

enum class AtlasTopology : int32_t { single = 0, sphere = 1, glued_closed = 2, glued_ae = 3 };

struct GridSize {
    int bulk = 24;
    int neck_t = 96;
    int neck_theta1 = 12;
    int neck_theta2 = 24;
};

struct Atlas {
    AtlasTopology topo = AtlasTopology::single;
    // Manifold dimension, per-summand dimension, and corank of the gluing
    // locus; only (3, 3, 0) is supported.
    int dim_m = 3, dim_n = 3, dim_k = 0;
    double eps = 0.0;
    std::vector<Chart> charts;
    std::vector<Seam> seams;

    // Glued-atlas derived geometry (unused for single/sphere atlases).
    double r_solution = 0.0;  // bulk stencils run at r >= this
    double r_own = 0.0;       // reduction-ownership handoff radius
    double t_own_lo = 0.0, t_own_hi = 0.0;
    double r_out_eff = 0.0;   // effective AE truncation radius

    std::size_t total_nodes() const {
        std::size_t s = 0;
        for (const auto& c : charts) s += c.nn();
        return s;
    }
    const Chart& chart(int id) const { return charts[std::size_t(id)]; }
};

inline constexpr int kFringeSlabs = 3;    // tube-axis fringe depth (>= stencil radius 2)
inline constexpr double kAeOverlap = 2.0; // t-width of the ae_end/neck overlap band

// ---------------------------------------------------------------------------
// Single-chart atlases.

inline Atlas make_box_periodic_atlas(int n, double period) {
    Atlas at;
    at.topo = AtlasTopology::single;
    Chart c;
    c.id = 0;
    c.kind = ChartKind::box_periodic;
    for (int a = 0; a < 3; ++a) {
        c.n[a] = n;
        c.orig[a] = 0.0;
        c.h[a] = period / n;
        c.periodic[a] = true;
        c.center[a] = 0.5 * period;
    }
    c.period = period;
    c.mask.assign(c.nn(), NodeClass::owner);
    at.charts.push_back(std::move(c));
    return at;
}

inline Atlas make_box_open_atlas(int n, const Vec3& lo, const Vec3& hi) {
    Atlas at;
    at.topo = AtlasTopology::single;
    Chart c;
    c.id = 0;
    c.kind = ChartKind::box_open;
    for (int a = 0; a < 3; ++a) {
        c.n[a] = n;
        c.orig[a] = lo[std::size_t(a)];
        c.h[a] = (hi[std::size_t(a)] - lo[std::size_t(a)]) / n;
        c.periodic[a] = false;
    }
    c.mask.assign(c.nn(), NodeClass::owner);
    at.charts.push_back(std::move(c));
    return at;
}

inline Atlas make_box_open_atlas(int n, double lo, double hi) {
    return make_box_open_atlas(n, Vec3{lo, lo, lo}, Vec3{hi, hi, hi});
}

// Stand-alone tube chart (t, theta1, theta2), used for single-chart curvature
// checks on neck-type metrics.
inline Atlas make_tube_atlas(int nt, int n1, int n2, double t_lo, double t_hi) {
    Atlas at;
    at.topo = AtlasTopology::single;
    Chart c;
    c.id = 0;
    c.kind = ChartKind::neck;
    c.n[0] = nt; c.n[1] = n1; c.n[2] = n2;
    c.orig[0] = t_lo; c.orig[1] = 0.0; c.orig[2] = 0.0;
    c.h[0] = (t_hi - t_lo) / nt;
    c.h[1] = M_PI / n1;
    c.h[2] = 2.0 * M_PI / n2;
    c.periodic[2] = true;
    c.pole_axis = true;
    c.mask.assign(c.nn(), NodeClass::owner);
    at.charts.push_back(std::move(c));
    return at;
}

// ---------------------------------------------------------------------------
// Seam assembly.

namespace detail {

// Build one seam.  `wants` selects target fringe nodes, `to_donor` maps target
// chart coordinates to donor chart coordinates and returns J = d(donor)/d(target).
template <class Wants, class MapFn>
inline Seam build_seam(const Atlas& at, int target_chart, int donor_chart, int stage,
                       Wants&& wants, MapFn&& to_donor, const AxisRange& rng,
                       NodeClass min_donor_class) {
    const Chart& tc = at.charts[std::size_t(target_chart)];
    const Chart& dc = at.charts[std::size_t(donor_chart)];
    Seam seam;
    seam.target_chart = target_chart;
    seam.donor_chart = donor_chart;
    seam.stage = stage;
    for (std::size_t idx = 0; idx < tc.nn(); ++idx) {
        if (tc.cls(idx) != NodeClass::fringe) continue;
        int i, j, k;
        tc.unpack(idx, i, j, k);
        if (!wants(i, j, k)) continue;
        Mat3 jac;
        Vec3 dxi = to_donor(tc.coords(i, j, k), &jac);
        DonorStencil st = build_stencil(dc, dxi, rng);
        if (!st.ok)
            fail(Stage::atlas, 2,
                 "no interpolation source for " + tc.describe_node(idx) +
                     " in donor chart " + std::to_string(donor_chart));
        for (int p = 0; p < st.npts; ++p) {
            if (dc.cls(std::size_t(st.pts[std::size_t(p)].node)) < min_donor_class)
                fail(Stage::atlas, 2,
                     "interpolation stencil for " + tc.describe_node(idx) +
                         " touches an invalid donor node: " +
                         dc.describe_node(std::size_t(st.pts[std::size_t(p)].node)));
        }
        SeamTarget t;
        t.node = int32_t(idx);
        t.first = int32_t(seam.points.size());
        t.jac = jac;
        t.jac_inv = mat_inverse(jac);
        seam.targets.push_back(t);
        seam.points.insert(seam.points.end(), st.pts.begin(), st.pts.begin() + st.npts);
    }
    return seam;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Two-chart stereographic sphere atlas (round sphere of radius `radius`;
// metric lambda^2 delta with lambda = 2 a^2/(a^2+|x|^2), a = radius).

inline Atlas make_sphere_atlas(int n, double radius) {
    if (n < 12) fail(Stage::atlas, 2, "sphere atlas needs n >= 12, got " + std::to_string(n));
    Atlas at;
    at.topo = AtlasTopology::sphere;
    double a = radius;
    // Chart half-width.  The worst seam source is a face-center node of the
    // innermost fringe ring at |x| = E - 1.5h, whose antipodal image lands
    // a^2/(E - 1.5h) from the donor origin; the 4-point stencil around it must
    // clear the donor's two fringe rings, i.e. (E - a^2/(E - 1.5h))/h >= 3.5
    // cells.  E = 2a (overlap annulus a/2 .. 2a) satisfies this for n >= 12.
    double extent = 2.0 * a;
    const int fringe_rings = 2;
    for (int id = 0; id < 2; ++id) {
        Chart c;
        c.id = id;
        c.kind = id == 0 ? ChartKind::stereo_north : ChartKind::stereo_south;
        for (int ax = 0; ax < 3; ++ax) {
            c.n[ax] = n;
            c.orig[ax] = -extent;
            c.h[ax] = 2.0 * extent / n;
        }
        c.stereo_a = a;
        c.mask.assign(c.nn(), NodeClass::interior);
        for (std::size_t idx = 0; idx < c.nn(); ++idx) {
            int i, j, k;
            c.unpack(idx, i, j, k);
            int edge = std::min({i, j, k, n - 1 - i, n - 1 - j, n - 1 - k});
            if (edge < fringe_rings) {
                c.mask[idx] = NodeClass::fringe;
                continue;
            }
            Vec3 x = c.coords(i, j, k);
            double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
            if (r < a) c.mask[idx] = NodeClass::owner;
        }
        at.charts.push_back(std::move(c));
    }
    for (int id = 0; id < 2; ++id) {
        auto map = [a](const Vec3& x, Mat3* jac) { return stereo_flip(a, x, jac); };
        at.seams.push_back(detail::build_seam(
            at, id, 1 - id, 0, [](int, int, int) { return true; }, map, AxisRange(),
            NodeClass::interior));
    }
    return at;
}

// ---------------------------------------------------------------------------
// Glued atlas: bulk1 (or ae_end) + bulk2 + neck.

inline void check_grid(const GridSize& g) {
    if (g.bulk < 8) fail(Stage::atlas, 2, "resolution.bulk must be >= 8");
    if (g.neck_t < 16) fail(Stage::atlas, 2, "resolution.neck_t must be >= 16");
    if (g.neck_theta1 < 6) fail(Stage::atlas, 2, "resolution.neck_theta1 must be >= 6");
    if (g.neck_theta2 < 8 || g.neck_theta2 % 2 != 0)
        fail(Stage::atlas, 2, "resolution.neck_theta2 must be even and >= 8");
}

inline Atlas make_glued_atlas(double eps, const GridSize& grid, double period1,
                              double period2, bool ae_side1 = false, double r_out = 8.0) {
    if (!(eps > 0.0) || eps > std::exp(-1.0) + 1e-15)
        fail(Stage::atlas, 2, "epsilon out of range (need 0 < epsilon <= e^-1), got " +
                                  std::to_string(eps));
    check_grid(grid);

    Atlas at;
    at.topo = ae_side1 ? AtlasTopology::glued_ae : AtlasTopology::glued_closed;
    at.eps = eps;
    double tl = std::log(eps);
    double ht = -2.0 * tl / grid.neck_t;

    // Chart 2: the neck tube.
    Chart neck;
    neck.id = 2;
    neck.kind = ChartKind::neck;
    neck.n[0] = grid.neck_t;
    neck.n[1] = grid.neck_theta1;
    neck.n[2] = grid.neck_theta2;
    neck.orig[0] = tl;
    neck.h[0] = ht;
    neck.h[1] = M_PI / grid.neck_theta1;
    neck.h[2] = 2.0 * M_PI / grid.neck_theta2;
    neck.periodic[2] = true;
    neck.pole_axis = true;

    // Side charts.
    auto make_bulk = [&](int id, int side, double period) {
        Chart c;
        c.id = id;
        c.kind = side > 0 ? ChartKind::bulk1 : ChartKind::bulk2;
        for (int a = 0; a < 3; ++a) {
            c.n[a] = grid.bulk;
            c.orig[a] = 0.0;
            c.h[a] = period / grid.bulk;
            c.periodic[a] = true;
            c.center[a] = 0.5 * period;
        }
        c.period = period;
        c.side = side;
        return c;
    };

    Chart side1;
    if (ae_side1) {
        // Truncated asymptotically flat end in tube coordinates, node-aligned
        // with the neck so the overlap exchange degenerates to copies.
        Chart c;
        c.id = 0;
        c.kind = ChartKind::ae_end;
        int nb = int(std::lround(std::log(r_out) / ht));
        if (nb < 6) fail(Stage::atlas, 2, "ae r_out too small for this neck spacing");
        int nw = int(std::lround(kAeOverlap / ht));
        c.n[0] = nb + nw;
        c.n[1] = grid.neck_theta1;
        c.n[2] = grid.neck_theta2;
        c.orig[0] = tl - nb * ht;
        c.h[0] = ht;
        c.h[1] = neck.h[1];
        c.h[2] = neck.h[2];
        c.periodic[2] = true;
        c.pole_axis = true;
        c.side = +1;
        c.robin_nu = 0.5;  // d_t X = nu X as t -> -inf for decay rate (m-2)/2
        c.robin_low_t = true;
        at.r_out_eff = eps * std::exp(double(nb) * ht - tl);
        side1 = std::move(c);
    } else {
        side1 = make_bulk(0, +1, period1);
    }
    Chart side2 = make_bulk(1, -1, period2);

    // Masks.
    at.r_solution = 0.8;
    double r_geom_min = std::max(1.5 * eps * eps, 0.02);

    // Side-chart fringe nodes live at radii up to r_solution and interpolate
    // from the neck's stencil-computed slabs, which reach out only to
    // r = exp(-(kFringeSlabs - 0.5) * ht) (including the one-cell one-sided
    // margin the stencil builder tolerates).  A too-coarse neck axis leaves
    // the outer fringe shell without donors.
    if ((kFringeSlabs - 0.5) * ht > -std::log(at.r_solution)) {
        int need = int(std::ceil(-2.0 * tl * (kFringeSlabs - 0.5) /
                                 (-std::log(at.r_solution))));
        fail(Stage::atlas, 2,
             "neck_t too coarse for epsilon = " + std::to_string(eps) +
                 ": the neck's computed band must reach the side-chart handoff "
                 "shell at r = " + std::to_string(at.r_solution) +
                 "; need neck_t >= " + std::to_string(need));
    }

    auto mask_bulk = [&](Chart& c) {
        double rd = std::clamp(at.r_solution - 3.5 * c.h[0], r_geom_min, 0.25);
        if (rd >= at.r_solution - 2.0 * c.h[0])
            rd = r_geom_min;  // coarse grid: widen the fringe band instead of failing
        c.mask.assign(c.nn(), NodeClass::dead);
        for (std::size_t idx = 0; idx < c.nn(); ++idx) {
            int i, j, k;
            c.unpack(idx, i, j, k);
            Vec3 d = box_offset(c, c.coords(i, j, k));
            double r = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            if (r < rd) continue;
            c.mask[idx] = r < at.r_solution ? NodeClass::fringe : NodeClass::interior;
        }
    };
    mask_bulk(side2);
    if (!ae_side1) mask_bulk(side1);

    // Ownership handoff radius: midway between the bulk stencil edge and the
    // deepest radius the neck's computed slabs reach.
    double neck_reach = std::exp(-(kFringeSlabs + 0.5) * ht);
    at.r_own = 0.5 * (at.r_solution + neck_reach);
    at.t_own_hi = std::log(at.r_own / eps);
    at.t_own_lo = ae_side1 ? tl + 0.5 * kAeOverlap : -at.t_own_hi;

    auto own_bulk = [&](Chart& c) {
        for (std::size_t idx = 0; idx < c.nn(); ++idx) {
            if (c.mask[idx] != NodeClass::interior) continue;
            int i, j, k;
            c.unpack(idx, i, j, k);
            Vec3 d = box_offset(c, c.coords(i, j, k));
            double r = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            if (r > at.r_own) c.mask[idx] = NodeClass::owner;
        }
    };
    own_bulk(side2);
    if (!ae_side1) own_bulk(side1);

    if (ae_side1) {
        Chart& c = side1;
        c.mask.assign(c.nn(), NodeClass::interior);
        for (std::size_t idx = 0; idx < c.nn(); ++idx) {
            int i, j, k;
            c.unpack(idx, i, j, k);
            if (i >= c.n[0] - kFringeSlabs) {
                c.mask[idx] = NodeClass::fringe;
            } else if (c.coord(0, i) < at.t_own_lo) {
                c.mask[idx] = NodeClass::owner;
            }
        }
    }

    neck.mask.assign(neck.nn(), NodeClass::interior);
    for (std::size_t idx = 0; idx < neck.nn(); ++idx) {
        int i, j, k;
        neck.unpack(idx, i, j, k);
        if (i < kFringeSlabs || i >= neck.n[0] - kFringeSlabs) {
            neck.mask[idx] = NodeClass::fringe;
        } else {
            double t = neck.coord(0, i);
            if (t > at.t_own_lo && t < at.t_own_hi) neck.mask[idx] = NodeClass::owner;
        }
    }

    at.charts.push_back(std::move(side1));
    at.charts.push_back(std::move(side2));
    at.charts.push_back(std::move(neck));

    // Seams.  Stage 0: side-chart fringes draw from computed neck slabs (and
    // the ae fringe copies from the neck).  Stage 1: neck fringes draw from
    // side charts, whose own fringe values exist by then.
    AxisRange neck_rng;
    neck_rng.lo[0] = kFringeSlabs;
    neck_rng.hi[0] = grid.neck_t - 1 - kFringeSlabs;

    auto all_nodes = [](int, int, int) { return true; };

    for (int cid = ae_side1 ? 1 : 0; cid < 2; ++cid) {
        const Chart& bc = at.charts[std::size_t(cid)];
        int side = bc.side;
        auto to_neck = [&at, &bc, side](const Vec3& x, Mat3* jac) {
            Vec3 d = box_offset(bc, x);
            return box_to_tube(at.eps, side, d, jac);
        };
        at.seams.push_back(detail::build_seam(at, cid, 2, 0, all_nodes, to_neck,
                                              neck_rng, NodeClass::interior));
    }
    if (ae_side1) {
        auto ident = [](const Vec3& x, Mat3* jac) {
            if (jac) *jac = Mat3{1, 0, 0, 0, 1, 0, 0, 0, 1};
            return x;
        };
        at.seams.push_back(detail::build_seam(at, 0, 2, 0, all_nodes, ident, neck_rng,
                                              NodeClass::interior));
        AxisRange ae_rng;
        ae_rng.hi[0] = at.charts[0].n[0] - 1 - kFringeSlabs;
        at.seams.push_back(detail::build_seam(
            at, 2, 0, 0, [](int i, int, int) { return i < kFringeSlabs; }, ident,
            ae_rng, NodeClass::interior));
    } else {
        const Chart& b1 = at.charts[0];
        auto to_b1 = [&at, &b1](const Vec3& tth, Mat3* jac) {
            Vec3 d = tube_to_box(at.eps, b1.side, tth, jac);
            return Vec3{d[0] + b1.center[0], d[1] + b1.center[1], d[2] + b1.center[2]};
        };
        at.seams.push_back(detail::build_seam(
            at, 2, 0, 1, [](int i, int, int) { return i < kFringeSlabs; }, to_b1,
            AxisRange(), NodeClass::fringe));
    }
    {
        const Chart& b2 = at.charts[1];
        int nt = at.charts[2].n[0];
        auto to_b2 = [&at, &b2](const Vec3& tth, Mat3* jac) {
            Vec3 d = tube_to_box(at.eps, b2.side, tth, jac);
            return Vec3{d[0] + b2.center[0], d[1] + b2.center[1], d[2] + b2.center[2]};
        };
        at.seams.push_back(detail::build_seam(
            at, 2, 1, 1, [nt](int i, int, int) { return i >= nt - kFringeSlabs; },
            to_b2, AxisRange(), NodeClass::fringe));
    }

    std::stable_sort(at.seams.begin(), at.seams.end(),
                     [](const Seam& a, const Seam& b) { return a.stage < b.stage; });
    return at;
}

}  // namespace gluon

#endif
