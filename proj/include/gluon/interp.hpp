#ifndef GLUON_INTERP_HPP
#define GLUON_INTERP_HPP

#include <array>
#include <cmath>
#include <cstdint>

#include "gluon/chart.hpp"

// Tensor-product 4-point Lagrange interpolation on cell-centered grids.
// Weights sum to 1 identically (Lagrange basis); base selection clamps at
// non-periodic edges (mild one-sided extrapolation, still 4th order) and
// resolves periodic wrap and cross-pole reflection per stencil point.

namespace gluon {

inline long wrap_index(long i, long n) {
    long r = i % n;
    return r < 0 ? r + n : r;
}

inline void lagrange4(double s, double w[4]) {
    double s1 = s - 1.0, s2 = s - 2.0, s3 = s - 3.0;
    w[0] = -s1 * s2 * s3 / 6.0;
    w[1] = s * s2 * s3 / 2.0;
    w[2] = -s * s1 * s3 / 2.0;
    w[3] = s * s1 * s2 / 6.0;
}

// One resolved stencil point: node index within the donor chart, tensor weight,
// and whether the point was reached through a pole reflection (theta1 < 0 or
// > pi).  Reflected points contribute with a (-1)^{#theta1 indices} sign per
// tensor component; the sign is applied by the consumer, which knows the
// component parity.
struct StencilPoint {
    int32_t node;
    double w;
    uint8_t flip;
};

struct DonorStencil {
    std::array<StencilPoint, 64> pts;
    int npts = 0;
    bool ok = false;
};

// Per-axis index clamp range for donor selection; used to keep stencils inside
// the donor's computed region (e.g. off the fringe slabs of a neck chart).
struct AxisRange {
    int lo[3] = {0, 0, 0};
    int hi[3] = {-1, -1, -1};  // hi < 0 means n[axis]-1
};

// pos[a] = (xi[a] - orig[a]) / h[a] - 0.5 is the continuous node index.
inline DonorStencil build_stencil(const Chart& donor, const Vec3& xi,
                                  const AxisRange& rng = AxisRange()) {
    DonorStencil st;
    int base[3];
    double w[3][4];
    for (int a = 0; a < 3; ++a) {
        double pos = (xi[a] - donor.orig[a]) / donor.h[a] - 0.5;
        int b = int(std::floor(pos)) - 1;
        int lo = rng.lo[a], hi = rng.hi[a] < 0 ? donor.n[a] - 1 : rng.hi[a];
        if (!donor.periodic[a] && !(donor.pole_axis && a == 1)) {
            if (b < lo) b = lo;
            if (b > hi - 3) b = hi - 3;
            if (b < lo) return st;  // axis too short for a 4-point stencil
            // Reject targets far outside the donor's coverage (more than one
            // cell of extrapolation is a construction bug, not a rounding
            // artifact).
            if (pos < lo - 1.0 || pos > hi + 1.0) return st;
        }
        base[a] = b;
        lagrange4(pos - b, w[a]);
    }
    int n1 = donor.n[1], n2 = donor.n[2];
    for (int a = 0; a < 4; ++a) {
        int i = base[0] + a;
        if (donor.periodic[0]) i = int(wrap_index(i, donor.n[0]));
        for (int b = 0; b < 4; ++b) {
            int jraw = base[1] + b;
            int j = jraw;
            bool flip = false;
            if (donor.pole_axis) {
                if (jraw < 0) {
                    j = -1 - jraw;
                    flip = true;
                } else if (jraw >= n1) {
                    j = 2 * n1 - 1 - jraw;
                    flip = true;
                }
            } else if (donor.periodic[1]) {
                j = int(wrap_index(jraw, n1));
            }
            for (int c = 0; c < 4; ++c) {
                int k = base[2] + c;
                if (flip) k += n2 / 2;
                if (donor.periodic[2]) k = int(wrap_index(k, n2));
                st.pts[st.npts++] = StencilPoint{
                    int32_t(donor.node(i, j, k)),
                    w[0][a] * w[1][b] * w[2][c],
                    uint8_t(flip ? 1 : 0)};
            }
        }
    }
    st.ok = true;
    return st;
}

}  // namespace gluon

#endif
