#ifndef GLUON_MAPS_HPP
#define GLUON_MAPS_HPP

#include <cmath>

#include "gluon/chart.hpp"
#include "gluon/mat3.hpp"

// Closed-form coordinate maps between chart kinds, with analytic Jacobians.
// Conventions: "tube" coordinates are (t, theta1, theta2); a side-s tube maps
// into its bulk box as  x = center + eps * e^{-s t} * n(theta)  (s = +1 for
// bulk1, -1 for bulk2), so r = eps e^{-st} runs from 1 at the summand end of
// the tube to eps^2 at the far end.

namespace gluon {

inline double wrap_mod(double x, double p) {
    double y = std::fmod(x, p);
    if (y < 0) y += p;
    return y;
}

// Minimum-image offset of box point x from the box center.
inline Vec3 box_offset(const Chart& bulk, const Vec3& x) {
    Vec3 d;
    for (int a = 0; a < 3; ++a) {
        d[a] = x[a] - bulk.center[a];
        if (bulk.periodic[a] && bulk.period > 0) {
            d[a] = std::fmod(d[a], bulk.period);
            if (d[a] > 0.5 * bulk.period) d[a] -= bulk.period;
            if (d[a] < -0.5 * bulk.period) d[a] += bulk.period;
        }
    }
    return d;
}

// tube -> box offset from center; J = d(box)/d(tube).
inline Vec3 tube_to_box(double eps, int side, const Vec3& tth, Mat3* J = nullptr) {
    double rho = eps * std::exp(-side * tth[0]);
    double st = std::sin(tth[1]), ct = std::cos(tth[1]);
    double sp = std::sin(tth[2]), cp = std::cos(tth[2]);
    Vec3 x = {rho * st * cp, rho * st * sp, rho * ct};
    if (J) {
        // columns: d/dt, d/dtheta1, d/dtheta2
        (*J)[0] = -side * x[0]; (*J)[1] = rho * ct * cp; (*J)[2] = -rho * st * sp;
        (*J)[3] = -side * x[1]; (*J)[4] = rho * ct * sp; (*J)[5] = rho * st * cp;
        (*J)[6] = -side * x[2]; (*J)[7] = -rho * st;     (*J)[8] = 0.0;
    }
    return x;
}

// box offset -> tube; J = d(tube)/d(box) (inverse of the forward Jacobian).
inline Vec3 box_to_tube(double eps, int side, const Vec3& d, Mat3* J = nullptr) {
    double r = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    double t = side * std::log(eps / r);
    double theta1 = std::acos(d[2] / r);
    double theta2 = std::atan2(d[1], d[0]);
    if (theta2 < 0) theta2 += 2.0 * M_PI;
    Vec3 tth = {t, theta1, theta2};
    if (J) {
        Mat3 fwd;
        tube_to_box(eps, side, tth, &fwd);
        *J = mat_inverse(fwd);
    }
    return tth;
}

// Antipodal stereographic transition y = a^2 x / |x|^2 (exact isometry of the
// round metric lambda^2 delta, lambda = 2a^2/(a^2+|x|^2)).
inline Vec3 stereo_flip(double a, const Vec3& x, Mat3* J = nullptr) {
    double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    double f = a * a / r2;
    Vec3 y = {f * x[0], f * x[1], f * x[2]};
    if (J) {
        // dy_i/dx_j = (a^2/r^2)(delta_ij - 2 x_i x_j / r^2)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                (*J)[3 * i + j] = f * ((i == j ? 1.0 : 0.0) - 2.0 * x[i] * x[j] / r2);
    }
    return y;
}

}  // namespace gluon

#endif
