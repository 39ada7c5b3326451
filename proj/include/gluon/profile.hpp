#ifndef GLUON_PROFILE_HPP
#define GLUON_PROFILE_HPP

#include <algorithm>
#include <cmath>

namespace gluon {
namespace profile {

// Quintic smoothstep: C^2, 0 at 0, 1 at 1, monotone.
inline double smoothstep(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

// Transition cutoff on [-1, 1]: 1 below, 0 above, exactly 1/2 at the origin.
inline double cutoff_chi(double t) { return 1.0 - smoothstep(0.5 * (t + 1.0)); }

// Neck partition function: 1 up to -log(eps) - 1, 0 from -log(eps) on.
// Cuts off only the upper (side-2) end of the tube; its mirror eta(-t)
// handles the lower end.
inline double eta(double t, double eps) {
    double top = -std::log(eps);
    return 1.0 - smoothstep(t - (top - 1.0));
}

// Conformal factor of one flat summand in tube coordinates:
// sqrt(eps) e^{-side*t/2}; its 4th power times the cylinder metric is the
// flat metric of that side.
inline double u_summand(double t, double eps, int side) {
    return std::sqrt(eps) * std::exp(-0.5 * double(side) * t);
}

// Interpolated neck conformal factor u_eps = eta(t) u1 + eta(-t) u2.
// On the overlap plateau u_eps = 2 sqrt(eps) cosh(t/2), the Schwarzschild
// profile, so the glued flat#flat neck is scalar-flat there.
inline double neck_conformal_factor(double t, double eps) {
    return eta(t, eps) * u_summand(t, eps, +1) + eta(-t, eps) * u_summand(t, eps, -1);
}

// Support cutoff concentrated on the side-1 half of the tube: 1 up to
// c*log(eps), 0 past c*log(eps)+1, with c = 6/11.
inline double b_cut(double t, double eps) {
    double edge = (6.0 / 11.0) * std::log(eps);
    return 1.0 - smoothstep(t - edge);
}

// Ratio (u_eps / u1)^4 = (1 + eta(-t) e^{t})^4; equals 16 at the waist.
inline double phi2(double t, double eps) {
    double r = 1.0 + eta(-t, eps) * std::exp(t);
    return r * r * r * r;
}

inline double a_cut(double t, double eps) { return phi2(t, eps) * b_cut(t, eps); }

// Interior distance weight in tube coordinates: eps cosh t.  Equals eps at
// the waist and about r/2 toward either mouth (r the side radius), staying
// below 1 on the whole tube chart.
inline double weight_tube(double t, double eps) { return eps * std::cosh(t); }

// Weight on a bulk chart as a function of the distance r to the gluing
// point: matches the tube value near the mouth and rises monotonically to 1,
// exactly 1 from r = 2 out.  The bridge profile itself carries no contract
// beyond monotonicity and the endpoint values.
inline double weight_bulk(double r, double eps) {
    if (r <= 0.0) return eps;
    double tube = 0.5 * (r + eps * eps / r);  // = eps cosh(log(eps/r))
    if (r >= 2.0) return 1.0;
    if (r <= 1.0) return std::min(tube, 1.0);
    double s = smoothstep(r - 1.0);
    return std::min((1.0 - s) * tube + s, 1.0);
}

// Conformal factor of the glued metric seen from the side-1 bulk chart:
// psi(r) = u_eps(log(eps/r))^4 / r^2.  Identically 1 for r >= 1; equal to
// (1 + eps/r)^4 on the plateau where both partition factors are 1.
inline double psi_bulk(double r, double eps, int side = +1) {
    double t = double(side) * std::log(eps / r);
    double u = neck_conformal_factor(t, eps);
    double u2 = u * u;
    return u2 * u2 / (r * r);
}

}  // namespace profile
}  // namespace gluon

#endif
