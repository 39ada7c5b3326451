#ifndef GLUON_MODELS_HPP
#define GLUON_MODELS_HPP

#include <cmath>
#include <string>
#include <vector>

#include "gluon/geometry.hpp"
#include "gluon/profile.hpp"

namespace gluon {

enum class ModelKind : int {
    flat_torus = 0,
    bumpy_torus = 1,
    round_sphere = 2,
    schwarzschild_tube = 3,
    euclidean_ae = 4,
};

inline const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::flat_torus: return "flat_torus";
        case ModelKind::bumpy_torus: return "bumpy_torus";
        case ModelKind::round_sphere: return "round_sphere";
        case ModelKind::schwarzschild_tube: return "schwarzschild_tube";
        case ModelKind::euclidean_ae: return "euclidean_ae";
    }
    return "?";
}

// Compactly supported radial profile: B(0)=1, B(1)=0, C^2 at both ends,
// B'(u) = -30 u^2 (1-u)^2.
inline double bump_profile(double u) {
    if (u <= 0.0) return 1.0;
    if (u >= 1.0) return 0.0;
    double q = 1.0 - u;
    return q * q * q * (1.0 + u * (3.0 + 6.0 * u));
}

inline double bump_profile_d1(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    double a = u * (1.0 - u);
    return -30.0 * a * a;
}

inline double bump_profile_d2(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return -60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
}

struct Bump {
    Vec3 center{0.0, 0.0, 0.0};
    double width = 0.5;
    double amp = 0.1;
};

enum class SeedKind : int { none = 0, constant = 1, projected = 2 };

struct ModelSpec {
    ModelKind kind = ModelKind::flat_torus;
    double period = 4.0;        // torus side length
    double sphere_radius = 1.0;
    double tube_eps = 0.1;      // schwarzschild tube scale
    std::vector<Bump> bumps;
    SeedKind seed_kind = SeedKind::none;
    Sym3 seed{0, 0, 0, 0, 0, 0};
};

inline Vec3 torus_center(const ModelSpec& s) {
    return Vec3{0.5 * s.period, 0.5 * s.period, 0.5 * s.period};
}

inline double min_image_dist(const Vec3& a, const Vec3& b, double period) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
        double d = a[std::size_t(c)] - b[std::size_t(c)];
        d -= period * std::round(d / period);
        s += d * d;
    }
    return std::sqrt(s);
}

// Conformal bump potential p(x) = sum amp_i B(|x - x_i| / w_i), min-image.
inline double bump_sum(const ModelSpec& s, const Vec3& x) {
    double p = 0.0;
    for (const Bump& b : s.bumps)
        p += b.amp * bump_profile(min_image_dist(x, b.center, s.period) / b.width);
    return p;
}

// Flat Laplacian of the bump potential, exact; oracle for curvature tests:
// the metric (1+p)^4 delta has scalar curvature -8 (1+p)^{-5} lap(p).
inline double bump_sum_laplacian(const ModelSpec& s, const Vec3& x) {
    double lp = 0.0;
    for (const Bump& b : s.bumps) {
        double rho = min_image_dist(x, b.center, s.period);
        double u = rho / b.width;
        if (u >= 1.0) continue;
        double term;
        if (rho < 1e-12 * b.width) {
            term = 3.0 * bump_profile_d2(0.0);  // = 0; radial C^2 at the origin
        } else {
            term = bump_profile_d2(u) + 2.0 / u * bump_profile_d1(u);
        }
        lp += b.amp * term / (b.width * b.width);
    }
    return lp;
}

inline void validate_model(const ModelSpec& s) {
    auto bad = [](const std::string& msg) { fail(Stage::models, 2, "model: " + msg); };
    switch (s.kind) {
        case ModelKind::flat_torus:
            if (!(s.period > 0.0)) bad("torus period must be positive");
            if (!s.bumps.empty()) bad("flat torus takes no bumps");
            break;
        case ModelKind::bumpy_torus: {
            if (!(s.period > 0.0)) bad("torus period must be positive");
            if (s.bumps.empty()) bad("bumpy torus needs at least one bump");
            Vec3 ctr = torus_center(s);
            for (const Bump& b : s.bumps) {
                if (!(b.width > 0.0) || b.width > 0.25 * s.period)
                    bad("bump width must lie in (0, period/4]");
                if (!(b.amp > -0.9) || b.amp > 10.0)
                    bad("bump amplitude must lie in (-0.9, 10]");
                if (min_image_dist(b.center, ctr, s.period) < 1.0 + b.width)
                    bad("bump too close to the gluing point; the unit ball "
                        "around it must stay flat");
            }
            break;
        }
        case ModelKind::round_sphere:
            if (!(s.sphere_radius > 0.0)) bad("sphere radius must be positive");
            break;
        case ModelKind::schwarzschild_tube:
            if (!(s.tube_eps > 0.0) || s.tube_eps > std::exp(-1.0))
                bad("tube scale must lie in (0, 1/e]");
            break;
        case ModelKind::euclidean_ae:
            if (!s.bumps.empty()) bad("euclidean end takes no bumps");
            if (s.seed_kind != SeedKind::none)
                bad("euclidean end does not carry a seed (it would not decay)");
            break;
    }
    if (s.seed_kind != SeedKind::none) {
        if (s.kind == ModelKind::schwarzschild_tube)
            bad("the model tube carries no seed");
        if (s.seed_kind == SeedKind::constant && s.kind != ModelKind::flat_torus)
            bad("constant seeds are exactly divergence-free only on the flat "
                "torus; use a projected seed here");
        double tr = s.seed[0] + s.seed[3] + s.seed[5];
        if (std::abs(tr) > 1e-12)
            bad("seed coefficients must be trace-free (trace = " +
                std::to_string(tr) + ")");
    }
}

// A summand can only be glued if the unit ball around its gluing point is
// exactly flat in chart coordinates.
inline bool glueable(const ModelSpec& s) {
    switch (s.kind) {
        case ModelKind::flat_torus:
        case ModelKind::bumpy_torus:
        case ModelKind::euclidean_ae:
            return true;  // bump placement already enforces the flat ball
        default:
            return false;
    }
}

// Metric of the summand alone at a point of its own atlas.
inline Sym3 model_metric_at(const ModelSpec& s, const Chart& c, const Vec3& xi) {
    switch (s.kind) {
        case ModelKind::flat_torus:
        case ModelKind::bumpy_torus:
        case ModelKind::euclidean_ae: {
            double f = 1.0 + bump_sum(s, xi);
            double f2 = f * f;
            double w = f2 * f2;
            return Sym3{w, 0, 0, w, 0, w};
        }
        case ModelKind::round_sphere: {
            double r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            double a2 = s.sphere_radius * s.sphere_radius;
            double lam = 2.0 * a2 / (a2 + r2);
            double w = lam * lam;
            return Sym3{w, 0, 0, w, 0, w};
        }
        case ModelKind::schwarzschild_tube: {
            double ch = 2.0 * std::cosh(0.5 * xi[0]);
            double ch2 = ch * ch;
            double w = s.tube_eps * s.tube_eps * ch2 * ch2;
            double st = std::sin(xi[1]);
            return Sym3{w, 0, 0, w, 0, w * st * st};
        }
    }
    (void)c;
    return Sym3{1, 0, 0, 1, 0, 1};
}

// Dimension gate plus atlas construction for a summand on its own.
inline Atlas instantiate(const ModelSpec& s, int dim_m, int dim_n, int dim_k, int grid_n) {
    if (dim_m != 3 || dim_n != 3 || dim_k != 0)
        fail(Stage::models, 2,
             "unsupported dimensions (" + std::to_string(dim_m) + "," +
                 std::to_string(dim_n) + "," + std::to_string(dim_k) +
                 "); this build handles (3,3,0) only");
    validate_model(s);
    switch (s.kind) {
        case ModelKind::flat_torus:
        case ModelKind::bumpy_torus:
            return make_box_periodic_atlas(grid_n, s.period);
        case ModelKind::round_sphere:
            return make_sphere_atlas(grid_n, s.sphere_radius);
        case ModelKind::schwarzschild_tube: {
            double tl = std::log(s.tube_eps);
            return make_tube_atlas(4 * grid_n, grid_n / 2, grid_n, tl, -tl);
        }
        case ModelKind::euclidean_ae: {
            double half = 0.5 * s.period;
            return make_box_open_atlas(grid_n, Vec3{-half, -half, -half},
                                       Vec3{half, half, half});
        }
    }
    fail(Stage::models, 2, "unknown model kind");
}

inline MetricField model_metric(const ModelSpec& s, const Atlas& at) {
    return MetricField(
        at,
        [&s, &at](int chart, const Vec3& xi) {
            return model_metric_at(s, at.charts[std::size_t(chart)], xi);
        },
        Stage::models);
}

// Raw seed for the transverse-traceless tensor: the constant coefficient
// matrix with its pointwise g-trace removed.  Divergence cleanup, where
// requested, is a separate linear solve.
inline Field tt_seed(const ModelSpec& s, const MetricField& m) {
    Field mu = sym_field(*m.atlas);
    mu.set_zero();
    if (s.seed_kind == SeedKind::none) return mu;
    const Atlas& at = *m.atlas;
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        std::size_t nn = c.nn();
        parallel_for(nn, [&, ci](std::size_t b, std::size_t e) {
            for (std::size_t idx = b; idx < e; ++idx) {
                Sym3 t = s.seed;
                if (c.kind == ChartKind::stereo_south) {
                    // seed is stated in the north chart; carry it across
                    int i, j, k;
                    c.unpack(idx, i, j, k);
                    Mat3 J;
                    stereo_flip(at.charts[0].stereo_a, c.coords(i, j, k), &J);
                    t = sym_congruence(J, t);
                }
                Sym3 gn = m.g_at(int(ci), idx);
                double tr = trace_node(m.ginv_at(int(ci), idx), t);
                for (int q = 0; q < 6; ++q)
                    mu.comp(int(ci), q)[idx] =
                        t[std::size_t(q)] - (tr / 3.0) * gn[std::size_t(q)];
            }
        });
    }
    return mu;
}

}  // namespace gluon

#endif
