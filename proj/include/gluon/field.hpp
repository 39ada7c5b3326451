#ifndef GLUON_FIELD_HPP
#define GLUON_FIELD_HPP

#include <cstring>
#include <string>
#include <vector>

#include "gluon/atlas.hpp"
#include "gluon/threads.hpp"

namespace gluon {

// Index variance of a field.  Everything tensorial is stored with lower
// indices except plain vectors; raising/lowering is explicit and happens at
// use sites through the metric caches.
enum class Variance : int32_t {
    scalar = 0,
    vector_up = 1,
    one_form = 2,
    sym2_low = 3,
    sym2_up = 4
};

inline int variance_ncomp(Variance v) {
    switch (v) {
        case Variance::scalar: return 1;
        case Variance::vector_up:
        case Variance::one_form: return 3;
        case Variance::sym2_low:
        case Variance::sym2_up: return 6;
    }
    return 0;
}

// Sign a component picks up under the cross-pole reflection
// (theta1, theta2) -> (-theta1, theta2 + pi): one factor of -1 per theta1
// index.  Symmetric storage order is (00, 01, 02, 11, 12, 22).
inline double pole_parity(Variance v, int c) {
    switch (v) {
        case Variance::scalar: return 1.0;
        case Variance::vector_up:
        case Variance::one_form: return c == 1 ? -1.0 : 1.0;
        case Variance::sym2_low:
        case Variance::sym2_up: return (c == 1 || c == 4) ? -1.0 : 1.0;
    }
    return 1.0;
}

struct Field {
    const Atlas* atlas = nullptr;
    Variance var = Variance::scalar;
    int nc = 1;
    std::vector<std::vector<double>> data;  // [chart][comp * nn + node]

    Field() = default;
    Field(const Atlas& at, Variance v) : atlas(&at), var(v), nc(variance_ncomp(v)) {
        data.resize(at.charts.size());
        for (std::size_t c = 0; c < at.charts.size(); ++c)
            data[c].assign(std::size_t(nc) * at.charts[c].nn(), 0.0);
    }

    double* comp(int chart, int c) {
        return data[std::size_t(chart)].data() + std::size_t(c) * atlas->charts[std::size_t(chart)].nn();
    }
    const double* comp(int chart, int c) const {
        return data[std::size_t(chart)].data() + std::size_t(c) * atlas->charts[std::size_t(chart)].nn();
    }

    void set_zero() {
        for (auto& d : data) std::fill(d.begin(), d.end(), 0.0);
    }

    // x <- x + a*y over all storage (identical layouts assumed).
    void axpy(double a, const Field& y) {
        for (std::size_t c = 0; c < data.size(); ++c) {
            double* xd = data[c].data();
            const double* yd = y.data[c].data();
            std::size_t n = data[c].size();
            parallel_for(n, [=](std::size_t b, std::size_t e) {
                for (std::size_t i = b; i < e; ++i) xd[i] += a * yd[i];
            });
        }
    }

    void scale(double a) {
        for (auto& d : data) {
            double* xd = d.data();
            std::size_t n = d.size();
            parallel_for(n, [=](std::size_t b, std::size_t e) {
                for (std::size_t i = b; i < e; ++i) xd[i] *= a;
            });
        }
    }

    void copy_from(const Field& y) {
        for (std::size_t c = 0; c < data.size(); ++c)
            std::memcpy(data[c].data(), y.data[c].data(), data[c].size() * sizeof(double));
    }
};

inline Field scalar_field(const Atlas& at) { return Field(at, Variance::scalar); }
inline Field vector_field(const Atlas& at) { return Field(at, Variance::vector_up); }
inline Field one_form_field(const Atlas& at) { return Field(at, Variance::one_form); }
inline Field sym_field(const Atlas& at) { return Field(at, Variance::sym2_low); }
inline Field sym_up_field(const Atlas& at) { return Field(at, Variance::sym2_up); }

inline Mat3 mat_transpose(const Mat3& a) {
    return {a[0], a[3], a[6], a[1], a[4], a[7], a[2], a[5], a[8]};
}

// Interpolate all fringe nodes from their donor charts, walking seams in
// stage order.  Gathered donor components are transformed to the target
// chart's basis with the stored transition Jacobians.
inline void fill_fringe(Field& f) {
    const Atlas& at = *f.atlas;
    for (const Seam& s : at.seams) {
        const Chart& dc = at.charts[std::size_t(s.donor_chart)];
        std::size_t dnn = dc.nn();
        const double* dbase = f.data[std::size_t(s.donor_chart)].data();
        double* tbase = f.data[std::size_t(s.target_chart)].data();
        std::size_t tnn = at.charts[std::size_t(s.target_chart)].nn();
        const SeamTarget* targets = s.targets.data();
        const StencilPoint* pts = s.points.data();
        int nc = f.nc;
        Variance var = f.var;
        parallel_for(s.targets.size(), [=](std::size_t b, std::size_t e) {
            for (std::size_t ti = b; ti < e; ++ti) {
                const SeamTarget& t = targets[ti];
                double g[6];
                for (int c = 0; c < nc; ++c) {
                    const double* src = dbase + std::size_t(c) * dnn;
                    double par = pole_parity(var, c);
                    double acc = 0.0;
                    const StencilPoint* p = pts + t.first;
                    for (int q = 0; q < 64; ++q) {
                        double w = p[q].w;
                        if (p[q].flip) w *= par;
                        acc += w * src[p[q].node];
                    }
                    g[c] = acc;
                }
                double out[6];
                switch (var) {
                    case Variance::scalar:
                        out[0] = g[0];
                        break;
                    case Variance::vector_up: {
                        Vec3 v = mat_vec(t.jac_inv, {g[0], g[1], g[2]});
                        out[0] = v[0]; out[1] = v[1]; out[2] = v[2];
                        break;
                    }
                    case Variance::one_form: {
                        Vec3 v = mat_tvec(t.jac, {g[0], g[1], g[2]});
                        out[0] = v[0]; out[1] = v[1]; out[2] = v[2];
                        break;
                    }
                    case Variance::sym2_low: {
                        Sym3 r = sym_congruence(t.jac, {g[0], g[1], g[2], g[3], g[4], g[5]});
                        for (int c = 0; c < 6; ++c) out[c] = r[std::size_t(c)];
                        break;
                    }
                    case Variance::sym2_up: {
                        Sym3 r = sym_congruence(mat_transpose(t.jac_inv),
                                                {g[0], g[1], g[2], g[3], g[4], g[5]});
                        for (int c = 0; c < 6; ++c) out[c] = r[std::size_t(c)];
                        break;
                    }
                }
                for (int c = 0; c < nc; ++c)
                    tbase[std::size_t(c) * tnn + std::size_t(t.node)] = out[c];
            }
        });
    }
}

}  // namespace gluon

#endif
