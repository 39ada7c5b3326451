#ifndef GLUON_MAT3_HPP
#define GLUON_MAT3_HPP

#include <array>
#include <cmath>

// Small fixed-size linear algebra used pointwise on 3x3 metric blocks.
// Symmetric tensors are stored as 6 components in upper-triangle order
// (00, 01, 02, 11, 12, 22); Mat3 is row-major.

namespace gluon {

using Mat3 = std::array<double, 9>;
using Sym3 = std::array<double, 6>;
using Vec3 = std::array<double, 3>;

// (i,j) -> index into the 6-component symmetric storage, i<=j not required.
inline int sym_idx(int i, int j) {
    static const int tab[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
    return tab[i][j];
}

inline double sym_det(const Sym3& a) {
    return a[0] * (a[3] * a[5] - a[4] * a[4])
         - a[1] * (a[1] * a[5] - a[4] * a[2])
         + a[2] * (a[1] * a[4] - a[3] * a[2]);
}

inline Sym3 sym_inverse(const Sym3& a, double det) {
    double id = 1.0 / det;
    Sym3 inv;
    inv[0] = (a[3] * a[5] - a[4] * a[4]) * id;
    inv[1] = (a[2] * a[4] - a[1] * a[5]) * id;
    inv[2] = (a[1] * a[4] - a[2] * a[3]) * id;
    inv[3] = (a[0] * a[5] - a[2] * a[2]) * id;
    inv[4] = (a[1] * a[2] - a[0] * a[4]) * id;
    inv[5] = (a[0] * a[3] - a[1] * a[1]) * id;
    return inv;
}

// Cholesky-based SPD test; tolerates nothing (any nonpositive pivot fails).
inline bool sym_is_spd(const Sym3& a) {
    double l00 = a[0];
    if (l00 <= 0) return false;
    l00 = std::sqrt(l00);
    double l10 = a[1] / l00, l20 = a[2] / l00;
    double d1 = a[3] - l10 * l10;
    if (d1 <= 0) return false;
    double l11 = std::sqrt(d1);
    double l21 = (a[4] - l20 * l10) / l11;
    double d2 = a[5] - l20 * l20 - l21 * l21;
    return d2 > 0;
}

inline Mat3 mat_mul(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
            double aik = a[3 * i + k];
            for (int j = 0; j < 3; ++j) c[3 * i + j] += aik * b[3 * k + j];
        }
    return c;
}

inline Vec3 mat_vec(const Mat3& a, const Vec3& v) {
    return {a[0] * v[0] + a[1] * v[1] + a[2] * v[2],
            a[3] * v[0] + a[4] * v[1] + a[5] * v[2],
            a[6] * v[0] + a[7] * v[1] + a[8] * v[2]};
}

inline Vec3 mat_tvec(const Mat3& a, const Vec3& v) {  // A^T v
    return {a[0] * v[0] + a[3] * v[1] + a[6] * v[2],
            a[1] * v[0] + a[4] * v[1] + a[7] * v[2],
            a[2] * v[0] + a[5] * v[1] + a[8] * v[2]};
}

inline double mat_det(const Mat3& a) {
    return a[0] * (a[4] * a[8] - a[5] * a[7])
         - a[1] * (a[3] * a[8] - a[5] * a[6])
         + a[2] * (a[3] * a[7] - a[4] * a[6]);
}

inline Mat3 mat_inverse(const Mat3& a) {
    double id = 1.0 / mat_det(a);
    Mat3 inv;
    inv[0] = (a[4] * a[8] - a[5] * a[7]) * id;
    inv[1] = (a[2] * a[7] - a[1] * a[8]) * id;
    inv[2] = (a[1] * a[5] - a[2] * a[4]) * id;
    inv[3] = (a[5] * a[6] - a[3] * a[8]) * id;
    inv[4] = (a[0] * a[8] - a[2] * a[6]) * id;
    inv[5] = (a[2] * a[3] - a[0] * a[5]) * id;
    inv[6] = (a[3] * a[7] - a[4] * a[6]) * id;
    inv[7] = (a[1] * a[6] - a[0] * a[7]) * id;
    inv[8] = (a[0] * a[4] - a[1] * a[3]) * id;
    return inv;
}

// S' = J^T S J for lower-index symmetric tensors, J = d(donor)/d(target).
inline Sym3 sym_congruence(const Mat3& j, const Sym3& s) {
    Mat3 sm = {s[0], s[1], s[2], s[1], s[3], s[4], s[2], s[4], s[5]};
    Mat3 tmp{};  // S J
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
            double sik = sm[3 * i + k];
            for (int c = 0; c < 3; ++c) tmp[3 * i + c] += sik * j[3 * k + c];
        }
    Sym3 out{};
    for (int r = 0; r < 3; ++r)
        for (int c = r; c < 3; ++c) {
            double v = 0;
            for (int i = 0; i < 3; ++i) v += j[3 * i + r] * tmp[3 * i + c];
            out[sym_idx(r, c)] = v;
        }
    return out;
}

}  // namespace gluon

#endif
