#ifndef GLUON_KRYLOV_HPP
#define GLUON_KRYLOV_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gluon/field.hpp"

namespace gluon {

struct LinearSolveConfig {
    double tol = 1e-10;  // relative residual target
    int max_iter = 4000;
    std::string precond = "neck_weighted_diagonal";  // or "diagonal", "none"
    int max_restarts = 5;
    int stall_window = 80;
    double stall_factor = 0.7;  // required shrink over one window
    // Krylov depth retained between GMRES restarts.  The glued composite
    // operator carries a broad band of near-null grid modes on the neck;
    // discarding the subspace too early stalls the solve orders of magnitude
    // above the target, so correction solves need depth comparable to the
    // iteration count (~750 at production resolution).
    int restart = 1000;
};

struct CgReport {
    int iters = 0;
    int restarts = 0;
    double rel_residual = 0.0;
    bool converged = false;
};

// Preconditioned conjugate gradients on Field unknowns.  `apply` may refresh
// the fringe of its argument in place; `project` removes known null-space
// content (no-op by default); `inv_diag` is an optional scalar field of
// inverse diagonal estimates shared across components.
template <class Apply, class Ip, class Project>
CgReport cg_field(Apply&& apply, Ip&& ip, Project&& project, const Field& b, Field& x,
                  const Field* inv_diag, const LinearSolveConfig& cfg) {
    const Atlas& at = *b.atlas;
    Field r(at, b.var), z(at, b.var), p(at, b.var), Ap(at, b.var);
    r.set_zero();
    z.set_zero();
    p.set_zero();
    Ap.set_zero();

    auto precondition = [&](const Field& rin, Field& zout) {
        if (!inv_diag) {
            zout.copy_from(rin);
            return;
        }
        for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
            std::size_t nn = at.charts[ci].nn();
            const double* d = inv_diag->comp(int(ci), 0);
            for (int c = 0; c < rin.nc; ++c) {
                const double* rc = rin.comp(int(ci), c);
                double* zc = zout.comp(int(ci), c);
                parallel_for(nn, [=](std::size_t lo, std::size_t hi) {
                    for (std::size_t idx = lo; idx < hi; ++idx) zc[idx] = rc[idx] * d[idx];
                });
            }
        }
    };

    auto fresh_residual = [&]() {
        apply(x, Ap);
        r.copy_from(b);
        r.axpy(-1.0, Ap);
        project(r);
    };

    CgReport rep;
    double bnorm = std::sqrt(std::max(ip(b, b), 0.0));
    if (bnorm == 0.0) {
        x.set_zero();
        rep.converged = true;
        return rep;
    }

    fresh_residual();
    precondition(r, z);
    p.copy_from(z);
    double rz = ip(r, z);
    double window_start = std::sqrt(std::max(ip(r, r), 0.0));
    int window_pos = 0;

    for (rep.iters = 0; rep.iters < cfg.max_iter; ++rep.iters) {
        double rnorm = std::sqrt(std::max(ip(r, r), 0.0));
        rep.rel_residual = rnorm / bnorm;
        if (rep.rel_residual <= cfg.tol) {
            rep.converged = true;
            break;
        }
        if (++window_pos >= cfg.stall_window) {
            if (rnorm > cfg.stall_factor * window_start) {
                if (++rep.restarts > cfg.max_restarts) break;
                fresh_residual();
                precondition(r, z);
                p.copy_from(z);
                rz = ip(r, z);
            }
            window_start = std::sqrt(std::max(ip(r, r), 0.0));
            window_pos = 0;
        }
        apply(p, Ap);
        double pAp = ip(p, Ap);
        if (!(pAp > 0.0)) {  // breakdown: restart from the exact residual
            if (++rep.restarts > cfg.max_restarts) break;
            fresh_residual();
            precondition(r, z);
            p.copy_from(z);
            rz = ip(r, z);
            window_start = std::sqrt(std::max(ip(r, r), 0.0));
            window_pos = 0;
            continue;
        }
        double alpha = rz / pAp;
        x.axpy(alpha, p);
        r.axpy(-alpha, Ap);
        project(r);
        precondition(r, z);
        double rz_new = ip(r, z);
        double beta = rz_new / rz;
        rz = rz_new;
        // p = z + beta p
        p.scale(beta);
        p.axpy(1.0, z);
    }
    project(x);
    double rnorm = std::sqrt(std::max(ip(r, r), 0.0));
    rep.rel_residual = rnorm / bnorm;
    if (rep.rel_residual <= cfg.tol) rep.converged = true;
    return rep;
}

// Restarted GMRES with right diagonal preconditioning on Field unknowns.
// The overset composite of per-chart operators with seam interpolation is
// structurally nonsymmetric, which symmetric Krylov methods cannot absorb;
// GMRES minimizes the true residual per cycle regardless.
template <class Apply, class Ip, class Project>
CgReport gmres_field(Apply&& apply, Ip&& ip, Project&& project, const Field& b, Field& x,
                     const Field* inv_diag, const LinearSolveConfig& cfg) {
    const Atlas& at = *b.atlas;
    const int restart = std::max(1, std::min(cfg.restart, cfg.max_iter));
    CgReport rep;
    double bnorm = std::sqrt(std::max(ip(b, b), 0.0));
    if (bnorm == 0.0) {
        x.set_zero();
        rep.converged = true;
        return rep;
    }

    auto precondition = [&](const Field& rin, Field& zout) {
        if (!inv_diag) {
            zout.copy_from(rin);
            return;
        }
        for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
            std::size_t nn = at.charts[ci].nn();
            const double* d = inv_diag->comp(int(ci), 0);
            for (int c = 0; c < rin.nc; ++c) {
                const double* rc = rin.comp(int(ci), c);
                double* zc = zout.comp(int(ci), c);
                parallel_for(nn, [=](std::size_t lo, std::size_t hi) {
                    for (std::size_t idx = lo; idx < hi; ++idx) zc[idx] = rc[idx] * d[idx];
                });
            }
        }
    };

    std::vector<Field> V;
    V.reserve(std::size_t(restart) + 1);
    Field w(at, b.var), z(at, b.var), r(at, b.var);
    w.set_zero();
    z.set_zero();
    std::vector<double> H(std::size_t(restart + 1) * std::size_t(restart), 0.0);
    std::vector<double> cs(std::size_t(restart), 0.0);
    std::vector<double> sn(std::size_t(restart), 0.0);
    std::vector<double> gvec(std::size_t(restart) + 1, 0.0);
    std::vector<double> y(std::size_t(restart), 0.0);
    auto Hat = [&](int i, int j) -> double& {
        return H[std::size_t(i) * std::size_t(restart) + std::size_t(j)];
    };

    while (rep.iters < cfg.max_iter) {
        apply(x, w);
        r.copy_from(b);
        r.axpy(-1.0, w);
        project(r);
        double beta = std::sqrt(std::max(ip(r, r), 0.0));
        rep.rel_residual = beta / bnorm;
        if (rep.rel_residual <= cfg.tol) {
            rep.converged = true;
            break;
        }
        if (!V.empty()) ++rep.restarts;
        std::fill(H.begin(), H.end(), 0.0);
        std::fill(gvec.begin(), gvec.end(), 0.0);
        gvec[0] = beta;
        V.clear();
        V.emplace_back(at, b.var);
        V.back().copy_from(r);
        V.back().scale(1.0 / beta);

        int j = 0;
        for (; j < restart && rep.iters < cfg.max_iter; ++j, ++rep.iters) {
            precondition(V[std::size_t(j)], z);
            apply(z, w);
            project(w);
            for (int i = 0; i <= j; ++i) {
                double hij = ip(w, V[std::size_t(i)]);
                Hat(i, j) = hij;
                w.axpy(-hij, V[std::size_t(i)]);
            }
            double hnext = std::sqrt(std::max(ip(w, w), 0.0));
            Hat(j + 1, j) = hnext;
            for (int i = 0; i < j; ++i) {
                double t = cs[std::size_t(i)] * Hat(i, j) + sn[std::size_t(i)] * Hat(i + 1, j);
                Hat(i + 1, j) = -sn[std::size_t(i)] * Hat(i, j) +
                                cs[std::size_t(i)] * Hat(i + 1, j);
                Hat(i, j) = t;
            }
            double denom = std::sqrt(Hat(j, j) * Hat(j, j) + hnext * hnext);
            if (!(denom > 0.0)) break;  // fully deflated column: no new info
            cs[std::size_t(j)] = Hat(j, j) / denom;
            sn[std::size_t(j)] = hnext / denom;
            Hat(j, j) = denom;
            gvec[std::size_t(j + 1)] = -sn[std::size_t(j)] * gvec[std::size_t(j)];
            gvec[std::size_t(j)] *= cs[std::size_t(j)];
            rep.rel_residual = std::fabs(gvec[std::size_t(j + 1)]) / bnorm;
            if (rep.rel_residual <= cfg.tol || !(hnext > 1e-300)) {
                ++j;
                break;
            }
            V.emplace_back(at, b.var);
            V.back().copy_from(w);
            V.back().scale(1.0 / hnext);
        }
        // back-substitute the j x j triangle and accumulate the update
        for (int i = j - 1; i >= 0; --i) {
            double acc = gvec[std::size_t(i)];
            for (int k = i + 1; k < j; ++k) acc -= Hat(i, k) * y[std::size_t(k)];
            y[std::size_t(i)] = acc / Hat(i, i);
        }
        w.set_zero();
        for (int i = 0; i < j; ++i) w.axpy(y[std::size_t(i)], V[std::size_t(i)]);
        precondition(w, z);
        x.axpy(1.0, z);
        if (rep.rel_residual <= cfg.tol) {
            rep.converged = true;
            break;
        }
    }
    project(x);
    return rep;
}

// --- sparse rows ---------------------------------------------------------

struct Csr {
    std::int64_t nrows = 0, ncols = 0;
    std::vector<std::int64_t> rowptr;  // size nrows+1
    std::vector<std::int32_t> col;
    std::vector<double> val;
};

inline void csr_matvec(const Csr& A, const std::vector<double>& x, std::vector<double>& y) {
    y.assign(std::size_t(A.nrows), 0.0);
    parallel_for(std::size_t(A.nrows), [&](std::size_t b, std::size_t e) {
        for (std::size_t rrow = b; rrow < e; ++rrow) {
            double acc = 0.0;
            for (std::int64_t q = A.rowptr[rrow]; q < A.rowptr[rrow + 1]; ++q)
                acc += A.val[std::size_t(q)] * x[std::size_t(A.col[std::size_t(q)])];
            y[rrow] = acc;
        }
    });
}

inline Csr csr_transpose(const Csr& A) {
    Csr T;
    T.nrows = A.ncols;
    T.ncols = A.nrows;
    T.rowptr.assign(std::size_t(T.nrows) + 1, 0);
    std::size_t nnz = A.val.size();
    for (std::size_t q = 0; q < nnz; ++q) ++T.rowptr[std::size_t(A.col[q]) + 1];
    for (std::size_t i = 0; i < std::size_t(T.nrows); ++i) T.rowptr[i + 1] += T.rowptr[i];
    T.col.resize(nnz);
    T.val.resize(nnz);
    std::vector<std::int64_t> next(T.rowptr.begin(), T.rowptr.end() - 1);
    for (std::int64_t r = 0; r < A.nrows; ++r)
        for (std::int64_t q = A.rowptr[std::size_t(r)]; q < A.rowptr[std::size_t(r) + 1];
             ++q) {
            std::int64_t pos = next[std::size_t(A.col[std::size_t(q)])]++;
            T.col[std::size_t(pos)] = std::int32_t(r);
            T.val[std::size_t(pos)] = A.val[std::size_t(q)];
        }
    return T;
}

// CG on (A^T A + sigma) z = w, plain vectors.
inline int cg_normal(const Csr& A, const Csr& At, double sigma,
                     const std::vector<double>& w, std::vector<double>& z, double tol,
                     int max_iter) {
    std::size_t n = std::size_t(A.ncols);
    std::vector<double> r(n), p(n), ap(n), tmp(std::size_t(A.nrows));
    auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
        return reduce_sum(n, [&](std::size_t lo, std::size_t hi) {
            double s = 0.0;
            for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
            return s;
        });
    };
    auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
        csr_matvec(A, v, tmp);
        csr_matvec(At, tmp, out);
        for (std::size_t i = 0; i < n; ++i) out[i] += sigma * v[i];
    };
    z.assign(n, 0.0);
    r = w;
    p = r;
    double rr = dot(r, r);
    double b0 = std::sqrt(dot(w, w));
    if (b0 == 0.0) return 0;
    int it = 0;
    for (; it < max_iter; ++it) {
        if (std::sqrt(rr) <= tol * b0) break;
        apply(p, ap);
        double pap = dot(p, ap);
        if (!(pap > 0.0)) break;
        double alpha = rr / pap;
        for (std::size_t i = 0; i < n; ++i) z[i] += alpha * p[i];
        for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * ap[i];
        double rr2 = dot(r, r);
        double beta = rr2 / rr;
        rr = rr2;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    return it;
}

// Cyclic Jacobi eigensolver for small dense symmetric matrices (row-major),
// eigenvalues ascending with matching column eigenvectors.
inline void jacobi_eigensym(int n, std::vector<double> M, std::vector<double>& evals,
                            std::vector<double>& evecs) {
    std::vector<double> V(std::size_t(n) * std::size_t(n), 0.0);
    for (int i = 0; i < n; ++i) V[std::size_t(i * n + i)] = 1.0;
    auto at = [&](std::vector<double>& A, int i, int j) -> double& {
        return A[std::size_t(i * n + j)];
    };
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += at(M, i, j) * at(M, i, j);
        if (off < 1e-28 * double(n)) break;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double apq = at(M, i, j);
                if (apq == 0.0) continue;
                double theta = 0.5 * (at(M, j, j) - at(M, i, i)) / apq;
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < n; ++k) {
                    double mik = at(M, i, k), mjk = at(M, j, k);
                    at(M, i, k) = c * mik - s * mjk;
                    at(M, j, k) = s * mik + c * mjk;
                }
                for (int k = 0; k < n; ++k) {
                    double mki = at(M, k, i), mkj = at(M, k, j);
                    at(M, k, i) = c * mki - s * mkj;
                    at(M, k, j) = s * mki + c * mkj;
                }
                for (int k = 0; k < n; ++k) {
                    double vki = at(V, k, i), vkj = at(V, k, j);
                    at(V, k, i) = c * vki - s * vkj;
                    at(V, k, j) = s * vki + c * vkj;
                }
            }
    }
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[std::size_t(i)] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return at(M, a, a) < at(M, b, b); });
    evals.resize(std::size_t(n));
    evecs.assign(std::size_t(n) * std::size_t(n), 0.0);
    for (int i = 0; i < n; ++i) {
        evals[std::size_t(i)] = at(M, order[std::size_t(i)], order[std::size_t(i)]);
        for (int k = 0; k < n; ++k)
            evecs[std::size_t(k * n + i)] = at(V, k, order[std::size_t(i)]);
    }
}

}  // namespace gluon

#endif
