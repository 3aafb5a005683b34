#pragma once

#include "convsl/errors.hpp"
#include "convsl/fields.hpp"
#include "convsl/numgrid.hpp"
#include "convsl/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

namespace convsl {

namespace detail {

/// Diagonal-major layout of a triangle with m panels. Entry (i, j) lives on
/// diagonal d = i - j at position m - i, so the shifted entries (i - s, j - s)
/// needed by the convolution sums are contiguous and increase with s.
struct TriLayout {
    std::size_t m = 0;
    std::vector<std::size_t> off;

    void reset(std::size_t panels) {
        m = panels;
        off.assign(m + 2, 0);
        for (std::size_t d = 0; d <= m; ++d) off[d + 1] = off[d] + (m - d + 1);
    }
    [[nodiscard]] std::size_t size() const noexcept { return off[m + 1]; }
    [[nodiscard]] std::size_t idx(std::size_t i, std::size_t j) const noexcept {
        return off[i - j] + (m - i);
    }
};

/// sum_{s < len} a[s] * b[s], written out in real arithmetic with four
/// independent accumulators (fixed order, so results are reproducible).
inline cplx dot(const cplx* a, const cplx* b, std::size_t len) noexcept {
    const double* pa = reinterpret_cast<const double*>(a);
    const double* pb = reinterpret_cast<const double*>(b);
    double r0 = 0, r1 = 0, i0 = 0, i1 = 0;
    std::size_t s = 0;
    for (; s + 1 < len; s += 2) {
        const double ar = pa[2 * s], ai = pa[2 * s + 1], br = pb[2 * s], bi = pb[2 * s + 1];
        const double cr = pa[2 * s + 2], ci = pa[2 * s + 3], dr = pb[2 * s + 2], di = pb[2 * s + 3];
        r0 += ar * br - ai * bi;
        i0 += ar * bi + ai * br;
        r1 += cr * dr - ci * di;
        i1 += cr * di + ci * dr;
    }
    if (s < len) {
        const double ar = pa[2 * s], ai = pa[2 * s + 1], br = pb[2 * s], bi = pb[2 * s + 1];
        r0 += ar * br - ai * bi;
        i0 += ar * bi + ai * br;
    }
    return {r0 + r1, i0 + i1};
}

inline cplx qhalf(const cplx* q, std::size_t p) noexcept {
    return p % 2 == 0 ? q[p / 2] : 0.5 * (q[p / 2] + q[p / 2 + 1]);
}

/// One tau-slice of the kernel integral equation, in coordinates shifted by tau
/// (local node i corresponds to x = tau + i*h). The slice owns its workspace
/// and can be reset and reused without reallocation.
///
/// With A(x,t) = int_0^t X(x,xi) dxi the equation reads
///   X = F0 + 1/2 [ int_t^x q A(s,t) ds + H(t,t) - H(x,t)
///                 + int_0^t M(s) (C - G)(x-s, t-s) ds + int_0^t M(s) G(t-s,t-s) ds ],
/// where C is the column integral of A, G its integral along the line of slope 2
/// ending at (x, t), and H the same line integral with weight q.
class Slice {
public:
    void reset(std::size_t m, std::size_t jmax, double h, const cplx* q, const cplx* M) {
        m_ = m;
        jmax_ = std::min(jmax, m);
        h_ = h;
        q_ = q;
        M_ = M;
        L_.reset(m);
        const std::size_t sz = L_.size();
        for (auto* v : {&X_, &A_, &S_, &SQ_, &D_})
            if (v->size() < sz) v->resize(sz);
        Gd_.resize(m + 1);
        Hd_.resize(m + 1);
        Cq_row_.assign(m + 1, cplx{});
    }

    /// Solve for X column by column. F0(i, j) gives the free term.
    template <typename Free>
    void solve(Free&& F0) {
        sweep(F0, nullptr);
    }

    /// Use a given field (in layout()) as the solution, e.g. before derive().
    void load(const std::vector<cplx>& x) {
        std::copy_n(x.begin(), L_.size(), X_.begin());
    }

    /// X <- F0 + (integral operator applied to xin); xin uses layout().
    template <typename Free>
    void apply(const std::vector<cplx>& xin, Free&& F0) {
        sweep(F0, xin.data());
    }

    /// Build the column integrals C, Cq and the line sums U, Uq of the solved
    /// field (overwrites the sweep tables A, S, SQ; D and the diagonal G stay).
    /// Cq is kept only for `row`.
    void derive(std::size_t row) {
        const double hh = 0.5 * h_;
        for (std::size_t j = 0; j <= jmax_; ++j) {
            cplx c{}, cq{};
            for (std::size_t i = j; i <= m_; ++i) {
                const std::size_t id = L_.idx(i, j);
                if (i > j) {
                    const std::size_t ip = L_.idx(i - 1, j);
                    c += hh * (X_[ip] + X_[id]);
                    cq += hh * (q_[i - 1] * X_[ip] + q_[i] * X_[id]);
                }
                if (i == row) Cq_row_[j] = cq;
                cplx u = X_[id], uq = q_[i] * X_[id];
                if (j >= 2) {
                    const std::size_t ip = L_.idx(i - 1, j - 2);
                    u += S_[ip];
                    uq += SQ_[ip];
                }
                A_[id] = c;
                S_[id] = u;
                SQ_[id] = uq;
            }
        }
    }

    [[nodiscard]] std::size_t panels() const noexcept { return m_; }
    [[nodiscard]] std::size_t jmax() const noexcept { return jmax_; }
    [[nodiscard]] double step() const noexcept { return h_; }
    [[nodiscard]] const TriLayout& layout() const noexcept { return L_; }
    [[nodiscard]] const cplx* q() const noexcept { return q_; }
    [[nodiscard]] const cplx* M() const noexcept { return M_; }

    [[nodiscard]] cplx x(std::size_t i, std::size_t j) const noexcept { return X_[L_.idx(i, j)]; }
    [[nodiscard]] const std::vector<cplx>& field() const noexcept { return X_; }
    /// (C - G)(i, j) and G(j, j) of the last sweep.
    [[nodiscard]] cplx dg(std::size_t i, std::size_t j) const noexcept { return D_[L_.idx(i, j)]; }
    [[nodiscard]] cplx gdiag(std::size_t j) const noexcept { return Gd_[j]; }

    // Valid after derive().
    [[nodiscard]] cplx col_int(std::size_t i, std::size_t j) const noexcept {
        return A_[L_.idx(i, j)];
    }
    [[nodiscard]] const cplx* col_int_diag(std::size_t d) const noexcept {
        return A_.data() + L_.off[d];
    }
    [[nodiscard]] cplx col_int_q_row(std::size_t j) const noexcept { return Cq_row_[j]; }

    /// int over s in [x_i - t_j/2, x_i] of X(s, 2(s - x_i) + t_j); bval(p) is
    /// the value of X at the half-node p on the boundary t = 0.
    template <typename BVal>
    [[nodiscard]] cplx line(std::size_t i, std::size_t j, BVal&& bval) const {
        if (j == 0) return {};
        const std::size_t id = L_.idx(i, j);
        if (j % 2 == 0)
            return h_ * (S_[id] - 0.5 * X_[id] - 0.5 * x(i - j / 2, 0));
        const cplx xr = x(i - (j - 1) / 2, 1);
        return h_ * (S_[id] - 0.5 * X_[id] - 0.5 * xr) + 0.25 * h_ * (xr + bval(2 * i - j));
    }

    /// Same line integral with the weight q(s).
    template <typename BVal>
    [[nodiscard]] cplx line_q(std::size_t i, std::size_t j, BVal&& bval) const {
        if (j == 0) return {};
        const std::size_t id = L_.idx(i, j);
        if (j % 2 == 0) {
            const std::size_t e = i - j / 2;
            return h_ * (SQ_[id] - 0.5 * q_[i] * X_[id] - 0.5 * q_[e] * x(e, 0));
        }
        const std::size_t r = i - (j - 1) / 2;
        const cplx xr = x(r, 1);
        const std::size_t p = 2 * i - j;
        return h_ * (SQ_[id] - 0.5 * q_[i] * X_[id] - 0.5 * q_[r] * xr) +
               0.25 * h_ * (q_[r] * xr + qhalf(q_, p) * bval(p));
    }

private:
    template <typename Free>
    void sweep(Free& F0, const cplx* xin) {
        const bool applying = xin != nullptr;
        const cplx* src = applying ? xin : X_.data();
        const double h = h_, hh = 0.5 * h_;
        const std::size_t m = m_;

        for (std::size_t j = 0; j <= jmax_; ++j) {
            if (j == 0) {
                for (std::size_t i = 0; i <= m; ++i) {
                    const std::size_t id = L_.idx(i, 0);
                    X_[id] = F0(i, std::size_t{0});
                    A_[id] = S_[id] = SQ_[id] = D_[id] = cplx{};
                }
                Gd_[0] = Hd_[0] = cplx{};
                continue;
            }
            const bool odd = (j & 1u) != 0;
            const std::size_t half = (j - 1) / 2;

            // On the diagonal every integral term cancels: X(t, t) = F0(t, t).
            {
                const std::size_t id = L_.idx(j, j), idl = L_.idx(j, j - 1);
                const cplx f0 = F0(j, j);
                const cplx xv = applying ? xin[id] : f0;
                X_[id] = f0;
                const cplx a = A_[idl] + hh * (src[idl] + xv);
                cplx s = a, sq = q_[j] * a;
                if (j >= 2) {
                    const std::size_t ip = L_.idx(j - 1, j - 2);
                    s += S_[ip];
                    sq += SQ_[ip];
                }
                cplx g = h * (s - 0.5 * a), hq = h * (sq - 0.5 * q_[j] * a);
                if (odd) {
                    const std::size_t r = j - half;
                    const cplx al = j == 1 ? a : A_[L_.idx(r, 1)];
                    g -= 0.25 * h * al;
                    hq -= 0.25 * h * q_[r] * al;
                }
                A_[id] = a;
                S_[id] = s;
                SQ_[id] = sq;
                D_[id] = -g;
                Gd_[j] = g;
                Hd_[j] = hq;
            }

            cplx m2 = 0.5 * M_[0] * Gd_[j];
            for (std::size_t s = 1; s < j; ++s) m2 += M_[s] * Gd_[j - s];
            m2 *= h;
            const cplx hdj = Hd_[j];

            cplx crun{}, t1run{};
            cplx aprev = A_[L_.idx(j, j)];
            cplx qaprev = q_[j] * aprev;

            for (std::size_t i = j + 1; i <= m; ++i) {
                const std::size_t id = L_.idx(i, j), idl = L_.idx(i, j - 1);
                const cplx a0 = A_[idl] + hh * src[idl];
                const cplx* Dp = D_.data() + L_.off[i - j] + (m - i);
                const cplx conv = j >= 2 ? h * dot(M_ + 1, Dp + 1, j - 1) : cplx{};
                cplx sprev{}, sqprev{};
                if (j >= 2) {
                    const std::size_t ip = L_.idx(i - 1, j - 2);
                    sprev = S_[ip];
                    sqprev = SQ_[ip];
                }
                const std::size_t r = i - half;
                const cplx alast = (odd && j > 1) ? A_[L_.idx(r, 1)] : cplx{};
                const cplx qi = q_[i], qr = q_[r];

                struct Local {
                    cplx c, t1, s, sq, dv, b;
                };
                auto eval = [&](cplx a) {
                    Local l;
                    l.c = crun + hh * (aprev + a);
                    l.t1 = t1run + hh * (qaprev + qi * a);
                    l.s = a + sprev;
                    l.sq = qi * a + sqprev;
                    cplx g = h * (l.s - 0.5 * a), hq = h * (l.sq - 0.5 * qi * a);
                    if (odd) {
                        const cplx al = j == 1 ? a : alast;
                        g -= 0.25 * h * al;
                        hq -= 0.25 * h * qr * al;
                    }
                    l.dv = l.c - g;
                    l.b = l.t1 + hdj - hq + hh * M_[0] * l.dv + conv + m2;
                    return l;
                };

                const cplx f0 = F0(i, j);
                cplx a;
                if (applying) {
                    a = a0 + hh * xin[id];
                } else {
                    // The row integral A(i, j) contains X(i, j) itself; the
                    // bracket is affine in A, so solve that scalar equation.
                    const Local l0 = eval(a0);
                    const cplx beta = eval(a0 + 1.0).b - l0.b;
                    const cplx xv = (f0 + 0.5 * l0.b) / (1.0 - 0.5 * hh * beta);
                    X_[id] = xv;
                    a = a0 + hh * xv;
                }
                const Local l = eval(a);
                if (applying) X_[id] = f0 + 0.5 * l.b;
                A_[id] = a;
                S_[id] = l.s;
                SQ_[id] = l.sq;
                D_[id] = l.dv;
                crun = l.c;
                t1run = l.t1;
                aprev = a;
                qaprev = qi * a;
            }
        }
    }

    std::size_t m_ = 0, jmax_ = 0;
    double h_ = 0.0;
    const cplx* q_ = nullptr;
    const cplx* M_ = nullptr;
    TriLayout L_;
    std::vector<cplx> X_, A_, S_, SQ_, D_, Gd_, Hd_, Cq_row_;
};

/// Free term of the transformation-kernel equation,
/// 1/2 ( int_{t/2}^{x-t/2} q + (x - t) int_0^t M ).
struct KernelFreeTerm {
    std::vector<cplx> Qh;    // int_0^{p h/2} q, p = 0..2n
    std::vector<cplx> Mcum;  // int_0^{x_j} M
    double h = 0.0;

    KernelFreeTerm(const SampledFunction& q, const SampledFunction& M) : h(q.grid().step()) {
        const std::size_t n = q.grid().panels();
        const auto cq = cumulative(q.values(), h);
        Qh.resize(2 * n + 1);
        for (std::size_t p = 0; p <= 2 * n; ++p) Qh[p] = half_cumulative(cq, q.values(), p, h);
        Mcum = cumulative(M.values(), h);
    }

    cplx operator()(std::size_t i, std::size_t j) const noexcept {
        return 0.5 * (Qh[2 * i - j] - Qh[j] + static_cast<double>(i - j) * h * Mcum[j]);
    }
    /// P(y, 0) = 1/2 int_0^y q at the half-node y = p h/2.
    [[nodiscard]] cplx boundary(std::size_t p) const noexcept { return 0.5 * Qh[p]; }
};

/// Free term of the linearisation kernel on slice tau = t_k, read from the
/// tables of the solved transformation kernel Pt = P(q, M~) in local coordinates.
struct LinearizationFreeTerm {
    const Slice* Pt;
    cplx operator()(std::size_t i, std::size_t j) const noexcept {
        return 0.5 * (static_cast<double>(i - j) * Pt->step() + Pt->dg(i, j) + Pt->gdiag(j));
    }
};

inline void check_inputs(const SampledFunction& q, const SampledFunction& M) {
    q.require_same(M);
}

/// Solve P(q, M) on columns 0..jmax into `ws` and build its derived tables
/// with the q-weighted column integral kept for `row`.
inline void solve_kernel_slice(const SampledFunction& q, const SampledFunction& M, std::size_t jmax,
                               std::size_t row, Slice& ws) {
    const std::size_t n = q.grid().panels();
    KernelFreeTerm ft(q, M);
    ws.reset(n, jmax, q.grid().step(), q.data(), M.data());
    ws.solve(ft);
    ws.derive(row);
}

/// Values R(x_row, t_j), j = 0..jlast, from a kernel slice solved and derived
/// at `row`. The t-derivative of P is evaluated by its explicit formula.
inline std::vector<cplx> r_row(const Slice& P, const KernelFreeTerm& ft, std::size_t row,
                               std::size_t jlast) {
    const double h = P.step();
    const cplx* q = P.q();
    const cplx* M = P.M();
    auto bval = [&](std::size_t p) { return ft.boundary(p); };
    std::vector<cplx> R(jlast + 1);
    std::vector<cplx> ldiag(jlast + 1);
    for (std::size_t j = 0; j <= jlast; ++j) ldiag[j] = P.line(j, j, bval);

    for (std::size_t j = 0; j <= jlast; ++j) {
        cplx v = -0.25 * (qhalf(q, 2 * row - j) + qhalf(q, j));
        v += 0.5 * (static_cast<double>(row - j) * h * M[j] - ft.Mcum[j]);
        v += 0.5 * (P.col_int_q_row(j) - P.line_q(j, j, bval) - P.line_q(row, j, bval));
        cplx conv{};
        if (j > 0) {
            for (std::size_t s = 0; s <= j; ++s) {
                const double w = (s == 0 || s == j) ? 0.5 * h : h;
                const cplx term = P.col_int(row - s, j - s) - ldiag[j - s] -
                                  P.line(row - s, j - s, bval);
                conv += w * M[s] * term;
            }
        }
        R[j] = v + 0.5 * conv;
    }
    return R;
}

}  // namespace detail

/// Transformation-operator kernel P(x, t; q, M) on the triangle, by a direct
/// sweep in t. Columns beyond `jmax` (if given) are left at zero; the values
/// on t <= t_jmax depend only on M restricted to (0, t_jmax).
[[nodiscard]] inline TriangleField solve_P(const SampledFunction& q, const SampledFunction& M,
                                           std::size_t jmax = std::numeric_limits<std::size_t>::max()) {
    detail::check_inputs(q, M);
    const std::size_t n = q.grid().panels();
    detail::KernelFreeTerm ft(q, M);
    detail::Slice ws;
    ws.reset(n, jmax, q.grid().step(), q.data(), M.data());
    ws.solve(ft);
    TriangleField P(q.grid());
    for (std::size_t i = 0; i <= n; ++i)
        for (std::size_t j = 0; j <= std::min(i, ws.jmax()); ++j) P(i, j) = ws.x(i, j);
    return P;
}

/// The same kernel by successive approximations P_{k+1} = F0 + K P_k.
[[nodiscard]] inline TriangleField solve_P_iterative(const SampledFunction& q,
                                                     const SampledFunction& M,
                                                     double tol_iter = 1e-12,
                                                     std::size_t max_iter = 60) {
    detail::check_inputs(q, M);
    const std::size_t n = q.grid().panels();
    detail::KernelFreeTerm ft(q, M);
    detail::Slice ws;
    ws.reset(n, n, q.grid().step(), q.data(), M.data());
    const auto& L = ws.layout();
    std::vector<cplx> cur(L.size());
    for (std::size_t j = 0; j <= n; ++j)
        for (std::size_t i = j; i <= n; ++i) cur[L.idx(i, j)] = ft(i, j);

    double inc = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < max_iter; ++it) {
        ws.apply(cur, ft);
        double diff = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < L.size(); ++k) {
            diff = std::max(diff, std::abs(ws.field()[k] - cur[k]));
            scale = std::max(scale, std::abs(ws.field()[k]));
        }
        std::copy(ws.field().begin(), ws.field().begin() + static_cast<std::ptrdiff_t>(L.size()),
                  cur.begin());
        inc = diff;
        if (diff <= tol_iter * std::max(1.0, scale)) {
            TriangleField P(q.grid());
            for (std::size_t i = 0; i <= n; ++i)
                for (std::size_t j = 0; j <= i; ++j) P(i, j) = cur[L.idx(i, j)];
            return P;
        }
    }
    throw IterationFailure("successive approximations for P did not converge", inc);
}

/// R(x_row, t) = dP/dt (x_row, t) at every t-node 0..x_row, from the explicit
/// formula (no numerical differentiation).
[[nodiscard]] inline SampledFunction compute_R(const TriangleField& P, const SampledFunction& q,
                                               const SampledFunction& M, std::size_t x_row) {
    detail::check_inputs(q, M);
    if (!(P.grid() == q.grid())) throw ArgumentError("kernel and coefficients on different grids");
    const std::size_t n = q.grid().panels();
    if (x_row > n) throw ArgumentError("row index beyond the grid");
    detail::KernelFreeTerm ft(q, M);
    detail::Slice ws;
    ws.reset(n, n, q.grid().step(), q.data(), M.data());
    // Load the given kernel into the workspace instead of solving.
    std::vector<cplx> xin(ws.layout().size());
    for (std::size_t i = 0; i <= n; ++i)
        for (std::size_t j = 0; j <= i; ++j) xin[ws.layout().idx(i, j)] = P(i, j);
    ws.load(xin);
    ws.derive(x_row);
    auto R = detail::r_row(ws, ft, x_row, x_row);
    SampledFunction out(q.grid());
    for (std::size_t j = 0; j <= x_row; ++j) out[j] = R[j];
    return out;
}

/// Linearisation kernel F(x, t, tau; q, M, M~) on the full pyramid. Each
/// tau-slice is an independent problem and slices run concurrently.
[[nodiscard]] inline PyramidField solve_F(const SampledFunction& q, const SampledFunction& M,
                                          const SampledFunction& M_tilde, unsigned threads = 1) {
    detail::check_inputs(q, M);
    detail::check_inputs(q, M_tilde);
    const Grid& g = q.grid();
    const std::size_t n = g.panels();
    detail::Slice Pt;
    {
        detail::KernelFreeTerm ft(q, M_tilde);
        Pt.reset(n, n, g.step(), q.data(), M_tilde.data());
        Pt.solve(ft);
    }
    PyramidField F(g);
    const unsigned workers = worker_count(n + 1, threads);
    std::vector<detail::Slice> ws(workers);
    parallel_for_workers(n + 1, threads, [&](std::size_t k, unsigned w) {
        detail::Slice& s = ws[w];
        const std::size_t m = n - k;
        s.reset(m, m, g.step(), q.data() + k, M.data());
        s.solve(detail::LinearizationFreeTerm{&Pt});
        cplx* out = F.slice(k);
        for (std::size_t i = 0; i <= m; ++i)
            for (std::size_t j = 0; j <= i; ++j) out[TriangleField::index(i, j)] = s.x(i, j);
    });
    return F;
}

/// Index window of compute_Phi: Phi(x_j, t_k) for kmin <= k <= j <= jmax.
struct PhiRange {
    std::size_t kmin = 0;
    std::size_t jmax = std::numeric_limits<std::size_t>::max();
};

/// Phi(x, t) = d/dx F(pi, x, t; q, M, M~) on the triangle, from its explicit
/// integral representation. Slices of F are streamed, so memory stays O(n^2).
[[nodiscard]] inline TriangleField compute_Phi(const SampledFunction& q, const SampledFunction& M,
                                               const SampledFunction& M_tilde,
                                               PhiRange range = {}, unsigned threads = 1) {
    detail::check_inputs(q, M);
    detail::check_inputs(q, M_tilde);
    const Grid& g = q.grid();
    const std::size_t n = g.panels();
    const double h = g.step();
    const std::size_t jmax = std::min(range.jmax, n);
    const std::size_t kmin = range.kmin;
    TriangleField Phi(g);
    if (kmin > jmax) return Phi;

    detail::KernelFreeTerm pft(q, M_tilde);
    detail::Slice Pt;
    Pt.reset(n, jmax - kmin, h, q.data(), M_tilde.data());
    Pt.solve(pft);
    Pt.derive(n);
    auto pb = [&](std::size_t p) { return pft.boundary(p); };

    const std::size_t count = jmax - kmin + 1;
    const unsigned workers = worker_count(count, threads);
    std::vector<detail::Slice> ws(workers);
    std::vector<std::vector<cplx>> ldiag(workers);

    parallel_for_workers(count, threads, [&](std::size_t c, unsigned w) {
        const std::size_t k = kmin + c;
        const std::size_t m = n - k;
        const std::size_t jl = jmax - k;
        detail::Slice& F = ws[w];
        F.reset(m, jl, h, q.data() + k, M.data());
        F.solve(detail::LinearizationFreeTerm{&Pt});
        F.derive(m);
        // On the boundary t = tau the slice equals (x - tau)/2.
        auto fb = [h](std::size_t p) { return cplx(0.25 * h * static_cast<double>(p)); };
        auto& ld = ldiag[w];
        ld.resize(jl + 1);
        for (std::size_t j = 0; j <= jl; ++j) ld[j] = F.line(j, j, fb);

        for (std::size_t j = 0; j <= jl; ++j) {
            const cplx I = Pt.col_int(m, j) - Pt.line(j, j, pb) - Pt.line(m, j, pb);
            cplx J = F.col_int_q_row(j) - F.line_q(j, j, fb) - F.line_q(m, j, fb);
            cplx K{};
            if (j > 0) {
                for (std::size_t s = 0; s <= j; ++s) {
                    const double wgt = (s == 0 || s == j) ? 0.5 * h : h;
                    K += wgt * M[s] * (F.col_int(m - s, j - s) - ld[j - s] - F.line(m - s, j - s, fb));
                }
            }
            Phi(j + k, k) = -0.5 + 0.5 * I + 0.5 * (J + K);
        }
    });
    return Phi;
}

struct SaBoundReport {
    double C = 0.0;                  ///< int |q| + 3/4 int (pi - s)|M|
    double F0_max = 0.0;             ///< sup of the free term
    std::vector<double> ratio;       ///< ratio[k] = max |F_k| / (F0 (C t)^k / k!), k = 0..depth
    double max_ratio = 0.0;          ///< max over k >= 1
};

/// Successive approximations F_{k+1} = K F_k for the kernel equation, compared
/// with the majorant F0 (C t)^k / k!. With all_slices the linearisation kernel
/// (M~ = M) is checked on every tau-slice in addition to the tau = 0 kernel.
[[nodiscard]] inline SaBoundReport sa_bound_check(const SampledFunction& q, const SampledFunction& M,
                                                  std::size_t depth, bool all_slices = true,
                                                  unsigned threads = 1) {
    detail::check_inputs(q, M);
    if (depth > 60) throw ArgumentError("depth exceeds the iteration limit");
    const Grid& g = q.grid();
    const std::size_t n = g.panels();
    const double h = g.step();

    SaBoundReport rep;
    {
        SampledFunction aq(g), am(g);
        for (std::size_t i = 0; i <= n; ++i) {
            aq[i] = std::abs(q[i]);
            am[i] = (std::numbers::pi - g.node(i)) * std::abs(M[i]);
        }
        rep.C = integral(aq).real() + 0.75 * integral(am).real();
    }

    detail::KernelFreeTerm pft(q, M);
    detail::Slice Pt;
    Pt.reset(n, n, h, q.data(), M.data());
    Pt.solve(pft);

    // Each problem: (slice offset k, free term kind). Offset k = 0 with the
    // kernel free term is the transformation kernel itself.
    struct Job {
        std::size_t k;
        bool kernel;
    };
    std::vector<Job> jobs{{0, true}};
    if (all_slices)
        for (std::size_t k = 0; k < n; ++k) jobs.push_back({k, false});

    auto zero = [](std::size_t, std::size_t) { return cplx{}; };
    std::vector<double> f0max(jobs.size(), 0.0);
    const unsigned workers = worker_count(jobs.size(), threads);
    std::vector<detail::Slice> ws(workers);

    // sup over t > 0 of |F_k| / (C t)^k k!, per job and order
    std::vector<std::vector<double>> best(jobs.size(), std::vector<double>(depth + 1, 0.0));
    parallel_for_workers(jobs.size(), threads, [&](std::size_t jb, unsigned w) {
        const Job job = jobs[jb];
        const std::size_t m = n - job.k;
        detail::Slice& s = ws[w];
        s.reset(m, m, h, q.data() + job.k, M.data());
        const auto& L = s.layout();
        std::vector<cplx> cur(L.size());
        for (std::size_t j = 0; j <= m; ++j)
            for (std::size_t i = j; i <= m; ++i)
                cur[L.idx(i, j)] = job.kernel ? pft(i, j) : detail::LinearizationFreeTerm{&Pt}(i, j);
        double fmax = 0.0;
        for (std::size_t e = 0; e < L.size(); ++e) fmax = std::max(fmax, std::abs(cur[e]));
        f0max[jb] = fmax;
        double fact = 1.0;
        for (std::size_t order = 0; order <= depth; ++order) {
            if (order > 0) {
                s.apply(cur, zero);
                std::copy_n(s.field().begin(), L.size(), cur.begin());
                fact *= static_cast<double>(order);
            }
            double b = 0.0;
            for (std::size_t j = 0; j <= m; ++j) {
                const double t = static_cast<double>(j + job.k) * h;
                if (t <= 0.0) continue;
                const double denom = std::pow(rep.C * t, static_cast<double>(order)) / fact;
                for (std::size_t i = j; i <= m; ++i) {
                    const double a = std::abs(cur[L.idx(i, j)]);
                    if (a == 0.0) continue;
                    b = std::max(b, denom > 0.0 ? a / denom : std::numeric_limits<double>::infinity());
                }
            }
            best[jb][order] = b;
        }
    });

    // The majorant uses the sup of the free term over its own domain: the
    // triangle for the kernel, the whole pyramid for the tau-slices.
    double pyr_max = 0.0;
    for (std::size_t jb = 1; jb < jobs.size(); ++jb) pyr_max = std::max(pyr_max, f0max[jb]);
    rep.F0_max = std::max(f0max[0], pyr_max);
    rep.ratio.assign(depth + 1, 0.0);
    for (std::size_t jb = 0; jb < jobs.size(); ++jb) {
        const double f0 = jb == 0 ? f0max[0] : pyr_max;
        if (f0 <= 0.0) continue;
        for (std::size_t order = 0; order <= depth; ++order)
            rep.ratio[order] = std::max(rep.ratio[order], best[jb][order] / f0);
    }
    for (std::size_t order = 1; order <= depth; ++order)
        rep.max_ratio = std::max(rep.max_ratio, rep.ratio[order]);
    return rep;
}

}  // namespace convsl
