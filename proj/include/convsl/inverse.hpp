#pragma once

#include "convsl/charfield.hpp"
#include "convsl/errors.hpp"
#include "convsl/fields.hpp"
#include "convsl/forward.hpp"
#include "convsl/kernel_ops.hpp"
#include "convsl/numgrid.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

namespace convsl {

struct InverseOptions {
    double delta0 = std::numbers::pi / 8.0;      ///< first contraction interval
    double delta_min = std::numbers::pi / 64.0;  ///< smallest interval tried after halving
    double tol_fix = 1e-8;                       ///< relative L2 increment of the fixed point
    std::size_t max_fix = 50;
    std::size_t refine_steps = 2;  ///< defect corrections per linear block
    double mean_factor = 1e-2;     ///< tol_mean = mean_factor (1 + ||q||)
    double main_factor = 1e-3;     ///< tol_main = main_factor (1 + ||v||)
    unsigned threads = 1;
};

/// The main equation -v(pi - x) = R(pi, x; q, M) for unknown M.
struct MainEqProblem {
    SampledFunction q;
    SampledFunction v;

    MainEqProblem(SampledFunction q_, SampledFunction v_) : q(std::move(q_)), v(std::move(v_)) {
        q.require_same(v);
    }

    [[nodiscard]] const Grid& grid() const noexcept { return q.grid(); }
    [[nodiscard]] double tol_mean(const InverseOptions& o = {}) const {
        return o.mean_factor * (1.0 + l2(q));
    }
    [[nodiscard]] double tol_main(const InverseOptions& o = {}) const {
        return o.main_factor * (1.0 + l2(v));
    }
    /// |int v - 1/2 int q|, the solvability condition of the main equation.
    [[nodiscard]] double mean_residual() const {
        return std::abs(integral(v) - 0.5 * integral(q));
    }
};

struct BlockRecord {
    std::string stage;     ///< "contraction", "continuation" or "final"
    double left = 0.0;     ///< block is (left, right]
    double right = 0.0;
    std::size_t iterations = 0;
    std::vector<double> increments;  ///< fixed-point increments or defect-correction sizes
    double residual = 0.0;           ///< L2 residual of the main equation on the block
};

struct SolveTrace {
    double delta0 = 0.0;          ///< contraction interval actually used
    std::size_t halvings = 0;
    double mean_residual = 0.0;   ///< |int v - 1/2 int q|
    double z_mean = 0.0;          ///< |int z| of the weighted solve
    std::vector<BlockRecord> blocks;
    double final_residual = 0.0;
    double tol_main = 0.0;
};

struct InverseResult {
    SampledFunction M;
    SolveTrace trace;
};

/// h(x) = (pi - x) M(x) and z = h - int_0^x h/(pi - t), the two unknowns of
/// the weighted formulation. Nodes at x = pi carry zero.
struct WeightedUnknown {
    SampledFunction h;
    SampledFunction z;

    [[nodiscard]] static WeightedUnknown from_h(const SampledFunction& h) {
        const Grid& g = h.grid();
        const std::size_t n = g.panels();
        SampledFunction f(g);
        for (std::size_t i = 0; i < n; ++i) f[i] = h[i] / (std::numbers::pi - g.node(i));
        const auto c = cumulative(f);
        SampledFunction z(g);
        for (std::size_t i = 0; i < n; ++i) z[i] = h[i] - c[i];
        return {h, std::move(z)};
    }

    /// Inverse transform. With zero_mean the form h = z - (1/(pi - x)) int_x^pi z
    /// is used, which coincides with the general one when int z = 0.
    [[nodiscard]] static WeightedUnknown from_z(const SampledFunction& z, bool zero_mean = false) {
        const Grid& g = z.grid();
        const std::size_t n = g.panels();
        const auto c = cumulative(z);
        const cplx total = c[n];
        SampledFunction h(g);
        for (std::size_t i = 0; i < n; ++i) {
            const double w = std::numbers::pi - g.node(i);
            h[i] = zero_mean ? z[i] - (total - c[i]) / w : z[i] + c[i] / w;
        }
        return {std::move(h), z};
    }
};

/// g(x) = (1/(pi - x)) (1/2 (q(pi - x/2) + q(x/2)) - 2 v(pi - x)), zero at x = pi.
[[nodiscard]] inline SampledFunction g_term(const SampledFunction& q, const SampledFunction& v) {
    q.require_same(v);
    const Grid& g = q.grid();
    const std::size_t n = g.panels();
    SampledFunction out(g);
    for (std::size_t j = 0; j < n; ++j) {
        const cplx qs = detail::qhalf(q.data(), 2 * n - j) + detail::qhalf(q.data(), j);
        out[j] = (0.5 * qs - 2.0 * v[n - j]) / (std::numbers::pi - g.node(j));
    }
    return out;
}

namespace detail {

/// R(pi, x_j; q, M) for j = 0..jlast, with P solved on columns 0..jlast only.
inline std::vector<cplx> r_at_pi(const SampledFunction& q, const SampledFunction& M,
                                 std::size_t jlast) {
    const std::size_t n = q.grid().panels();
    Slice ws;
    solve_kernel_slice(q, M, jlast, n, ws);
    return r_row(ws, KernelFreeTerm(q, M), n, jlast);
}

/// D_q M from an R row: -(2R + 1/2(q(pi - x/2) + q(x/2)) - (pi - x) M)/(pi - x).
inline std::vector<cplx> dq_from_r(const SampledFunction& q, const SampledFunction& M,
                                   const std::vector<cplx>& R) {
    const Grid& g = q.grid();
    const std::size_t n = g.panels();
    const std::size_t last = std::min(R.size(), n);
    std::vector<cplx> out(R.size());
    for (std::size_t j = 0; j < last; ++j) {
        const double w = std::numbers::pi - g.node(j);
        const cplx qs = qhalf(q.data(), 2 * n - j) + qhalf(q.data(), j);
        out[j] = -(2.0 * R[j] + 0.5 * qs - w * M[j]) / w;
    }
    return out;
}

/// phi_j = -v(pi - x_j) - R(pi, x_j; q, M), j = 0..jlast.
inline std::vector<cplx> main_defect(const MainEqProblem& pb, const SampledFunction& M,
                                     std::size_t jlast) {
    const std::size_t n = pb.grid().panels();
    auto phi = r_at_pi(pb.q, M, jlast);
    for (std::size_t j = 0; j <= jlast; ++j) phi[j] = -pb.v[n - j] - phi[j];
    return phi;
}

inline double block_norm(const std::vector<cplx>& f, std::size_t a, std::size_t b, double h) {
    if (b <= a) return 0.0;
    double s = 0.5 * (std::norm(f[a]) + std::norm(f[b]));
    for (std::size_t i = a + 1; i < b; ++i) s += std::norm(f[i]);
    return std::sqrt(s * h);
}

/// Trapezoid march for y_i a_i + int_{x_a}^{x_i} K(i, l) y_l = b_i, i = a+1..b,
/// with y_a = 0 (the unknown vanishes at the left end of the block).
template <typename Kernel, typename Diag>
std::vector<cplx> volterra_march(std::size_t a, std::size_t b, double h, Kernel&& K, Diag&& diag,
                                 const std::vector<cplx>& rhs, const std::string& stage) {
    std::vector<cplx> y(b + 1, cplx{});
    for (std::size_t i = a + 1; i <= b; ++i) {
        cplx acc{};
        for (std::size_t l = a + 1; l < i; ++l) acc += K(i, l) * y[l];
        const cplx den = diag(i) + 0.5 * h * K(i, i);
        if (!(std::abs(den) > 1e-12))
            throw SolverError(stage, "degenerate diagonal at node " + std::to_string(i));
        y[i] = (rhs[i] - h * acc) / den;
        if (!std::isfinite(std::abs(y[i])))
            throw SolverError(stage, "non-finite value at node " + std::to_string(i));
    }
    return y;
}

}  // namespace detail

/// D_q M(x) at every node, with the full transformation kernel of (q, M).
[[nodiscard]] inline SampledFunction apply_Dq(const SampledFunction& M, const SampledFunction& q) {
    q.require_same(M);
    const std::size_t n = q.grid().panels();
    const auto R = detail::r_at_pi(q, M, n);
    SampledFunction out(q.grid(), detail::dq_from_r(q, M, R));
    out[n] = cplx{};
    return out;
}

/// Main-equation defect -v(pi - x) - R(pi, x; q, M) on the whole grid.
[[nodiscard]] inline SampledFunction main_residual(const MainEqProblem& pb, const SampledFunction& M) {
    return SampledFunction(pb.grid(), detail::main_defect(pb, M, pb.grid().panels()));
}

/// Fixed-point iteration M <- g + D_q M on (0, delta); delta is snapped to the
/// nearest node. Only M on (0, delta) enters the kernel there, so P is solved
/// on those columns only. Throws NonContraction when the increments keep
/// growing or the iteration budget runs out.
[[nodiscard]] inline SampledFunction local_contraction(const MainEqProblem& pb, double delta,
                                                       const InverseOptions& opt = {},
                                                       BlockRecord* record = nullptr) {
    const Grid& g = pb.grid();
    const std::size_t n = g.panels();
    const double h = g.step();
    const std::size_t jd = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(delta / h)), 1, n / 2);
    const auto gt = g_term(pb.q, pb.v);

    SampledFunction M = truncated(gt, jd);
    BlockRecord rec;
    rec.stage = "contraction";
    rec.left = 0.0;
    rec.right = g.node(jd);

    double prev = std::numeric_limits<double>::infinity();
    std::size_t growth = 0;
    for (std::size_t it = 1; it <= opt.max_fix; ++it) {
        const auto R = detail::r_at_pi(pb.q, M, jd);
        const auto D = detail::dq_from_r(pb.q, M, R);
        SampledFunction next(g);
        for (std::size_t j = 0; j <= jd; ++j) next[j] = gt[j] + D[j];
        const double inc = l2_on(next - M, 0, jd);
        const double scale = l2_on(next, 0, jd);
        if (!std::isfinite(inc)) throw NonContraction("fixed-point iterate is not finite");
        M = std::move(next);
        rec.iterations = it;
        rec.increments.push_back(inc);
        if (inc <= opt.tol_fix * std::max(scale, 1e-300) || inc == 0.0) {
            const auto phi = detail::main_defect(pb, M, jd);
            rec.residual = detail::block_norm(phi, 0, jd, h);
            if (record) *record = std::move(rec);
            return M;
        }
        growth = inc > prev ? growth + 1 : 0;
        if (growth >= 3)
            throw NonContraction("increments grew for 3 consecutive iterations on (0, " +
                                 std::to_string(g.node(jd)) + ")");
        prev = inc;
    }
    throw NonContraction("no convergence within " + std::to_string(opt.max_fix) +
                         " iterations on (0, " + std::to_string(g.node(jd)) + ")");
}

/// Extend a solution known on (0, x_a] to (0, x_b], b <= 2a, through the linear
/// equation phi(x) = (pi - x)/2 M2(x) + int_{x_a}^x Phi(x, t; q, M1, M1) M2(t) dt.
/// Values of M_prev beyond x_a are ignored.
[[nodiscard]] inline SampledFunction continuation_step(const MainEqProblem& pb,
                                                       const SampledFunction& M_prev,
                                                       std::size_t a, std::size_t b,
                                                       const InverseOptions& opt = {},
                                                       BlockRecord* record = nullptr) {
    const Grid& g = pb.grid();
    const std::size_t n = g.panels();
    const double h = g.step();
    if (a == 0 || b <= a || b > 2 * a || b >= n)
        throw ArgumentError("continuation block (" + std::to_string(a) + ", " + std::to_string(b) +
                            "] violates 0 < a < b <= min(2a, n - 1)");
    const SampledFunction M1 = truncated(M_prev, a);
    const TriangleField Phi = compute_Phi(pb.q, M1, M1, PhiRange{a + 1, b}, opt.threads);

    auto K = [&](std::size_t i, std::size_t l) { return Phi(i, l); };
    auto diag = [&](std::size_t i) { return cplx(0.5 * (std::numbers::pi - g.node(i))); };

    BlockRecord rec;
    rec.stage = "continuation";
    rec.left = g.node(a);
    rec.right = g.node(b);

    SampledFunction M = M1;
    auto phi = detail::main_defect(pb, M, b);
    for (std::size_t step = 0; step <= opt.refine_steps; ++step) {
        const auto dM = detail::volterra_march(a, b, h, K, diag, phi, "continuation");
        double size = 0.0;
        for (std::size_t j = a + 1; j <= b; ++j) {
            M[j] += dM[j];
            size += std::norm(dM[j]);
        }
        rec.increments.push_back(std::sqrt(size * h));
        ++rec.iterations;
        phi = detail::main_defect(pb, M, b);
    }
    rec.residual = detail::block_norm(phi, a, b, h);
    if (record) *record = std::move(rec);
    return M;
}

/// Last block (x_a, pi) in the weighted unknowns h = (pi - x) M2 and z, where
/// the equation 2 phi = z + int Theta z is regular up to x = pi.
[[nodiscard]] inline SampledFunction final_weighted_solve(const MainEqProblem& pb,
                                                          const SampledFunction& M_prev,
                                                          std::size_t a,
                                                          const InverseOptions& opt = {},
                                                          BlockRecord* record = nullptr,
                                                          double* z_mean = nullptr) {
    const Grid& g = pb.grid();
    const std::size_t n = g.panels();
    const double h = g.step();
    const double pi = std::numbers::pi;
    if (a == 0 || a + 2 >= n) throw ArgumentError("final block start out of range");

    const SampledFunction M1 = truncated(M_prev, a);
    const TriangleField Phi = compute_Phi(pb.q, M1, M1, PhiRange{a + 1, n}, opt.threads);

    // Theta(i, k) = Psi(i, k) + int_{t_k}^{x_i} Psi(i, tau)/(pi - tau) dtau,
    // Psi = (2 Phi + 1)/(pi - t), for a < k <= i < n.
    TriangleField Theta(g);
    {
        std::vector<cplx> psi(n + 1);
        for (std::size_t i = a + 1; i < n; ++i) {
            for (std::size_t k = a + 1; k <= i; ++k)
                psi[k] = (2.0 * Phi(i, k) + 1.0) / (pi - g.node(k));
            cplx tail{};
            Theta(i, i) = psi[i];
            for (std::size_t k = i; k-- > a + 1;) {
                tail += 0.5 * h * (psi[k] / (pi - g.node(k)) + psi[k + 1] / (pi - g.node(k + 1)));
                Theta(i, k) = psi[k] + tail;
            }
        }
    }
    auto K = [&](std::size_t i, std::size_t l) { return Theta(i, l); };
    auto one = [](std::size_t) { return cplx(1.0); };
    const double tol_z = 10.0 * pb.tol_mean(opt);

    BlockRecord rec;
    rec.stage = "final";
    rec.left = g.node(a);
    rec.right = pi;

    SampledFunction M = M1;
    auto phi = detail::main_defect(pb, M, n);
    for (std::size_t step = 0; step <= opt.refine_steps; ++step) {
        std::vector<cplx> rhs(n + 1);
        for (std::size_t i = a + 1; i < n; ++i) rhs[i] = 2.0 * phi[i];
        const auto zv = detail::volterra_march(a, n - 1, h, K, one, rhs, "final");
        SampledFunction z(g);
        for (std::size_t i = a + 1; i < n; ++i) z[i] = zv[i];
        z[n] = 2.0 * z[n - 1] - z[n - 2];
        const double zm = std::abs(integral(z));
        if (step == 0 && z_mean) *z_mean = zm;
        if (zm > tol_z)
            throw InconsistentDataError("weighted solve violates the zero-mean condition: |int z| = " +
                                        std::to_string(zm));
        const auto w = WeightedUnknown::from_z(z, true);
        double size = 0.0;
        for (std::size_t j = a + 1; j < n; ++j) {
            const cplx dM = w.h[j] / (pi - g.node(j));
            M[j] += dM;
            size += std::norm(w.h[j]);
        }
        M[n] = cplx{};
        rec.increments.push_back(std::sqrt(size * h));
        ++rec.iterations;
        phi = detail::main_defect(pb, M, n);
    }
    rec.residual = detail::block_norm(phi, a, n, h);
    if (record) *record = std::move(rec);
    return M;
}

/// Contraction on a short interval, doubling continuation up to pi/2, then
/// the weighted solve on (pi/2, pi).
[[nodiscard]] inline InverseResult solve_main_equation(const MainEqProblem& pb,
                                                       const InverseOptions& opt = {}) {
    const Grid& g = pb.grid();
    const std::size_t n = g.panels();
    const double h = g.step();
    if (n < 8) throw ArgumentError("grid too coarse for the main equation");

    InverseResult res{SampledFunction(g), {}};
    SolveTrace& tr = res.trace;
    tr.mean_residual = pb.mean_residual();
    tr.tol_main = pb.tol_main(opt);
    if (tr.mean_residual > pb.tol_mean(opt))
        throw InconsistentDataError("mean-value condition violated: |int v - 1/2 int q| = " +
                                    std::to_string(tr.mean_residual));

    double delta = opt.delta0;
    SampledFunction M(g);
    for (;;) {
        try {
            BlockRecord rec;
            M = local_contraction(pb, delta, opt, &rec);
            tr.delta0 = rec.right;
            tr.blocks.push_back(std::move(rec));
            break;
        } catch (const NonContraction& e) {
            delta *= 0.5;
            ++tr.halvings;
            if (delta < opt.delta_min * (1.0 - 1e-12))
                throw SolverError("contraction", e.what());
        }
    }

    std::size_t a = static_cast<std::size_t>(std::lround(tr.delta0 / h));
    const std::size_t half = n / 2;
    while (a < half) {
        const std::size_t b = std::min(2 * a, half);
        BlockRecord rec;
        M = continuation_step(pb, M, a, b, opt, &rec);
        tr.blocks.push_back(std::move(rec));
        a = b;
    }
    {
        BlockRecord rec;
        M = final_weighted_solve(pb, M, a, opt, &rec, &tr.z_mean);
        tr.blocks.push_back(std::move(rec));
    }

    tr.final_residual = l2(main_residual(pb, M));
    if (!(tr.final_residual <= tr.tol_main))
        throw SolverError("final-residual", "main-equation residual " +
                                                std::to_string(tr.final_residual) +
                                                " exceeds " + std::to_string(tr.tol_main));
    res.M = std::move(M);
    return res;
}

struct InversionOutput {
    SampledFunction v;
    SampledFunction M;
    SolveTrace trace;
    double mean_check = 0.0;      ///< |int v - omega pi/2|
    double data_residual = 0.0;   ///< spectral shift versus the mean of q
};

/// Recover M from the first K eigenvalues and the potential q: build v from
/// the product representation (K_v terms, 0 meaning K_v = min(K, n/2)), check
/// data consistency, then solve the main equation.
[[nodiscard]] inline InversionOutput invert(const std::vector<cplx>& lambdas,
                                            const SampledFunction& q, std::size_t Kv = 0,
                                            const InverseOptions& opt = {}) {
    const Grid& g = q.grid();
    if (lambdas.empty()) throw ArgumentError("empty spectrum");
    if (Kv == 0) Kv = std::min(lambdas.size(), g.panels() / 2);
    const cplx omega = mean_value(q);
    const double tol_mean = opt.mean_factor * (1.0 + l2(q));

    InversionOutput out{SampledFunction(g), SampledFunction(g), {}, 0.0, 0.0};
    out.data_residual = data_mean_residual(lambdas, omega);
    if (out.data_residual > tol_mean)
        throw InconsistentDataError("spectrum shift disagrees with the mean of q: residual " +
                                    std::to_string(out.data_residual) + " > " +
                                    std::to_string(tol_mean));
    const ProductDelta pd(lambdas, omega);
    out.v = recover_v(pd, Kv, g);
    out.mean_check = mean_check(out.v, omega);
    if (out.mean_check > tol_mean)
        throw InconsistentDataError("recovered v fails the mean-value check");

    auto sol = solve_main_equation(MainEqProblem(q, out.v), opt);
    out.M = std::move(sol.M);
    out.trace = std::move(sol.trace);
    return out;
}

[[nodiscard]] inline InversionOutput invert(const Spectrum& s, const SampledFunction& q,
                                            std::size_t Kv = 0, const InverseOptions& opt = {}) {
    return invert(s.lambdas, q, Kv, opt);
}

}  // namespace convsl
