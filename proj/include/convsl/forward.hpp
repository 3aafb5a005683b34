#pragma once

#include "convsl/errors.hpp"
#include "convsl/fields.hpp"
#include "convsl/kernel_ops.hpp"
#include "convsl/numgrid.hpp"
#include "convsl/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

namespace convsl {

/// sin(z)/z, with its Taylor series near zero.
[[nodiscard]] inline cplx sinc(cplx z) noexcept {
    if (std::abs(z) < 1e-4) {
        const cplx z2 = z * z;
        return 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
    }
    return std::sin(z) / z;
}

/// Principal square root, Re >= 0.
[[nodiscard]] inline cplx principal_sqrt(cplx lambda) noexcept { return std::sqrt(lambda); }

/// sin(rho x)/rho, continuous through rho = 0.
[[nodiscard]] inline cplx sin_over(cplx rho, double x) noexcept { return x * sinc(rho * x); }

/// First K Dirichlet eigenvalues with omega = (1/pi) int q and kappa_n = lambda_n - n^2 - omega.
struct Spectrum {
    std::vector<cplx> lambdas;
    cplx omega{};
    std::vector<cplx> remainders;

    Spectrum() = default;
    Spectrum(std::vector<cplx> l, cplx w) : lambdas(std::move(l)), omega(w) { refresh(); }

    [[nodiscard]] std::size_t count() const noexcept { return lambdas.size(); }

    /// Recompute the remainders after lambdas or omega changed.
    void refresh() {
        remainders.resize(lambdas.size());
        for (std::size_t k = 0; k < lambdas.size(); ++k) {
            const double n = static_cast<double>(k + 1);
            remainders[k] = lambdas[k] - n * n - omega;
        }
    }
};

[[nodiscard]] inline cplx mean_value(const SampledFunction& q) {
    return integral(q) / std::numbers::pi;
}

/// S(x, lambda) with S(0) = 0, S'(0) = 1, by a trapezoid march of the
/// Volterra form S = sin(rho x)/rho + int_0^x sin(rho(x-t))/rho (q S + M*S)(t) dt.
[[nodiscard]] inline SampledFunction solve_S(const SampledFunction& q, const SampledFunction& M,
                                             cplx lambda) {
    q.require_same(M);
    const Grid& g = q.grid();
    const std::size_t n = g.panels();
    const double h = g.step();
    const cplx rho = principal_sqrt(lambda);

    std::vector<cplx> sk(n + 1);
    for (std::size_t d = 0; d <= n; ++d) sk[d] = sin_over(rho, static_cast<double>(d) * h);

    // Reversed copies make both convolutions contiguous: f_rev[n - j] = f_j.
    std::vector<cplx> S(n + 1), s_rev(n + 1), f_rev(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        // f_j for j = i - 1 is now computable (S_{i-1} known).
        const std::size_t j = i - 1;
        if (j >= 1) {
            cplx conv = 0.5 * M[0] * S[j];
            if (j >= 2) conv += detail::dot(M.data() + 1, s_rev.data() + (n - j) + 1, j - 1);
            f_rev[n - j] = q[j] * S[j] + h * conv;
        }
        cplx acc{};
        if (i >= 2) acc = detail::dot(sk.data() + 1, f_rev.data() + (n - i) + 1, i - 1);
        S[i] = sk[i] + h * acc;
        s_rev[n - i] = S[i];
    }
    return SampledFunction(g, std::move(S));
}

/// Delta(lambda) = S(pi, lambda).
[[nodiscard]] inline cplx delta_direct(const SampledFunction& q, const SampledFunction& M,
                                       cplx lambda) {
    return solve_S(q, M, lambda)[q.grid().panels()];
}

/// Delta(lambda) from the transformation kernel:
/// sin(rho pi)/rho + int_0^pi P(pi, t) sin(rho(pi - t))/rho dt.
[[nodiscard]] inline cplx delta_via_kernel(const TriangleField& P, cplx lambda) {
    const Grid& g = P.grid();
    const std::size_t n = g.panels();
    const double h = g.step();
    const cplx rho = principal_sqrt(lambda);
    cplx acc{};
    for (std::size_t j = 0; j <= n; ++j) {
        const double w = (j == 0 || j == n) ? 0.5 : 1.0;
        acc += w * P(n, j) * sin_over(rho, g.node(n) - g.node(j));
    }
    return sin_over(rho, std::numbers::pi) + h * acc;
}

struct EigenOptions {
    double tol_root = 1e-10;       ///< relative residual tolerance
    std::size_t max_newton = 40;
    double distinct_tol = 1e-6;    ///< minimal separation of two computed roots
    unsigned threads = 1;
};

/// Newton iteration for the n-th zero of Delta started at n^2 + omega.
[[nodiscard]] inline cplx locate_eigenvalue(const SampledFunction& q, const SampledFunction& M,
                                            std::size_t index, cplx omega,
                                            const EigenOptions& opt = {}) {
    const double nn = static_cast<double>(index);
    const cplx guess = nn * nn + omega;
    cplx lam = guess;
    double scale = 0.0;
    for (std::size_t it = 0; it < opt.max_newton; ++it) {
        const cplx d = delta_direct(q, M, lam);
        const double step = std::max(1e-4, 1e-6 * std::abs(lam));
        const cplx dp = (delta_direct(q, M, lam + step) - delta_direct(q, M, lam - step)) / (2.0 * step);
        // The residual is measured against the largest |Delta| seen and against
        // |Delta'| |lambda|, so the test is a relative accuracy on lambda.
        scale = std::max({scale, std::abs(d), std::abs(dp) * std::max(1.0, std::abs(lam))});
        if (std::abs(d) <= opt.tol_root * scale) return lam;
        if (dp == cplx{} || !std::isfinite(std::abs(dp)))
            throw RootLocalizationError("vanishing derivative in Newton iteration", index);
        const cplx delta = d / dp;
        lam -= delta;
        if (!std::isfinite(std::abs(lam)) || std::abs(lam - guess) > std::max(2.0, nn))
            throw RootLocalizationError("Newton iteration left the neighbourhood of n^2 + omega",
                                        index);
        if (std::abs(delta) <= 1e-13 * std::max(1.0, std::abs(lam))) return lam;
    }
    throw RootLocalizationError("Newton iteration did not converge", index);
}

/// The first K eigenvalues, indexed by the zero nearest to n^2 + omega.
[[nodiscard]] inline Spectrum eigenvalues(const SampledFunction& q, const SampledFunction& M,
                                          std::size_t K, const EigenOptions& opt = {}) {
    q.require_same(M);
    const std::size_t n = q.grid().panels();
    if (K == 0) throw ArgumentError("eigenvalue count must be positive");
    if (4 * K > n)
        throw ArgumentError("K = " + std::to_string(K) + " exceeds the resolution limit n/4 = " +
                            std::to_string(n / 4));
    const cplx omega = mean_value(q);
    std::vector<cplx> lam(K);
    parallel_for(K, opt.threads,
                 [&](std::size_t k) { lam[k] = locate_eigenvalue(q, M, k + 1, omega, opt); });
    for (std::size_t a = 0; a < K; ++a)
        for (std::size_t b = a + 1; b < K; ++b)
            if (std::abs(lam[a] - lam[b]) < opt.distinct_tol)
                throw RootLocalizationError("two indices converged to the same eigenvalue (with " +
                                                std::to_string(a + 1) + ")",
                                            b + 1);
    return Spectrum(std::move(lam), omega);
}

}  // namespace convsl
