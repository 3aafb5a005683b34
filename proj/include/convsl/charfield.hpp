#pragma once

#include "convsl/errors.hpp"
#include "convsl/forward.hpp"
#include "convsl/numgrid.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

namespace convsl {

/// Characteristic function rebuilt from its zeros. Zeros beyond the stored
/// ones are modelled as n^2 + omega, whose product has the closed form
/// sin(pi mu)/mu with mu = sqrt(lambda - omega); only the ratios for the known
/// zeros are multiplied explicitly.
struct ProductDelta {
    std::vector<cplx> lambdas;  ///< lambda_1..lambda_K
    cplx omega{};

    ProductDelta() = default;
    ProductDelta(std::vector<cplx> l, cplx w) : lambdas(std::move(l)), omega(w) {}
    /// Uses the spectrum's zeros with an externally supplied omega (from q).
    ProductDelta(const Spectrum& s, cplx w) : lambdas(s.lambdas), omega(w) {}

    [[nodiscard]] std::size_t tail_order() const noexcept { return lambdas.size(); }
};

namespace detail {

/// prod_{n<=K} (lambda_n - lambda)/(n^2 + omega - lambda) * sin(pi mu)/mu,
/// with the numerator of index `skip` (if nonzero) left out.
///
/// The factor whose denominator is nearest to zero (n = k0, the integer
/// nearest to mu) is always combined with the sine:
///   sin(pi mu)/(mu (k0^2 - mu^2)) = (-1)^{k0+1} pi sinc(pi d) / (mu (mu + k0)),
/// d = mu - k0 = (mu^2 - k0^2)/(mu + k0), which is the analytic continuation
/// through mu = k0 and needs no special-casing.
inline cplx product_eval(const ProductDelta& pd, cplx lambda, std::size_t skip) {
    const std::size_t K = pd.lambdas.size();
    const cplx mu = principal_sqrt(lambda - pd.omega);
    const double kr = std::round(mu.real());
    const std::size_t k0 = kr < 0.0 ? 0 : static_cast<std::size_t>(kr);

    cplx value = 1.0;
    if (k0 >= 1 && k0 <= K) {
        const double k = static_cast<double>(k0);
        const cplx d = (lambda - pd.omega - k * k) / (mu + k);
        const double sign = (k0 % 2 == 0) ? -1.0 : 1.0;  // (-1)^{k0+1}
        value = sign * std::numbers::pi * sinc(std::numbers::pi * d) / (mu * (mu + k));
        if (k0 != skip) value *= pd.lambdas[k0 - 1] - lambda;
    } else {
        value = std::numbers::pi * sinc(std::numbers::pi * mu);
    }
    for (std::size_t n = 1; n <= K; ++n) {
        if (n == k0) continue;
        const double nn = static_cast<double>(n);
        const cplx den = nn * nn + pd.omega - lambda;
        const cplx num = n == skip ? cplx(1.0) : pd.lambdas[n - 1] - lambda;
        value *= num / den;
    }
    return value;
}

}  // namespace detail

/// Delta(lambda) = pi prod (lambda_n - lambda)/n^2 with the exact tail closure.
[[nodiscard]] inline cplx product_delta(const ProductDelta& pd, cplx lambda) {
    return detail::product_eval(pd, lambda, 0);
}

/// lim_{lambda -> lambda_k} Delta(lambda)/(lambda_k - lambda), i.e. the product
/// with the k-th factor removed, evaluated at lambda_k.
[[nodiscard]] inline cplx removed_factor(const ProductDelta& pd, std::size_t k) {
    if (k == 0 || k > pd.lambdas.size())
        throw ArgumentError("removed factor index " + std::to_string(k) + " out of range");
    return detail::product_eval(pd, pd.lambdas[k - 1], k);
}

/// Cosine coefficients c_k = k^2 Delta(k^2) + (-1)^k omega pi/2, k = 1..Kv.
[[nodiscard]] inline std::vector<cplx> v_coefficients(const ProductDelta& pd, std::size_t Kv) {
    std::vector<cplx> c(Kv);
    for (std::size_t k = 1; k <= Kv; ++k) {
        const double kk = static_cast<double>(k);
        const double sgn = (k % 2 == 0) ? 1.0 : -1.0;
        c[k - 1] = kk * kk * product_delta(pd, kk * kk) + sgn * pd.omega * (std::numbers::pi / 2.0);
    }
    return c;
}

/// v(x) = omega/2 + (2/pi) sum_{k<=Kv} c_k cos kx on the grid.
[[nodiscard]] inline SampledFunction recover_v(const ProductDelta& pd, std::size_t Kv,
                                               const Grid& grid) {
    if (Kv == 0 || Kv > pd.lambdas.size() || 2 * Kv > grid.panels())
        throw ArgumentError("series truncation K_v = " + std::to_string(Kv) +
                            " must lie in [1, min(K, n/2)] with K = " +
                            std::to_string(pd.lambdas.size()) + ", n = " +
                            std::to_string(grid.panels()));
    const auto c = v_coefficients(pd, Kv);
    SampledFunction v(grid);
    for (std::size_t i = 0; i <= grid.panels(); ++i) {
        const double x = grid.node(i);
        cplx s = pd.omega / 2.0;
        for (std::size_t k = 1; k <= Kv; ++k)
            s += (2.0 / std::numbers::pi) * c[k - 1] * std::cos(static_cast<double>(k) * x);
        v[i] = s;
    }
    return v;
}

/// |int_0^pi v - omega pi/2|.
[[nodiscard]] inline double mean_check(const SampledFunction& v, cplx omega) {
    return std::abs(integral(v) - omega * (std::numbers::pi / 2.0));
}

/// Mean of lambda_n - n^2 over the upper half of the known indices, an
/// estimate of omega carried by the spectrum itself (kappa_n -> 0).
[[nodiscard]] inline cplx spectral_mean_shift(const std::vector<cplx>& lambdas) {
    const std::size_t K = lambdas.size();
    if (K == 0) throw ArgumentError("empty spectrum");
    const std::size_t first = K / 2 + 1;
    cplx s{};
    for (std::size_t n = first; n <= K; ++n) {
        const double nn = static_cast<double>(n);
        s += lambdas[n - 1] - nn * nn;
    }
    return s / static_cast<double>(K - first + 1);
}

/// Mean-value residual of the data pair (spectrum, q): the v encoded by the
/// spectrum has mean pi/2 times its own shift, while q demands pi/2 omega.
[[nodiscard]] inline double data_mean_residual(const std::vector<cplx>& lambdas, cplx omega) {
    return std::abs(spectral_mean_shift(lambdas) - omega) * (std::numbers::pi / 2.0);
}

}  // namespace convsl
