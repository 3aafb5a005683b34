#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace convsl;
using testing_support::cosine;

namespace {

std::vector<cplx> shifted_squares(std::size_t K, double c) {
    std::vector<cplx> l(K);
    for (std::size_t n = 1; n <= K; ++n) l[n - 1] = static_cast<double>(n * n) + c;
    return l;
}

/// pi prod_{j != k} (j^2 - k^2)/j^2 by a long explicit product; the factors
/// beyond J contribute exp(-k^2 sum_{j>J} 1/j^2 + O(J^-3)).
double raw_b(int k, int J = 100000) {
    long double p = std::numbers::pi_v<long double>;
    const long double kk = static_cast<long double>(k) * k;
    for (int j = 1; j <= J; ++j) {
        if (j == k) continue;
        const long double jj = static_cast<long double>(j) * j;
        p *= (jj - kk) / jj;
    }
    const long double Jl = J;
    const long double tail = 1.0L / Jl - 1.0L / (2.0L * Jl * Jl) + 1.0L / (6.0L * Jl * Jl * Jl);
    p *= std::exp(-kk * tail);
    return static_cast<double>(p);
}

}  // namespace

TEST(ProductDelta, TailClosureIsExactForModelSpectrum) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-30.0, 300.0), v(-5.0, 5.0);
    const double omega = 0.37;
    const ProductDelta pd(shifted_squares(40, omega), omega);
    for (int i = 0; i < 50; ++i) {
        const cplx lam(u(rng), v(rng));
        const cplx mu = std::sqrt(lam - omega);
        const cplx expected = std::numbers::pi * sinc(std::numbers::pi * mu);
        EXPECT_NEAR(std::abs(product_delta(pd, lam) - expected), 0.0, 1e-12 * std::max(1.0, std::abs(expected)));
    }
}

TEST(ProductDelta, SquaresGiveSineOverRoot) {
    const ProductDelta pd(shifted_squares(20, 0.0), 0.0);
    for (double lam : {0.5, 2.0, 9.0, 50.0}) {
        const double r = std::sqrt(lam);
        EXPECT_NEAR(std::abs(product_delta(pd, lam) - std::sin(std::numbers::pi * r) / r), 0.0, 1e-13);
    }
}

TEST(ProductDelta, RemovedFactorReproducesClosedFormAtSquares) {
    const ProductDelta pd(shifted_squares(40, 0.0), 0.0);
    for (int k = 1; k <= 20; ++k) {
        const double expected = (k % 2 ? 1.0 : -1.0) * std::numbers::pi / 2.0;
        const double kk = static_cast<double>(k) * k;
        EXPECT_NEAR(std::abs(kk * removed_factor(pd, k) - expected), 0.0, 1e-6) << k;
        EXPECT_NEAR(raw_b(k), expected, 1e-6) << k;
    }
    EXPECT_THROW((void)removed_factor(pd, 0), ArgumentError);
    EXPECT_THROW((void)removed_factor(pd, 41), ArgumentError);
}

TEST(ProductDelta, MatchesDirectCharacteristicFunction) {
    Grid g(400);
    const auto q = cosine(g), M = cosine(g, 0.2);
    const auto s = eigenvalues(q, M, 40);
    const ProductDelta pd(s, s.omega);
    for (double lam : {0.5, 2.5, 12.5})
        EXPECT_LE(std::abs(product_delta(pd, lam) - delta_direct(q, M, lam)), 3e-3) << lam;
}

TEST(RecoverV, SquaresGiveZero) {
    Grid g(200);
    const auto v = recover_v(ProductDelta(shifted_squares(40, 0.0), 0.0), 40, g);
    EXPECT_LE(sup_norm(v), 1e-10);
}

TEST(RecoverV, ShiftedSquaresMatchClosedFormCoefficients) {
    // q = c has Delta(lambda) = sin(pi sqrt(lambda - c)) / sqrt(lambda - c), so the
    // cosine coefficients of v are known exactly; v = c/2 holds only to first order.
    const double c = 0.3;
    const auto coef = v_coefficients(ProductDelta(shifted_squares(40, c), c), 40);
    for (int k = 1; k <= 40; ++k) {
        const double r = std::sqrt(k * k - c);
        const double expected = k * k * std::sin(std::numbers::pi * r) / r + (k % 2 ? -1.0 : 1.0) * c * std::numbers::pi / 2;
        EXPECT_NEAR(std::abs(coef[k - 1] - expected), 0.0, 1e-9 * std::max(1.0, std::abs(expected))) << k;
    }
}

TEST(RecoverV, ShiftedSquaresAgreeWithKernelOfConstantPotential) {
    Grid g(400);
    const double c = 0.3;
    const auto q = testing_support::constant(g, c);
    const SampledFunction M(g);
    const auto R = compute_R(solve_P(q, M), q, M, 400);
    SampledFunction vk(g);
    for (std::size_t i = 0; i <= 400; ++i) vk[i] = -R[400 - i];
    const auto v = recover_v(ProductDelta(shifted_squares(40, c), c), 40, g);
    EXPECT_LE(l2(v - vk), 1e-3);
}

TEST(RecoverV, SmallShiftGivesHalfShift) {
    Grid g(200);
    const double c = 0.03;
    const auto v = recover_v(ProductDelta(shifted_squares(40, c), c), 40, g);
    EXPECT_LE(l2(v - SampledFunction::constant(g, c / 2)), 0.05 * c);
}

TEST(RecoverV, AgreesWithKernelRoute) {
    Grid g(400);
    const std::size_t n = 400;
    const auto q = cosine(g), M = cosine(g, 0.2);
    const auto s = eigenvalues(q, M, 40);
    const auto v = recover_v(ProductDelta(s, s.omega), 40, g);
    const auto R = compute_R(solve_P(q, M), q, M, n);
    SampledFunction vk(g);
    for (std::size_t i = 0; i <= n; ++i) vk[i] = -R[n - i];
    EXPECT_LE(l2(v - vk), 5e-2 * (1 + l2(v)));
    EXPECT_LE(mean_check(v, s.omega), 1e-2);
}

TEST(RecoverV, TruncationLimits) {
    Grid g(64);
    const ProductDelta pd(shifted_squares(40, 0.0), 0.0);
    EXPECT_THROW((void)recover_v(pd, 0, g), ArgumentError);
    EXPECT_THROW((void)recover_v(pd, 33, g), ArgumentError);
    EXPECT_THROW((void)recover_v(ProductDelta(shifted_squares(10, 0.0), 0.0), 11, Grid(200)), ArgumentError);
}

TEST(RecoverV, DiscreteParsevalOfCosineSum) {
    // Check on a grid fine enough that the trapezoid rule is exact for
    // products of cos kx, k <= Kv (n >= 2 Kv + 1 panels).
    Grid g(400);
    const auto q = cosine(g), M = cosine(g, 0.2);
    const auto s = eigenvalues(q, M, 40);
    const ProductDelta pd(s, s.omega);
    const auto c = v_coefficients(pd, 40);
    const auto v = recover_v(pd, 40, g);
    double rhs = std::numbers::pi * std::norm(s.omega) / 4.0;
    for (const auto& ck : c) rhs += 2.0 / std::numbers::pi * std::norm(ck);
    EXPECT_NEAR(l2(v) * l2(v), rhs, 1e-10 * std::max(1.0, rhs));
}

TEST(RecoverV, CoefficientsStabilise) {
    Grid g(400);
    const auto q = cosine(g), M = cosine(g, 0.2);
    const auto s = eigenvalues(q, M, 40);
    const auto c = v_coefficients(ProductDelta(s, s.omega), 40);
    double half = 0.0, full = 0.0;
    for (std::size_t k = 0; k < 40; ++k) (k < 20 ? half : full) += std::norm(c[k]);
    full += half;
    EXPECT_LE(std::abs(std::sqrt(full) - std::sqrt(half)), 0.05 * std::sqrt(full));
}

TEST(MeanCheck, ExactConstants) {
    Grid g(64);
    EXPECT_EQ(mean_check(SampledFunction(g), 0.0), 0.0);
    EXPECT_NEAR(mean_check(SampledFunction::constant(g, 0.15), 0.3), 0.0, 1e-10);
}

TEST(MeanCheck, ForwardGeneratedData) {
    Grid g(400);
    const auto s = eigenvalues(cosine(g, 1.0), cosine(g, 0.2), 40);
    const auto v = recover_v(ProductDelta(s, s.omega), 40, g);
    EXPECT_LE(mean_check(v, s.omega), 1e-2);
}

TEST(SpectralShift, DetectsInconsistentMean) {
    const auto l = shifted_squares(40, 0.5);
    EXPECT_NEAR(spectral_mean_shift(l).real(), 0.5, 1e-12);
    EXPECT_NEAR(data_mean_residual(l, 0.5), 0.0, 1e-12);
    EXPECT_NEAR(data_mean_residual(l, 0.0), 0.25 * std::numbers::pi, 1e-12);
}
