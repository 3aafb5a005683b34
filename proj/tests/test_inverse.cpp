#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace convsl;
using testing_support::cosine;

namespace {

/// v with -v(pi - x) = R(pi, x; q, M), computed from the kernel.
SampledFunction kernel_v(const SampledFunction& q, const SampledFunction& M) {
    const std::size_t n = q.grid().panels();
    const auto R = compute_R(solve_P(q, M), q, M, n);
    SampledFunction v(q.grid());
    for (std::size_t i = 0; i <= n; ++i) v[i] = -R[n - i];
    return v;
}

std::size_t node_of(const Grid& g, double x) { return static_cast<std::size_t>(std::lround(x / g.step())); }

double rel_on(const SampledFunction& a, const SampledFunction& b, std::size_t last) {
    return l2_on(a - b, 0, last) / l2_on(b, 0, last);
}

}  // namespace

TEST(WeightedUnknown, TransformsAreMutuallyInverse) {
    for (std::size_t n : {200u, 400u}) {
        Grid g(n);
        const double h2 = g.step() * g.step();
        for (double a : {0.0, 0.5}) {
            const auto z = SampledFunction::sample(g, [a](double x) { return cplx(std::cos(2 * x) + a * std::cos(3 * x)); });
            const auto back = WeightedUnknown::from_h(WeightedUnknown::from_z(z, true).h).z;
            double err = 0.0;
            for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(back[i] - z[i]));
            EXPECT_LE(err, 5 * h2) << n;
        }
    }
}

TEST(WeightedUnknown, ZeroMeanFormAgreesWhenMeanVanishes) {
    Grid g(400);
    auto z = SampledFunction::sample(g, [](double x) { return cplx(std::cos(2 * x)); });
    const auto a = WeightedUnknown::from_z(z, false);
    const auto b = WeightedUnknown::from_z(z, true);
    double d = 0.0;
    for (std::size_t i = 0; i < 400; ++i) d = std::max(d, std::abs(a.h[i] - b.h[i]));
    EXPECT_LE(d, 1e-10);
}

TEST(GTerm, VanishesForTrivialData) {
    Grid g(64);
    EXPECT_EQ(sup_norm(g_term(SampledFunction(g), SampledFunction(g))), 0.0);
    const double c = 0.8;
    EXPECT_LE(sup_norm(g_term(SampledFunction::constant(g, c), SampledFunction::constant(g, c / 2))), 1e-14);
}

TEST(GTerm, MatchesDirectEvaluation) {
    Grid g(200);
    const auto q = cosine(g);
    const auto v = kernel_v(q, cosine(g, 0.2));
    const auto gt = g_term(q, v);
    for (std::size_t j = 0; j < 200; j += 7) {
        const double x = g.node(j);
        const cplx expect = (0.5 * (std::cos(std::numbers::pi - x / 2) + std::cos(x / 2)) - 2.0 * v[200 - j]) /
                            (std::numbers::pi - x);
        // q is interpolated linearly at half nodes
        EXPECT_NEAR(std::abs(gt[j] - expect), 0.0, g.step() * g.step() / (std::numbers::pi - x)) << j;
        EXPECT_TRUE(std::isfinite(std::abs(gt[j])));
    }
    EXPECT_EQ(gt[200], cplx{});
}

TEST(DqOperator, ZeroForZeroData) {
    Grid g(64);
    EXPECT_EQ(sup_norm(apply_Dq(SampledFunction(g), SampledFunction(g))), 0.0);
}

TEST(DqOperator, SolutionIsFixedPoint) {
    Grid g(400);
    const double h2 = g.step() * g.step();
    const auto q = cosine(g), M = cosine(g, 0.2);
    const auto v = kernel_v(q, M);
    const auto r = M - g_term(q, v) - apply_Dq(M, q);
    EXPECT_LE(l2_on(r, 0, 399), 10 * h2);
}

TEST(DqOperator, LipschitzConstantShrinksWithInterval) {
    Grid g(256);
    const auto q = cosine(g);
    double prev = std::numeric_limits<double>::infinity();
    for (double delta : {std::numbers::pi / 8, std::numbers::pi / 16}) {
        const std::size_t jd = node_of(g, delta);
        const auto M = truncated(cosine(g, 0.3), jd);
        const auto Mt = truncated(testing_support::random_smooth(g, 3, 0.5), jd);
        const double ratio = l2_on(apply_Dq(M, q) - apply_Dq(Mt, q), 0, jd) / l2_on(M - Mt, 0, jd);
        EXPECT_LT(ratio, prev);
        EXPECT_LT(ratio, delta * 5.0);
        prev = ratio;
    }
}

TEST(LocalContraction, TrivialDataConvergesImmediately) {
    Grid g(128);
    const MainEqProblem pb{SampledFunction(g), SampledFunction(g)};
    BlockRecord rec;
    const auto M = local_contraction(pb, std::numbers::pi / 8, {}, &rec);
    EXPECT_EQ(sup_norm(M), 0.0);
    EXPECT_EQ(rec.iterations, 1u);
}

TEST(LocalContraction, RecoversTargetOnShortInterval) {
    Grid g(400);
    const auto q = cosine(g), Ms = cosine(g, 0.2);
    const MainEqProblem pb(q, kernel_v(q, Ms));
    BlockRecord rec;
    const auto M = local_contraction(pb, std::numbers::pi / 8, {}, &rec);
    const std::size_t jd = node_of(g, std::numbers::pi / 8);
    EXPECT_LE(rel_on(M, Ms, jd), 5e-2);
    ASSERT_GE(rec.increments.size(), 3u);
    for (std::size_t i = 1; i < rec.increments.size(); ++i) EXPECT_LT(rec.increments[i], rec.increments[i - 1]);
    EXPECT_LT(rec.increments[2] / rec.increments[1], 1.0);
}

TEST(LocalContraction, IterationBudgetRaisesNonContraction) {
    Grid g(128);
    const auto q = cosine(g);
    const MainEqProblem pb(q, kernel_v(q, cosine(g, 0.2)));
    InverseOptions o;
    o.max_fix = 1;
    EXPECT_THROW((void)local_contraction(pb, std::numbers::pi / 8, o), NonContraction);
}

TEST(Continuation, ZeroIncrementWhenDataComesFromPreviousSolution) {
    Grid g(256);
    const double h2 = g.step() * g.step();
    const auto q = cosine(g);
    const std::size_t a = 32, b = 64;
    const auto Mprev = truncated(cosine(g, 0.2), a);
    const MainEqProblem pb(q, kernel_v(q, Mprev));
    const auto M = continuation_step(pb, Mprev, a, b);
    EXPECT_LE(l2_on(M - Mprev, 0, b), 10 * h2);
}

TEST(Continuation, DoublingRecoversTarget) {
    Grid g(400);
    const auto q = cosine(g), Ms = cosine(g, 0.2);
    const MainEqProblem pb(q, kernel_v(q, Ms));
    const auto M1 = local_contraction(pb, std::numbers::pi / 8);
    const std::size_t a = node_of(g, std::numbers::pi / 8);
    BlockRecord rec;
    const auto M = continuation_step(pb, M1, a, 2 * a, {}, &rec);
    EXPECT_LE(rel_on(M, Ms, 2 * a), 5e-2);
    // residual of the main equation on the extended interval
    const auto r = main_residual(pb, M);
    EXPECT_LE(l2_on(r, 0, 2 * a), 10 * g.step() * g.step() + 1e-8);
    EXPECT_GE(rec.residual, 0.0);
}

TEST(Continuation, IgnoresValuesBeyondKnownInterval) {
    Grid g(128);
    const auto q = cosine(g);
    const MainEqProblem pb(q, kernel_v(q, cosine(g, 0.2)));
    const std::size_t a = 16;
    const auto M1 = local_contraction(pb, a * g.step());
    auto garbage = M1;
    for (std::size_t i = a + 1; i <= 128; ++i) garbage[i] = cplx(7.0, -3.0);
    const auto x = continuation_step(pb, M1, a, 2 * a);
    const auto y = continuation_step(pb, garbage, a, 2 * a);
    EXPECT_EQ(x.values(), y.values());
}

TEST(Continuation, BlockLongerThanKnownIntervalRejected) {
    Grid g(128);
    const MainEqProblem pb{SampledFunction(g), SampledFunction(g)};
    EXPECT_THROW((void)continuation_step(pb, SampledFunction(g), 10, 21), ArgumentError);
}

TEST(FinalWeightedSolve, ZeroRightHandSideKeepsSolution) {
    Grid g(256);
    const auto q = cosine(g);
    const auto Mprev = truncated(cosine(g, 0.2), 128);
    const MainEqProblem pb(q, kernel_v(q, Mprev));
    const auto M = final_weighted_solve(pb, Mprev, 128);
    EXPECT_LE(l2_weighted(M - Mprev), 10 * g.step() * g.step());
}

TEST(MainEquation, FullPipelineFromKernelData) {
    Grid g(400);
    const auto q = cosine(g), Ms = cosine(g, 0.2);
    const MainEqProblem pb(q, kernel_v(q, Ms));
    const auto r = solve_main_equation(pb);
    EXPECT_LE(l2_weighted(r.M - Ms) / l2_weighted(Ms), 1e-4);
    EXPECT_LE(r.trace.final_residual, r.trace.tol_main);
    EXPECT_LE(r.trace.z_mean, 1e-2);
    ASSERT_GE(r.trace.blocks.size(), 3u);
    EXPECT_EQ(r.trace.blocks.front().stage, "contraction");
    EXPECT_EQ(r.trace.blocks.back().stage, "final");
    for (const auto& b : r.trace.blocks) {
        EXPECT_GE(b.residual, 0.0);
        for (double inc : b.increments) EXPECT_GE(inc, 0.0);
    }
}

TEST(MainEquation, MeanViolationIsInconsistentData) {
    Grid g(128);
    const MainEqProblem pb(SampledFunction(g), SampledFunction::constant(g, 0.5));
    EXPECT_THROW((void)solve_main_equation(pb), InconsistentDataError);
}

TEST(Invert, SquaresAndZeroPotentialGiveZero) {
    Grid g(200);
    std::vector<cplx> l(40);
    for (std::size_t n = 1; n <= 40; ++n) l[n - 1] = static_cast<double>(n * n);
    const auto out = invert(l, SampledFunction(g));
    EXPECT_LE(sup_norm(out.M), 1e-12);
}

TEST(Invert, ShiftedSquaresWithConstantPotentialGiveZero) {
    Grid g(400);
    const double c = 0.3;
    std::vector<cplx> l(40);
    for (std::size_t n = 1; n <= 40; ++n) l[n - 1] = static_cast<double>(n * n) + c;
    const auto out = invert(l, SampledFunction::constant(g, c));
    // relative to the size of a unit-amplitude M
    EXPECT_LE(l2_weighted(out.M) / l2_weighted(SampledFunction::constant(g, 1.0)), 5e-2);
}

TEST(Invert, RecoversKernelFromForwardSpectrum) {
    Grid g(400);
    const auto q = cosine(g), Ms = cosine(g, 0.2);
    const auto s = eigenvalues(q, Ms, 40);
    const auto out = invert(s, q, 40);
    EXPECT_LE(l2_weighted(out.M - Ms) / l2_weighted(Ms), 5e-2);
    EXPECT_LE(out.trace.final_residual, 1e-3 * (1 + l2(out.v)));
}

TEST(Invert, SingularTargetHasFiniteWeightedNorm) {
    Grid g(400);
    const auto q = cosine(g);
    const auto Ms = SampledFunction::sample(g, [](double x) { return cplx(0.1 * std::pow(std::numbers::pi - x, -0.3)); });
    const auto out = invert(eigenvalues(q, Ms, 40), q, 40);
    EXPECT_TRUE(std::isfinite(l2_weighted(out.M)));
    EXPECT_LE(l2_weighted(out.M - Ms) / l2_weighted(Ms), 1e-1);
}

TEST(Invert, ForwardOfRecoveredKernelReproducesSpectrum) {
    // The tolerance is ten times the eigenvalue solver's own accuracy on this
    // grid, measured on a constant potential with known spectrum.
    Grid g(400);
    const auto q = cosine(g), Ms = cosine(g, 0.2);
    const auto s = eigenvalues(q, Ms, 40);
    const auto out = invert(s, q, 40);
    const auto s2 = eigenvalues(q, out.M, 20);
    const auto shift = eigenvalues(testing_support::constant(g, 0.7), SampledFunction(g), 20);
    double solver_err = 0.0;
    for (const auto& k : shift.remainders) solver_err = std::max(solver_err, std::abs(k));
    for (std::size_t k = 0; k < 20; ++k) EXPECT_LE(std::abs(s.lambdas[k] - s2.lambdas[k]), 10 * solver_err) << k + 1;
}

TEST(Invert, InconsistentSpectrumRejected) {
    Grid g(200);
    const auto q = cosine(g);
    auto s = eigenvalues(q, cosine(g, 0.2), 40);
    for (auto& l : s.lambdas) l += 0.5;
    EXPECT_THROW((void)invert(s.lambdas, q), InconsistentDataError);
}
