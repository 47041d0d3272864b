#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nmh/iterator.hpp"
#include "oracles.hpp"

using namespace nmh;

namespace {

SpectralFunction analytic(const Lattice& lat, double amp, double rate) {
  SpectralFunction g(lat, true);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto k = lat.point(i);
    g[i] = amp * std::pow(rate, std::abs(k[0]) + std::abs(k[1]));
  }
  return g;
}

SpectralFunction with_norm(SpectralFunction g, double a, double target) {
  g *= target / sobolev_norm(g, a);
  return g;
}

}  // namespace

TEST(Decompose, SingleModeLandsInOneBlock) {
  const Lattice lat(1, 16);
  const auto g = SpectralFunction::mode(lat, {5, 0});
  const auto fam = SmoothingFamily::sharp_dyadic();
  const auto d = decompose_g(g, fam, 3.0);
  ASSERT_EQ(d.blocks.size(), 5u);  // theta_4 = 16 covers the lattice
  for (std::size_t j = 0; j < d.blocks.size(); ++j) EXPECT_EQ(!d.blocks[j].is_zero(), j == 2) << j;  // R_2 = S_3 - S_2 holds 4 < |k| <= 8
  EXPECT_DOUBLE_EQ(d.A, 1.0);
}

TEST(Decompose, BlocksSumToG) {
  const Lattice lat(2, 12);
  std::mt19937_64 rng(1);
  const auto g = oracle::smooth_random(lat, rng, 1.0, 1.0);
  for (auto shape : {CutoffShape::Sharp, CutoffShape::Smooth}) {
    const SmoothingFamily fam(shape, Velocity::dyadic());
    const auto d = decompose_g(g, fam, 2.0);
    SpectralFunction sum(lat, true);
    for (const auto& b : d.blocks) sum += b;
    EXPECT_LE(oracle::rel_diff(sum, g), 1e-14);
    if (shape == CutoffShape::Sharp) EXPECT_NEAR(d.A, 1.0, 1e-14);
    else EXPECT_LE(d.A, 1.0 + 1e-14);
  }
  EXPECT_DOUBLE_EQ(decompose_g(SpectralFunction(lat, true), SmoothingFamily::sharp_dyadic(), 1.0).A, 1.0);
  EXPECT_THROW(decompose_g(g, SmoothingFamily::sharp_dyadic(), 1.0, -1), InvalidArgument);
}

TEST(BuildY, MatchesDefinition) {
  const Lattice lat(1, 16);
  const auto fam = SmoothingFamily::sharp_dyadic();
  std::mt19937_64 rng(2);
  IterationState s{0, SpectralFunction(lat, true), {}, {}, {}, SpectralFunction(lat), {}};
  for (int i = 0; i < 4; ++i) s.e_list.push_back(oracle::smooth_random(lat, rng, 0.0, 1.0));
  EXPECT_TRUE(build_y(s, fam, 0).is_zero());
  EXPECT_LE(oracle::rel_diff(build_y(s, fam, 1), -1.0 * fam.apply_S(1, s.e_list[0])), 1e-15);
  auto expect3 = -1.0 * fam.apply_S(3, s.e_list[2]);
  expect3 -= fam.apply_R(2, s.e_list[0] + s.e_list[1]);
  EXPECT_LE(oracle::rel_diff(build_y(s, fam, 3), expect3), 1e-15);
  EXPECT_THROW(build_y(s, fam, 6), InvalidArgument);
  EXPECT_THROW(build_y(s, fam, -1), InvalidArgument);
}

TEST(Run, LinearProblemIsExactAfterCovering) {
  auto P = linear_multiplier_problem(1, 32, 2.0);
  std::mt19937_64 rng(3);
  const auto g = oracle::smooth_random(P->lattice(), rng, 2.0, 1e-3);
  const auto fam = SmoothingFamily::sharp_dyadic();
  const auto r = run(*P, g, P->metadata().suggested, fam);
  EXPECT_TRUE(r.report.converged);
  EXPECT_LE(r.report.steps, covering_index(fam, P->lattice()) + 1);
  for (const auto& e : r.state.e_list) EXPECT_TRUE(e.is_zero());
  for (const auto& row : r.report.rows) EXPECT_EQ(row.y_0, 0.0);
  EXPECT_LE(oracle::rel_diff(r.u, P->apply_inverse(g)), 1e-14);
  // Partial solutions: u_{j+1} = Lambda^{-1} S_{j+1} g.
  for (std::size_t j = 0; j + 1 < r.state.u_history.size(); ++j) {
    const auto want = P->apply_inverse(fam.apply_S(static_cast<std::int64_t>(j + 1), g));
    EXPECT_LE(sobolev_norm(r.state.u_history[j + 1] - want, 0.0), 1e-16 * (1 + sobolev_norm(g, 0.0)));
  }
}

TEST(Run, ZeroDataStopsImmediately) {
  auto P = quadratic_problem(1, 16);
  const auto r = run(*P, SpectralFunction(P->lattice(), true), P->metadata().suggested, SmoothingFamily::sharp_dyadic());
  EXPECT_TRUE(r.report.converged);
  EXPECT_EQ(r.report.steps, 0);
  EXPECT_TRUE(r.u.is_zero());
  const auto b = monitor_bounds(r.report);
  EXPECT_TRUE(std::isnan(b.K1) && std::isnan(b.K2) && std::isnan(b.K3) && std::isnan(b.K4));
}

TEST(Run, QuadraticConstantMatchesScalarRoot) {
  auto P = quadratic_problem(1, 64);
  const auto g = 0.01 * SpectralFunction::mode(P->lattice(), {0, 0});
  RunOptions o;
  o.max_steps = 25;
  const auto r = run(*P, g, P->metadata().suggested, SmoothingFamily::sharp_dyadic(), o);
  ASSERT_TRUE(r.report.converged);
  EXPECT_NEAR(r.u.coeff({0, 0}).real(), oracle::quadratic_root(0.01), 1e-15);
  EXPECT_LE(r.report.steps, 25);
}

TEST(Run, QuadraticRandomDataSolvesAndKeepsIdentity) {
  auto P = quadratic_problem(1, 48);
  std::mt19937_64 rng(4);
  const auto g = with_norm(oracle::smooth_random(P->lattice(), rng, 6.0, 1.0), 3.0, 1e-3);
  for (auto shape : {CutoffShape::Sharp, CutoffShape::Smooth}) {
    const SmoothingFamily fam(shape, Velocity::dyadic());
    const auto r = run(*P, g, P->metadata().suggested, fam);
    ASSERT_TRUE(r.report.converged);
    EXPECT_LE(r.report.max_identity_defect, 1e-14);
    auto res = P->phi(r.u) - g;
    EXPECT_LE(sobolev_norm(res, 0.0), 1e-10);
    const auto b = monitor_bounds(r.report);
    for (double K : {b.K1, b.K2, b.K3, b.K4}) {
      EXPECT_TRUE(std::isfinite(K));
      EXPECT_LT(K, 1e3);
    }
    // Cauchy tail: low-norm corrections and the alpha-distance to the limit shrink; h_a2 may grow.
    const auto& rows = r.report.rows;
    ASSERT_GE(rows.size(), 3u);
    for (std::size_t j = 1; j < rows.size(); ++j) EXPECT_LT(rows[j].h_a1, rows[j - 1].h_a1);
    double prev = INFINITY;
    for (const auto& u : r.state.u_history) {
      const double dist = sobolev_norm(u - r.u, 3.0);
      EXPECT_LE(dist, prev);
      prev = dist;
    }
  }
}

TEST(Run, IdentityCheckerDetectsCorruption) {
  auto P = quadratic_problem(1, 16);
  std::mt19937_64 rng(5);
  const auto g = with_norm(oracle::smooth_random(P->lattice(), rng, 4.0, 1.0), 3.0, 1e-3);
  const auto fam = SmoothingFamily::sharp_dyadic();
  auto r = run(*P, g, P->metadata().suggested, fam);
  ASSERT_GE(r.state.e_list.size(), 2u);
  EXPECT_LE(check_residual_identity(*P, r.state, fam, 1), 1e-16);
  r.state.e_list[0] *= 2.0;
  EXPECT_GT(check_residual_identity(*P, r.state, fam, 1), 1e-10);
  EXPECT_THROW(check_residual_identity(*P, r.state, fam, 100), InvalidArgument);
}

TEST(Run, RejectsBadInputs) {
  auto P = quadratic_problem(1, 16);
  const auto fam = SmoothingFamily::sharp_dyadic();
  const auto g = SpectralFunction::mode(P->lattice(), {0, 0});
  auto bad = P->metadata().suggested;
  bad.alpha = 10;
  EXPECT_THROW(run(*P, g, bad, fam), InvalidArgument);
  EXPECT_THROW(run(*P, SpectralFunction::mode(Lattice(1, 8), {0, 0}), P->metadata().suggested, fam),
               DimensionMismatch);
}

TEST(Run, WarnsOutsideSmallnessAndBall) {
  auto P = quadratic_problem(1, 16);
  const auto fam = SmoothingFamily::sharp_dyadic();
  const auto g = 0.5 * SpectralFunction::mode(P->lattice(), {0, 0});
  RunOptions o;
  o.delta = 1e-3;
  const auto r = run(*P, g, P->metadata().suggested, fam, o);
  EXPECT_TRUE(r.report.converged);
  ASSERT_FALSE(r.report.warnings.empty());
  EXPECT_NE(r.report.warnings.front().find("exceeds delta"), std::string::npos);
  bool ball = false;
  for (const auto& w : r.report.warnings) ball |= w.find("delta1") != std::string::npos;
  EXPECT_TRUE(ball);
  o.strict_ball = true;
  try {
    run(*P, g, P->metadata().suggested, fam, o);
    FAIL() << "expected PsiFailure";
  } catch (const PsiFailure& e) {
    EXPECT_GE(e.step(), 1);
    EXPECT_EQ(e.report().rows.size(), static_cast<std::size_t>(e.step()));
  }
}

TEST(Run, DivergenceDetectorFires) {
  auto P = quadratic_problem(1, 16);
  const auto fam = SmoothingFamily::sharp_dyadic();
  std::mt19937_64 rng(6);
  const auto g = with_norm(oracle::smooth_random(P->lattice(), rng, 4.0, 1.0), 3.0, 1e-2);
  RunOptions o;
  o.overflow = 1e-12;  // any nonzero residual counts as blown
  try {
    run(*P, g, P->metadata().suggested, fam, o);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 0);
    EXPECT_EQ(e.report().rows.size(), 1u);
  }
}

TEST(Run, OversizedSmallDivisorDataDiverges) {
  auto P = small_divisor_problem(16);
  const auto p = P->metadata().suggested;
  const auto g = with_norm(analytic(P->lattice(), 1.0, 0.5), p.beta, 500.0);
  try {
    run(*P, g, p, SmoothingFamily::sharp_dyadic());
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_LE(e.step(), 10);
    EXPECT_FALSE(e.report().converged);
  }
}

TEST(Run, SmallDivisorDefaultConverges) {
  auto P = small_divisor_problem(16);
  const auto p = P->metadata().suggested;
  const auto g = with_norm(analytic(P->lattice(), 1.0, 0.5), p.beta, 1e-3);
  const auto r = run(*P, g, p, SmoothingFamily::sharp_dyadic());
  EXPECT_TRUE(r.report.converged);
  EXPECT_LE(r.report.max_identity_defect, 1e-12);
  EXPECT_LE(sobolev_norm(P->phi(r.u) - P->phi(SpectralFunction(P->lattice(), true)) - g, 0.0), 1e-10);
}

TEST(Run, HighNormRatioStableInNmax) {
  std::vector<double> ratios;
  for (int nmax : {64, 128, 256}) {
    auto P = quadratic_problem(1, nmax);
    auto p = P->metadata().suggested;
    p.c = 2;
    const auto g = analytic(P->lattice(), 0.02, 0.5);
    const auto r = run(*P, g, p, SmoothingFamily::sharp_dyadic());
    ASSERT_TRUE(r.report.converged);
    ASSERT_TRUE(r.report.highnorm_ratio.has_value());
    ASSERT_TRUE(r.report.A_c.has_value());
    EXPECT_NEAR(*r.report.A_c, 1.0, 1e-12);
    ratios.push_back(*r.report.highnorm_ratio);
  }
  EXPECT_NEAR(ratios[1] / ratios[0], 1.0, 1e-3);
  EXPECT_NEAR(ratios[2] / ratios[1], 1.0, 1e-3);
}
