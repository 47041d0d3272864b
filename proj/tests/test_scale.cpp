#include <gtest/gtest.h>

#include <random>

#include "nmh/scale.hpp"
#include "oracles.hpp"

using namespace nmh;

TEST(SobolevNorm, SingleModeUsesBracket) {
  auto u = SpectralFunction::mode(Lattice(1, 8), {3, 0});
  EXPECT_DOUBLE_EQ(sobolev_norm(u, 1.0), std::sqrt(10.0));
}

TEST(SobolevNorm, ZeroFunction) {
  EXPECT_EQ(sobolev_norm(SpectralFunction::zero(2, 5), 3.5), 0.0);
}

TEST(SobolevNorm, DisjointModesAdd) {
  Lattice lat(1, 4);
  auto u = SpectralFunction::mode(lat, {1, 0}) + SpectralFunction::mode(lat, {2, 0});
  EXPECT_NEAR(sobolev_norm(u, 1.0), std::sqrt(7.0), 1e-15);
}

TEST(SobolevNorm, MatchesDirectSumIn2d) {
  std::mt19937_64 rng(11);
  Lattice lat(2, 6);
  for (int t = 0; t < 10; ++t) {
    auto u = oracle::smooth_random(lat, rng, 1.0, 1.0);
    for (double a : {0.0, 0.5, 2.0, 3.7}) EXPECT_NEAR(sobolev_norm(u, a), oracle::norm(u, a), 1e-12 * oracle::norm(u, a));
  }
}

TEST(NormExponent, RejectsNegative) {
  EXPECT_THROW(NormExponent(-0.1), InvalidArgument);
}

TEST(SobolevNorm, MonotoneInExponent) {
  std::mt19937_64 rng(1);
  for (int d : {1, 2}) {
    Lattice lat(d, d == 1 ? 64 : 12);
    for (int t = 0; t < 20; ++t) {
      auto u = oracle::smooth_random(lat, rng, 1.5, 1.0);
      double prev = 0.0;
      for (double a = 0.0; a <= 5.0; a += 0.25) {
        const double n = sobolev_norm(u, a);
        EXPECT_LE(prev, n);
        prev = n;
      }
    }
  }
}

TEST(SobolevNorm, LogConvex) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Lattice lat(1, 128);
  for (int t = 0; t < 50; ++t) {
    auto u = oracle::smooth_random(lat, rng, 2.0, 1.0);
    const double a = 4.0 * U(rng), b = 4.0 * U(rng), lam = U(rng);
    const double lhs = sobolev_norm(u, lam * a + (1 - lam) * b);
    const double rhs = std::pow(sobolev_norm(u, a), lam) * std::pow(sobolev_norm(u, b), 1 - lam);
    EXPECT_LE(lhs, rhs * (1 + 1e-12));
  }
}

TEST(Product, ConstantIsIdentity) {
  std::mt19937_64 rng(3);
  Lattice lat(2, 5);
  auto v = oracle::smooth_random(lat, rng, 1.0, 1.0);
  auto p = pointwise_product(SpectralFunction::constant(lat, 1.0), v);
  EXPECT_LT(oracle::rel_diff(p, v), 1e-15);
}

TEST(Product, SingleModes) {
  Lattice lat(1, 4);
  auto e1 = SpectralFunction::mode(lat, {1, 0});
  auto p = pointwise_product(e1, e1);
  EXPECT_EQ(p.coeff({2, 0}), Complex(1.0));
  double rest = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) rest += std::abs(p[i]);
  EXPECT_EQ(rest, 1.0);
}

TEST(Product, TruncatesOutsideLattice) {
  Lattice lat(1, 6);
  auto p = pointwise_product(SpectralFunction::mode(lat, {1, 0}), SpectralFunction::mode(lat, {6, 0}));
  EXPECT_TRUE(p.is_zero());
}

TEST(Product, MatchesDirectConvolution) {
  std::mt19937_64 rng(4);
  for (int d : {1, 2}) {
    Lattice a(d, d == 1 ? 40 : 7), b(d, d == 1 ? 25 : 4);
    for (int t = 0; t < 5; ++t) {
      auto u = oracle::smooth_random(a, rng, 1.0, 1.0);
      auto v = oracle::smooth_random(b, rng, 1.0, 1.0);
      EXPECT_LT(oracle::rel_diff(pointwise_product(u, v), oracle::convolution(u, v)), 1e-13);
    }
  }
}

TEST(Product, FftPathMatchesDirect) {
  std::mt19937_64 rng(5);
  Lattice lat(2, 40);  // 6561 modes each: above the direct-work threshold
  auto u = oracle::smooth_random(lat, rng, 2.0, 1.0);
  auto v = oracle::smooth_random(lat, rng, 2.0, 1.0);
  const auto fast = pointwise_product(u, v);
  const auto slow = detail::fft_product(u, v, lat);
  EXPECT_LT(oracle::rel_diff(fast, slow), 1e-12);
  Lattice small(2, 6);
  auto us = oracle::smooth_random(small, rng, 1.0, 1.0), vs = oracle::smooth_random(small, rng, 1.0, 1.0);
  EXPECT_LT(oracle::rel_diff(detail::fft_product(us, vs, small), oracle::convolution(us, vs)), 1e-12);
}

TEST(Product, CommutativeAndAssociative) {
  std::mt19937_64 rng(6);
  Lattice small(1, 10), big(1, 40);
  for (int t = 0; t < 10; ++t) {
    auto u = oracle::smooth_random(small, rng, 0.0, 1.0).resized(40);
    auto v = oracle::smooth_random(small, rng, 0.0, 1.0).resized(40);
    auto w = oracle::smooth_random(small, rng, 0.0, 1.0).resized(40);
    EXPECT_LT(oracle::rel_diff(pointwise_product(u, v), pointwise_product(v, u)), 1e-15);
    EXPECT_LT(oracle::rel_diff(pointwise_product(pointwise_product(u, v), w),
                               pointwise_product(u, pointwise_product(v, w))),
              1e-12);
  }
}

TEST(Product, DimensionMismatch) {
  EXPECT_THROW(pointwise_product(SpectralFunction::zero(1, 3), SpectralFunction::zero(2, 3)), DimensionMismatch);
}

TEST(Product, RealInputsGiveConjugateSymmetricOutput) {
  std::mt19937_64 rng(7);
  Lattice lat(2, 6);
  auto p = pointwise_product(oracle::smooth_random(lat, rng, 1, 1), oracle::smooth_random(lat, rng, 1, 1));
  EXPECT_TRUE(p.is_conjugate_symmetric(1e-14));
}

TEST(Axpy, Examples) {
  Lattice lat(1, 3);
  auto e1 = SpectralFunction::mode(lat, {1, 0});
  auto z = SpectralFunction::zero(1, 3);
  EXPECT_LT(oracle::rel_diff(axpy(1.0, e1, z), e1), 1e-16);
  EXPECT_TRUE(axpy(-1.0, e1, e1).is_zero());
  EXPECT_EQ(axpy(2.0, e1, e1).coeff({1, 0}), Complex(3.0));
}

TEST(Axpy, ResultLivesOnLargerLattice) {
  auto u = SpectralFunction::mode(Lattice(1, 2), {2, 0});
  auto v = SpectralFunction::mode(Lattice(1, 5), {5, 0});
  auto r = axpy(2.0, u, v);
  EXPECT_EQ(r.nmax(), 5);
  EXPECT_EQ(r.coeff({2, 0}), Complex(2.0));
  EXPECT_EQ(r.coeff({5, 0}), Complex(1.0));
  EXPECT_THROW(axpy(1.0, SpectralFunction::zero(1, 2), SpectralFunction::zero(2, 2)), DimensionMismatch);
}
