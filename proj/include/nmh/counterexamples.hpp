#pragma once
// Counterexample constructions: a Sobolev-class failure of the A.11 hypotheses
// and a function in the weak space E_a' but not in E_a.

#include <cmath>
#include <string>
#include <vector>

#include "nmh/error.hpp"
#include "nmh/scale.hpp"
#include "nmh/smoothing.hpp"

namespace nmh {

enum class CounterexampleFamily { HormanderA11, WeakSpace };

inline std::string to_string(CounterexampleFamily f) {
  return f == CounterexampleFamily::HormanderA11 ? "a11" : "weak_space";
}

struct CounterexampleRow {
  std::string family;    // series name, e.g. "a11/partial_sum"
  double exponent = 0;   // Sobolev exponent the value refers to
  double index = 0;      // N, j or theta
  double value = 0;
  double fitted_slope = NAN;
  double predicted_slope = NAN;
};

struct CounterexampleFunction {
  CounterexampleFamily family;
  double beta = 0;  // A11 decay exponent
  double a = 0;     // critical or weak-space exponent
  SpectralFunction u = SpectralFunction::zero(1, 0);
};

struct CounterexampleReport {
  CounterexampleFunction function;
  std::vector<CounterexampleRow> rows;
  double sum_slope = NAN;            // fitted slope of the divergent series
  double predicted_sum_slope = NAN;
  std::vector<double> block_slopes;  // A11: one per a_i; weak space: unused
  std::vector<double> predicted_block_slopes;
  double tail_ratio = NAN;           // P_{2N} / P_N at the largest N
  double block_spread = NAN;         // weak space: max/min block norm
};

/// int_{2k/3}^{2k} theta^{-beta} d theta for k > 0.
inline double a11_coefficient(double k, double beta) {
  if (k == 0.0) return 0.0;
  k = std::abs(k);
  if (beta == 1.0) return std::log(3.0);
  return (std::pow(2.0 * k / 3.0, 1.0 - beta) - std::pow(2.0 * k, 1.0 - beta)) / (beta - 1.0);
}

/// Partial sums P_N = sum_{|k|<=N} |u_k|^2 <k>^{2a} at N = 2^e for e in [e_lo, e_hi].
template <class Coef>
std::vector<std::pair<double, double>> dyadic_partial_sums(Coef&& coef, double a, int e_lo, int e_hi) {
  std::vector<std::pair<double, double>> out;
  double P = coef(0.0) * coef(0.0);
  std::int64_t k = 1;
  for (int e = e_lo; e <= e_hi; ++e) {
    const std::int64_t N = std::int64_t{1} << e;
    for (; k <= N; ++k) {
      const double c = coef(double(k));
      P += 2.0 * c * c * bracket_pow2(double(k) * double(k), a);
    }
    out.emplace_back(double(N), P);
  }
  return out;
}

struct A11Options {
  double beta = 2.0;
  double a0 = 0.0;
  double a1 = 1.0;
  int sum_lo = 8;   // partial sums over N in [2^sum_lo, 2^sum_hi]
  int sum_hi = 14;
  double a_shift = 0.0;  // partial-sum exponent is beta - 3/2 + a_shift
};

/// d = 1 torus version; nmax bounds both the realized lattice and the largest theta used.
inline CounterexampleReport a11_counterexample(int nmax, const A11Options& o = {}) {
  const double crit = o.beta - 1.5;
  if (!(o.beta > 1.5)) throw InvalidArgument("A11 counterexample needs beta > d/2 + 1");
  if (!(0.0 <= o.a0 && o.a0 < crit && crit < o.a1))
    throw InvalidArgument("A11 counterexample needs 0 <= a0 < beta - d/2 - 1 < a1");
  if (o.sum_lo < 1 || o.sum_hi <= o.sum_lo + 1) throw InvalidArgument("partial-sum window too short");
  if ((std::int64_t{1} << o.sum_hi) > nmax) throw InvalidArgument("nmax below the partial-sum window");

  CounterexampleReport rep;
  Lattice lat(1, nmax);
  SpectralFunction u(lat, true);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = a11_coefficient(lat.point(i)[0], o.beta);
  rep.function = {CounterexampleFamily::HormanderA11, o.beta, crit + o.a_shift, u};

  const double a = crit + o.a_shift;
  const double C = a11_coefficient(1.0, o.beta);  // u_k = C k^{1-beta}
  rep.predicted_sum_slope = 2.0 * C * C;  // slope at the critical exponent
  auto sums = dyadic_partial_sums([&](double k) { return a11_coefficient(k, o.beta); }, a, o.sum_lo, o.sum_hi);
  std::vector<double> x, y;
  for (auto [N, P] : sums) x.push_back(std::log(N)), y.push_back(P);
  rep.sum_slope = fit_slope(x, y);
  for (auto [N, P] : sums)
    rep.rows.push_back({"a11/partial_sum", a, N, P, rep.sum_slope, rep.predicted_sum_slope});
  auto top = dyadic_partial_sums([&](double k) { return a11_coefficient(k, o.beta); }, a, o.sum_hi - 1, o.sum_hi);
  rep.tail_ratio = top[1].second / top[0].second;

  // Blocks u_theta = theta^{-beta} sum_{theta/2 <= |k| <= 3 theta/2} e^{ikx} for theta = 2^m with 3 theta/2 <= nmax.
  for (double ai : {o.a0, o.a1}) {
    std::vector<double> lx, ly;
    std::vector<std::pair<double, double>> pts;
    for (int m = 4; 1.5 * std::ldexp(1.0, m) <= nmax; ++m) {
      const double theta = std::ldexp(1.0, m);
      double s = 0.0;
      for (auto k = static_cast<std::int64_t>(std::ceil(theta / 2)); k <= static_cast<std::int64_t>(1.5 * theta); ++k)
        s += 2.0 * bracket_pow2(double(k) * double(k), ai);
      const double norm = std::pow(theta, -o.beta) * std::sqrt(s);
      lx.push_back(std::log(theta));
      ly.push_back(std::log(norm));
      pts.emplace_back(theta, norm);
    }
    if (lx.size() < 2) throw InvalidArgument("nmax too small for the block-norm fit");
    const double slope = fit_slope(lx, ly);
    const double predicted = ai - o.beta + 0.5;  // b_i - 1 with b_i = a_i - beta + d/2 + 1
    rep.block_slopes.push_back(slope);
    rep.predicted_block_slopes.push_back(predicted);
    for (auto [theta, norm] : pts) rep.rows.push_back({"a11/block_norm", ai, theta, norm, slope, predicted});
  }
  return rep;
}

struct WeakSpaceOptions {
  double a = 1.0;
  int block_lo = 3, block_hi = 12;  // block-norm window in j
  int slope_lo = 6, slope_hi = 12;  // ||S_j u||_a^2 slope window
};

/// u_k = <k>^{-a-1/2} on d = 1 with the sharp dyadic family.
inline CounterexampleReport weak_space_example(int nmax, const WeakSpaceOptions& o = {}) {
  if (o.a < 0.0) throw InvalidArgument("weak-space exponent must be nonnegative");
  const int need = std::max(o.block_hi + 1, o.slope_hi);
  if ((std::int64_t{1} << need) > nmax) throw InvalidArgument("nmax below 2^" + std::to_string(need));
  if (o.slope_hi - o.slope_lo < 1) throw InvalidArgument("slope window too short");

  CounterexampleReport rep;
  Lattice lat(1, nmax);
  SpectralFunction u(lat, true);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::pow(1.0 + lat.norm_sq(i), -0.5 * o.a - 0.25);
  rep.function = {CounterexampleFamily::WeakSpace, 0.0, o.a, u};

  const auto fam = SmoothingFamily::sharp_dyadic();
  double bmax = 0.0, bmin = INFINITY;
  for (int j = o.block_lo; j <= o.block_hi; ++j) {
    const double b = sobolev_norm_sq(fam.apply_R(j, u), o.a);
    bmax = std::max(bmax, b);
    bmin = std::min(bmin, b);
    rep.rows.push_back({"weak_space/block_norm_sq", o.a, double(j), b, NAN, NAN});
  }
  rep.block_spread = std::sqrt(bmax / bmin);

  std::vector<double> x, y;
  for (int j = o.slope_lo; j <= o.slope_hi; ++j) {
    x.push_back(j);
    y.push_back(sobolev_norm_sq(fam.apply_S(j, u), o.a));
  }
  rep.sum_slope = fit_slope(x, y);
  rep.predicted_sum_slope = 2.0 * std::log(2.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    rep.rows.push_back({"weak_space/smoothed_norm_sq", o.a, x[i], y[i], rep.sum_slope, rep.predicted_sum_slope});
  return rep;
}

}  // namespace nmh
