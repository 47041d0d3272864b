// Acceptance checks: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nmh/config.hpp"
#include "nmh/counterexamples.hpp"
#include "nmh/iterator.hpp"
#include "oracles.hpp"

using namespace nmh;

namespace {

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<void(Outcome&)> body;
};

SpectralFunction scaled(SpectralFunction g, double a, double target) {
  g *= target / sobolev_norm(g, a);
  return g;
}

Testset single_modes(int nmax) {
  Testset t;
  t.single_modes = Lattice(1, nmax);
  return t;
}

void smoothing_axioms(Outcome& o) {
  const auto fam = SmoothingFamily::sharp_dyadic();
  const double a = 1.0, b = 3.0;
  const auto lo = measure_axiom_constants(fam, single_modes(4096), a, b, 8).constants;
  const auto hi = measure_axiom_constants(fam, single_modes(4096), a, b, 12).constants;
  auto rnd = random_testset(Lattice(1, 4096), 20, 1);
  const auto r = measure_axiom_constants(fam, rnd, a, b, 12).constants;
  // Exact single-mode supremum of ||(I-S_j)u||_a / (2^{-j(b-a)} ||(I-S_j)u||_b) for the sharp cutoff.
  double s3 = 0.0;
  for (int j = 0; j <= 12; ++j)
    for (int k = (1 << j) + 1; k <= 4096; ++k) s3 = std::max(s3, std::pow(std::ldexp(1.0, j) / std::hypot(1.0, k), b - a));
  o.detail << "C_S1=" << hi.C_S1 << " C_S3=" << hi.C_S3 << " (single-mode sup " << s3 << ") C_S2=" << lo.C_S2 << "/"
           << hi.C_S2 << " C_S4=" << lo.C_S4 << "/" << hi.C_S4;
  o.require(hi.C_S1 == 1.0 && lo.C_S1 == 1.0, "C_S1 == 1");
  o.require(r.C_S1 <= 1.0, "C_S1 <= 1 on random functions");
  o.require(hi.C_S3 <= 1.0 && std::abs(hi.C_S3 - s3) <= 1e-12, "C_S3 equals the exact single-mode value and is <= 1");
  o.require(std::isfinite(hi.C_S2) && std::abs(lo.C_S2 / hi.C_S2 - 1) <= 0.01, "C_S2 stable");
  o.require(std::isfinite(hi.C_S4) && std::abs(lo.C_S4 / hi.C_S4 - 1) <= 0.01, "C_S4 stable");
}

void orthogonality(Outcome& o) {
  const auto sharp = SmoothingFamily::sharp_dyadic();
  const double r = measure_orthogonality(sharp, random_testset(Lattice(1, 4096), 100, 2), 1.0);
  const SmoothingFamily poly(CutoffShape::Smooth, Velocity::polynomial(1, 0.5));
  const double p = single_mode_orthogonality(poly, 4096);
  o.detail << "sharp dyadic ratio=" << r << " smooth polynomial ratio at 4096=" << p;
  o.require(std::abs(r - 1.0) <= 1e-12, "sharp ratio 1");
  o.require(p > 10.0, "polynomial ratio > 10");
}

void velocity(Outcome& o) {
  const SmoothingFamily geo(CutoffShape::Smooth, Velocity::geometric(2));
  const SmoothingFamily dexp(CutoffShape::Smooth, Velocity::doubly_exponential(2, 1.5));
  const double sg = velocity_loss_exponent(geo, 0, 3, {3, 4, 5, 6, 7, 8, 9, 10, 11}).sigma;
  const double sd = velocity_loss_exponent(dexp, 0, 3, {2, 3, 4, 5, 6}).sigma;
  const double floor = 0.9 * (1.5 - 1.0) * (3.0 - 1.0);
  o.detail << "sigma geometric=" << sg << " doubly exponential=" << sd << " (floor " << floor << ")";
  o.require(std::abs(sg) <= 0.05, "geometric sigma 0 +- 0.05");
  o.require(sd >= floor, "doubly exponential sigma above floor");
}

void a11(Outcome& o) {
  double worst = 0.0;
  for (int k = 1; k <= 4096; k *= 2) {
    const double q = oracle::simpson([](double t) { return 1.0 / (t * t); }, 2.0 * k / 3, 2.0 * k, 20000);
    worst = std::max({worst, std::abs(a11_coefficient(k, 2.0) - 1.0 / k) * k, std::abs(q - 1.0 / k) * k});
  }
  const auto r = a11_counterexample(1 << 14);
  const double se = std::abs(r.sum_slope / 2.0 - 1.0);
  double be = 0.0;
  for (std::size_t i = 0; i < r.block_slopes.size(); ++i)
    be = std::max(be, std::abs(r.block_slopes[i] / r.predicted_block_slopes[i] - 1.0));
  o.detail << "coef err=" << worst << " sum slope=" << r.sum_slope << " block slopes=" << r.block_slopes[0] << ","
           << r.block_slopes[1] << " (predicted " << r.predicted_block_slopes[0] << "," << r.predicted_block_slopes[1]
           << ")";
  o.require(worst <= 1e-12, "closed form matches 1/|k|");
  o.require(se <= 0.05, "sum slope within 5% of 2");
  o.require(be <= 0.05, "block slopes within 5%");
}

void weak_space(Outcome& o) {
  const auto r = weak_space_example(8192);
  o.detail << "block max/min=" << r.block_spread << " slope=" << r.sum_slope << " (2 ln 2 = " << 2 * std::log(2.0) << ")";
  o.require(r.block_spread <= 1.3, "block spread <= 1.3");
  o.require(std::abs(r.sum_slope / (2 * std::log(2.0)) - 1.0) <= 0.1, "slope 2 ln 2 +- 10%");
}

// Plain transcription of the coefficient recursion, independent of the library's loop.
std::array<double, 4> recursion(double La, double Lt, double L1, double Lt6, double L2, double Mt12, double Mt3,
                                double M0, int n) {
  double A = 0, B = La, At = 0, Bt = Lt, E = 0, F = L1;
  for (int k = 1; k < n; ++k) {
    const double psi = At * Mt12 + Lt6 * Mt12 + L2 * Mt3 + E * M0, eta = 1 + Bt * Mt12 + F * M0;
    A = La * psi, B = La * eta, At = Lt * psi, Bt = Lt * eta, E = L1 * psi, F = L1 * eta;
  }
  return {A, B, E, F};
}

void ledger(Outcome& o) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(0.05, 2.0);
  double worst = 0.0;
  IterationParams p;
  p.a1 = 1, p.alpha = 4, p.beta = 5, p.a2 = 8, p.c = 4;  // gamma = 1, N = 8
  for (int t = 0; t < 100; ++t) {
    TameConstants tc{U(rng), U(rng), U(rng), U(rng), U(rng), U(rng), 1.0};
    LedgerConstants lc;
    lc.C_ac = U(rng);
    lc.C_c = U(rng);
    const double a = 3.0;
    for (int n = 1; n <= 8; ++n) {
      const auto r = highnorm_coeffs(p, tc, n, a, CoeffMode::Recursive, lc);
      const auto c = highnorm_coeffs(p, tc, n, a, CoeffMode::ClosedForm, lc);
      const auto ref = recursion(tc.L45(a) * lc.C_ac(a), tc.L45(12) * lc.C_ac(12), tc.L456(1) * lc.C_c, tc.L6(12),
                                 tc.L456(8), tc.M1(11) + tc.M2(11), tc.M3(11), tc.M123(0), n);
      const double x[4] = {r.A, r.B, r.E, r.F}, y[4] = {c.A, c.B, c.E, c.F};
      for (int i = 0; i < 4; ++i) {
        const double s = std::max(std::abs(ref[i]), 1e-300);
        worst = std::max({worst, std::abs(x[i] - y[i]) / s, std::abs(x[i] - ref[i]) / s});
      }
    }
  }
  // Boundary flips of validate and choose_gamma.
  IterationParams b;
  b.a1 = 2, b.beta = 6, b.a2 = 40;
  b.alpha = b.a1 + b.beta / 2;
  const auto at = validate(b);
  b.alpha = std::nextafter(b.alpha, 100.0);
  const bool flip = at.size() == 1 && at[0].name == "a1 + beta/2 < alpha" && validate(b).empty();
  bool gamma_flip = false;
  try {
    IterationParams g;
    g.a1 = 5, g.alpha = 10.5, g.beta = 11, g.a2 = 30;
    choose_gamma(g);
  } catch (const NoAdmissibleGamma&) {
    IterationParams g;
    g.a1 = 5, g.alpha = 11, g.beta = 11, g.a2 = 30;
    gamma_flip = choose_gamma(g) == 1.0;
  }
  o.detail << "max relative deviation=" << worst;
  o.require(worst <= 1e-10, "recursive == closed form");
  o.require(flip, "validate boundary flip");
  o.require(gamma_flip, "choose_gamma boundary");
}

struct SharedRuns {
  double max_defect = 0.0;
  std::string where;
  void note(const RunReport& r, double gnorm, const std::string& name) {
    const double scaled_defect = r.max_identity_defect / std::max(1.0, gnorm);
    if (scaled_defect >= max_defect) max_defect = scaled_defect, where = name;
  }
} shared;

void linear_exact(Outcome& o) {
  double worst = 0.0;
  bool zero_e = true;
  for (int d : {1, 2}) {
    auto P = linear_multiplier_problem(d, d == 1 ? 256 : 24, 3.0);
    std::mt19937_64 rng(7 + d);
    const auto g = oracle::smooth_random(P->lattice(), rng, 1.0, 1.0);
    const auto r = run(*P, g, P->metadata().suggested, SmoothingFamily::sharp_dyadic());
    for (const auto& e : r.state.e_list) zero_e = zero_e && e.is_zero();
    worst = std::max(worst, sobolev_norm(r.u - P->apply_inverse(g), 0.0) / sobolev_norm(g, 0.0));
    shared.note(r.report, sobolev_norm(g, 0.0), "linear d=" + std::to_string(d));
  }
  o.detail << "||u - L^-1 g||_0 / ||g||_0=" << worst;
  o.require(worst <= 1e-10, "exact inverse");
  o.require(zero_e, "all e_j = 0");
}

void quadratic_oracle(Outcome& o) {
  auto P = quadratic_problem(1, 64);
  const auto g = 0.01 * SpectralFunction::mode(P->lattice(), {0, 0});
  RunOptions opts;
  opts.max_steps = 25;
  const auto r = run(*P, g, P->metadata().suggested, SmoothingFamily::sharp_dyadic(), opts);
  const double ustar = (-1.0 + std::sqrt(1.04)) / 2.0;
  auto exact = ustar * SpectralFunction::mode(P->lattice(), {0, 0});
  const double err = sobolev_norm(r.u - exact, 0.0);
  shared.note(r.report, sobolev_norm(g, 0.0), "quadratic");
  o.detail << "steps=" << r.report.steps << " residual=" << r.report.final_residual << " ||u-u*||_0=" << err;
  o.require(r.report.converged && r.report.steps <= 25, "converged within 25 steps");
  o.require(r.report.final_residual <= 1e-8, "residual <= 1e-8");
  o.require(err <= 1e-8, "matches u*");
}

struct ShippedRun {
  RunReport report;
  json baselines;
  double g0 = 0.0;
};

ShippedRun shipped_small_divisor() {
  const auto root = load_json_file(std::string(NMH_SOURCE_DIR) + "/configs/small_divisor_default.json");
  auto setup = setup_from_json(root);
  const auto fam = smoothing_from_json(cfg::section(root, "smoothing"));
  const auto opts = run_options_from_json(cfg::section(root, "run"));
  const auto seed = cfg::section(root, "run").value("seed", std::uint64_t{1});
  const auto g = data_from_json(cfg::section(root, "data"), setup.problem->lattice(), setup.params.beta, seed);
  ShippedRun s;
  s.report = run(*setup.problem, g, setup.params, fam, opts).report;
  s.baselines = root.at("baselines");
  s.g0 = sobolev_norm(g, 0.0);
  return s;
}

void residual_identity(Outcome& o) {
  auto P = small_divisor_problem(32);
  const auto p = P->metadata().suggested;
  const auto s = shipped_small_divisor();
  shared.note(s.report, s.g0, "small divisor nmax=32");
  // A random-data run on the same problem exercises nonzero e_j in every Fourier block.
  std::mt19937_64 rng(9);
  const auto g = scaled(oracle::smooth_random(P->lattice(), rng, 6.0, 1.0), p.beta, 1e-3);
  const auto r = run(*P, g, p, SmoothingFamily::sharp_dyadic());
  shared.note(r.report, sobolev_norm(g, 0.0), "small divisor random");
  o.detail << "max defect / max(1,||g||_0)=" << shared.max_defect << " (" << shared.where << ")";
  o.require(shared.max_defect <= 1e-9, "identity defect <= 1e-9");
}

void bound_monitoring(Outcome& o) {
  const auto s = shipped_small_divisor();
  const auto& k = s.report.sup_ratios;
  const double got[4] = {k.K1, k.K2, k.K3, k.K4};
  const char* names[4] = {"K1", "K2", "K3", "K4"};
  for (int i = 0; i < 4; ++i) {
    const double base = s.baselines.at(names[i]).get<double>();
    const double ratio = got[i] / base;
    o.detail << names[i] << "=" << got[i] << " ";
    o.require(std::isfinite(got[i]) && ratio >= 0.5 && ratio <= 2.0, std::string(names[i]) + " within 2x of baseline");
  }
  o.detail << "residual=" << s.report.final_residual;
  o.require(s.report.converged && s.report.final_residual <= 1e-8, "converged with residual <= 1e-8");
}

void higher_regularity(Outcome& o) {
  std::vector<double> ratios;
  for (int nmax : {64, 128, 256}) {
    auto P = quadratic_problem(1, nmax);
    auto p = P->metadata().suggested;
    p.c = 2;
    SpectralFunction g(P->lattice(), true);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 0.02 * std::pow(0.5, std::abs(P->lattice().point(i)[0]));
    const auto r = run(*P, g, p, SmoothingFamily::sharp_dyadic());
    const bool fine = r.report.converged && r.report.u_alpha_plus_c && std::isfinite(*r.report.u_alpha_plus_c);
    o.require(fine, "finite ||u||_{alpha+c} at nmax " + std::to_string(nmax));
    ratios.push_back(fine ? *r.report.highnorm_ratio : NAN);
    o.detail << "nmax " << nmax << ": " << ratios.back() << " ";
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  o.require(*hi <= 2.0 * *lo, "ratio stable within 2x");
}

void interface_conformance(Outcome& o) {
  const double eps = 1e-5;
  std::vector<std::unique_ptr<TameProblem>> problems;
  problems.push_back(linear_multiplier_problem(1, 32, 3.0));
  problems.push_back(quadratic_problem(1, 32));
  problems.push_back(small_divisor_problem(12));
  double w1 = 0, w2 = 0, wi = 0;
  for (const auto& P : problems) {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 20; ++t) {
      const auto u = oracle::smooth_random(P->lattice(), rng, 3.0, 0.02);
      const auto h = oracle::smooth_random(P->lattice(), rng, 3.0, 1.0);
      const auto w = oracle::smooth_random(P->lattice(), rng, 3.0, 1.0);
      auto d1 = P->phi(u + eps * h) - P->phi(u - eps * h);
      d1 *= 1.0 / (2 * eps);
      w1 = std::max(w1, oracle::rel_diff(d1, P->dphi(u, h)));
      auto d2 = P->dphi(u + eps * w, h) - P->dphi(u - eps * w, h);
      d2 *= 1.0 / (2 * eps);
      const auto exact = P->d2phi(u, h, w);
      w2 = std::max(w2, exact.is_zero() ? sobolev_norm(d2, 0.0) / sobolev_norm(h, 0.0) : oracle::rel_diff(d2, exact));
      wi = std::max(wi, oracle::rel_diff(P->dphi(u, P->psi(u, w)), w));
    }
  }
  o.detail << "Phi' err=" << w1 << " Phi'' err=" << w2 << " right inverse err=" << wi;
  o.require(w1 <= 1e-6, "Phi' finite difference");
  o.require(w2 <= 1e-5, "Phi'' finite difference");
  o.require(wi <= 1e-10, "right inverse");
}

}  // namespace

int main() {
  const std::vector<Criterion> all = {
      {1, "smoothing axioms", 10, smoothing_axioms},
      {2, "orthogonality", 10, orthogonality},
      {3, "velocity exponents", 30, velocity},
      {4, "A11 counterexample", 10, a11},
      {5, "weak-space example", 10, weak_space},
      {6, "ledger consistency", 1, ledger},
      {7, "linear-problem exactness", 5, linear_exact},
      {8, "quadratic oracle", 10, quadratic_oracle},
      {9, "residual identity", 60, residual_identity},
      {10, "bound monitoring", 120, bound_monitoring},
      {11, "higher regularity", 60, higher_regularity},
      {12, "interface conformance", 30, interface_conformance},
  };
  int failed = 0;
  for (const auto& c : all) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      o.ok = false;
      o.detail << " [over budget " << c.budget_s << " s]";
    }
    failed += !o.ok;
    std::printf("%s %2d %-26s %7.2fs  %s\n", o.ok ? "PASS" : "FAIL", c.id, c.name.c_str(), secs, o.detail.str().c_str());
  }
  std::printf("%d/%zu criteria passed\n", int(all.size()) - failed, all.size());
  return failed == 0 ? 0 : 1;
}
