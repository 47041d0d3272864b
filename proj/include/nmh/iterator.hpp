#pragma once
// The smoothing-corrected Newton loop: u_{j+1} = u_j + Psi(S_j u_j)(g_j + y_j).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nmh/hypotheses.hpp"
#include "nmh/problems.hpp"
#include "nmh/smoothing.hpp"

namespace nmh {

struct Decomposition {
  std::vector<SpectralFunction> blocks;  // g_j = R_j g, j = 0..jmax
  double A = 1.0;                        // (sum ||g_j||_beta^2)^{1/2} / ||g||_beta
};

/// Smallest j with theta_j >= the largest |k| on the lattice; S_j is the identity from there on.
inline std::int64_t covering_index(const SmoothingFamily& fam, const Lattice& lat) {
  const double kmax = lat.nmax() * std::sqrt(double(lat.dim()));
  return std::max<std::int64_t>(1, fam.velocity().first_index_at_least(kmax));
}

inline Decomposition decompose_g(const SpectralFunction& g, const SmoothingFamily& fam, NormExponent beta,
                                 std::optional<std::int64_t> jmax = std::nullopt) {
  const auto J = jmax ? *jmax : covering_index(fam, g.lattice());
  if (J < 0) throw InvalidArgument("jmax must be nonnegative");
  Decomposition d;
  double sum = 0.0;
  for (std::int64_t j = 0; j <= J; ++j) {
    d.blocks.push_back(fam.apply_R(j, g));
    sum += sobolev_norm_sq(d.blocks.back(), beta);
  }
  const double total = sobolev_norm_sq(g, beta);
  d.A = total > 0.0 ? std::sqrt(sum / total) : 1.0;
  return d;
}

struct RunOptions {
  int max_steps = 60;
  double residual_tol = 1e-10;
  std::optional<double> delta;  // smallness threshold for ||g||_beta (warning only)
  bool strict_ball = false;     // treat ||v_j||_{a1} > delta1 as fatal
  int divergence_window = 5;
  double divergence_factor = 10.0;
  double overflow = 1e100;
  int grid_points = 5;  // exponents sampled per bound interval
  bool check_identity = true;
};

struct StepRow {
  int j = 0;
  double h_a1 = 0, h_a2 = 0;
  double v_a1_plus_beta = 0;
  double u_minus_v_a2 = 0;
  double u_alpha = 0;  // ||u_j||_alpha
  double y_0 = 0;
  double e_0 = 0, e_a2_minus_mu = 0;
  double residual = 0;  // ||Phi(u_{j+1}) - Phi(0) - g||_0
  double identity_defect = 0;
  // measured sup over the exponent grid of lhs / (rhs without K); NaN when 0/0
  double ratio_h = NAN, ratio_v = NAN, ratio_u_minus_v = NAN, ratio_u_alpha = NAN;
};

struct BoundRatios {
  double K1 = NAN, K2 = NAN, K3 = NAN, K4 = NAN;
};

struct RunReport {
  std::string problem;
  std::string family;
  std::vector<StepRow> rows;
  bool converged = false;
  int steps = 0;
  double final_residual = NAN;
  double g_beta = 0.0;
  double A = 1.0;
  std::optional<double> A_c;
  double max_identity_defect = 0.0;
  BoundRatios sup_ratios;
  std::optional<double> u_alpha_plus_c;
  std::optional<double> g_beta_plus_c;
  std::optional<double> highnorm_ratio;  // ||u||_{alpha+c} / (||g||_beta + ||g||_{beta+c})
  std::vector<std::string> warnings;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, RunReport report, int step)
      : Error(what), report_(std::move(report)), step_(step) {}
  const RunReport& report() const { return report_; }
  int step() const { return step_; }

 private:
  RunReport report_;
  int step_;
};

/// Psi failed inside run(); carries the diagnostics gathered so far.
class PsiFailure : public SolverFailure {
 public:
  PsiFailure(const std::string& what, RunReport report, int step)
      : SolverFailure(what), report_(std::move(report)), step_(step) {}
  const RunReport& report() const { return report_; }
  int step() const { return step_; }

 private:
  RunReport report_;
  int step_;
};

struct IterationState {
  int j = 0;
  SpectralFunction g;
  std::vector<SpectralFunction> u_history;  // u_0 .. u_j
  std::vector<SpectralFunction> e_list;     // e_0 .. e_{j-1}
  std::vector<SpectralFunction> g_blocks;
  SpectralFunction phi0;
  RunReport report;

  const SpectralFunction& u() const { return u_history.back(); }
  SpectralFunction block(std::size_t j) const {
    return j < g_blocks.size() ? g_blocks[j] : SpectralFunction(g.lattice(), g.real_valued());
  }
};

inline IterationState initial_state(const TameProblem& problem, const SpectralFunction& g, const SmoothingFamily& fam,
                                    const IterationParams& p) {
  if (!(g.lattice() == problem.lattice())) throw DimensionMismatch("g lives on a different lattice than the problem");
  IterationState s{0, g, {}, {}, {}, SpectralFunction(g.lattice()), {}};
  s.u_history.push_back(SpectralFunction(g.lattice(), g.real_valued()));
  auto dec = decompose_g(g, fam, p.beta);
  s.g_blocks = std::move(dec.blocks);
  s.phi0 = problem.phi(s.u_history[0]);
  s.report.problem = problem.metadata().name;
  s.report.family = fam.name();
  s.report.g_beta = sobolev_norm(g, p.beta);
  s.report.A = dec.A;
  return s;
}

/// y_0 = 0, y_1 = -S_1 e_0, y_j = -S_j e_{j-1} - R_{j-1} sum_{i<=j-2} e_i.
inline SpectralFunction build_y(const IterationState& state, const SmoothingFamily& fam, int j) {
  if (j < 0) throw InvalidArgument("negative step index");
  SpectralFunction y(state.g.lattice(), state.g.real_valued());
  if (j == 0) return y;
  if (state.e_list.size() < static_cast<std::size_t>(j)) throw InvalidArgument("e_list is missing entries for y_j");
  y -= fam.apply_S(j, state.e_list[j - 1]);
  if (j >= 2) {
    SpectralFunction sum(state.g.lattice(), state.g.real_valued());
    for (int i = 0; i <= j - 2; ++i) sum += state.e_list[i];
    y -= fam.apply_R(j - 1, sum);
  }
  return y;
}

/// ||Phi(u_{k+1}) - Phi(u_0) - S_{k+1} g - e_k - r_k||_0 with r_k = (I - S_k) sum_{j<k} e_j.
inline double check_residual_identity(const TameProblem& problem, const IterationState& state,
                                      const SmoothingFamily& fam, int k) {
  if (k < 0 || static_cast<std::size_t>(k + 1) >= state.u_history.size())
    throw InvalidArgument("residual identity needs u_{k+1} in the state");
  auto lhs = problem.phi(state.u_history[k + 1]);
  lhs -= state.phi0;
  lhs -= fam.apply_S(k + 1, state.g);
  lhs -= state.e_list[k];
  if (k >= 1) {
    SpectralFunction sum(state.g.lattice(), state.g.real_valued());
    for (int j = 0; j < k; ++j) sum += state.e_list[j];
    lhs -= fam.apply_S_complement(k, sum);
  }
  return sobolev_norm(lhs, 0.0);
}

namespace detail {

inline std::vector<double> exponent_grid(double lo, double hi, int n) {
  if (n <= 1 || hi <= lo) return {lo};
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
  return out;
}

inline void sup_ratio(double& acc, double num, double den) {
  if (num == 0.0 && den == 0.0) return;
  const double r = den == 0.0 ? std::numeric_limits<double>::infinity() : num / den;
  acc = std::isnan(acc) ? r : std::max(acc, r);
}

}  // namespace detail

/// One pass of the recursion; appends e_j, u_{j+1} and a diagnostics row.
inline void step(const TameProblem& problem, IterationState& state, const SmoothingFamily& fam,
                 const IterationParams& p, const RunOptions& opts = {}) {
  const int j = state.j;
  const auto& u = state.u();
  const auto v = fam.apply_S(j, u);
  const double v_a1 = sobolev_norm(v, p.a1);
  if (v_a1 > problem.metadata().delta1) {
    const std::string msg = "step " + std::to_string(j) + ": ||v_j||_a1 = " + std::to_string(v_a1) +
                            " exceeds delta1 = " + std::to_string(problem.metadata().delta1);
    if (opts.strict_ball) throw SolverFailure(msg);
    state.report.warnings.push_back(msg);
  }
  const auto y = build_y(state, fam, j);
  const auto gj = state.block(static_cast<std::size_t>(j));
  const auto h = problem.psi(v, gj + y);
  auto e = problem.taylor_remainder(u, h);
  auto dd = problem.dphi(u, h);
  dd -= problem.dphi(v, h);
  e += dd;
  auto next = u + h;

  StepRow row;
  row.j = j;
  row.h_a1 = sobolev_norm(h, p.a1);
  row.h_a2 = sobolev_norm(h, p.a2);
  row.v_a1_plus_beta = sobolev_norm(v, p.a1 + p.beta);
  const auto umv = u - v;
  row.u_minus_v_a2 = sobolev_norm(umv, p.a2);
  row.u_alpha = sobolev_norm(u, p.alpha);
  row.y_0 = sobolev_norm(y, 0.0);
  row.e_0 = sobolev_norm(e, 0.0);
  row.e_a2_minus_mu = sobolev_norm(e, std::max(0.0, p.a2 - p.mu));

  const double gamma = effective_gamma(p);
  const double th = fam.theta(j);
  const double gb = state.report.g_beta;
  const double gjb = sobolev_norm(gj, p.beta);
  for (double a : detail::exponent_grid(p.a1, p.a2, opts.grid_points))
    detail::sup_ratio(row.ratio_h, sobolev_norm(h, a), (gb * std::pow(th, -gamma) + gjb) * std::pow(th, a - p.alpha));
  for (double a : detail::exponent_grid(p.a1 + p.beta, p.a2 + p.beta, opts.grid_points))
    detail::sup_ratio(row.ratio_v, sobolev_norm(v, a), gb * std::pow(th, a - p.alpha));
  for (double a : detail::exponent_grid(0.0, p.a2, opts.grid_points))
    detail::sup_ratio(row.ratio_u_minus_v, sobolev_norm(umv, a), gb * std::pow(th, a - p.alpha));
  detail::sup_ratio(row.ratio_u_alpha, row.u_alpha, gb);

  state.e_list.push_back(std::move(e));
  state.u_history.push_back(std::move(next));
  state.j = j + 1;

  auto res = problem.phi(state.u());
  res -= state.phi0;
  res -= state.g;
  row.residual = sobolev_norm(res, 0.0);
  if (opts.check_identity) {
    row.identity_defect = check_residual_identity(problem, state, fam, j);
    state.report.max_identity_defect = std::max(state.report.max_identity_defect, row.identity_defect);
  }
  state.report.rows.push_back(row);
}

/// Measured sup over steps of each bound ratio (the empirical K_1 .. K_4).
inline BoundRatios monitor_bounds(const RunReport& report) {
  BoundRatios b;
  auto fold = [](double& acc, double r) {
    if (!std::isnan(r)) acc = std::isnan(acc) ? r : std::max(acc, r);
  };
  for (const auto& r : report.rows) {
    fold(b.K1, r.ratio_h);
    fold(b.K2, r.ratio_v);
    fold(b.K3, r.ratio_u_minus_v);
    fold(b.K4, r.ratio_u_alpha);
  }
  return b;
}

struct RunResult {
  SpectralFunction u;
  RunReport report;
  IterationState state;
};

inline RunResult run(const TameProblem& problem, const SpectralFunction& g, const IterationParams& p,
                     const SmoothingFamily& fam, const RunOptions& opts = {}) {
  if (auto v = validate(p); !v.empty())
    throw InvalidArgument("iteration parameters violate " + v.front().name);
  auto state = initial_state(problem, g, fam, p);
  auto& rep = state.report;
  if (opts.delta && rep.g_beta > *opts.delta)
    rep.warnings.push_back("||g||_beta = " + std::to_string(rep.g_beta) + " exceeds delta = " +
                           std::to_string(*opts.delta));

  auto residual0 = problem.phi(state.u());
  residual0 -= state.phi0;
  residual0 -= g;
  double residual = sobolev_norm(residual0, 0.0);
  while (residual >= opts.residual_tol && state.j < opts.max_steps) {
    try {
      step(problem, state, fam, p, opts);
    } catch (const SolverFailure& e) {
      rep.steps = state.j;
      rep.final_residual = residual;
      rep.sup_ratios = monitor_bounds(rep);
      throw PsiFailure("step " + std::to_string(state.j) + ": " + e.what(), rep, state.j);
    }
    residual = rep.rows.back().residual;
    const auto n = rep.rows.size();
    const bool blown = !std::isfinite(residual) || residual > opts.overflow;
    const bool growing = n > static_cast<std::size_t>(opts.divergence_window) &&
                         residual > opts.divergence_factor * rep.rows[n - 1 - opts.divergence_window].residual;
    if (blown || growing) {
      rep.steps = state.j;
      rep.final_residual = residual;
      rep.sup_ratios = monitor_bounds(rep);
      throw DivergenceError("iteration diverged at step " + std::to_string(state.j - 1) + " (residual " +
                                std::to_string(residual) + ")",
                            rep, state.j - 1);
    }
  }
  rep.converged = residual < opts.residual_tol;
  rep.steps = state.j;
  rep.final_residual = residual;
  rep.sup_ratios = monitor_bounds(rep);
  if (p.c > 0.0) {
    const double bc = p.beta + p.c;
    double sum = 0.0;
    for (const auto& b : state.g_blocks) sum += sobolev_norm_sq(b, bc);
    const double gbc = sobolev_norm(g, bc);
    rep.g_beta_plus_c = gbc;
    rep.A_c = gbc > 0.0 ? std::sqrt(sum) / gbc : 1.0;
    rep.u_alpha_plus_c = sobolev_norm(state.u(), p.alpha + p.c);
    const double den = rep.g_beta + gbc;
    if (den > 0.0) rep.highnorm_ratio = *rep.u_alpha_plus_c / den;
  }
  auto u = state.u();
  return {std::move(u), rep, std::move(state)};
}

}  // namespace nmh
