#pragma once
// Parameter web and constant ledger of the Nash-Moser-Hormander iteration:
// admissibility of the exponents, the step exponent gamma, the smallness
// radius delta = 1/B, the K-constants, and the higher-regularity coefficients.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nmh/error.hpp"

namespace nmh {

struct IterationParams {
  double a0 = 0.0;
  double mu = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  std::optional<double> gamma;  // unset: choose_gamma picks the maximal value
  double c = 0.0;               // higher-regularity increment, 0 disables
  double A = 1.0;
  double A_c = 1.0;
  double Cstar = 1.0;
};

struct Violation {
  std::string name;  // the inequality that fails, e.g. "a1 + beta/2 < alpha"
  double lhs;
  double rhs;
};

/// Every violated admissibility inequality, by name with both sides evaluated.
inline std::vector<Violation> validate(const IterationParams& p) {
  std::vector<Violation> out;
  auto need_le = [&](const char* name, double l, double r) {
    if (!(l <= r)) out.push_back({name, l, r});
  };
  auto need_lt = [&](const char* name, double l, double r) {
    if (!(l < r)) out.push_back({name, l, r});
  };
  need_le("0 <= a0", 0.0, p.a0);
  need_le("a0 <= mu", p.a0, p.mu);
  need_le("mu <= a1", p.mu, p.a1);
  need_lt("a1 + beta/2 < alpha", p.a1 + p.beta / 2.0, p.alpha);
  need_lt("alpha < a1 + beta", p.alpha, p.a1 + p.beta);
  need_lt("2*alpha < a1 + a2", 2.0 * p.alpha, p.a1 + p.a2);
  if (p.gamma) {
    need_lt("0 < gamma", 0.0, *p.gamma);
    need_le("2*a1 + beta + gamma <= 2*alpha", 2.0 * p.a1 + p.beta + *p.gamma, 2.0 * p.alpha);
  }
  need_le("0 <= c", 0.0, p.c);
  need_lt("0 < Cstar", 0.0, p.Cstar);
  return out;
}

/// The maximal admissible gamma = 2*alpha - 2*a1 - beta.
inline double choose_gamma(const IterationParams& p) {
  const double g = 2.0 * p.alpha - 2.0 * p.a1 - p.beta;
  if (!(g > 0.0))
    throw NoAdmissibleGamma("no gamma > 0 with 2*a1 + beta + gamma <= 2*alpha (2*alpha - 2*a1 - beta = " +
                            std::to_string(g) + ")");
  return g;
}

/// gamma as configured, or the maximal admissible value.
inline double effective_gamma(const IterationParams& p) { return p.gamma ? *p.gamma : choose_gamma(p); }

/// Piecewise-linear table x -> f(x); a single knot is a constant function.
class PiecewiseLinear {
 public:
  PiecewiseLinear(double constant = 1.0) : knots_{{0.0, constant}}, constant_(true) {}  // NOLINT
  explicit PiecewiseLinear(std::vector<std::pair<double, double>> knots) : knots_(std::move(knots)) {
    if (knots_.empty()) throw InvalidArgument("piecewise-linear table needs at least one knot");
    std::sort(knots_.begin(), knots_.end());
    constant_ = knots_.size() == 1;
  }

  double operator()(double x) const {
    if (constant_) return knots_.front().second;
    constexpr double slack = 1e-9;
    if (x < knots_.front().first - slack || x > knots_.back().first + slack)
      throw InvalidArgument("constant table evaluated outside its domain at " + std::to_string(x));
    if (x <= knots_.front().first) return knots_.front().second;
    if (x >= knots_.back().first) return knots_.back().second;
    auto hi = std::upper_bound(knots_.begin(), knots_.end(), x, [](double v, const auto& k) { return v < k.first; });
    auto lo = std::prev(hi);
    const double t = (x - lo->first) / (hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
  }

  bool positive() const {
    return std::all_of(knots_.begin(), knots_.end(), [](const auto& k) { return k.second > 0.0; });
  }
  bool nondecreasing() const {
    for (std::size_t i = 1; i < knots_.size(); ++i)
      if (knots_[i].second < knots_[i - 1].second) return false;
    return true;
  }
  bool is_constant() const { return constant_; }
  const std::vector<std::pair<double, double>>& knots() const { return knots_; }

 private:
  std::vector<std::pair<double, double>> knots_;
  bool constant_ = true;
};

/// The tame-estimate functions M_1..M_3 (on [0, a2+c-mu]) and L_4..L_6 (on [a1, a2+c]).
struct TameConstants {
  PiecewiseLinear M1, M2, M3;
  PiecewiseLinear L4, L5, L6;
  double delta1 = 1.0;

  double M123(double a) const { return M1(a) + M2(a) + M3(a); }
  double L456(double a) const { return L4(a) + L5(a) + L6(a); }
  double L45(double a) const { return L4(a) + L5(a); }

  /// Names of tables that are not positive and nondecreasing.
  std::vector<std::string> defects() const {
    std::vector<std::string> out;
    const std::pair<const char*, const PiecewiseLinear*> all[] = {{"M1", &M1}, {"M2", &M2}, {"M3", &M3},
                                                                  {"L4", &L4}, {"L5", &L5}, {"L6", &L6}};
    for (auto [name, f] : all)
      if (!f->positive() || !f->nondecreasing()) out.emplace_back(name);
    if (!(delta1 > 0.0)) out.emplace_back("delta1");
    return out;
  }
};

/// The generic constants C', C_{a,c}, C_c the proof leaves unspecified.
struct LedgerConstants {
  double Cprime = 1.0;
  PiecewiseLinear C_ac{1.0};  // a -> C_{a,c}
  double C_c = 1.0;
};

/// B and delta = 1/B for the smallness condition ||g||_beta <= delta.
struct SmallnessRadius {
  double B;
  double delta;
};

inline SmallnessRadius compute_delta(const IterationParams& p, const TameConstants& t, double Cprime = 1.0) {
  if (!(t.delta1 > 0.0)) throw InvalidArgument("compute_delta: delta1 must be > 0");
  if (!(Cprime > 0.0)) throw InvalidArgument("compute_delta: C' must be > 0");
  const double l = t.L456(p.a2);
  const double B = Cprime * l * std::max({1.0 / t.delta1, 1.0 + p.A, (1.0 + p.A) * l * t.M123(p.a2 - p.mu)});
  return {B, 1.0 / B};
}

struct KConstants {
  double K1, K2, K3, K4;
};

/// K1 = C* L456(a2); K2 = K3 = K4 = C* K1 (1 + A).
inline KConstants fix_K_constants(const IterationParams& p, const TameConstants& t) {
  const double K1 = p.Cstar * t.L456(p.a2);
  const double K = p.Cstar * K1 * (1.0 + p.A);
  return {K1, K, K, K};
}

/// Smallest positive integer N >= 2c/gamma, and lambda = c/N.
inline int highnorm_steps(const IterationParams& p) {
  if (!(p.c > 0.0)) throw InvalidArgument("higher regularity needs c > 0");
  const double r = 2.0 * p.c / effective_gamma(p);
  const double n = std::ceil(r - 1e-12 * std::max(1.0, r));
  return std::max(1, static_cast<int>(n));
}

struct HighNormCoeffs {
  double A;  // coefficient of psi_k in the ||h_k||_a bound
  double B;  // coefficient of eta_k in the ||h_k||_a bound
  double E;  // coefficient of psi_k in the ||h_k||_{a1} bound
  double F;  // coefficient of eta_k in the ||h_k||_{a1} bound
};

enum class CoeffMode { Recursive, ClosedForm };

/// Aggregates X, Z of the closed form.
struct HighNormAggregates {
  double X;
  double Z;
};

inline HighNormAggregates highnorm_aggregates(const IterationParams& p, const TameConstants& t,
                                              const LedgerConstants& lc) {
  const double top = p.a2 + p.c;
  const double Mt12 = t.M1(top - p.mu) + t.M2(top - p.mu);
  const double Mt3 = t.M3(top - p.mu);
  const double X = t.L6(top) * Mt12 + t.L456(p.a2) * Mt3;
  const double Z = t.L456(p.a1) * lc.C_c * t.M123(0.0) + t.L45(top) * lc.C_ac(top) * Mt12;
  return {X, Z};
}

/// Higher-regularity coefficients (A_n(a), B_n(a), E_n, F_n), 1 <= n <= N.
inline HighNormCoeffs highnorm_coeffs(const IterationParams& p, const TameConstants& t, int n, double a,
                                      CoeffMode mode, const LedgerConstants& lc = {}) {
  const int N = highnorm_steps(p);
  if (n < 1 || n > N)
    throw InvalidArgument("highnorm_coeffs: n must lie in [1, " + std::to_string(N) + "], got " + std::to_string(n));
  const double top = p.a2 + p.c;
  const double La = t.L45(a) * lc.C_ac(a);
  const double L1 = t.L456(p.a1) * lc.C_c;

  if (mode == CoeffMode::ClosedForm) {
    if (n == 1) return {0.0, La, 0.0, L1};
    const auto [X, Z] = highnorm_aggregates(p, t, lc);
    double s_n2 = 0.0, s_n1 = 0.0, zj = 1.0;
    for (int j = 0; j <= n - 1; ++j) {
      if (j <= n - 2) s_n2 += zj;
      s_n1 += zj;
      zj *= Z;
    }
    return {La * X * s_n2, La * s_n1, L1 * X * s_n2, L1 * s_n1};
  }

  const double Lt = t.L45(top) * lc.C_ac(top);
  const double Mt12 = t.M1(top - p.mu) + t.M2(top - p.mu);
  const double Mt3 = t.M3(top - p.mu);
  const double Lt6 = t.L6(top);
  const double M0 = t.M123(0.0);
  const double L2 = t.L456(p.a2);
  // State at step n: coefficients at a, at a2 + c (the tilde values), and E, F.
  double An = 0.0, Bn = La, At = 0.0, Bt = Lt, En = 0.0, Fn = L1;
  for (int k = 1; k < n; ++k) {
    const double psi_part = At * Mt12 + Lt6 * Mt12 + L2 * Mt3 + En * M0;
    const double eta_part = 1.0 + Bt * Mt12 + Fn * M0;
    An = La * psi_part;
    Bn = La * eta_part;
    const double At_next = Lt * psi_part;
    const double Bt_next = Lt * eta_part;
    En = L1 * psi_part;
    Fn = L1 * eta_part;
    At = At_next;
    Bt = Bt_next;
  }
  return {An, Bn, En, Fn};
}

/// Everything the ledger derives from (params, tame constants).
struct DerivedConstants {
  double gamma;
  KConstants K;
  double B, delta;
  // Higher-regularity part; zero when c = 0.
  int N = 0;
  double lambda = 0.0;
  double z = 0.0, G1 = 0.0, G2 = 0.0, X = 0.0, Z = 0.0;
};

/// G1 = L~6 + L~45 X sum_{j<=N-2} z^j,  G2 = L~45 sum_{j<=N-1} z^j.
inline std::pair<double, double> highnorm_G(const IterationParams& p, const TameConstants& t, double& z_out) {
  const int N = highnorm_steps(p);
  const double top = p.a2 + p.c;
  const double Mt12 = t.M1(top - p.mu) + t.M2(top - p.mu);
  const double X = t.L6(top) * Mt12 + t.L456(p.a2) * t.M3(top - p.mu);
  const double z = t.L456(p.a1) * t.M123(0.0) + t.L45(top) * Mt12;
  double s2 = 0.0, s1 = 0.0, zj = 1.0;
  for (int j = 0; j <= N - 1; ++j) {
    if (j <= N - 2) s2 += zj;
    s1 += zj;
    zj *= z;
  }
  z_out = z;
  return {t.L6(top) + t.L45(top) * X * s2, t.L45(top) * s1};
}

inline DerivedConstants derive_constants(const IterationParams& p, const TameConstants& t,
                                         const LedgerConstants& lc = {}) {
  DerivedConstants d{};
  d.gamma = effective_gamma(p);
  d.K = fix_K_constants(p, t);
  const auto r = compute_delta(p, t, lc.Cprime);
  d.B = r.B;
  d.delta = r.delta;
  if (p.c > 0.0) {
    d.N = highnorm_steps(p);
    d.lambda = p.c / d.N;
    const auto [G1, G2] = highnorm_G(p, t, d.z);
    d.G1 = G1;
    d.G2 = G2;
    const auto agg = highnorm_aggregates(p, t, lc);
    d.X = agg.X;
    d.Z = agg.Z;
  }
  return d;
}

/// C_c { G1 (1+A) ||g||_beta + G2 (1+A_c) ||g||_{beta+c} }, a bound on ||u||_{alpha+c}.
inline double highnorm_bound(const IterationParams& p, const TameConstants& t, double g_beta, double g_beta_c,
                             const LedgerConstants& lc = {}) {
  double z = 0.0;
  const auto [G1, G2] = highnorm_G(p, t, z);
  return lc.C_c * (G1 * (1.0 + p.A) * g_beta + G2 * (1.0 + p.A_c) * g_beta_c);
}

}  // namespace nmh
