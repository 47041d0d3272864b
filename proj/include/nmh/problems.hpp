#pragma once
// The pluggable nonlinear map Phi with its derivatives and right inverse Psi,
// and the concrete problem instances.

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "nmh/hypotheses.hpp"
#include "nmh/linear_solve.hpp"
#include "nmh/scale.hpp"

namespace nmh {

struct ProblemMetadata {
  std::string name;
  double mu = 0.0;      // shift in the Phi'' estimate
  double a0 = 0.0;      // low exponent in the Phi'' estimate
  double loss = 0.0;    // beta - alpha, derivatives lost by Psi
  double delta1 = 1.0;  // radius of the ||v||_{a1} ball where Psi is used
  IterationParams suggested;
};

/// Phi : E -> F on a fixed lattice with Phi'(v) Psi(v) = identity.
class TameProblem {
 public:
  virtual ~TameProblem() = default;

  virtual const ProblemMetadata& metadata() const = 0;
  virtual const Lattice& lattice() const = 0;

  virtual SpectralFunction phi(const SpectralFunction& u) const = 0;
  /// Phi'(u) h.
  virtual SpectralFunction dphi(const SpectralFunction& u, const SpectralFunction& h) const = 0;
  /// Phi''(u)[h, w].
  virtual SpectralFunction d2phi(const SpectralFunction& u, const SpectralFunction& h,
                                 const SpectralFunction& w) const = 0;
  /// Psi(v) g, a solution h of Phi'(v) h = g.
  virtual SpectralFunction psi(const SpectralFunction& v, const SpectralFunction& g) const = 0;

  /// Phi(u + h) - Phi(u) - Phi'(u) h.  Instances override this when they can
  /// evaluate it without cancellation.
  virtual SpectralFunction taylor_remainder(const SpectralFunction& u, const SpectralFunction& h) const {
    auto r = phi(u + h);
    r -= phi(u);
    r -= dphi(u, h);
    return r;
  }
};

/// Exponents (a0, mu, a1, alpha, beta, a2) = (0, mu, 1, 3 + loss, 3 + 2 loss, 6 + 2 loss):
/// admissible for any loss >= 0 and gamma = 1.
inline IterationParams suggested_params(double mu, double loss) {
  IterationParams p;
  p.a0 = 0.0;
  p.mu = mu;
  p.a1 = std::max(1.0, mu);
  p.alpha = 2.0 * p.a1 + loss + 1.0;
  p.beta = p.alpha + loss;
  p.a2 = 2.0 * p.alpha - p.a1 + 1.0;
  return p;
}

/// Phi(u) = Lambda u + q u^2 with Lambda a Fourier multiplier and q in {0, 1}.
class DiagonalQuadraticProblem : public TameProblem {
 public:
  const ProblemMetadata& metadata() const override { return meta_; }
  const Lattice& lattice() const override { return lattice_; }

  /// Lambda_k on the lattice, indexed like the coefficients.
  const std::vector<Complex>& symbol() const { return symbol_; }
  const SolveOptions& solve_options() const { return solve_; }
  void set_solve_options(const SolveOptions& o) { solve_ = o; }
  const SolveStats& last_solve() const { return last_; }

  SpectralFunction phi(const SpectralFunction& u) const override {
    auto out = apply_symbol(u);
    if (quadratic_) out += pointwise_product(u, u);
    return out;
  }

  SpectralFunction dphi(const SpectralFunction& u, const SpectralFunction& h) const override {
    auto out = apply_symbol(h);
    if (quadratic_) out.accumulate(2.0, pointwise_product(u, h));
    return out;
  }

  SpectralFunction d2phi(const SpectralFunction&, const SpectralFunction& h,
                         const SpectralFunction& w) const override {
    if (!quadratic_) return SpectralFunction(lattice_, true);
    return 2.0 * pointwise_product(h, w);
  }

  SpectralFunction taylor_remainder(const SpectralFunction&, const SpectralFunction& h) const override {
    if (!quadratic_) return SpectralFunction(lattice_, true);
    return pointwise_product(h, h);
  }

  SpectralFunction psi(const SpectralFunction& v, const SpectralFunction& g) const override {
    check(g);
    if (!quadratic_) return apply_inverse(g);
    const bool real = g.real_valued() && v.real_valued() && real_symbol_;
    LinearMap op = [&](const SpectralFunction& h) { return dphi(v, h); };
    LinearMap pre = [&](const SpectralFunction& h) { return apply_inverse(h); };
    auto h = solve_linear(op, pre, g, solve_, &last_);
    h.set_real_valued(real);
    return h;
  }

  SpectralFunction apply_symbol(const SpectralFunction& u) const {
    check(u);
    SpectralFunction out(lattice_, u.real_valued() && real_symbol_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = symbol_[i] * u[i];
    return out;
  }

  SpectralFunction apply_inverse(const SpectralFunction& g) const {
    check(g);
    SpectralFunction out(lattice_, g.real_valued() && real_symbol_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = g[i] / symbol_[i];
    return out;
  }

 protected:
  DiagonalQuadraticProblem(Lattice lattice, std::vector<Complex> symbol, bool quadratic, bool real_symbol)
      : lattice_(lattice), symbol_(std::move(symbol)), quadratic_(quadratic), real_symbol_(real_symbol) {
    for (std::size_t i = 0; i < symbol_.size(); ++i)
      if (symbol_[i] == Complex{})
        throw InvalidArgument("symbol vanishes at lattice point index " + std::to_string(i));
  }

  void check(const SpectralFunction& f) const {
    if (!(f.lattice() == lattice_)) throw DimensionMismatch("argument lives on a different lattice than the problem");
  }

  Lattice lattice_;
  std::vector<Complex> symbol_;
  bool quadratic_;
  bool real_symbol_;  // symbol maps real functions to real functions
  ProblemMetadata meta_;
  SolveOptions solve_;
  mutable SolveStats last_;
};

/// Phi(u) = L u with (L u)^_k = lambda_k û_k; Psi(v) g = L^{-1} g for every v.
class LinearMultiplierProblem : public DiagonalQuadraticProblem {
 public:
  using Symbol = std::function<Complex(const LatticePoint&)>;

  LinearMultiplierProblem(int d, int nmax, const Symbol& lambda, std::string name = "linear")
      : DiagonalQuadraticProblem(Lattice(d, nmax), tabulate(Lattice(d, nmax), lambda), false, true) {
    meta_.name = std::move(name);
    meta_.mu = 0.0;
    meta_.a0 = 0.0;
    meta_.loss = std::max(0.0, fitted_order());
    meta_.delta1 = std::numeric_limits<double>::infinity();
    meta_.suggested = suggested_params(0.0, meta_.loss);
    for (std::size_t i = 0; i < symbol_.size(); ++i) {
      const auto k = lattice_.point(i);
      if (std::abs(lambda({-k[0], -k[1]}) - std::conj(symbol_[i])) > 1e-14 * std::abs(symbol_[i])) real_symbol_ = false;
    }
  }

  /// sup_{k != 0} log(1/|lambda_k|) / log<k>: derivatives lost by L^{-1} (negative: gained).
  double fitted_order() const {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < symbol_.size(); ++i) {
      const double ksq = lattice_.norm_sq(i);
      if (ksq == 0.0) continue;
      best = std::max(best, -std::log(std::abs(symbol_[i])) / (0.5 * std::log1p(ksq)));
    }
    return std::isfinite(best) ? best : 0.0;
  }

 private:
  static std::vector<Complex> tabulate(const Lattice& lat, const Symbol& lambda) {
    std::vector<Complex> s(lat.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = lambda(lat.point(i));
    return s;
  }
};

/// lambda_k = <k>^order.
inline std::unique_ptr<LinearMultiplierProblem> linear_multiplier_problem(int d, int nmax, double order) {
  return std::make_unique<LinearMultiplierProblem>(
      d, nmax,
      [order](const LatticePoint& k) {
        return Complex(std::pow(1.0 + double(k[0]) * k[0] + double(k[1]) * k[1], 0.5 * order));
      },
      "linear");
}

/// Phi(u) = u + u^2.
class QuadraticProblem : public DiagonalQuadraticProblem {
 public:
  QuadraticProblem(int d, int nmax, double delta1 = 0.25)
      : DiagonalQuadraticProblem(Lattice(d, nmax), std::vector<Complex>(Lattice(d, nmax).size(), 1.0), true, true) {
    meta_.name = "quadratic";
    meta_.mu = 0.0;
    meta_.a0 = 0.0;
    meta_.loss = 0.0;
    meta_.delta1 = delta1;
    meta_.suggested = suggested_params(0.0, 0.0);
  }
};

inline std::unique_ptr<QuadraticProblem> quadratic_problem(int d, int nmax) {
  return std::make_unique<QuadraticProblem>(d, nmax);
}

/// Golden mean (sqrt 5 - 1) / 2.
inline const double kGoldenMean = (std::sqrt(5.0) - 1.0) / 2.0;

struct SmallDivisorOptions {
  double omega2 = kGoldenMean;  // omega = (1, omega2)
  double tau = 1.0;             // Diophantine exponent checked on the lattice
  double gamma0 = 0.5;          // Diophantine constant: |omega.k| >= gamma0 |k|^{-tau}
  double d0 = 1.0;              // symbol at k = 0
  double delta1 = 0.05;
  double max_condition = 1e12;
};

/// Phi(u) = D u + u^2 on T^2 with D = omega . d/dphi (i omega.k) and D = d0 at k = 0.
class SmallDivisorProblem : public DiagonalQuadraticProblem {
 public:
  SmallDivisorProblem(int nmax, const SmallDivisorOptions& o = {})
      : DiagonalQuadraticProblem(Lattice(2, nmax), tabulate(Lattice(2, nmax), o), true, o.d0 == std::real(o.d0)),
        opts_(o) {
    divisor_floor_ = std::numeric_limits<double>::infinity();
    double smin = std::numeric_limits<double>::infinity(), smax = 0.0;
    for (std::size_t i = 0; i < symbol_.size(); ++i) {
      smin = std::min(smin, std::abs(symbol_[i]));
      smax = std::max(smax, std::abs(symbol_[i]));
      const double ksq = lattice_.norm_sq(i);
      if (ksq == 0.0) continue;
      const double kabs = std::sqrt(ksq);
      divisor_floor_ = std::min(divisor_floor_, std::abs(symbol_[i]) * std::pow(kabs, o.tau));
    }
    if (divisor_floor_ < o.gamma0)
      throw InvalidArgument("omega fails |omega.k| >= gamma0 |k|^-tau on the lattice (floor " +
                            std::to_string(divisor_floor_) + ")");
    condition_ = smax / smin;
    if (condition_ > o.max_condition)
      throw SolverFailure("small-divisor symbol condition number " + std::to_string(condition_) + " exceeds limit");
    meta_.name = "small_divisor";
    meta_.mu = 0.0;
    meta_.a0 = 0.0;
    meta_.loss = o.tau;
    meta_.delta1 = o.delta1;
    meta_.suggested = suggested_params(0.0, o.tau);
  }

  /// min over 0 < |k|_inf <= nmax of |omega.k| |k|^tau.
  double divisor_floor() const { return divisor_floor_; }
  /// max |D_k| / min |D_k| over the lattice.
  double condition_number() const { return condition_; }
  const SmallDivisorOptions& options() const { return opts_; }

  /// Least-squares slope of log max_{0<|k|<=K} 1/|omega.k| against log K over K = 2 .. nmax.
  double fitted_loss() const {
    std::vector<double> x, y;
    for (int K = 2; K <= lattice_.nmax(); ++K) {
      double worst = 0.0;
      for (std::size_t i = 0; i < symbol_.size(); ++i) {
        const auto k = lattice_.point(i);
        if ((k[0] == 0 && k[1] == 0) || std::max(std::abs(k[0]), std::abs(k[1])) > K) continue;
        worst = std::max(worst, 1.0 / std::abs(symbol_[i]));
      }
      x.push_back(std::log(double(K)));
      y.push_back(std::log(worst));
    }
    if (x.size() < 2) return 0.0;
    const auto n = double(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= n, my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
    return sxy / sxx;
  }

 private:
  static std::vector<Complex> tabulate(const Lattice& lat, const SmallDivisorOptions& o) {
    std::vector<Complex> s(lat.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto k = lat.point(i);
      s[i] = (k[0] == 0 && k[1] == 0) ? Complex(o.d0) : Complex(0.0, k[0] + o.omega2 * k[1]);
    }
    return s;
  }

  SmallDivisorOptions opts_;
  double divisor_floor_;
  double condition_;
};

inline std::unique_ptr<SmallDivisorProblem> small_divisor_problem(int nmax, const SmallDivisorOptions& o = {}) {
  return std::make_unique<SmallDivisorProblem>(nmax, o);
}

struct CharacteristicsOptions {
  double omega2 = kGoldenMean;
  double epsilon = 0.1;  // amplitude of the vector field
  double x0 = 0.3;       // base point of the characteristic
  double d0 = 1.0;
  double delta1 = 0.05;
};

/// Quasi-periodic characteristic x(t) = x0 + u(omega t) of x' = V(omega t, x):
///   Phi(u) = D u - V(phi, x0 + u(phi)),  V(phi, y) = eps (1 + cos phi1 + cos phi2) sin y.
/// The composition is evaluated on a (4 nmax)^2 physical grid and truncated back.
class CharacteristicsProblem : public TameProblem {
 public:
  CharacteristicsProblem(int nmax, const CharacteristicsOptions& o = {})
      : lattice_(2, nmax), grid_(std::max(4 * nmax, 8)), opts_(o), divisor_(nmax, SmallDivisorOptions{o.omega2, 1.0, 0.0, o.d0, o.delta1}) {
    meta_.name = "characteristics";
    meta_.mu = 0.0;
    meta_.a0 = 0.0;
    meta_.loss = 1.0;
    meta_.delta1 = o.delta1;
    meta_.suggested = suggested_params(0.0, 1.0);
  }

  const ProblemMetadata& metadata() const override { return meta_; }
  const Lattice& lattice() const override { return lattice_; }

  SpectralFunction phi(const SpectralFunction& u) const override {
    auto out = divisor_.apply_symbol(u);
    out -= compose(u, [this](double p1, double p2, Complex y) { return field(p1, p2, y, 0); });
    return out;
  }

  SpectralFunction dphi(const SpectralFunction& u, const SpectralFunction& h) const override {
    auto out = divisor_.apply_symbol(h);
    out -= compose_times(u, h, nullptr, 1);
    return out;
  }

  SpectralFunction d2phi(const SpectralFunction& u, const SpectralFunction& h,
                         const SpectralFunction& w) const override {
    auto out = compose_times(u, h, &w, 2);
    out *= -1.0;
    return out;
  }

  SpectralFunction psi(const SpectralFunction& v, const SpectralFunction& g) const override {
    LinearMap op = [&](const SpectralFunction& h) { return dphi(v, h); };
    LinearMap pre = [&](const SpectralFunction& h) { return divisor_.apply_inverse(h); };
    SolveOptions so;
    so.dense_limit = 0;
    auto h = solve_linear(op, pre, g, so);
    h.set_real_valued(g.real_valued() && v.real_valued());
    return h;
  }

 private:
  /// d^order/dy^order of V(phi, y).
  Complex field(double p1, double p2, Complex y, int order) const {
    const double amp = opts_.epsilon * (1.0 + std::cos(p1) + std::cos(p2));
    switch (order % 4) {
      case 0: return amp * std::sin(y);
      case 1: return amp * std::cos(y);
      case 2: return -amp * std::sin(y);
      default: return -amp * std::cos(y);
    }
  }

  std::vector<Complex> to_grid(const SpectralFunction& u) const {
    const int M = grid_;
    std::vector<Complex> g(static_cast<std::size_t>(M) * M);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const auto k = lattice_.point(i);
      g[static_cast<std::size_t>((k[0] + M) % M) * M + static_cast<std::size_t>((k[1] + M) % M)] = u[i];
    }
    transform(g, FFTW_BACKWARD);
    return g;
  }

  SpectralFunction from_grid(std::vector<Complex> g, bool real) const {
    const int M = grid_;
    transform(g, FFTW_FORWARD);
    SpectralFunction out(lattice_, real);
    const double scale = 1.0 / (double(M) * M);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto k = lattice_.point(i);
      out[i] = g[static_cast<std::size_t>((k[0] + M) % M) * M + static_cast<std::size_t>((k[1] + M) % M)] * scale;
    }
    return out;
  }

  void transform(std::vector<Complex>& g, int sign) const {
    auto* p = reinterpret_cast<fftw_complex*>(g.data());
    fftw_plan plan;
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      plan = fftw_plan_dft_2d(grid_, grid_, p, p, sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }

  template <class F>
  SpectralFunction compose(const SpectralFunction& u, F&& f) const {
    auto g = to_grid(u);
    const double step = 2.0 * std::numbers::pi / grid_;
    for (int i = 0; i < grid_; ++i)
      for (int j = 0; j < grid_; ++j) {
        auto& val = g[static_cast<std::size_t>(i) * grid_ + j];
        val = f(i * step, j * step, opts_.x0 + val);
      }
    return from_grid(std::move(g), u.real_valued());
  }

  /// trunc( d^order V(phi, x0 + u) * h [* w] ).
  SpectralFunction compose_times(const SpectralFunction& u, const SpectralFunction& h, const SpectralFunction* w,
                                 int order) const {
    auto gu = to_grid(u);
    auto gh = to_grid(h);
    std::vector<Complex> gw = w ? to_grid(*w) : std::vector<Complex>{};
    const double step = 2.0 * std::numbers::pi / grid_;
    for (int i = 0; i < grid_; ++i)
      for (int j = 0; j < grid_; ++j) {
        const auto idx = static_cast<std::size_t>(i) * grid_ + j;
        Complex val = field(i * step, j * step, opts_.x0 + gu[idx], order) * gh[idx];
        if (w) val *= gw[idx];
        gh[idx] = val;
      }
    const bool real = u.real_valued() && h.real_valued() && (!w || w->real_valued());
    return from_grid(std::move(gh), real);
  }

  Lattice lattice_;
  int grid_;
  CharacteristicsOptions opts_;
  SmallDivisorProblem divisor_;  // supplies D and D^{-1}
  ProblemMetadata meta_;
};

inline std::unique_ptr<CharacteristicsProblem> characteristics_problem(int nmax,
                                                                       const CharacteristicsOptions& o = {}) {
  return std::make_unique<CharacteristicsProblem>(nmax, o);
}

}  // namespace nmh
