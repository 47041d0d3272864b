#pragma once
// Fourier-multiplier smoothing families S_j, their dyadic blocks R_j, and
// numerical measurement of the constants in the smoothing axioms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "nmh/scale.hpp"

namespace nmh {

enum class CutoffShape { Sharp, Smooth };

inline std::string to_string(CutoffShape s) { return s == CutoffShape::Sharp ? "sharp" : "smooth"; }

/// Nonincreasing profile with psi = 1 on [0,1] and psi = 0 on [2, inf).
class CutoffProfile {
 public:
  using Fn = std::function<double(double)>;

  explicit CutoffProfile(Fn fn, std::string name = "custom") : fn_(std::move(fn)), name_(std::move(name)) {
    double prev = 1.0;
    for (int i = 0; i <= 400; ++i) {
      const double t = 0.005 * i;
      const double p = fn_(t);
      if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("cutoff profile leaves [0,1]");
      if (p > prev + 1e-14) throw InvalidArgument("cutoff profile is not nonincreasing");
      prev = p;
    }
    if (fn_(1.0) != 1.0 || fn_(2.0) != 0.0) throw InvalidArgument("cutoff profile must be 1 on [0,1] and 0 on [2,inf)");
  }

  /// C^infinity transition f(2-t) / (f(2-t) + f(t-1)) with f(s) = exp(-1/s).
  static CutoffProfile standard() {
    return CutoffProfile(
        [](double t) {
          if (t <= 1.0) return 1.0;
          if (t >= 2.0) return 0.0;
          const double hi = std::exp(-1.0 / (2.0 - t));
          const double lo = std::exp(-1.0 / (t - 1.0));
          return hi / (hi + lo);
        },
        "standard");
  }

  double operator()(double t) const { return fn_(t); }
  const std::string& name() const { return name_; }

 private:
  Fn fn_;
  std::string name_;
};

/// Growth law of the thresholds theta_j.
class Velocity {
 public:
  enum class Kind { Dyadic, Geometric, Polynomial, DoublyExponential };

  static Velocity dyadic() { return Velocity(Kind::Dyadic, 2.0, 0.0); }
  /// theta_j = c^j.
  static Velocity geometric(double c) {
    if (!(c > 1.0)) throw InvalidArgument("geometric velocity needs c > 1");
    return Velocity(Kind::Geometric, c, 0.0);
  }
  /// theta_j = (a + j)^eps.
  static Velocity polynomial(double a, double eps) {
    if (!(a > 0.0) || !(eps > 0.0)) throw InvalidArgument("polynomial velocity needs a > 0 and eps > 0");
    return Velocity(Kind::Polynomial, a, eps);
  }
  /// theta_j = theta0^(chi^j).
  static Velocity doubly_exponential(double theta0, double chi) {
    if (!(theta0 > 1.0) || !(chi > 1.0)) throw InvalidArgument("doubly exponential velocity needs theta0 > 1, chi > 1");
    return Velocity(Kind::DoublyExponential, theta0, chi);
  }

  Kind kind() const { return kind_; }
  double p1() const { return p1_; }
  double p2() const { return p2_; }

  double theta(std::int64_t j) const {
    const auto x = static_cast<double>(j);
    switch (kind_) {
      case Kind::Dyadic: return std::ldexp(1.0, static_cast<int>(std::min<std::int64_t>(j, 4000)));
      case Kind::Geometric: return std::pow(p1_, x);
      case Kind::Polynomial: return std::pow(p1_ + x, p2_);
      case Kind::DoublyExponential: return std::pow(p1_, std::pow(p2_, x));
    }
    return 0.0;
  }

  /// theta_j^2, exact for dyadic and for polynomial with eps = 1/2.
  double theta_sq(std::int64_t j) const {
    const auto x = static_cast<double>(j);
    switch (kind_) {
      case Kind::Dyadic: return std::ldexp(1.0, static_cast<int>(std::min<std::int64_t>(2 * j, 4000)));
      case Kind::Geometric: return std::pow(p1_, 2.0 * x);
      case Kind::Polynomial: return std::pow(p1_ + x, 2.0 * p2_);
      case Kind::DoublyExponential: return std::pow(p1_, 2.0 * std::pow(p2_, x));
    }
    return 0.0;
  }

  /// Smallest j >= 0 with theta_j >= t.
  std::int64_t first_index_at_least(double t) const {
    if (theta(0) >= t) return 0;
    double guess = 0.0;
    switch (kind_) {
      case Kind::Dyadic:
      case Kind::Geometric: guess = std::log(t) / std::log(p1_); break;
      case Kind::Polynomial: guess = std::pow(t, 1.0 / p2_) - p1_; break;
      case Kind::DoublyExponential: guess = std::log(std::log(t) / std::log(p1_)) / std::log(p2_); break;
    }
    auto j = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(guess)) - 1);
    while (j > 0 && theta(j - 1) >= t) --j;
    while (theta(j) < t) ++j;
    return j;
  }

  std::string name() const {
    auto num = [](double v) {
      std::string s = std::to_string(v);
      s.erase(s.find_last_not_of('0') + 1);
      if (!s.empty() && s.back() == '.') s.pop_back();
      return s;
    };
    switch (kind_) {
      case Kind::Dyadic: return "dyadic";
      case Kind::Geometric: return "geometric(" + num(p1_) + ")";
      case Kind::Polynomial: return "polynomial(" + num(p1_) + "," + num(p2_) + ")";
      case Kind::DoublyExponential: return "doubly_exponential(" + num(p1_) + "," + num(p2_) + ")";
    }
    return "?";
  }

 private:
  Velocity(Kind k, double p1, double p2) : kind_(k), p1_(p1), p2_(p2) {}
  Kind kind_;
  double p1_;
  double p2_;
};

class SmoothingFamily {
 public:
  SmoothingFamily(CutoffShape shape, Velocity velocity, CutoffProfile profile = CutoffProfile::standard())
      : shape_(shape), velocity_(velocity), profile_(std::move(profile)) {}

  static SmoothingFamily sharp_dyadic() { return {CutoffShape::Sharp, Velocity::dyadic()}; }

  CutoffShape shape() const { return shape_; }
  const Velocity& velocity() const { return velocity_; }
  const CutoffProfile& profile() const { return profile_; }
  std::string name() const { return to_string(shape_) + "/" + velocity_.name(); }

  double theta(std::int64_t j) const { return velocity_.theta(j); }

  /// Symbol of S_j at frequency |k|^2 = ksq.
  double s_symbol(std::int64_t j, double ksq) const {
    if (shape_ == CutoffShape::Sharp) return ksq <= velocity_.theta_sq(j) ? 1.0 : 0.0;
    return profile_(std::sqrt(ksq) / velocity_.theta(j));
  }

  /// Symbol of R_0 = S_1 and R_j = S_{j+1} - S_j.
  double r_symbol(std::int64_t j, double ksq) const {
    if (j == 0) return s_symbol(1, ksq);
    return s_symbol(j + 1, ksq) - s_symbol(j, ksq);
  }

  SpectralFunction apply_S(std::int64_t j, const SpectralFunction& u) const {
    check_index(j);
    return u.multiplied([&](double ksq) { return s_symbol(j, ksq); });
  }

  SpectralFunction apply_R(std::int64_t j, const SpectralFunction& u) const {
    check_index(j);
    return u.multiplied([&](double ksq) { return r_symbol(j, ksq); });
  }

  /// (I - S_j) u.
  SpectralFunction apply_S_complement(std::int64_t j, const SpectralFunction& u) const {
    check_index(j);
    return u.multiplied([&](double ksq) { return 1.0 - s_symbol(j, ksq); });
  }

  /// sum_j r_j(k)^2 over all blocks touching frequency |k|.
  double block_energy(double ksq) const {
    const double r0 = r_symbol(0, ksq);
    double total = r0 * r0;
    if (ksq == 0.0) return total;
    const double kappa = std::sqrt(ksq);
    // r_j can be nonzero for j >= 1 only if theta_j < |k| and theta_{j+1} > |k|/2.
    const auto lo = std::max<std::int64_t>(1, velocity_.first_index_at_least(0.5 * kappa) - 2);
    const auto hi = velocity_.first_index_at_least(kappa) + 1;
    double prev = s_symbol(lo, ksq);
    for (auto j = lo; j <= hi; ++j) {
      const double next = s_symbol(j + 1, ksq);
      const double r = next - prev;
      total += r * r;
      prev = next;
    }
    return total;
  }

  /// Largest j with theta_{j+1} <= nmax, so no cutoff straddles the lattice edge.
  std::int64_t scan_limit(int nmax) const {
    const auto first = velocity_.first_index_at_least(std::nextafter(static_cast<double>(nmax), INFINITY));
    return std::max<std::int64_t>(0, first - 2);
  }

 private:
  static void check_index(std::int64_t j) {
    if (j < 0) throw InvalidArgument("smoothing index must be >= 0");
  }

  CutoffShape shape_;
  Velocity velocity_;
  CutoffProfile profile_;
};

/// Test functions for the axiom verifiers: explicit functions plus, optionally,
/// every single Fourier mode of a lattice (kept implicit to avoid materializing them).
struct Testset {
  std::vector<SpectralFunction> functions;
  std::optional<Lattice> single_modes;

  bool empty() const { return functions.empty() && !single_modes; }
  int max_nmax() const {
    int n = single_modes ? single_modes->nmax() : 0;
    for (const auto& f : functions) n = std::max(n, f.nmax());
    return n;
  }
};

/// Random complex coefficients with |û_k| ~ <k>^{-decay}, conjugate-symmetric when real.
inline SpectralFunction random_function(const Lattice& lat, std::mt19937_64& rng, double decay, bool real = true) {
  std::normal_distribution<double> n01;
  SpectralFunction f(lat, real);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double w = std::pow(1.0 + lat.norm_sq(i), -0.5 * decay);
    f[i] = Complex(n01(rng), n01(rng)) * w;
  }
  if (real) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      const auto k = lat.point(i);
      const LatticePoint mk{-k[0], -k[1]};
      const auto im = lat.index(mk);
      if (im == i) f[i] = f[i].real();
      else if (im < i) f[i] = std::conj(f[im]);
    }
  }
  return f;
}

inline Testset random_testset(const Lattice& lat, int count, std::uint64_t seed, double decay = 1.0) {
  std::mt19937_64 rng(seed);
  Testset t;
  t.functions.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) t.functions.push_back(random_function(lat, rng, decay));
  return t;
}

struct AxiomConstants {
  double C_S1 = 0.0;
  double C_S2 = 0.0;
  double C_S3 = 0.0;
  double C_S4 = 0.0;
  std::int64_t jmax = 0;
};

/// One CSV row of a smoothing benchmark.
struct BenchmarkRow {
  std::string family;
  std::string velocity;
  std::string axiom;
  double a = 0.0;
  double b = 0.0;
  std::int64_t j = 0;
  double ratio = 0.0;
};

struct AxiomScan {
  AxiomConstants constants;
  std::vector<BenchmarkRow> rows;  // per-j supremum over the testset
};

namespace detail {

struct SpectrumEntry {
  double ksq;
  double amp2;
};

/// Nonzero |û_k|^2 grouped by |k|^2; multiplier norms only see |k|.
inline std::vector<SpectrumEntry> radial_spectrum(const SpectralFunction& u) {
  std::unordered_map<double, double> acc;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double m = std::norm(u[i]);
    if (m != 0.0) acc[u.lattice().norm_sq(i)] += m;
  }
  std::vector<SpectrumEntry> out;
  out.reserve(acc.size());
  for (auto [k, m] : acc) out.push_back({k, m});
  std::sort(out.begin(), out.end(), [](auto x, auto y) { return x.ksq < y.ksq; });
  return out;
}

inline std::vector<double> distinct_norms_sq(const Lattice& lat) {
  std::vector<double> v;
  v.reserve(lat.size());
  for (std::size_t i = 0; i < lat.size(); ++i) v.push_back(lat.norm_sq(i));
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

/// Tracks sup of num/den, skipping 0/0 and recording x/0 as +inf.
struct SupRatio {
  double value = 0.0;
  bool seen = false;
  void add(double num, double den) {
    if (den <= 0.0) {
      if (num > 0.0) value = std::numeric_limits<double>::infinity(), seen = true;
      return;
    }
    value = std::max(value, num / den);
    seen = true;
  }
};

}  // namespace detail

/// Measures sup over the testset and over j <= jmax of the axiom ratios
///   S1: ||S_j u||_x / ||u||_x,                      x in {a, b}
///   S2: ||S_j u||_hi / (2^{j(hi-lo)} ||S_j u||_lo)
///   S3: ||u - S_j u||_lo / (2^{-j(hi-lo)} ||u - S_j u||_hi)
///   S4: ||(S_{j+1}-S_j) u||_b / (2^{j(b-a)} ||(S_{j+1}-S_j) u||_a)
/// where lo = min(a,b), hi = max(a,b).  jmax defaults to fam.scan_limit(nmax).
inline AxiomScan measure_axiom_constants(const SmoothingFamily& fam, const Testset& testset, NormExponent a,
                                         NormExponent b, std::optional<std::int64_t> jmax = std::nullopt) {
  if (testset.empty()) throw InvalidArgument("measure_axiom_constants: empty testset");
  if (a.value() == b.value()) throw InvalidArgument("measure_axiom_constants: need a != b");
  const double lo = std::min(a.value(), b.value());
  const double hi = std::max(a.value(), b.value());
  const std::int64_t jm = jmax.value_or(fam.scan_limit(testset.max_nmax()));

  // Each test function becomes a radial spectrum; single modes are unit spectra.
  std::vector<std::vector<detail::SpectrumEntry>> spectra;
  for (const auto& f : testset.functions) spectra.push_back(detail::radial_spectrum(f));
  if (testset.single_modes)
    for (double ksq : detail::distinct_norms_sq(*testset.single_modes)) spectra.push_back({{ksq, 1.0}});

  std::vector<detail::SupRatio> s1(jm + 1), s2(jm + 1), s3(jm + 1), s4(jm + 1);
  for (const auto& spec : spectra) {
    std::vector<double> wa, wb, wlo, whi;
    for (const auto& e : spec) {
      wa.push_back(e.amp2 * bracket_pow2(e.ksq, a));
      wb.push_back(e.amp2 * bracket_pow2(e.ksq, b));
      wlo.push_back(e.amp2 * bracket_pow2(e.ksq, lo));
      whi.push_back(e.amp2 * bracket_pow2(e.ksq, hi));
    }
    double full_a = 0.0, full_b = 0.0;
    for (std::size_t i = 0; i < spec.size(); ++i) full_a += wa[i], full_b += wb[i];
    for (std::int64_t j = 0; j <= jm; ++j) {
      double sa = 0, sb = 0, slo = 0, shi = 0, clo = 0, chi = 0, da = 0, db = 0;
      for (std::size_t i = 0; i < spec.size(); ++i) {
        const double m = fam.s_symbol(j, spec[i].ksq);
        const double mn = fam.s_symbol(j + 1, spec[i].ksq);
        const double c = 1.0 - m, dlt = mn - m;
        sa += m * m * wa[i], sb += m * m * wb[i];
        slo += m * m * wlo[i], shi += m * m * whi[i];
        clo += c * c * wlo[i], chi += c * c * whi[i];
        da += dlt * dlt * wa[i], db += dlt * dlt * wb[i];
      }
      const double pj = std::pow(2.0, static_cast<double>(j) * (hi - lo));
      const double pab = std::pow(2.0, static_cast<double>(j) * (b.value() - a.value()));
      s1[j].add(std::sqrt(sa), std::sqrt(full_a));
      s1[j].add(std::sqrt(sb), std::sqrt(full_b));
      s2[j].add(std::sqrt(shi), pj * std::sqrt(slo));
      s3[j].add(std::sqrt(clo), std::sqrt(chi) / pj);
      s4[j].add(std::sqrt(db), pab * std::sqrt(da));
    }
  }

  AxiomScan scan;
  scan.constants.jmax = jm;
  const std::string fam_name = to_string(fam.shape());
  const std::string vel = fam.velocity().name();
  auto emit = [&](const char* axiom, const std::vector<detail::SupRatio>& sup, double& out, double ea, double eb) {
    for (std::int64_t j = 0; j <= jm; ++j) {
      if (!sup[j].seen) continue;
      out = std::max(out, sup[j].value);
      scan.rows.push_back({fam_name, vel, axiom, ea, eb, j, sup[j].value});
    }
  };
  emit("S1", s1, scan.constants.C_S1, a, b);
  emit("S2", s2, scan.constants.C_S2, lo, hi);
  emit("S3", s3, scan.constants.C_S3, hi, lo);
  emit("S4", s4, scan.constants.C_S4, a, b);
  return scan;
}

/// sup over the testset of ||u||_a^2 / sum_j ||R_j u||_a^2 (zero functions skipped).
inline double measure_orthogonality(const SmoothingFamily& fam, const Testset& testset, NormExponent a) {
  if (testset.empty()) throw InvalidArgument("measure_orthogonality: empty testset");
  std::unordered_map<double, double> energy_cache;
  auto energy = [&](double ksq) {
    auto it = energy_cache.find(ksq);
    if (it != energy_cache.end()) return it->second;
    const double e = fam.block_energy(ksq);
    energy_cache.emplace(ksq, e);
    return e;
  };
  detail::SupRatio sup;
  for (const auto& f : testset.functions) {
    double num = 0.0, den = 0.0;
    for (const auto& e : detail::radial_spectrum(f)) {
      const double w = e.amp2 * bracket_pow2(e.ksq, a);
      num += w;
      den += w * energy(e.ksq);
    }
    if (num > 0.0) sup.add(num, den);
  }
  if (testset.single_modes)
    for (double ksq : detail::distinct_norms_sq(*testset.single_modes)) sup.add(1.0, energy(ksq));
  return sup.value;
}

/// Orthogonality ratio 1 / sum_j r_j(k)^2 of the single mode e^{ik.x} (any a).
inline double single_mode_orthogonality(const SmoothingFamily& fam, double kabs) {
  return 1.0 / fam.block_energy(kabs * kabs);
}

struct VelocityPoint {
  std::int64_t j;
  double theta;
  double theta_next;
  double ratio;  // sup_k ||(S_{j+1}-S_j) e_k||_b / ((theta_{j+1}-theta_j) ||e_k||_a)
};

struct VelocityFit {
  double sigma = 0.0;  // fitted slope - (b - a - 1)
  double slope = 0.0;
  std::vector<VelocityPoint> points;
};

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  return sxy / sxx;
}

/// Upper bound on the number of modes one velocity point may scan.
inline constexpr double kVelocityScanLimit = 5.0e7;

/// Empirical extra loss sigma: slope of log(ratio_j) against log(theta_j) minus (b-a-1).
/// Ratios come from single modes e^{ikx}, k = 0 .. 2*theta_{j+1}.
inline VelocityFit velocity_loss_exponent(const SmoothingFamily& fam, NormExponent a, NormExponent b,
                                          const std::vector<std::int64_t>& jrange) {
  if (!(b.value() > a.value() + 1.0)) throw InvalidArgument("velocity_loss_exponent needs b > a + 1");
  VelocityFit fit;
  std::vector<double> lx, ly;
  for (auto j : jrange) {
    const double t0 = fam.theta(j), t1 = fam.theta(j + 1);
    const double kmax = std::ceil(2.0 * t1) + 1.0;
    if (!(kmax <= kVelocityScanLimit)) throw InvalidArgument("velocity point j=" + std::to_string(j) + " needs too many modes");
    double best = 0.0;
    for (double k = 0.0; k <= kmax; k += 1.0) {
      const double ksq = k * k;
      const double m = std::abs(fam.s_symbol(j + 1, ksq) - fam.s_symbol(j, ksq));
      if (m != 0.0) best = std::max(best, m * std::pow(1.0 + ksq, 0.5 * (b.value() - a.value())));
    }
    const double ratio = best / (t1 - t0);
    fit.points.push_back({j, t0, t1, ratio});
    if (ratio > 0.0) lx.push_back(std::log(t0)), ly.push_back(std::log(ratio));
  }
  if (lx.size() < 4) throw InvalidArgument("velocity_loss_exponent: fewer than 4 usable points");
  fit.slope = fit_slope(lx, ly);
  fit.sigma = fit.slope - (b.value() - a.value() - 1.0);
  return fit;
}

}  // namespace nmh
