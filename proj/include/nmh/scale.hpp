#pragma once
// Discretized periodic Sobolev scale H^a(T^d), d in {1, 2}.
//
// Functions are stored as dense arrays of Fourier coefficients over the
// truncated lattice { k in Z^d : |k|_inf <= nmax }.  Norms use the Japanese
// bracket <k> = (1 + |k|^2)^(1/2) with the Euclidean |k|.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <fftw3.h>

#include "nmh/error.hpp"

namespace nmh {

using Complex = std::complex<double>;

/// Integer frequency; the second entry is 0 when d = 1.
using LatticePoint = std::array<int, 2>;

/// Sobolev regularity index a >= 0.
class NormExponent {
 public:
  NormExponent(double a) : a_(a) {  // NOLINT: implicit on purpose, checked
    if (!(a >= 0.0)) throw InvalidArgument("norm exponent must be >= 0, got " + std::to_string(a));
  }
  double value() const { return a_; }
  operator double() const { return a_; }  // NOLINT

 private:
  double a_;
};

/// <k>^(2a) from |k|^2.
inline double bracket_pow2(double ksq, double a) { return a == 0.0 ? 1.0 : std::pow(1.0 + ksq, a); }

class Lattice {
 public:
  Lattice(int dim, int nmax) : dim_(dim), nmax_(nmax) {
    if (dim != 1 && dim != 2) throw InvalidArgument("lattice dimension must be 1 or 2");
    if (nmax < 0) throw InvalidArgument("lattice radius must be >= 0");
  }

  int dim() const { return dim_; }
  int nmax() const { return nmax_; }
  int side() const { return 2 * nmax_ + 1; }
  std::size_t size() const {
    const auto s = static_cast<std::size_t>(side());
    return dim_ == 1 ? s : s * s;
  }

  bool contains(const LatticePoint& k) const {
    if (std::abs(k[0]) > nmax_) return false;
    return dim_ == 1 ? k[1] == 0 : std::abs(k[1]) <= nmax_;
  }

  std::size_t index(const LatticePoint& k) const {
    const auto i0 = static_cast<std::size_t>(k[0] + nmax_);
    if (dim_ == 1) return i0;
    return i0 * static_cast<std::size_t>(side()) + static_cast<std::size_t>(k[1] + nmax_);
  }

  LatticePoint point(std::size_t i) const {
    if (dim_ == 1) return {static_cast<int>(i) - nmax_, 0};
    const auto s = static_cast<std::size_t>(side());
    return {static_cast<int>(i / s) - nmax_, static_cast<int>(i % s) - nmax_};
  }

  /// Euclidean |k|^2 of the i-th lattice point.
  double norm_sq(std::size_t i) const {
    const auto k = point(i);
    return static_cast<double>(k[0]) * k[0] + static_cast<double>(k[1]) * k[1];
  }

  friend bool operator==(const Lattice&, const Lattice&) = default;

 private:
  int dim_;
  int nmax_;
};

class SpectralFunction {
 public:
  SpectralFunction(Lattice lattice, bool real_valued = false)
      : lattice_(lattice), coeffs_(lattice.size(), Complex{}), real_valued_(real_valued) {}

  SpectralFunction(Lattice lattice, std::vector<Complex> coeffs, bool real_valued)
      : lattice_(lattice), coeffs_(std::move(coeffs)), real_valued_(real_valued) {
    if (coeffs_.size() != lattice_.size()) throw InvalidArgument("coefficient count does not match lattice");
  }

  static SpectralFunction zero(int dim, int nmax) { return SpectralFunction(Lattice(dim, nmax), true); }

  /// amplitude * e^{i k.x}; real_valued is false unless k = 0 and amplitude is real.
  static SpectralFunction mode(Lattice lattice, const LatticePoint& k, Complex amplitude = 1.0) {
    if (!lattice.contains(k)) throw InvalidArgument("mode outside lattice");
    const bool real = k[0] == 0 && k[1] == 0 && amplitude.imag() == 0.0;
    SpectralFunction f(lattice, real);
    f.coeffs_[lattice.index(k)] = amplitude;
    return f;
  }

  static SpectralFunction constant(Lattice lattice, Complex c) { return mode(lattice, {0, 0}, c); }

  const Lattice& lattice() const { return lattice_; }
  int dim() const { return lattice_.dim(); }
  int nmax() const { return lattice_.nmax(); }
  std::size_t size() const { return coeffs_.size(); }
  bool real_valued() const { return real_valued_; }
  void set_real_valued(bool r) { real_valued_ = r; }

  std::span<const Complex> coeffs() const { return coeffs_; }
  std::span<Complex> coeffs() { return coeffs_; }
  Complex& operator[](std::size_t i) { return coeffs_[i]; }
  const Complex& operator[](std::size_t i) const { return coeffs_[i]; }

  /// û_k, zero outside the lattice.
  Complex coeff(const LatticePoint& k) const {
    return lattice_.contains(k) ? coeffs_[lattice_.index(k)] : Complex{};
  }
  void set(const LatticePoint& k, Complex value) {
    if (!lattice_.contains(k)) throw InvalidArgument("coefficient outside lattice");
    coeffs_[lattice_.index(k)] = value;
  }

  bool is_zero() const {
    return std::all_of(coeffs_.begin(), coeffs_.end(), [](const Complex& c) { return c == Complex{}; });
  }

  /// Same function on a lattice of radius nmax (truncating or zero-padding).
  SpectralFunction resized(int nmax) const {
    SpectralFunction out(Lattice(dim(), nmax), real_valued_);
    for (std::size_t i = 0; i < size(); ++i) {
      const auto k = lattice_.point(i);
      if (out.lattice_.contains(k)) out.coeffs_[out.lattice_.index(k)] = coeffs_[i];
    }
    return out;
  }

  /// max_k |û_{-k} - conj(û_k)| <= tol * max_k |û_k|.
  bool is_conjugate_symmetric(double tol = 0.0) const {
    double scale = 0.0, defect = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      const auto k = lattice_.point(i);
      scale = std::max(scale, std::abs(coeffs_[i]));
      defect = std::max(defect, std::abs(coeff({-k[0], -k[1]}) - std::conj(coeffs_[i])));
    }
    return defect <= tol * scale;
  }

  /// Multiplies û_k by symbol(|k|^2) or symbol(k), whichever the callable accepts.
  template <class Symbol>
  SpectralFunction multiplied(Symbol&& symbol, bool keeps_real = true) const {
    SpectralFunction out(lattice_, real_valued_ && keeps_real);
    for (std::size_t i = 0; i < size(); ++i) {
      if (coeffs_[i] == Complex{}) continue;
      if constexpr (std::is_invocable_v<Symbol, double>) {
        out.coeffs_[i] = coeffs_[i] * symbol(lattice_.norm_sq(i));
      } else {
        out.coeffs_[i] = coeffs_[i] * symbol(lattice_.point(i));
      }
    }
    return out;
  }

  SpectralFunction& operator+=(const SpectralFunction& o) { return accumulate(1.0, o); }
  SpectralFunction& operator-=(const SpectralFunction& o) { return accumulate(-1.0, o); }
  SpectralFunction& operator*=(Complex s) {
    for (auto& c : coeffs_) c *= s;
    real_valued_ = real_valued_ && s.imag() == 0.0;
    return *this;
  }

  /// this += alpha * o, with o on a lattice no larger than this one.
  SpectralFunction& accumulate(Complex alpha, const SpectralFunction& o) {
    if (o.dim() != dim()) throw DimensionMismatch("spectral functions of different dimension");
    if (o.lattice_ == lattice_) {
      for (std::size_t i = 0; i < size(); ++i) coeffs_[i] += alpha * o.coeffs_[i];
    } else {
      if (o.nmax() > nmax()) throw DimensionMismatch("accumulate into a smaller lattice");
      for (std::size_t i = 0; i < o.size(); ++i) coeffs_[lattice_.index(o.lattice_.point(i))] += alpha * o.coeffs_[i];
    }
    real_valued_ = real_valued_ && o.real_valued_ && alpha.imag() == 0.0;
    return *this;
  }

 private:
  Lattice lattice_;
  std::vector<Complex> coeffs_;
  bool real_valued_;
};

/// ||u||_a^2 = sum_k |û_k|^2 <k>^{2a}.
inline double sobolev_norm_sq(const SpectralFunction& u, NormExponent a) {
  double s = 0.0;
  const auto& lat = u.lattice();
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double m = std::norm(u[i]);
    if (m != 0.0) s += m * bracket_pow2(lat.norm_sq(i), a);
  }
  return s;
}

inline double sobolev_norm(const SpectralFunction& u, NormExponent a) { return std::sqrt(sobolev_norm_sq(u, a)); }

/// alpha*u + v on the larger of the two lattices.
inline SpectralFunction axpy(Complex alpha, const SpectralFunction& u, const SpectralFunction& v) {
  if (u.dim() != v.dim()) throw DimensionMismatch("axpy: dimension mismatch");
  if (v.nmax() >= u.nmax()) {
    SpectralFunction out = v;
    out.accumulate(alpha, u);
    return out;
  }
  SpectralFunction out(u.lattice(), v.real_valued());
  out.accumulate(1.0, v);
  out.accumulate(alpha, u);
  return out;
}

inline SpectralFunction operator+(SpectralFunction a, const SpectralFunction& b) { return a += b; }
inline SpectralFunction operator-(SpectralFunction a, const SpectralFunction& b) {
  if (b.nmax() > a.nmax()) return axpy(-1.0, b, a);
  return a -= b;
}
inline SpectralFunction operator*(Complex s, SpectralFunction a) { return a *= s; }

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Cyclic convolution through FFTW on an L^d grid, L large enough that the
/// kept band [-nr, nr] receives no wrapped terms.
inline SpectralFunction fft_product(const SpectralFunction& u, const SpectralFunction& v, const Lattice& out_lat) {
  const int d = u.dim();
  const int L = u.nmax() + v.nmax() + out_lat.nmax() + 1;
  const std::size_t total = d == 1 ? static_cast<std::size_t>(L) : static_cast<std::size_t>(L) * L;
  auto wrap = [L](int k) { return static_cast<std::size_t>(((k % L) + L) % L); };
  auto slot = [&](const LatticePoint& k) { return d == 1 ? wrap(k[0]) : wrap(k[0]) * L + wrap(k[1]); };

  std::vector<Complex> a(total), b(total);
  for (std::size_t i = 0; i < u.size(); ++i) a[slot(u.lattice().point(i))] = u[i];
  for (std::size_t i = 0; i < v.size(); ++i) b[slot(v.lattice().point(i))] = v[i];

  auto* pa = reinterpret_cast<fftw_complex*>(a.data());
  auto* pb = reinterpret_cast<fftw_complex*>(b.data());
  fftw_plan fa, fb, back;
  {
    std::lock_guard lock(fftw_planner_mutex());
    if (d == 1) {
      fa = fftw_plan_dft_1d(L, pa, pa, FFTW_BACKWARD, FFTW_ESTIMATE);
      fb = fftw_plan_dft_1d(L, pb, pb, FFTW_BACKWARD, FFTW_ESTIMATE);
      back = fftw_plan_dft_1d(L, pa, pa, FFTW_FORWARD, FFTW_ESTIMATE);
    } else {
      fa = fftw_plan_dft_2d(L, L, pa, pa, FFTW_BACKWARD, FFTW_ESTIMATE);
      fb = fftw_plan_dft_2d(L, L, pb, pb, FFTW_BACKWARD, FFTW_ESTIMATE);
      back = fftw_plan_dft_2d(L, L, pa, pa, FFTW_FORWARD, FFTW_ESTIMATE);
    }
  }
  fftw_execute(fa);
  fftw_execute(fb);
  for (std::size_t i = 0; i < total; ++i) a[i] *= b[i];
  fftw_execute(back);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(fa);
    fftw_destroy_plan(fb);
    fftw_destroy_plan(back);
  }

  SpectralFunction out(out_lat, u.real_valued() && v.real_valued());
  const double scale = 1.0 / static_cast<double>(total);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[slot(out_lat.point(i))] * scale;
  return out;
}

inline std::vector<std::size_t> support(const SpectralFunction& u) {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (u[i] != Complex{}) s.push_back(i);
  return s;
}

}  // namespace detail

/// Work above which products switch from the direct double loop to FFT.
inline constexpr double kDirectProductWork = 4.0e6;

/// Discrete convolution of the coefficient arrays, truncated to the larger lattice.
inline SpectralFunction pointwise_product(const SpectralFunction& u, const SpectralFunction& v) {
  if (u.dim() != v.dim()) throw DimensionMismatch("pointwise_product: dimension mismatch");
  const Lattice out_lat(u.dim(), std::max(u.nmax(), v.nmax()));
  const auto su = detail::support(u);
  const auto sv = detail::support(v);
  if (static_cast<double>(su.size()) * static_cast<double>(sv.size()) > kDirectProductWork)
    return detail::fft_product(u, v, out_lat);

  SpectralFunction out(out_lat, u.real_valued() && v.real_valued());
  for (auto i : su) {
    const auto ki = u.lattice().point(i);
    for (auto j : sv) {
      const auto kj = v.lattice().point(j);
      const LatticePoint k{ki[0] + kj[0], ki[1] + kj[1]};
      if (out_lat.contains(k)) out[out_lat.index(k)] += u[i] * v[j];
    }
  }
  return out;
}

}  // namespace nmh
