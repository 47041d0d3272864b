#pragma once
// Solvers for the truncated linearized equations: dense LU for small lattices,
// restarted right-preconditioned GMRES otherwise.

#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nmh/scale.hpp"

namespace nmh {

struct SolveOptions {
  double rel_tol = 1e-13;
  int restart = 80;
  int max_iterations = 4000;
  double stagnation = 0.9;  // give up when a restart cycle shrinks the residual by less than this factor
  std::size_t dense_limit = 1200;  // unknowns at or below this use dense LU
};

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
  bool dense = false;
};

using LinearMap = std::function<SpectralFunction(const SpectralFunction&)>;

namespace detail {

inline double l2(const std::vector<Complex>& v) {
  double s = 0.0;
  for (const auto& c : v) s += std::norm(c);
  return std::sqrt(s);
}

inline std::vector<Complex> to_vec(const SpectralFunction& f) { return {f.coeffs().begin(), f.coeffs().end()}; }

inline SpectralFunction from_vec(const Lattice& lat, std::vector<Complex> v) { return {lat, std::move(v), false}; }

inline SpectralFunction dense_solve(const LinearMap& op, const SpectralFunction& rhs, SolveStats& stats) {
  const auto& lat = rhs.lattice();
  const auto n = static_cast<Eigen::Index>(lat.size());
  Eigen::MatrixXcd M(n, n);
  for (Eigen::Index col = 0; col < n; ++col) {
    SpectralFunction e(lat);
    e[static_cast<std::size_t>(col)] = 1.0;
    const auto img = op(e);
    for (Eigen::Index row = 0; row < n; ++row) M(row, col) = img[static_cast<std::size_t>(row)];
  }
  Eigen::VectorXcd b(n);
  for (Eigen::Index i = 0; i < n; ++i) b(i) = rhs[static_cast<std::size_t>(i)];
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
  Eigen::VectorXcd x = lu.solve(b);
  if (!x.allFinite()) throw SolverFailure("dense solve produced non-finite values (singular linearization)");
  std::vector<Complex> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = x(i);
  stats.dense = true;
  stats.iterations = 1;
  return from_vec(lat, std::move(out));
}

}  // namespace detail

/// Solves op(h) = rhs on rhs's lattice; precond approximates op^{-1} (right preconditioning).
inline SpectralFunction solve_linear(const LinearMap& op, const LinearMap& precond, const SpectralFunction& rhs,
                                     const SolveOptions& opts = {}, SolveStats* stats_out = nullptr) {
  SolveStats stats;
  const auto& lat = rhs.lattice();
  const double bnorm = detail::l2(detail::to_vec(rhs));
  if (bnorm == 0.0) {
    if (stats_out) *stats_out = stats;
    return SpectralFunction(lat, rhs.real_valued());
  }

  SpectralFunction result(lat);
  if (lat.size() <= opts.dense_limit) {
    result = detail::dense_solve(op, rhs, stats);
  } else {
    // GMRES(m) on op(precond(z)) = rhs, x = precond(z).
    const std::size_t n = lat.size();
    const int m = opts.restart;
    std::vector<Complex> x(n, Complex{});
    int total = 0;
    double rel = 1.0;
    double cycle_start = INFINITY;
    auto apply = [&](const std::vector<Complex>& z) {
      return detail::to_vec(op(precond(detail::from_vec(lat, z))));
    };
    while (total < opts.max_iterations) {
      auto ax = apply(x);
      std::vector<Complex> r(n);
      for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ax[i];
      double beta = detail::l2(r);
      rel = beta / bnorm;
      if (rel <= opts.rel_tol) break;
      if (rel > opts.stagnation * cycle_start) break;
      cycle_start = rel;
      std::vector<std::vector<Complex>> V(1, r);
      for (auto& c : V[0]) c /= beta;
      std::vector<std::vector<Complex>> H(m + 1, std::vector<Complex>(m, Complex{}));
      std::vector<Complex> cs(m), sn(m), s(m + 1, Complex{});
      s[0] = beta;
      int k = 0;
      for (; k < m && total < opts.max_iterations; ++k, ++total) {
        auto w = apply(V[k]);
        for (int i = 0; i <= k; ++i) {  // modified Gram-Schmidt
          Complex h{};
          for (std::size_t q = 0; q < n; ++q) h += std::conj(V[i][q]) * w[q];
          H[i][k] = h;
          for (std::size_t q = 0; q < n; ++q) w[q] -= h * V[i][q];
        }
        const double hn = detail::l2(w);
        H[k + 1][k] = hn;
        for (int i = 0; i < k; ++i) {
          const Complex t = std::conj(cs[i]) * H[i][k] + std::conj(sn[i]) * H[i + 1][k];
          H[i + 1][k] = -sn[i] * H[i][k] + cs[i] * H[i + 1][k];
          H[i][k] = t;
        }
        const double den = std::hypot(std::abs(H[k][k]), hn);
        if (den == 0.0) throw SolverFailure("GMRES breakdown");
        cs[k] = H[k][k] / den;
        sn[k] = Complex(hn / den);
        H[k][k] = den;
        H[k + 1][k] = 0.0;
        s[k + 1] = -sn[k] * s[k];
        s[k] = std::conj(cs[k]) * s[k];
        rel = std::abs(s[k + 1]) / bnorm;
        if (hn > 0.0) {
          for (auto& c : w) c /= hn;
          V.push_back(std::move(w));
        }
        if (rel <= opts.rel_tol || hn == 0.0) {
          ++k;
          ++total;
          break;
        }
      }
      std::vector<Complex> y(k);
      for (int i = k - 1; i >= 0; --i) {
        Complex acc = s[i];
        for (int q = i + 1; q < k; ++q) acc -= H[i][q] * y[q];
        y[i] = acc / H[i][i];
      }
      for (int i = 0; i < k; ++i)
        for (std::size_t q = 0; q < n; ++q) x[q] += y[i] * V[i][q];
      if (!std::isfinite(detail::l2(x))) throw SolverFailure("GMRES produced non-finite iterate");
    }
    result = precond(detail::from_vec(lat, x));
    stats.iterations = total;
  }

  // True residual of the returned solution.
  auto res = op(result);
  res -= rhs;
  stats.relative_residual = detail::l2(detail::to_vec(res)) / bnorm;
  if (!(stats.relative_residual <= std::max(1e3 * opts.rel_tol, 1e-10)))
    throw SolverFailure("linear solve did not reach tolerance (relative residual " +
                        std::to_string(stats.relative_residual) + ")");
  if (stats_out) *stats_out = stats;
  return result;
}

}  // namespace nmh
