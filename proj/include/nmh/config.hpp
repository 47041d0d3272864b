#pragma once
// Experiment configuration: JSON documents mapped onto library objects.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nmh/counterexamples.hpp"
#include "nmh/hypotheses.hpp"
#include "nmh/iterator.hpp"
#include "nmh/problems.hpp"
#include "nmh/smoothing.hpp"

namespace nmh {

using json = nlohmann::json;

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Parses text, reporting malformed input with line and column.
inline json parse_json_text(const std::string& text, const std::string& origin = "<config>") {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') line++, col = 1;
      else col++;
    }
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON (" +
                      e.what() + ")");
  }
}

inline json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path.string());
}

namespace cfg {

template <class T>
T get(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
T require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

inline const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  if (!root.contains(key)) return empty;
  if (!root.at(key).is_object()) throw ConfigError(std::string("section '") + key + "' must be an object");
  return root.at(key);
}

}  // namespace cfg

// ---- SpectralFunction --------------------------------------------------------

inline json to_json(const SpectralFunction& u) {
  json coeffs = json::array();
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] == Complex{}) continue;
    const auto k = u.lattice().point(i);
    json kk = u.dim() == 1 ? json::array({k[0]}) : json::array({k[0], k[1]});
    coeffs.push_back(json::array({kk, u[i].real(), u[i].imag()}));
  }
  return {{"dim", u.dim()}, {"nmax", u.nmax()}, {"real_valued", u.real_valued()}, {"coeffs", coeffs}};
}

inline SpectralFunction spectral_from_json(const json& j) {
  const int dim = cfg::require<int>(j, "dim");
  const int nmax = cfg::require<int>(j, "nmax");
  if (dim < 1 || dim > 2 || nmax < 0) throw ConfigError("spectral function needs dim in {1,2} and nmax >= 0");
  SpectralFunction u(Lattice(dim, nmax), cfg::get(j, "real_valued", false));
  for (const auto& e : cfg::get(j, "coeffs", json::array())) {
    if (!e.is_array() || e.size() != 3 || !e[0].is_array() || e[0].size() != std::size_t(dim))
      throw ConfigError("coefficient entries must be [[k...], re, im]");
    LatticePoint k{e[0][0].get<int>(), dim == 2 ? e[0][1].get<int>() : 0};
    if (!u.lattice().contains(k)) throw ConfigError("coefficient outside the lattice");
    u.set(k, Complex(e[1].get<double>(), e[2].get<double>()));
  }
  return u;
}

// ---- hypotheses ---------------------------------------------------------------

inline json to_json(const IterationParams& p) {
  json j = {{"a0", p.a0}, {"mu", p.mu}, {"a1", p.a1}, {"a2", p.a2}, {"alpha", p.alpha}, {"beta", p.beta},
            {"c", p.c},   {"A", p.A},   {"A_c", p.A_c}, {"Cstar", p.Cstar}};
  if (p.gamma) j["gamma"] = *p.gamma;
  return j;
}

/// Fields absent from j keep the values of base.
inline IterationParams params_from_json(const json& j, IterationParams base = {}) {
  base.a0 = cfg::get(j, "a0", base.a0);
  base.mu = cfg::get(j, "mu", base.mu);
  base.a1 = cfg::get(j, "a1", base.a1);
  base.a2 = cfg::get(j, "a2", base.a2);
  base.alpha = cfg::get(j, "alpha", base.alpha);
  base.beta = cfg::get(j, "beta", base.beta);
  if (j.contains("gamma") && !j.at("gamma").is_null()) base.gamma = cfg::require<double>(j, "gamma");
  base.c = cfg::get(j, "c", base.c);
  base.A = cfg::get(j, "A", base.A);
  base.A_c = cfg::get(j, "A_c", base.A_c);
  base.Cstar = cfg::get(j, "Cstar", base.Cstar);
  return base;
}

inline PiecewiseLinear table_from_json(const json& j, const char* key) {
  if (!j.contains(key)) return PiecewiseLinear(1.0);
  const auto& v = j.at(key);
  try {
    if (v.is_number()) return PiecewiseLinear(v.get<double>());
    std::vector<std::pair<double, double>> knots;
    for (const auto& e : v) knots.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
    return PiecewiseLinear(std::move(knots));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("table '") + key + "': " + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("table '") + key + "': " + e.what());
  }
}

inline TameConstants tame_from_json(const json& j, double delta1_default) {
  TameConstants t{table_from_json(j, "M1"), table_from_json(j, "M2"), table_from_json(j, "M3"),
                  table_from_json(j, "L4"), table_from_json(j, "L5"), table_from_json(j, "L6"),
                  cfg::get(j, "delta1", delta1_default)};
  return t;
}

inline LedgerConstants ledger_from_json(const json& j) {
  LedgerConstants lc;
  lc.Cprime = cfg::get(j, "Cprime", lc.Cprime);
  lc.C_ac = table_from_json(j, "C_ac");
  lc.C_c = cfg::get(j, "C_c", lc.C_c);
  return lc;
}

inline json to_json(const DerivedConstants& d) {
  json j = {{"gamma", d.gamma}, {"K1", d.K.K1}, {"K2", d.K.K2}, {"K3", d.K.K3}, {"K4", d.K.K4},
            {"B", d.B},         {"delta", d.delta}};
  if (d.N > 0) {
    j["N"] = d.N;
    j["lambda"] = d.lambda;
    j["z"] = d.z;
    j["G1"] = d.G1;
    j["G2"] = d.G2;
    j["X"] = d.X;
    j["Z"] = d.Z;
  }
  return j;
}

// ---- smoothing ----------------------------------------------------------------

inline SmoothingFamily smoothing_from_json(const json& j) {
  const auto shape = cfg::get<std::string>(j, "shape", "sharp");
  CutoffShape s;
  if (shape == "sharp") s = CutoffShape::Sharp;
  else if (shape == "smooth") s = CutoffShape::Smooth;
  else throw ConfigError("unknown cutoff shape '" + shape + "'");
  const auto& v = cfg::section(j, "velocity");
  const auto kind = cfg::get<std::string>(v, "kind", "dyadic");
  try {
    Velocity vel = Velocity::dyadic();
    if (kind == "dyadic") vel = Velocity::dyadic();
    else if (kind == "geometric") vel = Velocity::geometric(cfg::require<double>(v, "c"));
    else if (kind == "polynomial") vel = Velocity::polynomial(cfg::require<double>(v, "a"), cfg::require<double>(v, "eps"));
    else if (kind == "doubly_exponential")
      vel = Velocity::doubly_exponential(cfg::require<double>(v, "theta0"), cfg::require<double>(v, "chi"));
    else throw ConfigError("unknown velocity kind '" + kind + "'");
    return SmoothingFamily(s, vel);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("smoothing: ") + e.what());
  }
}

// ---- problems and data --------------------------------------------------------

struct ProblemSetup {
  std::unique_ptr<TameProblem> problem;
  IterationParams params;
  TameConstants tame;
  LedgerConstants ledger;
};

inline const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names{"linear", "quadratic", "small_divisor", "characteristics"};
  return names;
}

inline std::unique_ptr<TameProblem> problem_from_json(const json& root) {
  const auto& pj = cfg::section(root, "problem");
  if (!pj.contains("name")) throw ConfigError("missing field 'problem.name'");
  const auto name = cfg::require<std::string>(pj, "name");
  const auto& lj = cfg::section(root, "lattice");
  const int d = cfg::get(lj, "d", 1);
  const int nmax = cfg::get(lj, "nmax", 32);
  if (d < 1 || d > 2 || nmax < 1) throw ConfigError("lattice needs d in {1,2} and nmax >= 1");
  try {
    if (name == "linear") return linear_multiplier_problem(d, nmax, cfg::get(pj, "order", 3.0));
    if (name == "quadratic") return std::make_unique<QuadraticProblem>(d, nmax, cfg::get(pj, "delta1", 0.25));
    if (name == "small_divisor" || name == "characteristics") {
      if (d != 2) throw ConfigError(name + " problem lives on d = 2");
      if (name == "characteristics") {
        CharacteristicsOptions o;
        o.omega2 = cfg::get(pj, "omega2", o.omega2);
        o.epsilon = cfg::get(pj, "epsilon", o.epsilon);
        o.x0 = cfg::get(pj, "x0", o.x0);
        o.d0 = cfg::get(pj, "d0", o.d0);
        o.delta1 = cfg::get(pj, "delta1", o.delta1);
        return characteristics_problem(nmax, o);
      }
      SmallDivisorOptions o;
      o.omega2 = cfg::get(pj, "omega2", o.omega2);
      o.tau = cfg::get(pj, "tau", o.tau);
      o.gamma0 = cfg::get(pj, "gamma0", o.gamma0);
      o.d0 = cfg::get(pj, "d0", o.d0);
      o.delta1 = cfg::get(pj, "delta1", o.delta1);
      return small_divisor_problem(nmax, o);
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError("problem '" + name + "': " + e.what());
  }
  throw ConfigError("unknown problem '" + name + "'");
}

inline ProblemSetup setup_from_json(const json& root) {
  ProblemSetup s;
  s.problem = problem_from_json(root);
  s.params = params_from_json(cfg::section(root, "params"), s.problem->metadata().suggested);
  s.tame = tame_from_json(cfg::section(root, "tame"), s.problem->metadata().delta1);
  s.ledger = ledger_from_json(cfg::section(root, "ledger"));
  return s;
}

/// Right-hand side g on the problem lattice.
///   constant: {"value"}; mode: {"k", "amplitude"}; analytic: g_k = amplitude * rate^{|k|};
///   random: seeded coefficients with |g_k| ~ <k>^{-decay}; zero.
/// Optional "norm_beta" rescales to the requested ||g||_beta.
inline SpectralFunction data_from_json(const json& j, const Lattice& lat, double beta, std::uint64_t seed) {
  const auto kind = cfg::get<std::string>(j, "kind", "zero");
  SpectralFunction g(lat, true);
  if (kind == "zero") {
    return g;
  } else if (kind == "constant") {
    g = SpectralFunction::constant(lat, cfg::require<double>(j, "value"));
  } else if (kind == "mode") {
    auto k = cfg::require<std::vector<int>>(j, "k");
    if (k.size() != std::size_t(lat.dim())) throw ConfigError("mode index has wrong dimension");
    LatticePoint p{k[0], lat.dim() == 2 ? k[1] : 0};
    if (!lat.contains(p)) throw ConfigError("mode outside the lattice");
    const double amp = cfg::get(j, "amplitude", 1.0);
    g.set(p, amp);
    g.set({-p[0], -p[1]}, amp);
  } else if (kind == "analytic") {
    const double amp = cfg::get(j, "amplitude", 1.0);
    const double rate = cfg::get(j, "rate", 0.5);
    if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("analytic data needs 0 < rate < 1");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = amp * std::pow(rate, std::sqrt(lat.norm_sq(i)));
  } else if (kind == "random") {
    std::mt19937_64 rng(cfg::get<std::uint64_t>(j, "seed", seed));
    g = random_function(lat, rng, cfg::get(j, "decay", 2.0));
  } else {
    throw ConfigError("unknown data kind '" + kind + "'");
  }
  if (j.contains("norm_beta")) {
    const double want = cfg::require<double>(j, "norm_beta");
    const double have = sobolev_norm(g, beta);
    if (have == 0.0) throw ConfigError("cannot rescale zero data");
    g *= want / have;
  }
  return g;
}

inline RunOptions run_options_from_json(const json& j) {
  RunOptions o;
  o.max_steps = cfg::get(j, "max_steps", o.max_steps);
  o.residual_tol = cfg::get(j, "residual_tol", o.residual_tol);
  if (j.contains("delta")) o.delta = cfg::require<double>(j, "delta");
  o.strict_ball = cfg::get(j, "strict_ball", o.strict_ball);
  o.divergence_window = cfg::get(j, "divergence_window", o.divergence_window);
  o.divergence_factor = cfg::get(j, "divergence_factor", o.divergence_factor);
  o.grid_points = cfg::get(j, "grid_points", o.grid_points);
  if (o.max_steps < 1 || o.residual_tol <= 0.0) throw ConfigError("run needs max_steps >= 1 and residual_tol > 0");
  return o;
}

// ---- assertions ---------------------------------------------------------------

struct AssertionResult {
  std::string name;
  double value;
  std::optional<double> min, max;
  bool ok;
};

/// Checks {"key": {"min": x, "max": y}} against measured values; unknown keys are config errors.
inline std::vector<AssertionResult> check_assertions(const json& spec, const std::map<std::string, double>& measured) {
  std::vector<AssertionResult> out;
  if (spec.is_null()) return out;
  if (!spec.is_object()) throw ConfigError("assertions must be an object");
  for (const auto& [key, bound] : spec.items()) {
    auto it = measured.find(key);
    if (it == measured.end()) throw ConfigError("assertion on unknown quantity '" + key + "'");
    AssertionResult r{key, it->second, std::nullopt, std::nullopt, true};
    if (bound.contains("min")) r.min = bound.at("min").get<double>();
    if (bound.contains("max")) r.max = bound.at("max").get<double>();
    if (!r.min && !r.max) throw ConfigError("assertion '" + key + "' needs min or max");
    r.ok = std::isfinite(r.value) && (!r.min || r.value >= *r.min) && (!r.max || r.value <= *r.max);
    out.push_back(r);
  }
  return out;
}

}  // namespace nmh
