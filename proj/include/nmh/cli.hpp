#pragma once
// Subcommands of the experiment runner.  Each returns an exit code:
// 0 success, 1 assertion or convergence failure, 2 usage or config error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nmh/config.hpp"

namespace nmh::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2 };

struct Options {
  std::optional<std::string> out;  // overrides output.directory
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;  // csv or json; both when unset
};

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// JSON number or null for non-finite values.
inline json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct Output {
  std::filesystem::path dir;
  bool csv = true;
  bool json = true;
};

inline Output resolve_output(const json& root, const Options& o) {
  const auto& oj = cfg::section(root, "output");
  Output out;
  out.dir = o.out ? *o.out : cfg::get<std::string>(oj, "directory", "out");
  std::vector<std::string> formats = o.format ? std::vector<std::string>{*o.format}
                                              : cfg::get(oj, "formats", std::vector<std::string>{"csv", "json"});
  out.csv = out.json = false;
  for (const auto& f : formats) {
    if (f == "csv") out.csv = true;
    else if (f == "json") out.json = true;
    else throw ConfigError("unknown output format '" + f + "'");
  }
  std::error_code ec;
  std::filesystem::create_directories(out.dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + out.dir.string() + ": " + ec.message());
  return out;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write " + p.string());
  f << text;
}

inline std::uint64_t resolve_seed(const json& root, const Options& o) {
  return o.seed ? *o.seed : cfg::get<std::uint64_t>(cfg::section(root, "run"), "seed", 1);
}

/// Prints assertion outcomes; true when all hold.
inline bool report_assertions(const std::vector<AssertionResult>& results, std::ostream& os, json* summary) {
  bool ok = true;
  json arr = json::array();
  for (const auto& r : results) {
    os << (r.ok ? "PASS " : "FAIL ") << r.name << " = " << num(r.value);
    if (r.min) os << " min " << num(*r.min);
    if (r.max) os << " max " << num(*r.max);
    os << "\n";
    ok = ok && r.ok;
    arr.push_back({{"name", r.name}, {"value", jnum(r.value)}, {"ok", r.ok}});
  }
  if (summary) (*summary)["assertions"] = arr;
  return ok;
}

// ---- CSV writers ----------------------------------------------------------------

inline std::string run_report_csv(const RunReport& rep) {
  std::ostringstream s;
  s << "j,h_a1,h_a2,v_a1_plus_beta,u_minus_v_a2,u_alpha,y_0,e_0,e_a2_minus_mu,residual,identity_defect,"
       "ratio_h,ratio_v,ratio_u_minus_v,ratio_u_alpha\n";
  for (const auto& r : rep.rows)
    s << r.j << ',' << num(r.h_a1) << ',' << num(r.h_a2) << ',' << num(r.v_a1_plus_beta) << ','
      << num(r.u_minus_v_a2) << ',' << num(r.u_alpha) << ',' << num(r.y_0) << ',' << num(r.e_0) << ','
      << num(r.e_a2_minus_mu) << ',' << num(r.residual) << ',' << num(r.identity_defect) << ','
      << num(r.ratio_h) << ',' << num(r.ratio_v) << ',' << num(r.ratio_u_minus_v) << ','
      << num(r.ratio_u_alpha) << '\n';
  return s.str();
}

inline std::string benchmark_csv(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream s;
  s << "family,velocity,axiom,a,b,j,ratio\n";
  for (const auto& r : rows)
    s << r.family << ',' << r.velocity << ',' << r.axiom << ',' << num(r.a) << ',' << num(r.b) << ',' << r.j << ','
      << num(r.ratio) << '\n';
  return s.str();
}

inline std::string counterexample_csv(const std::vector<CounterexampleRow>& rows) {
  std::ostringstream s;
  s << "family,exponent,index,value,fitted_slope,predicted_slope\n";
  for (const auto& r : rows)
    s << r.family << ',' << num(r.exponent) << ',' << num(r.index) << ',' << num(r.value) << ','
      << num(r.fitted_slope) << ',' << num(r.predicted_slope) << '\n';
  return s.str();
}

inline json run_summary_json(const RunReport& rep) {
  json j = {{"problem", rep.problem},
            {"family", rep.family},
            {"converged", rep.converged},
            {"steps", rep.steps},
            {"final_residual", jnum(rep.final_residual)},
            {"g_beta", jnum(rep.g_beta)},
            {"A", jnum(rep.A)},
            {"max_identity_defect", jnum(rep.max_identity_defect)},
            {"sup_ratios",
             {{"K1", jnum(rep.sup_ratios.K1)},
              {"K2", jnum(rep.sup_ratios.K2)},
              {"K3", jnum(rep.sup_ratios.K3)},
              {"K4", jnum(rep.sup_ratios.K4)}}},
            {"warnings", rep.warnings}};
  if (rep.A_c) j["A_c"] = jnum(*rep.A_c);
  if (rep.u_alpha_plus_c) j["u_alpha_plus_c"] = jnum(*rep.u_alpha_plus_c);
  if (rep.g_beta_plus_c) j["g_beta_plus_c"] = jnum(*rep.g_beta_plus_c);
  if (rep.highnorm_ratio) j["highnorm_ratio"] = jnum(*rep.highnorm_ratio);
  return j;
}

// ---- params-check ------------------------------------------------------------------

inline int cmd_params_check(const json& root, const Options& o, std::ostream& os) {
  IterationParams base;
  double delta1 = 1.0;
  if (root.contains("problem")) {
    auto prob = problem_from_json(root);
    base = prob->metadata().suggested;
    delta1 = prob->metadata().delta1;
  }
  const auto p = params_from_json(cfg::section(root, "params"), base);
  const auto tame = tame_from_json(cfg::section(root, "tame"), delta1);
  const auto lc = ledger_from_json(cfg::section(root, "ledger"));
  const auto violations = validate(p);
  json out = {{"params", to_json(p)}, {"valid", violations.empty()}, {"violations", json::array()}};
  for (const auto& v : violations) out["violations"].push_back({{"name", v.name}, {"lhs", v.lhs}, {"rhs", v.rhs}});
  for (const auto& d : tame.defects()) out["tame_defects"].push_back(d);
  std::optional<DerivedConstants> dc;
  if (violations.empty()) {
    try {
      dc = derive_constants(p, tame, lc);
      out["derived"] = to_json(*dc);
    } catch (const NoAdmissibleGamma& e) {
      out["valid"] = false;
      out["violations"].push_back({{"name", "2*a1 + beta < 2*alpha"}, {"lhs", 2 * p.a1 + p.beta}, {"rhs", 2 * p.alpha}});
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  const bool valid = out["valid"].get<bool>();
  if (o.format && *o.format == "json") {
    os << out.dump(2) << "\n";
  } else {
    os << "a0=" << num(p.a0) << " mu=" << num(p.mu) << " a1=" << num(p.a1) << " alpha=" << num(p.alpha)
       << " beta=" << num(p.beta) << " a2=" << num(p.a2) << "\n";
    for (const auto& v : out["violations"])
      os << "violated: " << v["name"].get<std::string>() << " (" << num(v["lhs"].get<double>()) << " vs "
         << num(v["rhs"].get<double>()) << ")\n";
    if (dc) {
      os << "gamma = " << num(dc->gamma) << "\n";
      os << "K1 = " << num(dc->K.K1) << "  K2 = " << num(dc->K.K2) << "  K3 = " << num(dc->K.K3)
         << "  K4 = " << num(dc->K.K4) << "\n";
      os << "B = " << num(dc->B) << "  delta = " << num(dc->delta) << "\n";
      if (dc->N > 0)
        os << "N = " << dc->N << "  lambda = " << num(dc->lambda) << "  z = " << num(dc->z) << "  G1 = " << num(dc->G1)
           << "  G2 = " << num(dc->G2) << "\n";
    }
    os << (valid ? "valid" : "invalid") << "\n";
  }
  return valid ? kOk : kFailure;
}

// ---- verify-smoothing ----------------------------------------------------------------

inline Testset testset_from_json(const json& root, std::uint64_t seed) {
  const auto& tj = cfg::section(root, "testset");
  const auto& lj = cfg::section(root, "lattice");
  const Lattice lat(cfg::get(lj, "d", 1), cfg::get(lj, "nmax", 64));
  auto ts = random_testset(lat, cfg::get(tj, "random", 0), cfg::get<std::uint64_t>(tj, "seed", seed),
                           cfg::get(tj, "decay", 1.0));
  if (cfg::get(tj, "single_modes", false)) ts.single_modes = lat;
  return ts;
}

inline int cmd_verify_smoothing(const json& root, const Options& o, std::ostream& os) {
  const auto fam = smoothing_from_json(cfg::section(root, "smoothing"));
  const auto seed = resolve_seed(root, o);
  const auto ts = testset_from_json(root, seed);
  if (ts.empty()) throw ConfigError("empty testset");
  const auto out = resolve_output(root, o);
  std::map<std::string, double> measured;
  std::vector<BenchmarkRow> rows;
  json summary = {{"family", fam.name()}, {"seed", seed}};

  if (root.contains("axioms")) {
    const auto& aj = root.at("axioms");
    std::optional<std::int64_t> jmax;
    if (aj.contains("jmax")) jmax = cfg::require<std::int64_t>(aj, "jmax");
    const auto scan = measure_axiom_constants(fam, ts, cfg::require<double>(aj, "a"), cfg::require<double>(aj, "b"), jmax);
    const auto& c = scan.constants;
    measured["C_S1"] = c.C_S1;
    measured["C_S2"] = c.C_S2;
    measured["C_S3"] = c.C_S3;
    measured["C_S4"] = c.C_S4;
    summary["axioms"] = {{"C_S1", jnum(c.C_S1)}, {"C_S2", jnum(c.C_S2)}, {"C_S3", jnum(c.C_S3)},
                         {"C_S4", jnum(c.C_S4)}, {"jmax", c.jmax}};
    rows.insert(rows.end(), scan.rows.begin(), scan.rows.end());
    os << "C_S1 = " << num(c.C_S1) << "  C_S2 = " << num(c.C_S2) << "  C_S3 = " << num(c.C_S3)
       << "  C_S4 = " << num(c.C_S4) << "  (jmax " << c.jmax << ")\n";
  }
  if (root.contains("orthogonality")) {
    const auto& oj = root.at("orthogonality");
    const double a = cfg::get(oj, "a", 0.0);
    if (!ts.functions.empty()) {
      Testset rand_only{ts.functions, std::nullopt};
      const double r = measure_orthogonality(fam, rand_only, a);
      measured["orthogonality"] = r;
      summary["orthogonality"] = jnum(r);
      rows.push_back({fam.name(), fam.velocity().name(), "orthogonality", a, a, 0, r});
      os << "orthogonality (testset) = " << num(r) << "\n";
    }
    for (double k : cfg::get(oj, "modes", std::vector<double>{})) {
      const double r = single_mode_orthogonality(fam, k);
      const auto key = "orthogonality_mode_" + num(k);
      measured[key] = r;
      summary[key] = jnum(r);
      rows.push_back({fam.name(), fam.velocity().name(), "orthogonality_mode", a, a, static_cast<std::int64_t>(k), r});
      os << key << " = " << num(r) << "\n";
    }
  }
  if (root.contains("velocity")) {
    const auto& vj = root.at("velocity");
    const double a = cfg::require<double>(vj, "a"), b = cfg::require<double>(vj, "b");
    const auto fit = velocity_loss_exponent(fam, a, b, cfg::require<std::vector<std::int64_t>>(vj, "j"));
    measured["sigma"] = fit.sigma;
    summary["sigma"] = jnum(fit.sigma);
    for (const auto& pt : fit.points) rows.push_back({fam.name(), fam.velocity().name(), "velocity_loss", a, b, pt.j, pt.ratio});
    os << "sigma = " << num(fit.sigma) << "\n";
  }
  const bool ok = report_assertions(check_assertions(root.value("assertions", json()), measured), os, &summary);
  summary["ok"] = ok;
  if (out.csv) write_file(out.dir / "smoothing.csv", benchmark_csv(rows));
  if (out.json) write_file(out.dir / "smoothing.json", summary.dump(2) + "\n");
  return ok ? kOk : kFailure;
}

// ---- velocity-bench -------------------------------------------------------------------

inline int cmd_velocity_bench(const json& root, const Options& o, std::ostream& os) {
  if (!root.contains("benches") || !root.at("benches").is_array() || root.at("benches").empty())
    throw ConfigError("velocity-bench needs a nonempty 'benches' array");
  const auto out = resolve_output(root, o);
  std::map<std::string, double> measured;
  std::vector<BenchmarkRow> rows;
  json summary = json::object();
  for (const auto& bj : root.at("benches")) {
    const auto name = cfg::require<std::string>(bj, "name");
    const auto fam = smoothing_from_json(cfg::section(bj, "smoothing"));
    const double a = cfg::require<double>(bj, "a"), b = cfg::require<double>(bj, "b");
    const auto fit = velocity_loss_exponent(fam, a, b, cfg::require<std::vector<std::int64_t>>(bj, "j"));
    measured["sigma/" + name] = fit.sigma;
    summary[name] = {{"family", fam.name()}, {"sigma", jnum(fit.sigma)}, {"slope", jnum(fit.slope)}};
    for (const auto& pt : fit.points) rows.push_back({fam.name(), fam.velocity().name(), "velocity_loss", a, b, pt.j, pt.ratio});
    os << name << ": sigma = " << num(fit.sigma) << "\n";
  }
  const bool ok = report_assertions(check_assertions(root.value("assertions", json()), measured), os, &summary);
  summary["ok"] = ok;
  if (out.csv) write_file(out.dir / "velocity.csv", benchmark_csv(rows));
  if (out.json) write_file(out.dir / "velocity.json", summary.dump(2) + "\n");
  return ok ? kOk : kFailure;
}

// ---- counterexample --------------------------------------------------------------------

inline int cmd_counterexample(const json& root, const Options& o, std::ostream& os) {
  const auto& cj = cfg::section(root, "counterexample");
  const auto family = cfg::get<std::string>(cj, "family", "");
  if (cfg::get(cj, "d", 1) != 1) throw ConfigError("counterexamples are implemented for d = 1 only");
  const int nmax = cfg::require<int>(cj, "nmax");
  CounterexampleReport rep;
  std::map<std::string, double> measured;
  try {
    if (family == "a11") {
      A11Options a;
      a.beta = cfg::get(cj, "beta", a.beta);
      a.a0 = cfg::get(cj, "a0", a.a0);
      a.a1 = cfg::get(cj, "a1", a.a1);
      a.sum_lo = cfg::get(cj, "sum_lo", a.sum_lo);
      a.sum_hi = cfg::get(cj, "sum_hi", a.sum_hi);
      a.a_shift = cfg::get(cj, "a_shift", a.a_shift);
      rep = a11_counterexample(nmax, a);
      double worst = 0.0;
      for (std::size_t i = 0; i < rep.block_slopes.size(); ++i) {
        const double err = std::abs(rep.block_slopes[i] / rep.predicted_block_slopes[i] - 1.0);
        measured["block_slope_rel_err_" + std::to_string(i)] = err;
        worst = std::max(worst, err);
      }
      measured["block_slope_rel_err"] = worst;
      measured["tail_ratio"] = rep.tail_ratio;
    } else if (family == "weak_space") {
      WeakSpaceOptions w;
      w.a = cfg::get(cj, "a", w.a);
      rep = weak_space_example(nmax, w);
      measured["block_spread"] = rep.block_spread;
    } else {
      throw ConfigError("unknown counterexample family '" + family + "'");
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  measured["sum_slope"] = rep.sum_slope;
  measured["predicted_sum_slope"] = rep.predicted_sum_slope;
  measured["sum_slope_rel_err"] = std::abs(rep.sum_slope / rep.predicted_sum_slope - 1.0);
  const auto out = resolve_output(root, o);
  json summary = json::object();
  for (const auto& [k, v] : measured) summary[k] = jnum(v);
  for (const auto& [k, v] : measured) os << k << " = " << num(v) << "\n";
  const bool ok = report_assertions(check_assertions(root.value("assertions", json()), measured), os, &summary);
  summary["family"] = family;
  summary["ok"] = ok;
  if (out.csv) write_file(out.dir / "counterexample.csv", counterexample_csv(rep.rows));
  if (out.json) write_file(out.dir / "counterexample.json", summary.dump(2) + "\n");
  return ok ? kOk : kFailure;
}

// ---- run --------------------------------------------------------------------------------

inline int cmd_run(const json& root, const Options& o, std::ostream& os) {
  auto setup = setup_from_json(root);
  const auto& prob = *setup.problem;
  const auto seed = resolve_seed(root, o);
  const auto fam = smoothing_from_json(cfg::section(root, "smoothing"));
  auto opts = run_options_from_json(cfg::section(root, "run"));
  if (!validate(setup.params).empty()) throw ConfigError("iteration parameters are inadmissible (see params-check)");
  const auto derived = derive_constants(setup.params, setup.tame, setup.ledger);
  if (!opts.delta) opts.delta = derived.delta;
  const auto g = data_from_json(cfg::section(root, "data"), prob.lattice(), setup.params.beta, seed);
  const auto out = resolve_output(root, o);

  RunReport rep;
  std::optional<int> diverged_at;
  std::string failure;
  try {
    rep = run(prob, g, setup.params, fam, opts).report;
  } catch (const DivergenceError& e) {
    rep = e.report();
    diverged_at = e.step();
    failure = e.what();
  } catch (const PsiFailure& e) {
    rep = e.report();
    diverged_at = e.step();
    failure = e.what();
  }

  json summary = run_summary_json(rep);
  summary["seed"] = seed;
  summary["params"] = to_json(setup.params);
  summary["derived"] = to_json(derived);
  summary["divergence_step"] = diverged_at ? json(*diverged_at) : json(nullptr);
  if (!failure.empty()) summary["failure"] = failure;
  if (setup.params.c > 0.0 && rep.g_beta_plus_c)
    summary["highnorm_bound"] = jnum(highnorm_bound(setup.params, setup.tame, rep.g_beta, *rep.g_beta_plus_c, setup.ledger));

  std::map<std::string, double> measured{{"converged", rep.converged ? 1.0 : 0.0},
                                         {"steps", double(rep.steps)},
                                         {"final_residual", rep.final_residual},
                                         {"max_identity_defect", rep.max_identity_defect},
                                         {"K1", rep.sup_ratios.K1},
                                         {"K2", rep.sup_ratios.K2},
                                         {"K3", rep.sup_ratios.K3},
                                         {"K4", rep.sup_ratios.K4}};
  if (rep.highnorm_ratio) measured["highnorm_ratio"] = *rep.highnorm_ratio;

  os << prob.metadata().name << " on " << fam.name() << ": ";
  if (!failure.empty()) os << "failed: " << failure << "\n";
  else os << (rep.converged ? "converged" : "not converged") << " after " << rep.steps << " steps, residual "
          << num(rep.final_residual) << "\n";
  for (const auto& w : rep.warnings) os << "warning: " << w << "\n";

  bool ok = rep.converged && failure.empty();
  ok = report_assertions(check_assertions(root.value("assertions", json()), measured), os, &summary) && ok;
  if (root.contains("baselines")) {
    json b = json::object();
    for (const auto& [key, val] : root.at("baselines").items()) {
      auto it = measured.find(key);
      if (it == measured.end()) throw ConfigError("baseline for unknown quantity '" + key + "'");
      const double base = val.get<double>();
      const double ratio = it->second / base;
      const bool within = std::isfinite(ratio) && ratio >= 0.5 && ratio <= 2.0;
      os << (within ? "PASS " : "FAIL ") << "baseline " << key << " = " << num(it->second) << " vs " << num(base) << "\n";
      b[key] = {{"value", jnum(it->second)}, {"baseline", base}, {"ok", within}};
      ok = ok && within;
    }
    summary["baselines"] = b;
  }
  summary["ok"] = ok;
  if (out.csv) write_file(out.dir / "report.csv", run_report_csv(rep));
  if (out.json) write_file(out.dir / "summary.json", summary.dump(2) + "\n");
  return ok ? kOk : kFailure;
}

// ---- dispatch ------------------------------------------------------------------------

using Command = int (*)(const json&, const Options&, std::ostream&);

/// Runs one command on one config file, mapping library errors onto exit codes.
inline int dispatch(Command cmd, const std::string& config_path, const Options& o, std::ostream& os,
                    std::ostream& err) {
  try {
    const auto root = load_json_file(config_path);
    if (!root.is_object()) throw ConfigError(config_path + ": top level must be an object");
    return cmd(root, o, os);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DimensionMismatch& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

/// Independent run configs in parallel, each writing to out/<config stem>.
inline int run_sweep(const std::vector<std::string>& configs, const Options& o, std::ostream& os, std::ostream& err) {
  const std::filesystem::path base = o.out ? *o.out : "out";
  struct Job {
    std::future<int> code;
    std::ostringstream out, err;
  };
  std::vector<std::unique_ptr<Job>> jobs;
  for (const auto& c : configs) {
    auto job = std::make_unique<Job>();
    Options oc = o;
    oc.out = (base / std::filesystem::path(c).stem()).string();
    auto* jp = job.get();
    job->code = std::async(std::launch::async, [c, oc, jp] { return dispatch(cmd_run, c, oc, jp->out, jp->err); });
    jobs.push_back(std::move(job));
  }
  int worst = kOk;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const int code = jobs[i]->code.get();
    os << "[" << configs[i] << "] exit " << code << "\n" << jobs[i]->out.str();
    err << jobs[i]->err.str();
    worst = std::max(worst, code);
  }
  return worst;
}

}  // namespace nmh::cli
