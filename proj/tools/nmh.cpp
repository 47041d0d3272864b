#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nmh/cli.hpp"

int main(int argc, char** argv) {
  using namespace nmh::cli;
  CLI::App app{"Nash-Moser-Hormander iteration experiments"};
  app.require_subcommand(1);

  std::string config;
  std::vector<std::string> sweep;
  std::string out, format;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* c = sub->add_option("--config", config, "experiment configuration (JSON)")->check(CLI::ExistingFile);
    if (need_config) c->required();
    sub->add_option("--out", out, "output directory (overrides the config)");
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}));
  };

  auto* params = app.add_subcommand("params-check", "validate iteration parameters and print derived constants");
  auto* smoothing = app.add_subcommand("verify-smoothing", "measure smoothing axiom constants");
  auto* run = app.add_subcommand("run", "run the iteration on a configured problem");
  auto* counter = app.add_subcommand("counterexample", "evaluate a counterexample construction");
  auto* velocity = app.add_subcommand("velocity-bench", "fit velocity loss exponents");
  for (auto* s : {params, smoothing, counter, velocity}) add_common(s, true);
  add_common(run, false);
  run->add_option("--sweep", sweep, "run several configs in parallel")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  Options o;
  if (!out.empty()) o.out = out;
  if (!format.empty()) o.format = format;
  if (run->count("--seed") || params->count("--seed") || smoothing->count("--seed") || counter->count("--seed") ||
      velocity->count("--seed"))
    o.seed = seed;

  if (run->parsed()) {
    if (!sweep.empty()) return run_sweep(sweep, o, std::cout, std::cerr);
    if (config.empty()) {
      std::cerr << "run needs --config or --sweep\n";
      return kConfigError;
    }
    return dispatch(cmd_run, config, o, std::cout, std::cerr);
  }
  if (params->parsed()) return dispatch(cmd_params_check, config, o, std::cout, std::cerr);
  if (smoothing->parsed()) return dispatch(cmd_verify_smoothing, config, o, std::cout, std::cerr);
  if (counter->parsed()) return dispatch(cmd_counterexample, config, o, std::cout, std::cerr);
  return dispatch(cmd_velocity_bench, config, o, std::cout, std::cerr);
}
