#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <string>

#include "spde/config.hpp"
#include "spde/errors.hpp"
#include "spde/harness.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::string> out;
  int workers = 0;
};

const char* describe(const std::string& name) {
  if (name == "simulate") return "simulate one trajectory (CSV and binary)";
  if (name == "estimate") return "estimate f(x0) from a stored or simulated trajectory";
  if (name == "figure") return "Monte-Carlo sweep over x0_grid";
  if (name == "rate") return "RMSE against sigma over nu_list";
  if (name == "coverage") return "empirical coverage of the confidence interval";
  if (name == "occupation") return "occupation-time concentration over nu_list";
  if (name == "variance-scan") return "variance of localised spatial averages over h_list";
  if (name == "growing-window") return "RMSE over gamma_list on growing windows";
  return "compare X_t(nu^{1/2} y) with the zoomed-out model";
}

int run(const std::string& command, const Options& opt) {
  auto config = spde::Config::load(opt.config);
  if (opt.seed) config.set("experiment", "base_seed", std::to_string(*opt.seed));
  if (opt.runs) config.set("experiment", "n_runs", std::to_string(*opt.runs));
  if (opt.out) config.set("experiment", "output_dir", "\"" + *opt.out + "\"");
  auto cfg = spde::build_experiment(config);
  if (opt.workers > 0) cfg.workers = opt.workers;

  const auto out = spde::run_command(command, cfg);
  std::cout << command << ": wrote";
  for (const auto& f : out.files) std::cout << ' ' << f;
  std::cout << " manifest.toml to " << cfg.output_dir.string() << '\n';
  if (out.failures > 0) std::cout << command << ": " << out.failures << " degenerate window(s) skipped\n";
  for (const auto& n : out.notes) std::cout << command << ": " << n << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and drift estimation for semi-linear stochastic heat equations", "spde_react"};
  app.set_version_flag("--version", SPDE_VERSION);
  app.require_subcommand(1);

  Options opt;
  std::string chosen;
  for (const auto& name : spde::command_names()) {
    auto* sub = app.add_subcommand(name, describe(name));
    sub->add_option("--config", opt.config, "configuration file")->required();
    sub->add_option("--seed", opt.seed, "base seed (run r uses seed + r)");
    sub->add_option("--runs", opt.runs, "number of Monte-Carlo runs")->check(CLI::PositiveNumber);
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--workers", opt.workers, "worker threads (default: SPDE_REACT_WORKERS or all cores)")
        ->check(CLI::NonNegativeNumber);
    sub->callback([&chosen, name] { chosen = name; });
  }

  if (argc > 1 && argv[1][0] != '-') {
    const auto& names = spde::command_names();
    if (std::find(names.begin(), names.end(), std::string(argv[1])) == names.end()) {
      std::cerr << "error: unknown subcommand '" << argv[1] << "'\n\n" << app.help();
      return 1;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << SPDE_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    return run(chosen, opt);
  } catch (const spde::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const spde::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
