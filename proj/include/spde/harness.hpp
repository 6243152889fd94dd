#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spde/config.hpp"
#include "spde/ergodics.hpp"
#include "spde/estimate.hpp"

namespace spde {

struct MCSummary {
  double median = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double iqr = 0.0;
  double rmse = 0.0;
  double coverage_rate = 0.0;
  std::size_t n_ok = 0;
};

/// Quantiles (type 7), RMSE and CI coverage against true_f. NaN fields when
/// `runs` is empty.
MCSummary summarize(std::span<const EstimateReport> runs, double true_f);

/// Monte-Carlo result at one x0. per_run holds the successful runs in run
/// order, run_index their indices.
struct MCReport {
  double x0 = 0.0;
  double true_f = 0.0;
  std::vector<EstimateReport> per_run;
  std::vector<std::size_t> run_index;
  std::size_t n_failed = 0;  ///< runs with a degenerate window
  MCSummary summary;
};

/// Simulates n_runs trajectories (seeds base_seed + r) and estimates at every
/// config along each one. A degenerate window yields an empty slot.
std::vector<std::vector<std::optional<EstimateReport>>> estimate_runs(const ModelSpec& model, const GridSpec& grid,
                                                                      std::span<const EstimatorConfig> configs,
                                                                      std::size_t n_runs, std::uint64_t base_seed,
                                                                      int workers);

/// One MCReport per x0 of cfg.x0_grid.
std::vector<MCReport> run_figure_experiment(const ExperimentConfig& cfg);

struct RateRow {
  double nu = 0.0;
  double sigma = 0.0;
  double h = 0.0;
  double rmse = 0.0;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
};

struct RateTable {
  std::vector<RateRow> rows;
  std::optional<double> fitted_slope;  ///< empty when sigma does not vary
  double target_slope = 0.0;           ///< 2 beta / (1 + 2 beta)
};

/// RMSE at estimator.x0 for every nu in cfg.nu_list (at least three).
RateTable run_rate_experiment(const ExperimentConfig& cfg);

struct CoverageResult {
  double coverage_rate = 0.0;
  double mc_stderr = 0.0;  ///< binomial standard error
  MCReport report;
};

CoverageResult run_coverage_experiment(const ExperimentConfig& cfg);

struct GrowingRow {
  double gamma = 0.0;
  double h = 0.0;
  std::size_t n_space = 0;
  double rmse = 0.0;
  double median = 0.0;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
};

struct GrowingTable {
  std::vector<GrowingRow> rows;
  std::optional<double> trend_slope;  ///< slope of log RMSE against log gamma
};

/// Neumann domain (-gamma/2 - buffer, gamma/2 + buffer) observed on
/// (-gamma/2, gamma/2).
ModelSpec growing_window_model(const ModelSpec& base, double gamma, double buffer);
/// Grid with spacing as close to dx as the domain allows and n_time = T/dt.
GridSpec growing_window_grid(const ModelSpec& model, double dx, double dt);

/// RMSE at estimator.x0 per gamma of cfg.gamma_list (non-decreasing) with
/// h = bandwidth_constant * gamma^{-1/(1+2 beta)}.
GrowingTable run_growing_window_experiment(const ExperimentConfig& cfg);

/// Subcommand names accepted by run_command.
const std::vector<std::string>& command_names();

struct CommandOutput {
  std::vector<std::string> files;  ///< written into output_dir, manifest excluded
  std::size_t failures = 0;
  std::vector<std::string> notes;
};

/// Runs one subcommand and writes its CSVs plus manifest.toml into
/// cfg.output_dir. Throws ConfigError for an unknown command.
CommandOutput run_command(const std::string& command, const ExperimentConfig& cfg);

/// Comment header (version, command, timestamp, seeds, outputs) followed by
/// the effective configuration, so the manifest reads back as a config.
void write_manifest(const std::filesystem::path& path, const std::string& command, const ExperimentConfig& cfg,
                    const CommandOutput& output);

}  // namespace spde
