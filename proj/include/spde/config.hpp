#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spde/estimate.hpp"
#include "spde/model.hpp"
#include "spde/simulate.hpp"

namespace spde {

/// Flat `[section]` / `key = value` text. `#` starts a comment, strings may be
/// quoted, lists are written `[a, b, c]`. Sections and keys are kept sorted so
/// that dump() is canonical.
class Config {
 public:
  /// Throws ConfigError with the source name and line number on bad syntax.
  static Config parse(std::string_view text, const std::string& source = "<string>");
  /// Throws ConfigError naming the path when it cannot be read.
  static Config load(const std::filesystem::path& path);

  void set(const std::string& section, const std::string& key, std::string value);
  bool has(const std::string& section, const std::string& key) const;
  std::optional<std::string> raw(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  std::optional<double> get_optional_double(const std::string& section, const std::string& key) const;
  std::int64_t get_int(const std::string& section, const std::string& key, std::int64_t fallback) const;
  std::optional<std::vector<double>> get_list(const std::string& section, const std::string& key) const;

  /// Throws ConfigError for sections or keys outside the allowed set.
  void check_keys(const std::map<std::string, std::vector<std::string>>& allowed) const;

  std::string dump() const;
  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::map<std::string, std::map<std::string, std::string>> entries_;
};

struct ExperimentConfig {
  ModelSpec model;
  GridSpec grid;
  EstimatorConfig estimator;
  bool auto_bandwidth = false;
  double bandwidth_constant = 1.0;

  std::size_t n_runs = 200;
  std::uint64_t base_seed = 1;
  int workers = 0;  ///< 0 defers to resolve_workers
  std::optional<std::vector<double>> x0_grid;
  std::optional<std::vector<double>> nu_list;
  std::optional<std::vector<double>> gamma_list;
  std::optional<std::vector<double>> h_list;
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> trajectory;

  double t = 1.0;  ///< observation time for the fixed-time statistics
  double a_low = 0.5;
  double a_high = 1.5;
  std::size_t n_bins = 60;
  std::size_t n_points = 5;
  std::size_t time_stride = 1;
  double buffer = 5.0;
  double gw_dx = 0.1;
  double gw_dt = 1e-4;

  Config source;

  /// Time index closest to t on the grid. Throws ConfigError past the horizon.
  std::size_t t_index() const;
  /// Estimator at x0 for the given model: sigma and nu taken from the model,
  /// h from the bandwidth rule when auto_bandwidth is set.
  EstimatorConfig estimator_at(double x0, const ModelSpec& model) const;
  void validate() const;
};

/// Builds and validates a full experiment description.
ExperimentConfig build_experiment(const Config& config);

ModelSpec build_model(const Config& config);
GridSpec build_grid(const Config& config, const ModelSpec& model);

/// Evenly spaced values from lo to hi inclusive.
std::vector<double> linspace_step(double lo, double hi, double step);

}  // namespace spde
