#include "spde/harness.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "spde/ensemble.hpp"
#include "spde/errors.hpp"
#include "spde/stats.hpp"
#include "spde/trajectory_io.hpp"

#ifndef SPDE_VERSION
#define SPDE_VERSION "unknown"
#endif

namespace spde {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Fixed formatting so that reruns are byte-identical.
std::string num(double v) {
  if (v == 0.0) v = 0.0;  // no "-0"
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& dir, const std::string& name, CommandOutput& out, const std::string& header)
      : file_(dir / name) {
    if (!file_) throw ConfigError("cannot write " + (dir / name).string());
    file_ << header << '\n';
    out.files.push_back(name);
  }
  template <class... T>
  void row(const T&... cells) {
    std::size_t i = 0;
    ((file_ << (i++ ? "," : "") << cell(cells)), ...);
    file_ << '\n';
  }

 private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }

  std::ofstream file_;
};

std::vector<EstimateReport> successes(const std::vector<std::vector<std::optional<EstimateReport>>>& runs,
                                      std::size_t c, std::vector<std::size_t>* index, std::size_t* failed) {
  std::vector<EstimateReport> ok;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (runs[r][c]) {
      ok.push_back(*runs[r][c]);
      if (index) index->push_back(r);
    } else if (failed) {
      ++*failed;
    }
  }
  return ok;
}

MCReport make_report(const std::vector<std::vector<std::optional<EstimateReport>>>& runs, std::size_t c, double x0,
                     double true_f) {
  MCReport rep;
  rep.x0 = x0;
  rep.true_f = true_f;
  rep.per_run = successes(runs, c, &rep.run_index, &rep.n_failed);
  rep.summary = summarize(rep.per_run, true_f);
  return rep;
}

std::optional<double> log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 2) return std::nullopt;
  const auto fit = stats::least_squares_line(lx, ly);
  if (!fit.defined) return std::nullopt;
  return fit.slope;
}

int workers_of(const ExperimentConfig& cfg) { return resolve_workers(cfg.workers); }

}  // namespace

MCSummary summarize(std::span<const EstimateReport> runs, double true_f) {
  MCSummary s;
  s.n_ok = runs.size();
  if (runs.empty()) {
    s.median = s.q05 = s.q95 = s.q25 = s.q75 = s.iqr = s.rmse = s.coverage_rate = kNaN;
    return s;
  }
  std::vector<double> f(runs.size());
  double sq = 0.0;
  std::size_t covered = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    f[r] = runs[r].f_hat;
    sq += (f[r] - true_f) * (f[r] - true_f);
    if (runs[r].ci_low <= true_f && true_f <= runs[r].ci_high) ++covered;
  }
  s.median = stats::quantile(f, 0.5);
  s.q05 = stats::quantile(f, 0.05);
  s.q95 = stats::quantile(f, 0.95);
  s.q25 = stats::quantile(f, 0.25);
  s.q75 = stats::quantile(f, 0.75);
  s.iqr = s.q75 - s.q25;
  s.rmse = std::sqrt(sq / static_cast<double>(runs.size()));
  s.coverage_rate = static_cast<double>(covered) / static_cast<double>(runs.size());
  return s;
}

std::vector<std::vector<std::optional<EstimateReport>>> estimate_runs(const ModelSpec& model, const GridSpec& grid,
                                                                      std::span<const EstimatorConfig> configs,
                                                                      std::size_t n_runs, std::uint64_t base_seed,
                                                                      int workers) {
  grid.check_against(model);
  for (const auto& c : configs) c.validate();
  return map_runs(n_runs, workers, [&](std::size_t r) {
    EstimatorObserver obs(configs, model, grid);
    simulate_streaming(model, grid, base_seed + r, obs);
    std::vector<std::optional<EstimateReport>> out(configs.size());
    for (std::size_t c = 0; c < configs.size(); ++c) {
      try {
        out[c] = report_from_sums(obs.at(c).sums(), configs[c]);
      } catch (const DegenerateWindow&) {
        out[c].reset();
      }
    }
    return out;
  });
}

std::vector<MCReport> run_figure_experiment(const ExperimentConfig& cfg) {
  if (!cfg.x0_grid || cfg.x0_grid->empty()) throw ConfigError("figure: experiment.x0_grid is required");
  std::vector<EstimatorConfig> configs;
  for (double x0 : *cfg.x0_grid) configs.push_back(cfg.estimator_at(x0, cfg.model));
  const auto runs = estimate_runs(cfg.model, cfg.grid, configs, cfg.n_runs, cfg.base_seed, workers_of(cfg));
  std::vector<MCReport> out;
  for (std::size_t c = 0; c < configs.size(); ++c)
    out.push_back(make_report(runs, c, configs[c].x0, cfg.model.reaction(configs[c].x0)));
  return out;
}

RateTable run_rate_experiment(const ExperimentConfig& cfg) {
  if (!cfg.nu_list || cfg.nu_list->size() < 3) throw ConfigError("rate: experiment.nu_list needs at least 3 values");
  RateTable table;
  const double beta = cfg.estimator.beta;
  table.target_slope = 2.0 * beta / (1.0 + 2.0 * beta);
  std::vector<double> sigmas, rmses;
  for (double nu : *cfg.nu_list) {
    ModelSpec m = cfg.model;
    m.nu = nu;
    m.sigma_override.reset();
    m.validate();
    EstimatorConfig e = cfg.estimator_at(cfg.estimator.x0, m);
    e.nu_known = nu;
    if (!cfg.auto_bandwidth) e.h = select_bandwidth(e.sigma, beta, cfg.bandwidth_constant);
    const auto runs = estimate_runs(m, cfg.grid, std::span(&e, 1), cfg.n_runs, cfg.base_seed, workers_of(cfg));
    RateRow row;
    row.nu = nu;
    row.sigma = e.sigma;
    row.h = e.h;
    const auto ok = successes(runs, 0, nullptr, &row.n_failed);
    row.n_ok = ok.size();
    row.rmse = summarize(ok, m.reaction(e.x0)).rmse;
    sigmas.push_back(row.sigma);
    rmses.push_back(row.rmse);
    table.rows.push_back(row);
  }
  table.fitted_slope = log_log_slope(sigmas, rmses);
  return table;
}

CoverageResult run_coverage_experiment(const ExperimentConfig& cfg) {
  const auto e = cfg.estimator_at(cfg.estimator.x0, cfg.model);
  const auto runs = estimate_runs(cfg.model, cfg.grid, std::span(&e, 1), cfg.n_runs, cfg.base_seed, workers_of(cfg));
  CoverageResult res;
  res.report = make_report(runs, 0, e.x0, cfg.model.reaction(e.x0));
  res.coverage_rate = res.report.summary.coverage_rate;
  const auto n = static_cast<double>(res.report.summary.n_ok);
  res.mc_stderr = n > 0 ? std::sqrt(res.coverage_rate * (1.0 - res.coverage_rate) / n) : kNaN;
  return res;
}

ModelSpec growing_window_model(const ModelSpec& base, double gamma, double buffer) {
  if (!(gamma > 0.0)) throw ConfigError("growing window: gamma must be positive");
  ModelSpec m = base;
  m.domain.boundary = Boundary::Neumann;
  m.domain.gamma_left = -gamma / 2.0;
  m.domain.gamma_right = gamma / 2.0;
  m.domain.left = m.domain.gamma_left - buffer;
  m.domain.right = m.domain.gamma_right + buffer;
  m.validate();
  return m;
}

GridSpec growing_window_grid(const ModelSpec& model, double dx, double dt) {
  const auto cells = std::max<long long>(4, std::llround(model.domain.length() / dx));
  const auto steps = std::max<long long>(1, std::llround(model.horizon / dt));
  return GridSpec::for_model(model, static_cast<std::size_t>(cells - 1), static_cast<std::size_t>(steps));
}

GrowingTable run_growing_window_experiment(const ExperimentConfig& cfg) {
  if (!cfg.gamma_list || cfg.gamma_list->empty())
    throw ConfigError("growing-window: experiment.gamma_list is required");
  if (!std::is_sorted(cfg.gamma_list->begin(), cfg.gamma_list->end()))
    throw ConfigError("growing-window: experiment.gamma_list must be non-decreasing");
  GrowingTable table;
  std::vector<double> gammas, rmses;
  for (double gamma : *cfg.gamma_list) {
    const auto m = growing_window_model(cfg.model, gamma, cfg.buffer);
    const auto grid = growing_window_grid(m, cfg.gw_dx, cfg.gw_dt);
    EstimatorConfig e = cfg.estimator;
    e.mode = EstimatorMode::GrowingWindow;
    e.gamma = gamma;
    e.sigma = m.sigma();
    if (!cfg.source.has("estimator", "nu")) e.nu_known = m.nu;
    e.h = select_bandwidth_growing(gamma, e.beta, cfg.bandwidth_constant);
    const auto runs = estimate_runs(m, grid, std::span(&e, 1), cfg.n_runs, cfg.base_seed, workers_of(cfg));
    GrowingRow row;
    row.gamma = gamma;
    row.h = e.h;
    row.n_space = grid.n_space;
    const auto ok = successes(runs, 0, nullptr, &row.n_failed);
    row.n_ok = ok.size();
    const auto s = summarize(ok, m.reaction(e.x0));
    row.rmse = s.rmse;
    row.median = s.median;
    gammas.push_back(gamma);
    rmses.push_back(row.rmse);
    table.rows.push_back(row);
  }
  if (table.rows.size() >= 2) table.trend_slope = log_log_slope(gammas, rmses);
  return table;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"simulate", "estimate",     "figure",         "rate",         "coverage",
                                              "occupation", "variance-scan", "growing-window", "rescale-check"};
  return names;
}

namespace {

std::vector<double> x0_list(const ExperimentConfig& cfg) {
  return cfg.x0_grid ? *cfg.x0_grid : std::vector<double>{cfg.estimator.x0};
}

void write_gnuplot(const std::filesystem::path& dir, CommandOutput& out) {
  std::ofstream gp(dir / "figure3.gp");
  if (!gp) throw ConfigError("cannot write " + (dir / "figure3.gp").string());
  gp << "# gnuplot figure3.gp  (run inside the output directory)\n"
        "set datafile separator ','\n"
        "set terminal pngcairo size 1200,450\n"
        "set output 'figure3.png'\n"
        "set multiplot layout 1,2\n"
        "set xlabel 'x0'\n"
        "set key top right\n"
        "set title 'Median and 5%/95% quantiles of the estimate'\n"
        "plot 'figure3_left.csv' every ::1 using 1:3:4 with filledcurves lc rgb '#c8d8ec' title '5%-95%', \\\n"
        "     '' every ::1 using 1:2 with linespoints lw 2 pt 7 title 'median', \\\n"
        "     '' every ::1 using 1:6 with lines dt 2 lc rgb 'black' title 'f'\n"
        "set title 'Interquartile range'\n"
        "plot 'figure3_right.csv' every ::1 using 1:4 with linespoints lw 2 pt 7 title 'IQR'\n"
        "unset multiplot\n";
  out.files.push_back("figure3.gp");
}

void cmd_simulate(const ExperimentConfig& cfg, const std::filesystem::path& dir, CommandOutput& out) {
  const auto traj = simulate(cfg.model, cfg.grid, cfg.base_seed);
  {
    std::ofstream csv(dir / "trajectory.csv");
    if (!csv) throw ConfigError("cannot write " + (dir / "trajectory.csv").string());
    io::write_csv(traj, csv, cfg.time_stride);
    out.files.push_back("trajectory.csv");
  }
  std::ofstream bin(dir / "trajectory.bin", std::ios::binary);
  if (!bin) throw ConfigError("cannot write " + (dir / "trajectory.bin").string());
  io::write_binary(traj, bin);
  out.files.push_back("trajectory.bin");
}

void cmd_estimate(const ExperimentConfig& cfg, const std::filesystem::path& dir, CommandOutput& out) {
  const auto traj = cfg.trajectory ? io::load_trajectory(*cfg.trajectory, cfg.model, cfg.grid)
                                   : simulate(cfg.model, cfg.grid, cfg.base_seed);
  if (!cfg.trajectory) out.notes.push_back("trajectory simulated from base_seed");
  CsvWriter csv(dir, "estimate.csv", out, EstimateReport::csv_header());
  std::vector<EstimateReport> reports;
  for (double x0 : x0_list(cfg)) {
    reports.push_back(estimate(traj, cfg.estimator_at(x0, cfg.model)));
    csv.row(reports.back().csv_row());
  }
  if (cfg.estimator.zeta) {
    CsvWriter test(dir, "test.csv", out, "x0,zeta,statistic,reject");
    for (const auto& r : reports) {
      const auto t = hypothesis_test(r, *cfg.estimator.zeta, cfg.estimator.alpha_bar);
      test.row(r.x0, *cfg.estimator.zeta, t.statistic, std::string(t.reject ? "1" : "0"));
    }
  }
}

void cmd_figure(const ExperimentConfig& cfg, const std::filesystem::path& dir, CommandOutput& out) {
  const auto reports = run_figure_experiment(cfg);
  {
    CsvWriter left(dir, "figure3_left.csv", out, "x0,median,q05,q95,iqr,true_f");
    CsvWriter right(dir, "figure3_right.csv", out, "x0,q25,q75,iqr");
    CsvWriter counts(dir, "figure3_counts.csv", out, "x0,n_ok,n_failed");
    for (const auto& r : reports) {
      const auto& s = r.summary;
      left.row(r.x0, s.median, s.q05, s.q95, s.iqr, r.true_f);
      right.row(r.x0, s.q25, s.q75, s.iqr);
      counts.row(r.x0, s.n_ok, r.n_failed);
      out.failures += r.n_failed;
    }
  }
  {
    CsvWriter runs(dir, "figure_runs.csv", out, "run,seed," + EstimateReport::csv_header());
    for (const auto& r : reports)
      for (std::size_t i = 0; i < r.per_run.size(); ++i)
        runs.row(r.run_index[i], std::to_string(cfg.base_seed + r.run_index[i]), r.per_run[i].csv_row());
  }
  write_gnuplot(dir, out);
}

void cmd_rate(const ExperimentConfig& cfg, const std::filesystem::path& dir, CommandOutput& out) {
  const auto table = run_rate_experiment(cfg);
  const double slope = table.fitted_slope.value_or(kNaN);
  CsvWriter csv(dir, "rate.csv", out, "nu,sigma,h,rmse,fitted_slope");
  for (const auto& r : table.rows) {
    csv.row(r.nu, r.sigma, r.h, r.rmse, slope);
    out.failures += r.n_failed;
  }
  out.notes.push_back("target_slope = " + num(table.target_slope));
  if (!table.fitted_slope) out.notes.push_back("fitted_slope undefined: sigma does not vary across nu_list");
}

void cmd_coverage(const ExperimentConfig& cfg, const std::filesystem::path& dir, CommandOutput& out) {
  const auto res = run_coverage_experiment(cfg);
  CsvWriter csv(dir, "coverage.csv", out, "x0,true_f,alpha_bar,coverage_rate,mc_stderr,n_ok,n_failed");
  csv.row(res.report.x0, res.report.true_f, cfg.estimator.alpha_bar, res.coverage_rate, res.mc_stderr,
          res.report.summary.n_ok, res.report.n_failed);
  out.failures += res.report.n_failed;
  CsvWriter runs(dir, "coverage_runs.csv", out, "run,seed," + EstimateReport::csv_header());
  for (std::size_t i = 0; i < res.report.per_run.size(); ++i)
    runs.row(res.report.run_index[i], std::to_string(cfg.base_seed + res.report.run_index[i]),
             res.report.per_run[i].csv_row());
}

void cmd_growing(const ExperimentConfig& cfg, const std::filesystem::path& dir, CommandOutput& out) {
  const auto table = run_growing_window_experiment(cfg);
  CsvWriter csv(dir, "growing_window.csv", out, "gamma,h,n_space,rmse,median,n_ok,n_failed");
  for (const auto& r : table.rows) {
    csv.row(r.gamma, r.h, r.n_space, r.rmse, r.median, r.n_ok, r.n_failed);
    out.failures += r.n_failed;
  }
  if (table.trend_slope) out.notes.push_back("trend_slope = " + num(*table.trend_slope));
}

void cmd_occupation(const ExperimentConfig& cfg, const std::filesystem::path& dir, CommandOutput& out) {
  const std::vector<double> nus = cfg.nu_list ? *cfg.nu_list : std::vector<double>{cfg.model.nu};
  const auto rows = occupation_concentration(cfg.model, cfg.grid, cfg.a_low, cfg.a_high, cfg.t_index(), nus,
                                             cfg.n_runs, cfg.base_seed, workers_of(cfg));
  CsvWriter csv(dir, "occupation.csv", out, "nu,sigma,stat,value,mc_stderr");
  for (const auto& r : rows) {
    csv.row(r.nu, r.sigma, "mu_hat", r.mu_hat, r.mu_stderr);
    csv.row(r.nu, r.sigma, "sd_ratio", r.sd_ratio, r.sd_ratio_stderr);
    if (!r.visited) out.notes.push_back("A never visited at nu = " + num(r.nu));
  }
}

void cmd_variance_scan(const ExperimentConfig& cfg, const std::filesystem::path& dir, CommandOutput& out) {
  const std::vector<double> hs = cfg.h_list ? *cfg.h_list : std::vector<double>{cfg.estimator.h};
  const auto family = kernel_family(tent_plus, hs, cfg.estimator.x0);
  const auto slice = collect_slice(cfg.model, cfg.grid, cfg.t_index(), cfg.n_runs, cfg.base_seed, workers_of(cfg));
  const auto scan = variance_scan(slice, family);
  {
    CsvWriter csv(dir, "variance_scan.csv", out, "nu,sigma,stat,value,mc_stderr");
    for (const auto& r : scan.rows) {
      const auto tag = "h=" + num(r.h);
      csv.row(cfg.model.nu, scan.sigma, tag + ":mean", r.mean, kNaN);
      csv.row(cfg.model.nu, scan.sigma, tag + ":mc_var", r.mc_var, r.mc_var_stderr);
      csv.row(cfg.model.nu, scan.sigma, tag + ":var_over_sigma2", r.ratio_sigma2, r.mc_var_stderr / (scan.sigma * scan.sigma));
      csv.row(cfg.model.nu, scan.sigma, tag + ":bound_l1", r.bound_l1, kNaN);
      csv.row(cfg.model.nu, scan.sigma, tag + ":var_over_bound", r.ratio_bound, kNaN);
    }
    csv.row(cfg.model.nu, scan.sigma, "p_max_hat", scan.p_max_hat, kNaN);
  }
  const auto density = density_diagnostic_pooled(slice, cfg.n_bins);
  CsvWriter hist(dir, "density.csv", out, "bin_left,bin_right,density");
  for (std::size_t b = 0; b < density.density.size(); ++b)
    hist.row(density.bin_left[b], density.bin_right[b], density.density[b]);
  if (!density.warning.empty()) out.notes.push_back(density.warning);
  out.notes.push_back("envelope_violations = " + std::to_string(density.envelope_violations));
}

void cmd_rescale(const ExperimentConfig& cfg, const std::filesystem::path& dir, CommandOutput& out) {
  const auto rep = rescale_check(cfg.model, cfg.grid, cfg.t_index(), cfg.n_runs, cfg.base_seed, cfg.n_points,
                                 workers_of(cfg));
  CsvWriter csv(dir, "rescale.csv", out, "y_rescaled,mean_original,mean_rescaled,var_original,var_rescaled,mean_z");
  for (const auto& p : rep.points)
    csv.row(p.y_rescaled, p.mean_original, p.mean_rescaled, p.var_original, p.var_rescaled, p.mean_z);
  out.notes.push_back("max_abs_mean_z = " + num(rep.max_abs_mean_z));
  out.notes.push_back("max_rel_var_diff = " + num(rep.max_rel_var_diff));
}

std::string utc_timestamp() {
  const auto now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

CommandOutput run_command(const std::string& command, const ExperimentConfig& cfg) {
  using Fn = void (*)(const ExperimentConfig&, const std::filesystem::path&, CommandOutput&);
  static const std::vector<std::pair<std::string, Fn>> table{
      {"simulate", cmd_simulate},         {"estimate", cmd_estimate},          {"figure", cmd_figure},
      {"rate", cmd_rate},                 {"coverage", cmd_coverage},          {"occupation", cmd_occupation},
      {"variance-scan", cmd_variance_scan}, {"growing-window", cmd_growing},   {"rescale-check", cmd_rescale}};
  const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == command; });
  if (it == table.end()) throw ConfigError("unknown command '" + command + "'");

  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + cfg.output_dir.string() + ": " + ec.message());
  CommandOutput out;
  it->second(cfg, cfg.output_dir, out);
  write_manifest(cfg.output_dir / "manifest.toml", command, cfg, out);
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::string& command, const ExperimentConfig& cfg,
                    const CommandOutput& output) {
  std::ofstream m(path);
  if (!m) throw ConfigError("cannot write " + path.string());
  m << "# spde_react " << SPDE_VERSION << '\n'
    << "# command = " << command << '\n'
    << "# timestamp = " << utc_timestamp() << '\n';
  if (command == "estimate" && cfg.trajectory)
    m << "# trajectory = " << cfg.trajectory->string() << '\n';
  else if (command == "simulate" || command == "estimate")
    m << "# seeds = " << cfg.base_seed << " (single trajectory)\n";
  else
    m << "# seeds = " << cfg.base_seed << " .. " << cfg.base_seed + cfg.n_runs - 1 << " (run r uses base_seed + r)\n";
  m << "# failures = " << output.failures << '\n';
  m << "# outputs =";
  for (const auto& f : output.files) m << ' ' << f;
  m << '\n';
  for (const auto& n : output.notes) m << "# note: " << n << '\n';
  m << '\n' << cfg.source.dump();
}

}  // namespace spde
