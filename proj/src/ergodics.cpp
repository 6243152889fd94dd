#include "spde/ergodics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spde/errors.hpp"
#include "spde/stats.hpp"

namespace spde {

EnsembleSlice collect_slice(const ModelSpec& model, const GridSpec& grid, std::size_t t_index, std::size_t n_runs,
                            std::uint64_t base_seed, int workers) {
  EnsembleSlice s;
  s.values = ensemble_rows(model, grid, t_index, n_runs, base_seed, workers);
  s.n_runs = n_runs;
  s.n_space = grid.n_space;
  s.t_index = t_index;
  s.t = grid.t(t_index);
  s.model = model;
  s.grid = grid;
  s.seeds.resize(n_runs);
  for (std::size_t r = 0; r < n_runs; ++r) s.seeds[r] = base_seed + r;
  return s;
}

double spatial_average(std::span<const double> row, const RealFn& g, const ModelSpec& model, const GridSpec& grid) {
  double acc = 0.0;
  for (std::size_t k = 0; k < grid.n_space; ++k)
    if (model.domain.in_window(grid.y(k))) acc += g(row[k]);
  return grid.dx * acc;
}

double spatial_average(const Trajectory& traj, const RealFn& g, std::size_t t_index) {
  if (t_index >= traj.rows()) throw std::out_of_range("spatial_average: time index outside the grid");
  return spatial_average(traj.row(t_index), g, traj.model(), traj.grid());
}

double occupation_time(std::span<const double> row, double a_low, double a_high, const ModelSpec& model,
                       const GridSpec& grid) {
  if (a_low > a_high) throw ConfigError("occupation_time: a_low must not exceed a_high");
  std::size_t hits = 0;
  // the degenerate set [a, a] has measure zero
  if (a_low == a_high) return 0.0;
  for (std::size_t k = 0; k < grid.n_space; ++k)
    if (model.domain.in_window(grid.y(k)) && row[k] >= a_low && row[k] <= a_high) ++hits;
  return grid.dx * static_cast<double>(hits);
}

double occupation_time(const Trajectory& traj, double a_low, double a_high, std::size_t t_index) {
  if (t_index >= traj.rows()) throw std::out_of_range("occupation_time: time index outside the grid");
  return occupation_time(traj.row(t_index), a_low, a_high, traj.model(), traj.grid());
}

VarianceBound variance_bound(const VarianceBoundInputs& in) {
  if (!(in.alpha > 0.0 && in.alpha < 1.0)) throw ConfigError("variance_bound: alpha must lie in (0,1)");
  const double common = in.sigma * in.sigma * in.gamma_measure * in.b_norm * in.b_norm * in.c0 * in.c0 *
                        std::pow(in.t, 1.0 - in.alpha);
  const double lt = in.lip * in.t;
  const double growth = 2.0 * (1.0 + std::exp(2.0 * lt) * lt * lt);
  VarianceBound b;
  b.l1_case = common * in.g_norm_l1 * in.g_norm_l1 * in.p_max * in.p_max / (1.0 - in.alpha) * growth;
  b.l2_case = common * in.g_norm_l2 * in.g_norm_l2 * std::pow(in.t, in.alpha / 2.0) * in.p_max *
              std::exp(2.0 * in.c0 * lt);
  b.inf_case = common * in.g_norm_inf * in.g_norm_inf * std::pow(in.t, in.alpha) * growth;
  return b;
}

double total_variation(const RealFn& g, double lo, double hi, std::size_t n) {
  double tv = 0.0;
  double prev = g(lo);
  for (std::size_t i = 1; i <= n; ++i) {
    const double cur = g(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n));
    tv += std::abs(cur - prev);
    prev = cur;
  }
  return tv;
}

std::vector<ScanFunction> kernel_family(const RealFn& kernel, std::span<const double> hs, double x0) {
  // ||(g_h)'||_{L1} = ||g'||_{L1}, independent of h
  const double tv = total_variation(kernel, -2.0, 2.0);  // dyadic nodes hit the tent peaks
  std::vector<ScanFunction> out;
  for (double h : hs) out.push_back({h, localize(kernel, h, x0), tv});
  return out;
}

VarianceScan variance_scan(const EnsembleSlice& slice, std::span<const ScanFunction> family) {
  if (slice.n_runs < 100) throw ConfigError("variance_scan: needs at least 100 runs");
  const auto& model = slice.model;
  VarianceScan scan;
  scan.sigma = model.sigma();
  const auto density = density_diagnostic_pooled(slice, 60);
  scan.p_max_hat = density.p_max_hat;
  VarianceBoundInputs in;
  in.p_max = scan.p_max_hat;
  in.gamma_measure = model.domain.gamma_length();
  in.b_norm = model.noise.multiplier ? model.noise.multiplier->upper : 1.0;
  in.c0 = 1.0;
  in.lip = model.reaction.lipschitz_bound;
  in.alpha = alpha_of(model.noise);
  in.t = slice.t;
  in.sigma = scan.sigma;
  std::vector<double> avg(slice.n_runs);
  for (const auto& fam : family) {
    for (std::size_t r = 0; r < slice.n_runs; ++r) avg[r] = spatial_average(slice.row(r), fam.g, model, slice.grid);
    VarianceScanRow row;
    row.h = fam.h;
    row.mean = stats::mean(avg);
    row.mc_var = stats::variance(avg);
    row.mc_var_stderr = stats::variance_stderr(avg);
    const double s2 = scan.sigma * scan.sigma;
    row.ratio_sigma2 = s2 > 0.0 ? row.mc_var / s2 : 0.0;
    in.g_norm_l1 = fam.g_prime_l1;
    row.bound_l1 = variance_bound(in).l1_case;
    row.ratio_bound = row.bound_l1 > 0.0 ? row.mc_var / row.bound_l1 : 0.0;
    scan.rows.push_back(row);
  }
  return scan;
}

VarianceScan variance_scan(const ModelSpec& model, const GridSpec& grid, std::span<const ScanFunction> family,
                           std::size_t t_index, std::size_t n_runs, std::uint64_t base_seed, int workers) {
  return variance_scan(collect_slice(model, grid, t_index, n_runs, base_seed, workers), family);
}

std::vector<OccupationRow> occupation_concentration(const ModelSpec& model, const GridSpec& grid, double a_low,
                                                    double a_high, std::size_t t_index, std::span<const double> nu_list,
                                                    std::size_t n_runs, std::uint64_t base_seed, int workers) {
  if (n_runs < 2) throw ConfigError("occupation_concentration: needs at least two runs");
  std::vector<OccupationRow> rows;
  for (double nu : nu_list) {
    ModelSpec m = model;
    m.nu = nu;
    m.sigma_override.reset();
    const auto slice = collect_slice(m, grid, t_index, n_runs, base_seed, workers);
    std::vector<double> occ(n_runs);
    for (std::size_t r = 0; r < n_runs; ++r) occ[r] = occupation_time(slice.row(r), a_low, a_high, m, grid);
    OccupationRow row;
    row.nu = nu;
    row.sigma = m.sigma();
    row.mu_hat = stats::mean(occ);
    row.mu_stderr = std::sqrt(stats::variance(occ) / static_cast<double>(n_runs));
    row.visited = row.mu_hat > 0.0;
    if (row.visited) {
      row.sd_ratio = std::sqrt(stats::variance(occ)) / row.mu_hat;
      row.sd_ratio_stderr = row.sd_ratio / std::sqrt(2.0 * static_cast<double>(n_runs - 1));
    }
    rows.push_back(row);
  }
  return rows;
}

DensityDiagnostic density_from_samples(std::span<const double> samples, double t, double alpha, std::size_t n_bins) {
  if (samples.size() < 2) throw ConfigError("density_diagnostic: needs more than one sample");
  if (n_bins == 0) throw ConfigError("density_diagnostic: n_bins must be positive");
  DensityDiagnostic d;
  d.n_samples = samples.size();
  constexpr std::size_t min_per_bin = 5;
  if (samples.size() / n_bins < min_per_bin) {
    n_bins = std::max<std::size_t>(1, samples.size() / min_per_bin);
    d.widened = true;
    d.warning = "too few samples per bin; bins widened to " + std::to_string(n_bins);
  }
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / static_cast<double>(n_bins);
  std::vector<std::size_t> counts(n_bins, 0);
  for (double x : samples) {
    auto b = static_cast<std::size_t>((x - lo) / width);
    counts[std::min(b, n_bins - 1)]++;
  }
  const auto n = static_cast<double>(samples.size());
  double peak = 0.0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    d.bin_left.push_back(lo + width * static_cast<double>(b));
    d.bin_right.push_back(lo + width * static_cast<double>(b + 1));
    d.density.push_back(static_cast<double>(counts[b]) / (n * width));
    peak = std::max(peak, d.density.back());
  }
  d.p_max_hat = peak * std::pow(t, alpha / 2.0);

  // log p ~ a + b x~^2 on occupied bins
  const double centre = stats::mean(samples);
  std::vector<double> xs, ys;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (counts[b] == 0) continue;
    const double xm = 0.5 * (d.bin_left[b] + d.bin_right[b]) - centre;
    xs.push_back(xm * xm);
    ys.push_back(std::log(d.density[b]));
  }
  const auto fit = stats::least_squares_line(xs, ys);
  if (fit.defined && fit.slope < 0.0 && t > 0.0) {
    d.envelope_fitted = true;
    d.envelope_c = std::exp(fit.intercept) * std::pow(t, alpha / 2.0);
    d.envelope_c1 = -1.0 / (2.0 * fit.slope * std::pow(t, alpha));
    for (std::size_t b = 0; b < n_bins; ++b) {
      const double xm = 0.5 * (d.bin_left[b] + d.bin_right[b]) - centre;
      const double env = std::exp(fit.intercept + fit.slope * xm * xm);
      const double se = std::sqrt(static_cast<double>(counts[b])) / (n * width);
      if (d.density[b] > env + 3.0 * se) ++d.envelope_violations;
    }
  }
  return d;
}

DensityDiagnostic density_diagnostic(const EnsembleSlice& slice, std::size_t y_index, std::size_t n_bins) {
  if (slice.n_runs < 1000) throw ConfigError("density_diagnostic: needs at least 1000 runs");
  if (y_index >= slice.n_space) throw std::out_of_range("density_diagnostic: y index outside the grid");
  std::vector<double> xs(slice.n_runs);
  for (std::size_t r = 0; r < slice.n_runs; ++r) xs[r] = slice.row(r)[y_index];
  return density_from_samples(xs, slice.t, alpha_of(slice.model.noise), n_bins);
}

DensityDiagnostic density_diagnostic_pooled(const EnsembleSlice& slice, std::size_t n_bins) {
  std::vector<double> xs;
  for (std::size_t r = 0; r < slice.n_runs; ++r)
    for (std::size_t k = 0; k < slice.n_space; ++k)
      if (slice.model.domain.in_window(slice.grid.y(k))) xs.push_back(slice.row(r)[k]);
  if (slice.n_runs < 2 || xs.size() < 1000)
    throw ConfigError("density_diagnostic: needs at least 1000 pooled samples from several runs");
  return density_from_samples(xs, slice.t, alpha_of(slice.model.noise), n_bins);
}

}  // namespace spde
