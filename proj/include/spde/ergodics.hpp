#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spde/estimate.hpp"
#include "spde/simulate.hpp"

namespace spde {

/// X_t(y_k) at one fixed time for n_runs independent seeds; row-major.
struct EnsembleSlice {
  std::vector<double> values;
  std::size_t n_runs = 0;
  std::size_t n_space = 0;
  std::size_t t_index = 0;
  double t = 0.0;
  ModelSpec model;
  GridSpec grid;
  std::vector<std::uint64_t> seeds;

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values).subspan(r * n_space, n_space);
  }
};

/// Seeds base_seed + r, r = 0 .. n_runs - 1.
EnsembleSlice collect_slice(const ModelSpec& model, const GridSpec& grid, std::size_t t_index, std::size_t n_runs,
                            std::uint64_t base_seed, int workers);

/// dx * sum_{y_k in Gamma} g(row[k]).
double spatial_average(std::span<const double> row, const RealFn& g, const ModelSpec& model, const GridSpec& grid);
double spatial_average(const Trajectory& traj, const RealFn& g, std::size_t t_index);

/// dx * #{y_k in Gamma : a_low <= row[k] <= a_high}.
double occupation_time(std::span<const double> row, double a_low, double a_high, const ModelSpec& model,
                       const GridSpec& grid);
double occupation_time(const Trajectory& traj, double a_low, double a_high, std::size_t t_index);

struct VarianceBoundInputs {
  double g_norm_l1 = 0.0;   ///< ||g'||_{L1}
  double g_norm_l2 = 0.0;   ///< ||g'||_{L2}
  double g_norm_inf = 0.0;  ///< ||g'||_inf
  double p_max = 0.0;
  double gamma_measure = 0.0;
  double b_norm = 1.0;
  double c0 = 1.0;
  double lip = 0.0;
  double alpha = 0.5;
  double t = 1.0;
  double sigma = 0.0;
};

struct VarianceBound {
  double l1_case = 0.0;
  double l2_case = 0.0;
  double inf_case = 0.0;
};

/// Explicit variance bound for the spatial average of g(X_t).
VarianceBound variance_bound(const VarianceBoundInputs& in);

/// Total variation of g on [lo, hi], i.e. ||g'||_{L1} for Lipschitz g
/// supported there.
double total_variation(const RealFn& g, double lo, double hi, std::size_t n = 100000);

struct ScanFunction {
  double h = 0.0;
  RealFn g;
  double g_prime_l1 = 0.0;
};

/// Localised K_+ at each bandwidth.
std::vector<ScanFunction> kernel_family(const RealFn& kernel, std::span<const double> hs, double x0);

struct VarianceScanRow {
  double h = 0.0;
  double mean = 0.0;
  double mc_var = 0.0;
  double mc_var_stderr = 0.0;
  double ratio_sigma2 = 0.0;
  double bound_l1 = 0.0;
  double ratio_bound = 0.0;
};

struct VarianceScan {
  std::vector<VarianceScanRow> rows;
  double sigma = 0.0;
  double p_max_hat = 0.0;
};

/// Monte-Carlo variance of spatial averages per bandwidth against sigma^2 and
/// the L1-case bound evaluated with the empirical p_max of the same slice.
VarianceScan variance_scan(const EnsembleSlice& slice, std::span<const ScanFunction> family);
VarianceScan variance_scan(const ModelSpec& model, const GridSpec& grid, std::span<const ScanFunction> family,
                           std::size_t t_index, std::size_t n_runs, std::uint64_t base_seed, int workers);

struct OccupationRow {
  double nu = 0.0;
  double sigma = 0.0;
  double mu_hat = 0.0;
  double mu_stderr = 0.0;
  double sd_ratio = 0.0;  ///< sd of M(A) / mu_hat
  double sd_ratio_stderr = 0.0;
  bool visited = true;   ///< false when M(A) = 0 in every run
};

/// Per nu (sigma = sigma_of_nu): MC mean of M(A) and sd of M(A)/mu_hat. The
/// grid is rebuilt for each nu with the same n_space and n_time.
std::vector<OccupationRow> occupation_concentration(const ModelSpec& model, const GridSpec& grid, double a_low,
                                                    double a_high, std::size_t t_index, std::span<const double> nu_list,
                                                    std::size_t n_runs, std::uint64_t base_seed, int workers);

struct DensityDiagnostic {
  std::vector<double> bin_left;
  std::vector<double> bin_right;
  std::vector<double> density;
  std::size_t n_samples = 0;
  double p_max_hat = 0.0;    ///< max bin density * t^{alpha/2}
  double envelope_c = 0.0;   ///< C in C t^{-alpha/2} exp(-x^2 / (2 C1 t^alpha))
  double envelope_c1 = 0.0;
  bool envelope_fitted = false;
  int envelope_violations = 0;  ///< bins above the envelope by more than 3 Poisson s.e.
  bool widened = false;         ///< bins were merged for lack of samples
  std::string warning;
};

/// Histogram of X_t(y_index) across runs. Needs at least 1000 runs.
DensityDiagnostic density_diagnostic(const EnsembleSlice& slice, std::size_t y_index, std::size_t n_bins);

/// Same, pooling every window cell of every run (at least 1000 samples).
DensityDiagnostic density_diagnostic_pooled(const EnsembleSlice& slice, std::size_t n_bins);

/// Histogram diagnostic of arbitrary samples (used by the two above).
DensityDiagnostic density_from_samples(std::span<const double> samples, double t, double alpha, std::size_t n_bins);

}  // namespace spde
