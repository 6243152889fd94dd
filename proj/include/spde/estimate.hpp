#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spde/simulate.hpp"

namespace spde {

using RealFn = std::function<double(double)>;

/// One-sided kernels: supp(minus) in [-1, 0], supp(plus) in [0, 1].
struct KernelPair {
  RealFn minus;
  RealFn plus;
};

double tent_minus(double x);
double tent_plus(double x);

/// Tent kernels peaking at -1/2 and 1/2.
KernelPair default_kernels();

/// (a K_-, b K_+).
KernelPair scale_kernels(const KernelPair& k, double a, double b);

/// x -> g((x - x0) / h).
RealFn localize(RealFn g, double h, double x0);

/// Data-driven weights. j = t_m1 * t_p2 + t_p1 * t_m2.
struct Weights {
  double t_m1 = 0.0;
  double t_p1 = 0.0;
  double t_m2 = 0.0;
  double t_p2 = 0.0;
  double j = 0.0;
  double i_m = 0.0;
  double i_p = 0.0;
};

enum class EstimatorMode { SmallDiffusivity, GrowingWindow };

struct EstimatorConfig {
  double x0 = 0.0;
  double h = 0.1;
  KernelPair kernels = default_kernels();
  double beta = 2.0;
  double nu_known = 1.0;
  double sigma = 1.0;
  EstimatorMode mode = EstimatorMode::SmallDiffusivity;
  double gamma = 0.0;  ///< |Gamma|, growing-window mode only
  double alpha_bar = 0.05;
  std::optional<double> zeta;  ///< null hypothesis value for the test statistic

  /// sigma in small-diffusivity mode, 1 in growing-window mode.
  double noise_level() const { return mode == EstimatorMode::GrowingWindow ? 1.0 : sigma; }
  void validate() const;
};

/// dt*dx weighted sums over the index set {(i, k) : y_k in Gamma,
/// i < n_time, |X_{t_i}(y_k) - x0| <= h}. The m/p suffix marks K_- / K_+.
/// Y is the forward time difference, A the discrete generator.
struct WindowSums {
  double t_m1 = 0.0, t_p1 = 0.0;
  double t_m2 = 0.0, t_p2 = 0.0;
  double i_m = 0.0, i_p = 0.0;
  double ky_m = 0.0, ky_p = 0.0;
  double ka_m = 0.0, ka_p = 0.0;
  double kyy_m = 0.0, kyy_p = 0.0;
  double kya_m = 0.0, kya_p = 0.0;
  double kaa_m = 0.0, kaa_p = 0.0;
  std::size_t count = 0;
};

/// Streams consecutive states into WindowSums for one estimator config.
class WindowAccumulator {
 public:
  WindowAccumulator(const EstimatorConfig& cfg, const ModelSpec& model, const GridSpec& grid);

  void add_step(std::span<const double> current, std::span<const double> next);
  const WindowSums& sums() const { return sums_; }

 private:
  KernelPair kernels_;
  double x0_, h_;
  double dx_, dt_, weight_;
  Boundary boundary_;
  std::vector<std::size_t> cells_;
  std::vector<double> dispersion2_;
  WindowSums sums_;
};

/// Accumulates several configs (e.g. an x0 sweep) along one trajectory.
class EstimatorObserver final : public StepObserver {
 public:
  EstimatorObserver(std::span<const EstimatorConfig> configs, const ModelSpec& model, const GridSpec& grid);
  void on_step(std::size_t i, std::span<const double> current, std::span<const double> next) override;
  const WindowAccumulator& at(std::size_t c) const { return accs_[c]; }
  std::size_t size() const { return accs_.size(); }

 private:
  std::vector<WindowAccumulator> accs_;
};

/// Feeds every stored time step of a trajectory through an accumulator.
WindowSums accumulate(const Trajectory& traj, const EstimatorConfig& cfg);

Weights weights_from(const WindowSums& sums);
Weights compute_weights(const Trajectory& traj, const EstimatorConfig& cfg);

/// x -> (t_p2 K_{-,h}(x) + t_m2 K_{+,h}(x)) / j. Throws DegenerateWindow
/// when j <= 0.
RealFn random_kernel(const Weights& w, const KernelPair& kernels, double h, double x0);

/// Central second difference of X_{t_i} at y_k with boundary ghost values.
/// Throws std::out_of_range for indices outside the grid.
double discrete_generator(const Trajectory& traj, std::size_t i, std::size_t k);

struct EstimateReport {
  double x0 = 0.0;
  double h = 0.0;
  double f_hat = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::optional<double> test_statistic;
  Weights weights;
  std::size_t n_window_points = 0;

  static std::string csv_header();
  std::string csv_row() const;
};

/// Weighted least squares solution from accumulated sums. Throws
/// DegenerateWindow when j <= 0.
EstimateReport report_from_sums(const WindowSums& sums, const EstimatorConfig& cfg);

EstimateReport estimate(const Trajectory& traj, const EstimatorConfig& cfg);

struct TestResult {
  double statistic = 0.0;
  bool reject = false;
};

/// Two-sided test of f(x0) = zeta at level alpha_bar.
TestResult hypothesis_test(const EstimateReport& report, double zeta, double alpha_bar);

/// h = c * sigma^{2/(1+2 beta)}.
double select_bandwidth(double sigma, double beta, double constant = 1.0);

/// h = c * gamma^{-1/(1+2 beta)}.
double select_bandwidth_growing(double gamma, double beta, double constant = 1.0);

/// sum K^ [Y - nu A - zeta]^2 minimised over zeta, as a function of nu.
double wls_objective(const WindowSums& sums, double nu);

struct JointEstimate {
  double nu_hat = 0.0;
  double f_hat = 0.0;
  double objective = 0.0;
  bool flat = false;        ///< objective does not depend on nu
  bool bracket_ok = true;   ///< false when the minimiser sits on a bracket end
};

/// Golden-section search of wls_objective over [nu_lo, nu_hi].
JointEstimate joint_from_sums(const WindowSums& sums, double nu_lo, double nu_hi);
JointEstimate joint_estimate(const Trajectory& traj, const EstimatorConfig& cfg, double nu_lo, double nu_hi);

}  // namespace spde
