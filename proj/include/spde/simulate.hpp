#pragma once

#include <cstdint>
#include <optional>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <span>
#include <vector>

#include "spde/model.hpp"

namespace spde {

using Rng = boost::random::mt19937_64;

/// Interior finite-difference grid. y_k = origin + (k + 1) dx, t_i = i dt.
struct GridSpec {
  std::size_t n_space = 0;
  std::size_t n_time = 0;
  double dx = 0.0;
  double dt = 0.0;
  double origin = 0.0;

  double y(std::size_t k) const { return origin + static_cast<double>(k + 1) * dx; }
  double t(std::size_t i) const { return static_cast<double>(i) * dt; }

  /// dx = |domain| / (n_space + 1), dt = horizon / n_time; n_time defaults to
  /// n_space^2.
  static GridSpec for_model(const ModelSpec& model, std::size_t n_space,
                            std::optional<std::size_t> n_time = std::nullopt);

  /// Throws ConfigError unless the grid spans model.domain and model.horizon.
  void check_against(const ModelSpec& model) const;
};

/// out = L x, the second-difference operator with ghost values set by the
/// boundary condition (zero for Dirichlet, mirrored for Neumann).
void apply_laplacian(std::span<const double> x, std::span<double> out, double dx, Boundary boundary);

/// Second difference at a single cell, same ghost convention as apply_laplacian.
double laplacian_at(std::span<const double> x, std::size_t k, double dx, Boundary boundary);

/// Pre-factorised tridiagonal system (I - nu dt L) solved by the Thomas algorithm.
class ImplicitStep {
 public:
  ImplicitStep(double nu, const GridSpec& grid, Boundary boundary);

  /// Overwrites rhs with the solution.
  void solve(std::span<double> rhs) const;

 private:
  double off_;
  std::vector<double> c_prime_;
  std::vector<double> inv_denom_;
};

/// Riesz covariance chi(y_j - y_k) = |y_j - y_k|^{-rho} with chi(0)
/// replaced by chi(dx/2). Row-major n_space x n_space.
std::vector<double> riesz_covariance(double rho, const GridSpec& grid);

/// Lower Cholesky factor of a symmetric matrix (row-major). If the plain
/// factorisation fails the diagonal is jittered by 1e-10 * trace / n once.
/// Throws NumericalError if that fails as well.
std::vector<double> cholesky_lower(std::vector<double> a, std::size_t n, bool* jittered = nullptr);

/// Draws discrete noise increments for one time step.
class NoiseIncrement {
 public:
  NoiseIncrement(const NoiseSpec& noise, Boundary boundary, const GridSpec& grid);

  void draw(Rng& rng, std::span<double> out);

  bool jittered() const { return jittered_; }

 private:
  enum class Kind { White, Correlated, Spectral };
  Kind kind_;
  std::size_t n_;
  double dt_;
  double white_sd_;
  std::vector<double> factor_;      // Cholesky factor or scaled eigenbasis, row-major
  std::vector<double> dispersion_;  // Sigma(y_k)
  std::vector<double> z_;
  bool has_dispersion_ = false;
  bool jittered_ = false;
  boost::random::normal_distribution<double> normal_;
};

std::vector<double> noise_increment(const NoiseSpec& noise, Boundary boundary, const GridSpec& grid, Rng& rng);

/// Semi-implicit Euler: (I - nu dt L) X^{i+1} = X^i + dt f(X^i) + sigma dW^i.
class Stepper {
 public:
  Stepper(const ModelSpec& model, const GridSpec& grid, std::uint64_t seed);

  std::span<const double> state() const { return current_; }
  std::span<const double> previous() const { return previous_; }
  std::size_t index() const { return index_; }

  /// Throws NumericalError when the new state is not finite.
  void advance();

 private:
  const ModelSpec* model_;
  GridSpec grid_;
  double sigma_;
  ImplicitStep implicit_;
  NoiseIncrement noise_;
  Rng rng_;
  std::vector<double> current_;
  std::vector<double> previous_;
  std::vector<double> increment_;
  std::size_t index_ = 0;
};

/// Receives consecutive states (X^i, X^{i+1}) for i = 0 .. n_time - 1.
class StepObserver {
 public:
  virtual ~StepObserver() = default;
  virtual void on_step(std::size_t i, std::span<const double> current, std::span<const double> next) = 0;
};

/// Runs one trajectory without storing it.
void simulate_streaming(const ModelSpec& model, const GridSpec& grid, std::uint64_t seed, StepObserver& observer);

/// Realised field values[i][k] = X_{t_i}(y_k), i = 0 .. n_time.
class Trajectory {
 public:
  Trajectory(ModelSpec model, GridSpec grid, std::uint64_t seed, std::vector<double> values);

  std::size_t rows() const { return grid_.n_time + 1; }
  std::size_t cols() const { return grid_.n_space; }
  double at(std::size_t i, std::size_t k) const { return values_[i * grid_.n_space + k]; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * grid_.n_space, grid_.n_space);
  }
  std::span<const double> values() const { return values_; }

  const GridSpec& grid() const { return grid_; }
  const ModelSpec& model() const { return model_; }
  std::uint64_t seed() const { return seed_; }

 private:
  ModelSpec model_;
  GridSpec grid_;
  std::uint64_t seed_;
  std::vector<double> values_;
};

Trajectory simulate(const ModelSpec& model, const GridSpec& grid, std::uint64_t seed);

/// Truncated eigen-series for Var X_t(y) of the free equation (f = 0,
/// X_0 = 0) with white noise and Dirichlet conditions on (0, 1).
double linear_variance_exact(double nu, double sigma, double t, double y, std::size_t n_modes);

/// Collects X_{t_index}(.) from n_runs trajectories with seeds base_seed + r.
/// Row-major n_runs x n_space.
std::vector<double> ensemble_rows(const ModelSpec& model, const GridSpec& grid, std::size_t t_index,
                                  std::size_t n_runs, std::uint64_t base_seed, int workers);

struct RescalePoint {
  double y_rescaled = 0.0;  ///< coordinate on the zoomed-out domain
  double mean_original = 0.0;
  double mean_rescaled = 0.0;
  double var_original = 0.0;
  double var_rescaled = 0.0;
  double mean_z = 0.0;  ///< mean difference in units of its MC standard error
};

struct ComparisonReport {
  std::vector<RescalePoint> points;
  double max_abs_mean_z = 0.0;
  double max_rel_var_diff = 0.0;
  double max_abs_diff = 0.0;  ///< largest pointwise difference of the first runs
  std::size_t n_runs = 0;
};

/// Model with Y_t(y) = X_t(nu^{1/2} y): domain scaled by nu^{-1/2}, unit
/// diffusivity and noise level nu^{-1/4} sigma.
ModelSpec zoomed_out_model(const ModelSpec& model);

/// Compares moments of X_t(nu^{1/2} y) against an independent ensemble of
/// the zoomed-out model at n_points window locations. Requires white noise
/// and Dirichlet conditions.
ComparisonReport rescale_check(const ModelSpec& model, const GridSpec& grid, std::size_t t_index,
                               std::size_t n_runs, std::uint64_t base_seed, std::size_t n_points, int workers);

}  // namespace spde
