#include "spde/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "spde/ensemble.hpp"
#include "spde/errors.hpp"
#include "spde/stats.hpp"

namespace spde {

GridSpec GridSpec::for_model(const ModelSpec& model, std::size_t n_space, std::optional<std::size_t> n_time) {
  if (n_space < 3) throw ConfigError("grid: n_space must be at least 3");
  GridSpec g;
  g.n_space = n_space;
  g.n_time = n_time.value_or(n_space * n_space);
  if (g.n_time < 1) throw ConfigError("grid: n_time must be at least 1");
  g.dx = model.domain.length() / static_cast<double>(n_space + 1);
  g.dt = model.horizon / static_cast<double>(g.n_time);
  g.origin = model.domain.left;
  return g;
}

void GridSpec::check_against(const ModelSpec& model) const {
  const double len = dx * static_cast<double>(n_space + 1);
  const double hor = dt * static_cast<double>(n_time);
  const double tol = 1e-9;
  if (n_space < 3 || n_time < 1 || !(dx > 0.0) || !(dt > 0.0)) throw ConfigError("grid: degenerate spacing");
  if (std::abs(len - model.domain.length()) > tol * model.domain.length() ||
      std::abs(origin - model.domain.left) > tol * std::max(1.0, std::abs(origin)))
    throw ConfigError("grid: spatial grid does not span the model domain");
  if (std::abs(hor - model.horizon) > tol * model.horizon)
    throw ConfigError("grid: time grid does not span the model horizon");
}

double laplacian_at(std::span<const double> x, std::size_t k, double dx, Boundary boundary) {
  const std::size_t n = x.size();
  const double mirror = boundary == Boundary::Neumann;
  const double left = k == 0 ? mirror * x[0] : x[k - 1];
  const double right = k + 1 == n ? mirror * x[n - 1] : x[k + 1];
  return (left - 2.0 * x[k] + right) / (dx * dx);
}

void apply_laplacian(std::span<const double> x, std::span<double> out, double dx, Boundary boundary) {
  const std::size_t n = x.size();
  for (std::size_t k = 0; k < n; ++k) out[k] = laplacian_at(x, k, dx, boundary);
}

ImplicitStep::ImplicitStep(double nu, const GridSpec& grid, Boundary boundary)
    : c_prime_(grid.n_space), inv_denom_(grid.n_space) {
  const std::size_t n = grid.n_space;
  const double r = nu * grid.dt / (grid.dx * grid.dx);
  off_ = -r;
  auto diag = [&](std::size_t k) {
    if (boundary == Boundary::Neumann && (k == 0 || k + 1 == n)) return 1.0 + r;
    return 1.0 + 2.0 * r;
  };
  double denom = diag(0);
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) denom = diag(k) - off_ * c_prime_[k - 1];
    if (!(std::abs(denom) > 0.0) || !std::isfinite(denom)) throw NumericalError("implicit step: singular tridiagonal system");
    inv_denom_[k] = 1.0 / denom;
    c_prime_[k] = off_ * inv_denom_[k];
  }
}

void ImplicitStep::solve(std::span<double> rhs) const {
  const std::size_t n = rhs.size();
  rhs[0] *= inv_denom_[0];
  for (std::size_t k = 1; k < n; ++k) rhs[k] = (rhs[k] - off_ * rhs[k - 1]) * inv_denom_[k];
  for (std::size_t k = n - 1; k-- > 0;) rhs[k] -= c_prime_[k] * rhs[k + 1];
}

std::vector<double> riesz_covariance(double rho, const GridSpec& grid) {
  const std::size_t n = grid.n_space;
  std::vector<double> a(n * n);
  const double diag = std::pow(grid.dx / 2.0, -rho);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) {
      const double dist = std::abs(static_cast<double>(j) - static_cast<double>(k)) * grid.dx;
      a[j * n + k] = j == k ? diag : std::pow(dist, -rho);
    }
  return a;
}

namespace {

bool try_cholesky(std::vector<double>& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t p = 0; p < j; ++p) d -= a[j * n + p] * a[j * n + p];
    if (!(d > 0.0)) return false;
    const double l = std::sqrt(d);
    a[j * n + j] = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t p = 0; p < j; ++p) s -= a[i * n + p] * a[j * n + p];
      a[i * n + j] = s / l;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k) a[i * n + k] = 0.0;
  return true;
}

}  // namespace

std::vector<double> cholesky_lower(std::vector<double> a, std::size_t n, bool* jittered) {
  if (a.size() != n * n) throw std::invalid_argument("cholesky_lower: size mismatch");
  auto work = a;
  if (try_cholesky(work, n)) {
    if (jittered) *jittered = false;
    return work;
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) trace += a[i * n + i];
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] += 1e-10 * trace / static_cast<double>(n);
  if (!try_cholesky(a, n)) throw NumericalError("cholesky: covariance is not positive definite after jitter");
  if (jittered) *jittered = true;
  return a;
}

NoiseIncrement::NoiseIncrement(const NoiseSpec& noise, Boundary boundary, const GridSpec& grid)
    : n_(grid.n_space), dt_(grid.dt), white_sd_(std::sqrt(grid.dt / grid.dx)), z_(grid.n_space) {
  if (noise.multiplier) {
    has_dispersion_ = true;
    dispersion_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) dispersion_[k] = noise.dispersion(grid.y(k));
  }
  if (noise.is_white()) {
    kind_ = Kind::White;
  } else if (const auto* r = std::get_if<RieszNoise>(&noise.kind)) {
    kind_ = Kind::Correlated;
    factor_ = cholesky_lower(riesz_covariance(r->rho, grid), n_, &jittered_);
  } else {
    const auto& s = std::get<SpectralNoise>(noise.kind);
    kind_ = Kind::Spectral;
    const double len = grid.dx * static_cast<double>(n_ + 1);
    const double norm = std::sqrt(2.0 / len);
    factor_.resize(n_ * n_);
    for (std::size_t j = 0; j < n_; ++j) {
      const double u = (grid.y(j) - grid.origin) / len;
      for (std::size_t m = 0; m < n_; ++m) {
        const double k = static_cast<double>(m + 1);
        const double e = boundary == Boundary::Dirichlet ? std::sin(k * std::numbers::pi * u)
                                                         : std::cos(k * std::numbers::pi * u);
        factor_[j * n_ + m] = norm * e * std::pow(k, -s.rho2);
      }
    }
  }
}

void NoiseIncrement::draw(Rng& rng, std::span<double> out) {
  if (kind_ == Kind::White) {
    for (std::size_t k = 0; k < n_; ++k) out[k] = white_sd_ * normal_(rng);
  } else {
    const double sd = std::sqrt(dt_);
    for (std::size_t k = 0; k < n_; ++k) z_[k] = sd * normal_(rng);
    // lower triangular for the Cholesky factor, dense for the eigenbasis
    for (std::size_t j = 0; j < n_; ++j) {
      const std::size_t stop = kind_ == Kind::Correlated ? j + 1 : n_;
      const double* row = factor_.data() + j * n_;
      double acc = 0.0;
      for (std::size_t m = 0; m < stop; ++m) acc += row[m] * z_[m];
      out[j] = acc;
    }
  }
  if (has_dispersion_)
    for (std::size_t k = 0; k < n_; ++k) out[k] *= dispersion_[k];
}

std::vector<double> noise_increment(const NoiseSpec& noise, Boundary boundary, const GridSpec& grid, Rng& rng) {
  NoiseIncrement gen(noise, boundary, grid);
  std::vector<double> out(grid.n_space);
  gen.draw(rng, out);
  return out;
}

Stepper::Stepper(const ModelSpec& model, const GridSpec& grid, std::uint64_t seed)
    : model_(&model),
      grid_(grid),
      sigma_(model.sigma()),
      implicit_(model.nu, grid, model.domain.boundary),
      noise_(model.noise, model.domain.boundary, grid),
      rng_(seed),
      current_(grid.n_space),
      previous_(grid.n_space),
      increment_(grid.n_space) {
  for (std::size_t k = 0; k < grid.n_space; ++k) current_[k] = model.initial_value(grid.y(k));
  previous_ = current_;
}

void Stepper::advance() {
  const auto& f = model_->reaction.eval;
  const double dt = grid_.dt;
  if (sigma_ != 0.0) noise_.draw(rng_, increment_);
  previous_.swap(current_);
  bool finite = true;
  for (std::size_t k = 0; k < grid_.n_space; ++k) {
    const double x = previous_[k];
    current_[k] = x + dt * f(x) + (sigma_ != 0.0 ? sigma_ * increment_[k] : 0.0);
  }
  implicit_.solve(current_);
  for (double v : current_) finite = finite && std::isfinite(v);
  ++index_;
  if (!finite) {
    std::ostringstream os;
    os << "simulate: non-finite state at step " << index_ << " (t=" << grid_.t(index_) << ")";
    throw NumericalError(os.str());
  }
}

void simulate_streaming(const ModelSpec& model, const GridSpec& grid, std::uint64_t seed, StepObserver& observer) {
  grid.check_against(model);
  Stepper stepper(model, grid, seed);
  for (std::size_t i = 0; i < grid.n_time; ++i) {
    stepper.advance();
    observer.on_step(i, stepper.previous(), stepper.state());
  }
}

Trajectory::Trajectory(ModelSpec model, GridSpec grid, std::uint64_t seed, std::vector<double> values)
    : model_(std::move(model)), grid_(grid), seed_(seed), values_(std::move(values)) {
  if (values_.size() != (grid_.n_time + 1) * grid_.n_space)
    throw std::invalid_argument("Trajectory: value count does not match grid");
}

namespace {

class Recorder final : public StepObserver {
 public:
  explicit Recorder(std::vector<double>& values) : values_(values) {}
  void on_step(std::size_t i, std::span<const double> current, std::span<const double> next) override {
    if (i == 0) values_.insert(values_.end(), current.begin(), current.end());
    values_.insert(values_.end(), next.begin(), next.end());
  }

 private:
  std::vector<double>& values_;
};

class RowCapture final : public StepObserver {
 public:
  RowCapture(std::size_t t_index, std::span<double> out) : t_index_(t_index), out_(out) {}
  void on_step(std::size_t i, std::span<const double> current, std::span<const double> next) override {
    if (i == t_index_) std::copy(current.begin(), current.end(), out_.begin());
    if (i + 1 == t_index_) std::copy(next.begin(), next.end(), out_.begin());
  }

 private:
  std::size_t t_index_;
  std::span<double> out_;
};

}  // namespace

Trajectory simulate(const ModelSpec& model, const GridSpec& grid, std::uint64_t seed) {
  std::vector<double> values;
  values.reserve((grid.n_time + 1) * grid.n_space);
  Recorder rec(values);
  simulate_streaming(model, grid, seed, rec);
  return Trajectory(model, grid, seed, std::move(values));
}

double linear_variance_exact(double nu, double sigma, double t, double y, std::size_t n_modes) {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  double acc = 0.0;
  for (std::size_t m = 1; m <= n_modes; ++m) {
    const double k = static_cast<double>(m);
    const double s = std::sin(k * std::numbers::pi * y);
    const double rate = 2.0 * nu * pi2 * k * k;
    acc += 2.0 * s * s * (-std::expm1(-rate * t)) / rate;
  }
  return sigma * sigma * acc;
}

std::vector<double> ensemble_rows(const ModelSpec& model, const GridSpec& grid, std::size_t t_index,
                                  std::size_t n_runs, std::uint64_t base_seed, int workers) {
  if (t_index > grid.n_time) throw ConfigError("ensemble: time index beyond the grid");
  std::vector<double> out(n_runs * grid.n_space);
  auto rows = map_runs(n_runs, workers, [&](std::size_t r) {
    std::vector<double> row(grid.n_space);
    if (t_index == 0) {
      for (std::size_t k = 0; k < grid.n_space; ++k) row[k] = model.initial_value(grid.y(k));
    } else {
      RowCapture cap(t_index, row);
      GridSpec g = grid;
      g.n_time = t_index;  // nothing after t_index is needed
      ModelSpec m = model;
      m.horizon = grid.t(t_index);
      simulate_streaming(m, g, base_seed + r, cap);
    }
    return row;
  });
  for (std::size_t r = 0; r < n_runs; ++r) std::copy(rows[r].begin(), rows[r].end(), out.begin() + r * grid.n_space);
  return out;
}

ModelSpec zoomed_out_model(const ModelSpec& model) {
  const double s = 1.0 / std::sqrt(model.nu);
  ModelSpec y = model;
  y.domain.left *= s;
  y.domain.right *= s;
  y.domain.gamma_left *= s;
  y.domain.gamma_right *= s;
  y.nu = 1.0;
  y.sigma_override = model.sigma() * std::pow(model.nu, -0.25);
  if (model.initial) {
    const double scale = std::sqrt(model.nu);
    y.initial = [f = model.initial, scale](double v) { return f(scale * v); };
  }
  if (model.noise.multiplier) {
    const double scale = std::sqrt(model.nu);
    y.noise.multiplier->fn = [f = model.noise.multiplier->fn, scale](double v) { return f(scale * v); };
  }
  return y;
}

namespace {

// Linear interpolation of a grid row with boundary values from the Dirichlet condition.
double interpolate_row(std::span<const double> row, const GridSpec& grid, double y) {
  const double u = (y - grid.origin) / grid.dx;  // node k sits at u = k + 1, boundaries at 0 and n + 1
  const auto n = static_cast<double>(grid.n_space);
  if (u <= 0.0 || u >= n + 1.0) return 0.0;
  const double base = std::floor(u);
  const double w = u - base;
  auto node = [&](double j) { return (j < 1.0 || j > n) ? 0.0 : row[static_cast<std::size_t>(j) - 1]; };
  return (1.0 - w) * node(base) + w * node(base + 1.0);
}

}  // namespace

ComparisonReport rescale_check(const ModelSpec& model, const GridSpec& grid, std::size_t t_index,
                               std::size_t n_runs, std::uint64_t base_seed, std::size_t n_points, int workers) {
  if (!model.noise.is_white() || model.domain.boundary != Boundary::Dirichlet)
    throw ConfigError("rescale_check: requires white noise and Dirichlet conditions");
  if (n_runs < 1 || n_points < 1) throw ConfigError("rescale_check: need at least one run and one point");
  const ModelSpec zoomed = zoomed_out_model(model);
  const GridSpec zgrid = GridSpec::for_model(zoomed, grid.n_space, grid.n_time);
  const auto xs = ensemble_rows(model, grid, t_index, n_runs, base_seed, workers);
  const auto ys = ensemble_rows(zoomed, zgrid, t_index, n_runs, base_seed + n_runs, workers);
  const double root_nu = std::sqrt(model.nu);

  std::vector<std::size_t> nodes;
  for (std::size_t k = 0; k < zgrid.n_space; ++k)
    if (zoomed.domain.in_window(zgrid.y(k))) nodes.push_back(k);
  if (nodes.empty()) throw ConfigError("rescale_check: observation window contains no grid point");

  ComparisonReport rep;
  rep.n_runs = n_runs;
  const std::size_t count = std::min(n_points, nodes.size());
  std::vector<double> a(n_runs), b(n_runs);
  for (std::size_t p = 0; p < count; ++p) {
    const std::size_t k = count == 1 ? nodes[nodes.size() / 2] : nodes[p * (nodes.size() - 1) / (count - 1)];
    const double yz = zgrid.y(k);
    for (std::size_t r = 0; r < n_runs; ++r) {
      std::span<const double> xrow(xs.data() + r * grid.n_space, grid.n_space);
      a[r] = interpolate_row(xrow, grid, root_nu * yz);
      b[r] = ys[r * zgrid.n_space + k];
    }
    RescalePoint pt;
    pt.y_rescaled = yz;
    pt.mean_original = stats::mean(a);
    pt.mean_rescaled = stats::mean(b);
    pt.var_original = stats::variance(a);
    pt.var_rescaled = stats::variance(b);
    const double se = std::sqrt((pt.var_original + pt.var_rescaled) / static_cast<double>(n_runs));
    const double diff = pt.mean_original - pt.mean_rescaled;
    pt.mean_z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff));
    rep.max_abs_mean_z = std::max(rep.max_abs_mean_z, std::abs(pt.mean_z));
    const double vscale = std::max(pt.var_original, pt.var_rescaled);
    if (vscale > 0.0) rep.max_rel_var_diff = std::max(rep.max_rel_var_diff, std::abs(pt.var_original - pt.var_rescaled) / vscale);
    rep.max_abs_diff = std::max(rep.max_abs_diff, std::abs(a[0] - b[0]));
    rep.points.push_back(pt);
  }
  return rep;
}

}  // namespace spde
