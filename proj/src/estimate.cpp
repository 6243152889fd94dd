#include "spde/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "spde/errors.hpp"
#include "spde/stats.hpp"

namespace spde {

double tent_minus(double x) { return std::max(0.0, 1.0 - std::abs(2.0 * x + 1.0)); }
double tent_plus(double x) { return std::max(0.0, 1.0 - std::abs(2.0 * x - 1.0)); }

KernelPair default_kernels() { return {tent_minus, tent_plus}; }

KernelPair scale_kernels(const KernelPair& k, double a, double b) {
  return {[f = k.minus, a](double x) { return a * f(x); }, [f = k.plus, b](double x) { return b * f(x); }};
}

RealFn localize(RealFn g, double h, double x0) {
  if (!(h > 0.0)) throw std::invalid_argument("localize: h must be positive");
  return [g = std::move(g), h, x0](double x) { return g((x - x0) / h); };
}

void EstimatorConfig::validate() const {
  if (!(h > 0.0)) throw ConfigError("estimator: h must be positive");
  if (!(beta >= 1.0 && beta <= 2.0)) throw ConfigError("estimator: beta must lie in [1, 2]");
  if (!(alpha_bar > 0.0 && alpha_bar < 1.0)) throw ConfigError("estimator: alpha_bar must lie in (0, 1)");
  if (!kernels.minus || !kernels.plus) throw ConfigError("estimator: kernels missing");
  if (mode == EstimatorMode::GrowingWindow && !(gamma > 0.0))
    throw ConfigError("estimator: growing-window mode needs gamma > 0");
}

WindowAccumulator::WindowAccumulator(const EstimatorConfig& cfg, const ModelSpec& model, const GridSpec& grid)
    : kernels_(cfg.kernels),
      x0_(cfg.x0),
      h_(cfg.h),
      dx_(grid.dx),
      dt_(grid.dt),
      weight_(grid.dt * grid.dx),
      boundary_(model.domain.boundary) {
  cfg.validate();
  for (std::size_t k = 0; k < grid.n_space; ++k) {
    const double y = grid.y(k);
    if (!model.domain.in_window(y)) continue;
    cells_.push_back(k);
    const double s = model.noise.dispersion(y);
    dispersion2_.push_back(s * s);
  }
}

void WindowAccumulator::add_step(std::span<const double> current, std::span<const double> next) {
  auto& s = sums_;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const std::size_t k = cells_[c];
    const double x = current[k];
    const double d = x - x0_;
    if (!(std::abs(d) <= h_)) continue;
    ++s.count;
    const double u = d / h_;
    const double km = weight_ * kernels_.minus(u);
    const double kp = weight_ * kernels_.plus(u);
    const double y = (next[k] - x) / dt_;
    const double a = laplacian_at(current, k, dx_, boundary_);
    s.t_m1 += km;
    s.t_p1 += kp;
    s.t_m2 -= km * d;
    s.t_p2 += kp * d;
    s.i_m += dispersion2_[c] * km * km / weight_;
    s.i_p += dispersion2_[c] * kp * kp / weight_;
    s.ky_m += km * y;
    s.ky_p += kp * y;
    s.ka_m += km * a;
    s.ka_p += kp * a;
    s.kyy_m += km * y * y;
    s.kyy_p += kp * y * y;
    s.kya_m += km * y * a;
    s.kya_p += kp * y * a;
    s.kaa_m += km * a * a;
    s.kaa_p += kp * a * a;
  }
}

EstimatorObserver::EstimatorObserver(std::span<const EstimatorConfig> configs, const ModelSpec& model,
                                     const GridSpec& grid) {
  accs_.reserve(configs.size());
  for (const auto& c : configs) accs_.emplace_back(c, model, grid);
}

void EstimatorObserver::on_step(std::size_t, std::span<const double> current, std::span<const double> next) {
  for (auto& a : accs_) a.add_step(current, next);
}

WindowSums accumulate(const Trajectory& traj, const EstimatorConfig& cfg) {
  WindowAccumulator acc(cfg, traj.model(), traj.grid());
  for (std::size_t i = 0; i + 1 < traj.rows(); ++i) acc.add_step(traj.row(i), traj.row(i + 1));
  return acc.sums();
}

Weights weights_from(const WindowSums& s) {
  Weights w;
  w.t_m1 = s.t_m1;
  w.t_p1 = s.t_p1;
  w.t_m2 = s.t_m2;
  w.t_p2 = s.t_p2;
  w.j = s.t_m1 * s.t_p2 + s.t_p1 * s.t_m2;
  w.i_m = s.i_m;
  w.i_p = s.i_p;
  return w;
}

Weights compute_weights(const Trajectory& traj, const EstimatorConfig& cfg) {
  return weights_from(accumulate(traj, cfg));
}

RealFn random_kernel(const Weights& w, const KernelPair& kernels, double h, double x0) {
  if (!(w.j > 0.0)) throw DegenerateWindow("random kernel: no data on one side of x0");
  return [w, km = localize(kernels.minus, h, x0), kp = localize(kernels.plus, h, x0)](double x) {
    return (w.t_p2 * km(x) + w.t_m2 * kp(x)) / w.j;
  };
}

double discrete_generator(const Trajectory& traj, std::size_t i, std::size_t k) {
  if (i >= traj.rows() || k >= traj.cols()) throw std::out_of_range("discrete_generator: index outside the grid");
  return laplacian_at(traj.row(i), k, traj.grid().dx, traj.model().domain.boundary);
}

std::string EstimateReport::csv_header() {
  return "x0,h,f_hat,std_error,ci_low,ci_high,n_window_points,t_m1,t_p1,t_m2,t_p2,j,i_m,i_p";
}

std::string EstimateReport::csv_row() const {
  std::ostringstream os;
  os << std::setprecision(12) << x0 << ',' << h << ',' << f_hat << ',' << std_error << ',' << ci_low << ','
     << ci_high << ',' << n_window_points << ',' << weights.t_m1 << ',' << weights.t_p1 << ',' << weights.t_m2
     << ',' << weights.t_p2 << ',' << weights.j << ',' << weights.i_m << ',' << weights.i_p;
  return os.str();
}

namespace {

// Coefficients of the random kernel on the K_- and K_+ sums.
struct Mix {
  double minus, plus, mass;
};

Mix mix_of(const WindowSums& s) {
  const double j = s.t_m1 * s.t_p2 + s.t_p1 * s.t_m2;
  if (!(j > 0.0)) throw DegenerateWindow("estimate: degenerate window (no data on one side of x0)");
  Mix m{s.t_p2 / j, s.t_m2 / j, 0.0};
  m.mass = m.minus * s.t_m1 + m.plus * s.t_p1;
  return m;
}

}  // namespace

EstimateReport report_from_sums(const WindowSums& s, const EstimatorConfig& cfg) {
  const Mix m = mix_of(s);
  EstimateReport r;
  r.x0 = cfg.x0;
  r.h = cfg.h;
  r.weights = weights_from(s);
  r.n_window_points = s.count;
  const double nu = cfg.nu_known;
  const double num = m.minus * (s.ky_m - nu * s.ka_m) + m.plus * (s.ky_p - nu * s.ka_p);
  r.f_hat = num / m.mass;
  const auto& w = r.weights;
  r.std_error = cfg.noise_level() * std::sqrt(w.t_p2 * w.t_p2 * w.i_m + w.t_m2 * w.t_m2 * w.i_p) / w.j;
  const double q = stats::normal_quantile(1.0 - cfg.alpha_bar / 2.0);
  r.ci_low = r.f_hat - q * r.std_error;
  r.ci_high = r.f_hat + q * r.std_error;
  if (cfg.zeta && r.std_error > 0.0) r.test_statistic = (r.f_hat - *cfg.zeta) / r.std_error;
  return r;
}

EstimateReport estimate(const Trajectory& traj, const EstimatorConfig& cfg) {
  return report_from_sums(accumulate(traj, cfg), cfg);
}

TestResult hypothesis_test(const EstimateReport& report, double zeta, double alpha_bar) {
  if (!(report.std_error > 0.0)) throw std::invalid_argument("hypothesis_test: standard error must be positive");
  if (!(alpha_bar > 0.0 && alpha_bar < 1.0)) throw std::invalid_argument("hypothesis_test: alpha_bar outside (0,1)");
  TestResult t;
  t.statistic = (report.f_hat - zeta) / report.std_error;
  t.reject = std::abs(t.statistic) > stats::normal_quantile(1.0 - alpha_bar / 2.0);
  return t;
}

double select_bandwidth(double sigma, double beta, double constant) {
  if (!(sigma > 0.0) || !(beta >= 1.0 && beta <= 2.0)) throw ConfigError("select_bandwidth: need sigma > 0, beta in [1,2]");
  return constant * std::pow(sigma, 2.0 / (1.0 + 2.0 * beta));
}

double select_bandwidth_growing(double gamma, double beta, double constant) {
  if (!(gamma > 0.0) || !(beta >= 1.0 && beta <= 2.0)) throw ConfigError("select_bandwidth_growing: need gamma > 0, beta in [1,2]");
  return constant * std::pow(gamma, -1.0 / (1.0 + 2.0 * beta));
}

double wls_objective(const WindowSums& s, double nu) {
  const Mix m = mix_of(s);
  const double quad = m.minus * (s.kyy_m - 2.0 * nu * s.kya_m + nu * nu * s.kaa_m) +
                      m.plus * (s.kyy_p - 2.0 * nu * s.kya_p + nu * nu * s.kaa_p);
  const double lin = m.minus * (s.ky_m - nu * s.ka_m) + m.plus * (s.ky_p - nu * s.ka_p);
  return quad - lin * lin / m.mass;
}

JointEstimate joint_from_sums(const WindowSums& s, double nu_lo, double nu_hi) {
  if (!(nu_hi > nu_lo)) throw std::invalid_argument("joint_estimate: empty bracket");
  const Mix m = mix_of(s);
  auto obj = [&](double nu) { return wls_objective(s, nu); };
  JointEstimate out;
  const double mid = 0.5 * (nu_lo + nu_hi);
  const double f_lo = obj(nu_lo), f_mid = obj(mid), f_hi = obj(nu_hi);
  // relative to the kernel-weighted sum of squares of Y
  const double total = m.minus * s.kyy_m + m.plus * s.kyy_p;
  const double scale = std::max({std::abs(f_lo), std::abs(f_mid), std::abs(f_hi), std::abs(total),
                                 std::numeric_limits<double>::min()});
  if (std::abs(f_lo - f_mid) <= 1e-12 * scale && std::abs(f_hi - f_mid) <= 1e-12 * scale) {
    out.flat = true;
    out.nu_hat = mid;
  } else {
    constexpr double inv_phi = 0.6180339887498949;
    double a = nu_lo, b = nu_hi;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = obj(c), fd = obj(d);
    while (b - a > 1e-10 * std::max(1.0, std::abs(a) + std::abs(b))) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - inv_phi * (b - a);
        fc = obj(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + inv_phi * (b - a);
        fd = obj(d);
      }
    }
    out.nu_hat = 0.5 * (a + b);
    const double edge = 1e-6 * (nu_hi - nu_lo);
    out.bracket_ok = out.nu_hat - nu_lo > edge && nu_hi - out.nu_hat > edge;
  }
  out.objective = obj(out.nu_hat);
  out.f_hat = (m.minus * (s.ky_m - out.nu_hat * s.ka_m) + m.plus * (s.ky_p - out.nu_hat * s.ka_p)) / m.mass;
  return out;
}

JointEstimate joint_estimate(const Trajectory& traj, const EstimatorConfig& cfg, double nu_lo, double nu_hi) {
  return joint_from_sums(accumulate(traj, cfg), nu_lo, nu_hi);
}

}  // namespace spde
