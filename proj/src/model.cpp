#include "spde/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "spde/errors.hpp"

namespace spde {

void Domain::validate() const {
  if (!(right > left)) throw ConfigError("domain: right must exceed left");
  if (!(gamma_right > gamma_left)) throw ConfigError("domain: gamma_right must exceed gamma_left");
  if (boundary == Boundary::Dirichlet) {
    if (!(left < gamma_left && gamma_right < right))
      throw ConfigError("domain: Dirichlet window must lie strictly inside (left, right)");
  } else if (!(left <= gamma_left && gamma_right <= right)) {
    throw ConfigError("domain: window must lie inside [left, right]");
  }
}

void NoiseSpec::validate() const {
  if (const auto* r = std::get_if<RieszNoise>(&kind)) {
    if (!(r->rho > 0.5 && r->rho < 1.0)) throw ConfigError("noise: Riesz rho must lie in (1/2, 1)");
  } else if (const auto* s = std::get_if<SpectralNoise>(&kind)) {
    if (!(s->rho1 > 0.0)) throw ConfigError("noise: spectral rho1 must be positive");
    if (!(s->rho2 >= 0.0 && s->rho2 < 0.5)) throw ConfigError("noise: spectral rho2 must lie in [0, 1/2)");
    if (s->rho1 + 2.0 * s->rho2 < 1.0) throw ConfigError("noise: spectral rho1 + 2 rho2 must be >= 1");
  }
  if (multiplier) {
    if (!multiplier->fn) throw ConfigError("noise: multiplier has no function");
    if (!(multiplier->lower > 0.0 && multiplier->upper >= multiplier->lower && std::isfinite(multiplier->upper)))
      throw ConfigError("noise: multiplier bounds must satisfy 0 < lower <= upper < inf");
  }
}

double ModelSpec::sigma() const { return sigma_override ? *sigma_override : sigma_of_nu(noise, nu); }

void ModelSpec::validate() const {
  domain.validate();
  noise.validate();
  if (!(nu > 0.0)) throw ConfigError("model: nu must be positive");
  if (!(horizon > 0.0)) throw ConfigError("model: horizon must be positive");
  if (!reaction.eval) throw ConfigError("model: reaction function missing");
  if (sigma_override && !(*sigma_override >= 0.0)) throw ConfigError("model: sigma must be nonnegative");
  if (noise.multiplier) {
    // spot check the declared multiplier bounds on a fine grid
    for (int i = 0; i <= 256; ++i) {
      const double y = domain.left + domain.length() * i / 256.0;
      const double v = noise.multiplier->fn(y);
      if (!(v >= noise.multiplier->lower && v <= noise.multiplier->upper)) {
        std::ostringstream os;
        os << "noise: multiplier value " << v << " at y=" << y << " outside declared bounds";
        throw ConfigError(os.str());
      }
    }
  }
}

double allen_cahn(double x) {
  if (x <= -10.0) return -x + 1e3 - 1e2;
  if (x >= 10.0) return -x - 1e3 + 1e2;
  return -(x * x * x - 9.0 * x);
}

ReactionFn allen_cahn_reaction() { return {allen_cahn, 291.0, "allen_cahn"}; }

ReactionFn zero_reaction() {
  return {[](double) { return 0.0; }, 0.0, "zero"};
}

ReactionFn constant_reaction(double c) {
  return {[c](double) { return c; }, 0.0, "constant"};
}

ReactionFn linear_reaction(double slope, double intercept) {
  return {[slope, intercept](double x) { return slope * x + intercept; }, std::abs(slope), "linear"};
}

double sigma_of_nu(const NoiseSpec& noise, double nu) {
  if (!(nu > 0.0)) throw ConfigError("sigma_of_nu: nu must be positive");
  return std::visit(
      [nu](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, WhiteNoise>) {
          return std::pow(nu, 0.25);
        } else if constexpr (std::is_same_v<K, RieszNoise>) {
          return std::pow(nu, k.rho / 4.0);
        } else {
          return std::pow(nu, (1.0 - 2.0 * k.rho2) / (2.0 * k.rho1));
        }
      },
      noise.kind);
}

double alpha_of(const NoiseSpec& noise) {
  return std::visit(
      [](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, WhiteNoise>) {
          return 0.5;
        } else if constexpr (std::is_same_v<K, RieszNoise>) {
          return 1.0 - k.rho / 2.0;
        } else {
          const double a = 1.0 + (2.0 * k.rho2 - 1.0) / k.rho1;
          if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha_of: spectral parameters give alpha outside (0,1)");
          return a;
        }
      },
      noise.kind);
}

double riesz_heat_constant(double rho) {
  // eta = u^m with m = 1/(1-rho) turns eta^{-rho} d eta into m du.
  const double m = 1.0 / (1.0 - rho);
  const double upper = std::pow(50.0, 1.0 / m);
  const int n = 20000;
  const double step = upper / n;
  const double norm = 1.0 / std::sqrt(8.0 * std::numbers::pi);
  auto integrand = [&](double u) {
    const double eta = std::pow(u, m);
    return m * norm * std::exp(-eta * eta / 8.0);
  };
  double acc = integrand(0.0) + integrand(upper);
  for (int i = 1; i < n; ++i) acc += integrand(i * step) * (i % 2 == 1 ? 4.0 : 2.0);
  return 2.0 * acc * step / 3.0;  // symmetric in eta
}

double spectral_scaling_integral(double rho1, double rho2, double nu, double t) {
  if (!(t > 0.0 && nu > 0.0)) throw ConfigError("spectral_scaling_integral: t and nu must be positive");
  constexpr double tie = 1e-12;
  if (rho2 < 0.5 - tie) {
    const double e = (2.0 * rho2 - 1.0) / rho1;
    return std::pow(nu, e) * std::pow(t, 1.0 + e);
  }
  if (rho2 <= 0.5 + tie) {
    if (nu * t >= 1.0) throw NumericalError("spectral_scaling_integral: logarithmic regime requires nu*t < 1");
    return t * (1.0 - std::log(nu * t) / rho1);
  }
  return t;
}

double noise_scaling_integral(const NoiseSpec& noise, double nu, double t) {
  if (!(t > 0.0 && nu > 0.0)) throw ConfigError("noise_scaling_integral: t and nu must be positive");
  return std::visit(
      [nu, t](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, WhiteNoise>) {
          return std::numbers::sqrt2 / (4.0 * std::sqrt(std::numbers::pi)) * std::sqrt(t / nu);
        } else if constexpr (std::is_same_v<K, RieszNoise>) {
          const double c = riesz_heat_constant(k.rho) / (1.0 - k.rho / 2.0);
          return c * std::pow(t, 1.0 - k.rho / 2.0) * std::pow(nu, -k.rho / 2.0);
        } else {
          return spectral_scaling_integral(k.rho1, k.rho2, nu, t);
        }
      },
      noise.kind);
}

}  // namespace spde
