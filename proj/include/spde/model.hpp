#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>

namespace spde {

enum class Boundary { Dirichlet, Neumann };

/// Spatial domain (left, right) with observation window Gamma.
struct Domain {
  double left = 0.0;
  double right = 1.0;
  Boundary boundary = Boundary::Dirichlet;
  double gamma_left = 0.1;
  double gamma_right = 0.9;

  double length() const { return right - left; }
  double gamma_length() const { return gamma_right - gamma_left; }
  bool in_window(double y) const { return y >= gamma_left && y <= gamma_right; }

  /// Throws ConfigError. Dirichlet needs the window strictly inside the
  /// domain; Neumann allows it to touch the boundary.
  void validate() const;
};

struct WhiteNoise {};

/// Covariance kernel |x|^{-rho}, 1/2 < rho < 1.
struct RieszNoise {
  double rho = 0.8;
};

/// Dispersion diagonal in the Laplacian eigenbasis with sigma_k = k^{-rho2}.
struct SpectralNoise {
  double rho1 = 2.0;
  double rho2 = 0.0;
};

using NoiseKind = std::variant<WhiteNoise, RieszNoise, SpectralNoise>;

/// Pointwise dispersion y -> Sigma(y) with declared bounds.
struct Multiplier {
  std::function<double(double)> fn;
  double lower = 1.0;
  double upper = 1.0;
};

struct NoiseSpec {
  NoiseKind kind = WhiteNoise{};
  std::optional<Multiplier> multiplier;

  double dispersion(double y) const { return multiplier ? multiplier->fn(y) : 1.0; }
  bool is_white() const { return std::holds_alternative<WhiteNoise>(kind); }
  void validate() const;
};

struct ReactionFn {
  std::function<double(double)> eval;
  double lipschitz_bound = 0.0;
  std::string name;

  double operator()(double x) const { return eval(x); }
};

struct ModelSpec {
  Domain domain;
  double nu = 1.0;
  NoiseSpec noise;
  ReactionFn reaction;
  double horizon = 1.0;
  std::function<double(double)> initial;  ///< empty means X_0 = 0
  std::optional<double> sigma_override;

  /// Noise level: the override if set, otherwise sigma_of_nu(noise, nu).
  double sigma() const;
  double initial_value(double y) const { return initial ? initial(y) : 0.0; }
  void validate() const;
};

/// Allen-Cahn reaction with stable points +-3, continued linearly outside
/// (-10, 10) so that it is globally Lipschitz.
double allen_cahn(double x);

ReactionFn allen_cahn_reaction();
ReactionFn zero_reaction();
ReactionFn constant_reaction(double c);
ReactionFn linear_reaction(double slope, double intercept);

/// Noise level coupled to the diffusivity so that Var X_t(y) stays of order one.
double sigma_of_nu(const NoiseSpec& noise, double nu);

/// Time exponent of the noise-scaling bound. Throws ConfigError when a
/// spectral configuration gives a value outside (0, 1).
double alpha_of(const NoiseSpec& noise);

/// Order-of-magnitude value of int_0^t ||G_{nu,t,s}(y, .)||_H^2 ds.
double noise_scaling_integral(const NoiseSpec& noise, double nu, double t);

/// Three-regime spectral scaling (rho2 below, at, or above 1/2). Throws
/// NumericalError in the logarithmic regime when nu * t >= 1.
double spectral_scaling_integral(double rho1, double rho2, double nu, double t);

/// int |eta|^{-rho} phi_2(eta) d eta over [-50, 50], phi_2 the heat kernel at
/// time 2. Computed by quadrature after removing the singularity at 0.
double riesz_heat_constant(double rho);

}  // namespace spde
