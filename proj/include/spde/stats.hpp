#pragma once

#include <span>
#include <vector>

namespace spde::stats {

double mean(std::span<const double> xs);

/// Unbiased sample variance; 0 for fewer than two samples.
double variance(std::span<const double> xs);

/// Standard error of the sample variance from the fourth central moment.
double variance_stderr(std::span<const double> xs);

/// Linear-interpolation quantile (R type 7). xs need not be sorted.
double quantile(std::span<const double> xs, double p);

/// Standard normal quantile, Acklam's rational approximation with one
/// Halley refinement step.
double normal_quantile(double p);

double normal_cdf(double x);

/// sup_x |F_n(x) - Phi((x - mu) / sd)|.
double ks_distance_normal(std::span<const double> xs, double mu, double sd);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  bool defined = false;  ///< false when the x values have no spread
};

LineFit least_squares_line(std::span<const double> x, std::span<const double> y);

}  // namespace spde::stats
