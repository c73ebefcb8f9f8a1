#pragma once

// Generating function B of the exponential-polynomial divergence and the
// quantities derived from it:
//
//   B(t) = beta (e^{alpha t} - 1 - alpha t) / alpha^2
//        + (1 - beta) (t^{gamma+1} - t) / gamma,          t >= 0.
//
// beta = 0 gives the density power divergence DPD(gamma), beta = 1 the
// exponential divergence BED(alpha), and beta = 0, gamma -> 0 the
// Kullback-Leibler divergence (B(t) = t log t).

#include <cmath>
#include <string>

namespace epd {

/// Tuning parameters (alpha, beta, gamma) indexing one member of the family.
struct Triplet {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  static Triplet kl() { return {0.0, 0.0, 0.0}; }
  static Triplet dpd(double gamma) { return {0.0, 0.0, gamma}; }
  static Triplet bed(double alpha) { return {alpha, 1.0, 0.0}; }

  /// Throws ParameterError unless alpha is finite, beta in [0, 1], gamma >= 0.
  void validate() const;

  /// True when the member is (numerically) the maximum-likelihood case.
  bool is_kl() const;

  std::string to_string() const;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Below this gamma the polynomial summand switches to its t log t limit.
inline constexpr double kGammaLimit = 1e-6;
/// Below this |alpha| the exponential summand uses its t^2/2 limit.
inline constexpr double kAlphaLimit = 1e-8;
/// alpha * t beyond which exp() is formed in log space.
inline constexpr double kLogSpaceThreshold = 500.0;

double b_value(double t, const Triplet& trip);
double b_prime(double t, const Triplet& trip);

/// B''(t). For gamma < 1 the polynomial part is singular at t = 0 and the
/// result is +infinity there (see is_boundary_value()).
double b_second(double t, const Triplet& trip);

/// w(t) = t B''(t) = beta t e^{alpha t} + (1 - beta)(gamma + 1) t^gamma.
/// w(0) is taken by continuity.
double weight(double t, const Triplet& trip);

/// t w'(t) = beta t e^{alpha t}(1 + alpha t) + (1 - beta)(gamma + 1) gamma t^gamma.
/// Enters the derivative of the estimating function.
double weight_slope(double t, const Triplet& trip);

/// B'(t) evaluated from log t. Keeps the Kullback-Leibler branch finite for
/// densities that underflow (B'(t) ~ log t + 1).
double b_prime_from_log(double log_t, const Triplet& trip);

/// t B'(t) - B(t): the integrand of the theta-dependent integral term of the
/// empirical objective.
double objective_kernel(double t, const Triplet& trip);

/// True when exp(alpha t) overflows and the functions above saturate to
/// +infinity instead of returning a finite value.
bool saturates(double t, const Triplet& trip);

/// Saturated or singular values are reported as +infinity.
inline bool is_boundary_value(double v) { return std::isinf(v) && v > 0.0; }

}  // namespace epd
