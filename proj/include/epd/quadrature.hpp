#pragma once

// Adaptive Gauss-Kronrod (7/15) integration on finite, half-infinite and
// doubly infinite intervals. Infinite ranges are mapped onto finite ones:
//
//   (-inf, inf):  x = t / (1 - t^2),     t in (-1, 1)
//   [a, inf):     x = a + t / (1 - t),   t in [0, 1)
//   (-inf, b]:    x = b + t / (1 + t),   t in (-1, 0]
//
// The rule never evaluates the integrand at a panel endpoint, so integrable
// endpoint singularities are tolerated.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace epd {

struct IntegrandDomain {
  double lower;
  double upper;
  // Integrable singularity at the endpoint: initial panels are graded toward it.
  bool singular_lower = false;
  bool singular_upper = false;

  static IntegrandDomain real_line();
  static IntegrandDomain half_line(double lower);
};

struct QuadratureOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  int max_subdivisions = 400;
  int initial_panels = 8;
};

/// Tolerances used inside optimisation loops.
inline QuadratureOptions inner_loop_quadrature() { return {1e-7, 1e-12, 400, 8}; }

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
  bool converged = false;
};

struct VectorQuadratureResult {
  std::vector<double> value;
  std::vector<double> error;
  int evaluations = 0;
  bool converged = false;

  double max_error() const;
};

using ScalarIntegrand = std::function<double(double)>;
/// Writes the integrand components at x into out.
using VectorIntegrand = std::function<void(double x, std::span<double> out)>;

/// Throws QuadratureError if the integrand returns a non-finite value, and
/// ParameterError for an empty domain or non-positive tolerances.
QuadratureResult integrate(const ScalarIntegrand& f, const IntegrandDomain& domain,
                           const QuadratureOptions& options = {});

/// Integrates all components on a shared panel set; every component must meet
/// max(abs_tol, rel_tol |value_k|) for convergence.
VectorQuadratureResult integrate_vector(const VectorIntegrand& f, std::size_t dim,
                                        const IntegrandDomain& domain,
                                        const QuadratureOptions& options = {});

}  // namespace epd
