#pragma once

// Derivative-free simplex minimisation and damped Newton root polishing.

#include <functional>

#include "epd/models.hpp"

namespace epd {

struct SimplexOptions {
  int max_iterations = 2000;
  /// Stop when the simplex diameter falls below x_tol * max(1, |x_best|_inf).
  double x_tol = 1e-9;
  /// ... or when the spread of objective values falls below f_tol * (1 + |f_best|).
  double f_tol = 1e-15;
};

struct SimplexResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

using Objective = std::function<double(const Vector&)>;

/// Nelder-Mead with standard coefficients and one restart from the best vertex.
/// Non-finite objective values are treated as +infinity.
SimplexResult nelder_mead(const Objective& f, const Vector& start, const Vector& step,
                          const SimplexOptions& options = {});

using VectorFunction = std::function<Vector(const Vector&)>;

struct NewtonOptions {
  int max_iterations = 50;
  /// Converged once |scale .* F(x)|_2 <= tol.
  double tol = 1e-10;
  /// Central-difference step for coordinate j is fd_step * scale_j.
  double fd_step = 1e-5;
};

struct NewtonResult {
  Vector x;
  Vector residual;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Damped Newton iteration on F(x) = 0 with a central-difference Jacobian.
/// `scale` gives the natural unit of each coordinate; `admissible` rejects
/// trial points outside the parameter domain.
NewtonResult newton_polish(const VectorFunction& F, const Vector& start, const Vector& scale,
                           const std::function<bool(const Vector&)>& admissible,
                           const NewtonOptions& options = {});

/// Forward/backward symmetric difference Jacobian, column j stepped by h_j.
Matrix finite_difference_jacobian(const VectorFunction& F, const Vector& x, const Vector& h);

}  // namespace epd
