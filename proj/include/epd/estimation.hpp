#pragma once

// Minimum-EPD estimation for IID samples.
//
// The empirical objective is H_n(theta) = n^{-1} sum_i V_theta(X_i) with
//
//   V_theta(x) = -B'(f_theta(x)) + int { f_theta B'(f_theta) - B(f_theta) } dt
//
// and its stationarity condition is the weighted-likelihood estimating equation
//
//   n^{-1} sum_i T_theta(X_i) - E_{f_theta} T_theta = 0,
//   T_theta(x) = u_theta(x) w(f_theta(x)).

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epd/divergence.hpp"
#include "epd/models.hpp"
#include "epd/quadrature.hpp"

namespace epd {

struct Sample {
  std::vector<double> observations;
  std::string name;
  std::string provenance;

  std::size_t size() const { return observations.size(); }
  /// Finite entries, at least param_dim observations, all inside the support.
  void validate(const Model& model) const;
};

struct FitOptions {
  /// Quadrature used while the simplex explores.
  QuadratureOptions search_quadrature{1e-8, 1e-13, 400, 8};
  /// Quadrature used for root polishing and reported values.
  QuadratureOptions quadrature{1e-11, 1e-14, 600, 8};
  int max_iterations = 2000;
  double simplex_tol = 1e-9;
  /// Bound on the standardised estimating-equation residual for convergence.
  double residual_tol = 1e-7;
  /// Starts used when gamma >= 0.3 or beta >= 0.5 (otherwise one start).
  int multistart = 5;
  bool always_multistart = false;
};

struct FitResult {
  Vector theta_hat;
  double objective = 0.0;
  /// |scale .* residual|_2 where scale is Model::param_scale at theta_hat:
  /// the estimating-equation residual in the model's natural units.
  double ee_residual_norm = 0.0;
  bool converged = false;
  int iterations = 0;
  int starts = 0;
  /// Distinct local minima were found from different starts.
  bool multiple_roots = false;
  double quadrature_error = 0.0;
  std::optional<Matrix> variance;
  std::vector<std::string> warnings;
};

/// Evaluates H_n, V_theta and the estimating function for one sample, model and
/// triplet. The observations are held sorted so every reduction is independent
/// of input order.
class EmpiricalObjective {
 public:
  EmpiricalObjective(const Model& model, std::span<const double> observations, Triplet trip,
                     QuadratureOptions quadrature = {});

  /// int { f B'(f) - B(f) } over the support; +inf when exp() saturates.
  double integral_term(const Vector& theta) const;
  double v_theta(const Vector& theta, double x) const;
  double value(const Vector& theta) const;

  /// E_{f_theta} T_theta by quadrature.
  Vector model_mean_t(const Vector& theta) const;
  /// n^{-1} sum_i T_theta(X_i)
  Vector sample_mean_t(const Vector& theta) const;
  /// sample_mean_t - model_mean_t, which equals -grad H_n.
  Vector residual(const Vector& theta) const;

  const Model& model() const { return model_; }
  const Triplet& triplet() const { return trip_; }
  std::span<const double> observations() const { return x_; }
  void set_quadrature(const QuadratureOptions& q) { quad_ = q; }
  /// Largest quadrature error estimate seen so far.
  double quadrature_error() const { return max_quad_error_; }

 private:
  const Model& model_;
  std::vector<double> x_;
  Triplet trip_;
  QuadratureOptions quad_;
  mutable double max_quad_error_ = 0.0;
};

/// T_theta(x) = u_theta(x) w(f_theta(x)).
Vector t_function(const Model& model, const Vector& theta, const Triplet& trip, double x);

double v_theta(const Model& model, const Vector& theta, const Triplet& trip, double x,
               const QuadratureOptions& quadrature = {});
double objective_hn(const Sample& sample, const Model& model, const Vector& theta,
                    const Triplet& trip, const QuadratureOptions& quadrature = {});
Vector estimating_residual(const Sample& sample, const Model& model, const Vector& theta,
                           const Triplet& trip, const QuadratureOptions& quadrature = {});

/// Simplex minimisation of H_n in unconstrained coordinates, then damped
/// Newton polishing of the estimating equation. Never throws for
/// non-convergence: the result is flagged instead.
FitResult fit_mepde(const Sample& sample, const Model& model, const Triplet& trip,
                    const std::optional<Vector>& init = std::nullopt,
                    const FitOptions& options = {});

/// fit_mepde at the Kullback-Leibler member (beta = 0, gamma = 0).
FitResult fit_mle(const Sample& sample, const Model& model, const FitOptions& options = {});

}  // namespace epd
