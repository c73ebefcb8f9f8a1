#pragma once

// Minimum-EPD estimation for the normal-error linear model
// Y_i = x_i^T eta + e_i, e_i ~ N(0, sigma^2), with theta = (eta, sigma^2).
//
// Every model integral below is over f_i = N(x_i^T eta, sigma^2). After the
// substitution y -> y - x_i^T eta it becomes an integral over N(0, sigma^2),
// so it depends on sigma^2 only and is computed once per sigma^2 rather than
// once per observation. regression_residual_per_observation keeps the literal
// per-i integrals for checking this.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "epd/divergence.hpp"
#include "epd/estimation.hpp"
#include "epd/models.hpp"
#include "epd/quadrature.hpp"
#include "epd/tuning.hpp"

namespace epd {

struct RegressionProblem {
  /// n x p, including the intercept column when present.
  Matrix design;
  Vector response;
  std::vector<std::string> column_names;
  std::string name;

  /// Prepends a column of ones to x.
  static RegressionProblem with_intercept(const Matrix& x, const Vector& y,
                                          std::vector<std::string> names = {},
                                          std::string name = {});

  Eigen::Index n() const { return design.rows(); }
  Eigen::Index p() const { return design.cols(); }
  /// Finite entries, matching sizes, n > p and full column rank.
  void validate() const;
};

struct OlsResult {
  Vector eta;
  /// Residual sum of squares over n (the ML estimate).
  double sigma2_ml = 0.0;
  /// Residual sum of squares over n - p.
  double sigma2_unbiased = 0.0;
};

OlsResult ols(const RegressionProblem& problem);

/// The four scalar integrals against phi = N(0, sigma^2) density, with
/// w the EPD weight:
///   omega1 = int y^2/sigma^4 w(phi) phi            omega3 = int y^2/sigma^4 w(phi)^2 phi
///   omega2 = int (y^2-sigma^2)^2/(4 sigma^8) w phi  omega4 = int (y^2-sigma^2)^2/(4 sigma^8) w^2 phi - c^2
/// where c = int (y^2-sigma^2)/(2 sigma^4) w(phi) phi.
struct Omegas {
  double omega1 = 0.0;
  double omega2 = 0.0;
  double omega3 = 0.0;
  double omega4 = 0.0;
};

Omegas omega_integrals(double sigma2, const Triplet& trip, const QuadratureOptions& q = {});

struct InhMatrices {
  Matrix psi_n;
  Matrix omega_n;
  /// Per-observation xi_i (empty for psi_omega_matrices).
  std::vector<Vector> xi;
};

/// Psi_n = blockdiag(omega1/n X^T X, omega2), Omega_n = blockdiag(omega3/n X^T X, omega4).
InhMatrices psi_omega_matrices(const RegressionProblem& problem, double sigma2,
                               const Triplet& trip, const QuadratureOptions& q = {});

/// General per-observation forms averaged over i. With PlugIn::model every
/// g_i is f_i(.; theta). With PlugIn::empirical each g_i is the point mass at
/// y_i for J^(i) and xi_i; Omega_n then uses the model-centred outer products
/// (T_i(y_i) - E_{f_i} T_i)(...)^T since Var of a point mass is zero.
InhMatrices general_inh_matrices(const RegressionProblem& problem, const Triplet& trip,
                                 const Vector& theta, PlugIn plug_in,
                                 const QuadratureOptions& q = {});

/// H_n(theta) = int { f B'(f) - B(f) } - n^{-1} sum_i B'(f_i(Y_i)).
double regression_objective(const RegressionProblem& problem, const Vector& theta,
                            const Triplet& trip, const QuadratureOptions& q = {});

/// n^{-1} sum_i [T_i(Y_i) - E_{f_i} T_i], with the shared sigma^2 integral.
Vector regression_residual(const RegressionProblem& problem, const Vector& theta,
                           const Triplet& trip, const QuadratureOptions& q = {});

/// Same quantity with E_{f_i} T_i integrated separately for every i.
Vector regression_residual_per_observation(const RegressionProblem& problem,
                                           const Vector& theta, const Triplet& trip,
                                           const QuadratureOptions& q = {});

struct RegressionFitOptions {
  QuadratureOptions search_quadrature{1e-8, 1e-13, 400, 8};
  QuadratureOptions quadrature{1e-11, 1e-14, 600, 8};
  /// Alternating eta / sigma^2 sweeps before falling back to the simplex.
  int max_sweeps = 300;
  int max_iterations = 2000;
  double residual_tol = 1e-7;
  /// Elemental-subset starts kept from each ranking, by H_n and by median
  /// squared residual (used without init).
  int elemental_starts = 3;
  /// Cap on the number of elemental subsets scored.
  int max_subsets = 3000;
  /// Seeds the subset sampler when the subsets are too many to enumerate.
  std::uint64_t seed = 0;
};

struct RegressionFit {
  Vector eta_hat;
  double sigma2_hat = 0.0;
  double objective = 0.0;
  double ee_residual_norm = 0.0;
  /// Model-based blocks at the fit; variance = Psi^{-1} Omega Psi^{-1} / n.
  Matrix psi_n;
  Matrix omega_n;
  Matrix variance;
  bool converged = false;
  int iterations = 0;
  int starts = 0;
  bool multiple_roots = false;
  std::vector<std::string> warnings;

  Vector theta() const;
};

/// Alternates a weighted least squares eta-step with a one-dimensional
/// sigma^2 step, falls back to a simplex on H_n when that stalls, and polishes
/// the root with damped Newton. Starts: init (or LAD) plus, without init, the
/// best elemental subsets; the lowest-H_n converged root is reported.
RegressionFit fit_regression_mepde(const RegressionProblem& problem, const Triplet& trip,
                                   const std::optional<Vector>& init = std::nullopt,
                                   const RegressionFitOptions& options = {});

/// Least absolute deviations by iteratively reweighted least squares.
Vector lad_start(const RegressionProblem& problem, int iterations = 100);

/// Regression MDPDE(pilot_gamma) fit used as the pilot; throws if it fails.
Vector regression_pilot(const RegressionProblem& problem, double pilot_gamma = 0.5,
                        const RegressionFitOptions& options = {});

/// Summed-MSE criterion at one triplet, with Psi_n and Omega_n per plug_in.
MsePoint evaluate_regression_mse(const RegressionProblem& problem, const Triplet& trip,
                                 const Vector& pilot, PlugIn plug_in = PlugIn::model,
                                 const RegressionFitOptions& options = {},
                                 const std::optional<Vector>& warm = std::nullopt);

/// Warwick-Jones selection with a regression MDPDE pilot.
TuneResult tune_regression_wj(const RegressionProblem& problem, const TuneConfig& config = {},
                              const RegressionFitOptions& options = {});

}  // namespace epd
