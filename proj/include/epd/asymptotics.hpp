#pragma once

// Sandwich matrices of the minimum-EPD M-estimator with
// psi_theta(x) = T_theta(x) - E_{f_theta} T_theta:
//
//   J = int w(f) f u u^T + int (g - f) h,   h = i w(f) - (t w'(t))|_{t=f} u u^T
//   K = E_g[T T^T] - xi xi^T,               xi = E_g T
//
// At g = f_theta the correction term in J vanishes.

#include <functional>
#include <span>

#include "epd/divergence.hpp"
#include "epd/models.hpp"
#include "epd/quadrature.hpp"

namespace epd {

/// Condition numbers above this flag a matrix as degenerate.
inline constexpr double kDegenerateCondition = 1e12;

struct SpdInverse {
  Matrix inverse;
  /// Ratio of extreme eigenvalues; +inf when not positive definite.
  double condition = 0.0;
  bool degenerate = false;
};

/// Inverse of a symmetric matrix through a Cholesky factorisation. The
/// inverse is still filled (by LU) for indefinite but invertible input.
SpdInverse spd_inverse(const Matrix& a);

struct SandwichMatrices {
  Matrix J;
  Matrix K;
  Vector xi;
  /// J^{-1} K J^{-1}, symmetrised.
  Matrix variance;
  double condition = 0.0;
  bool degenerate = false;
};

/// A data-generating density g with the affine frame used for its quadrature.
struct Density {
  std::function<double(double)> pdf;
  Support support;
  Frame frame;
};

SandwichMatrices model_jkxi(const Model& model, const Vector& theta, const Triplet& trip,
                            const QuadratureOptions& quadrature = {});

/// General-g form with g given as a density (integrals by quadrature).
SandwichMatrices general_jk(const Density& g, const Model& model, const Vector& theta,
                            const Triplet& trip, const QuadratureOptions& quadrature = {});

/// Plug-in form J(G_n), K(G_n): integrals against g become sample means.
SandwichMatrices general_jk(std::span<const double> sample, const Model& model,
                            const Vector& theta, const Triplet& trip,
                            const QuadratureOptions& quadrature = {});

/// Influence function y -> J^{-1}(T_theta(y) - xi) with J, xi at the model.
/// Construction computes the matrices once.
class InfluenceFunction {
 public:
  InfluenceFunction(const Model& model, Vector theta, Triplet trip,
                    const QuadratureOptions& quadrature = {});

  Vector operator()(double y) const;
  const SandwichMatrices& matrices() const { return m_; }

 private:
  const Model& model_;
  Vector theta_;
  Triplet trip_;
  SandwichMatrices m_;
  Matrix j_inv_;
};

Vector influence(double y, const Model& model, const Vector& theta, const Triplet& trip);

struct GesOptions {
  int grid_points = 2001;
  /// Grid half-width in units of the model scale (lower-bounded supports use
  /// [lower, lower + 20 * scale] instead).
  double half_width = 12.0;
  /// Times the grid is doubled when the maximum sits on its edge.
  int extensions = 4;
};

struct GesResult {
  double y_star = 0.0;
  /// Euclidean norm of the influence at y_star; +inf when unbounded.
  double value = 0.0;
  bool unbounded = false;
};

GesResult ges(const Model& model, const Vector& theta, const Triplet& trip,
              const GesOptions& options = {});

/// J^{-1}(G_n) {(n-1)^{-1} sum R_i R_i^T} J^{-1}(G_n) / n with
/// R_i = T(X_i) - E_{f_theta} T: the estimated covariance of theta_hat.
Matrix sandwich_variance(std::span<const double> sample, const Model& model,
                         const Vector& theta_hat, const Triplet& trip,
                         const QuadratureOptions& quadrature = {});

/// n^{-1} tr(J^{-1} K J^{-1}) + |theta_g - theta_star|^2.
double asymptotic_summed_mse(const Vector& theta_g, const Vector& theta_star, const Matrix& J,
                             const Matrix& K, double n);

}  // namespace epd
