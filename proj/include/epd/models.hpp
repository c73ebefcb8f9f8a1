#pragma once

// Parametric families f_theta with their score u_theta = grad log f_theta and
// information i_theta = -grad u_theta.

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epd/quadrature.hpp"

namespace epd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Support {
  double lower;
  double upper;
  bool contains(double x) const { return x >= lower && x <= upper; }
};

/// Affine change of variable x = center + scale * z. Integrals over the
/// support are computed in z so that tolerances do not depend on data units.
struct Frame {
  double center;
  double scale;
};

class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  virtual std::size_t param_dim() const = 0;
  virtual std::vector<std::string> param_names() const = 0;
  virtual Support support() const = 0;

  /// Throws ParameterError for a wrong dimension, non-finite entries or a
  /// parameter on/outside its constraint boundary.
  virtual void check(const Vector& theta) const = 0;

  /// -infinity outside the support.
  virtual double log_density(const Vector& theta, double x) const = 0;
  double density(const Vector& theta, double x) const;

  virtual Vector score(const Vector& theta, double x) const = 0;
  virtual Matrix information(const Vector& theta, double x) const = 0;

  /// sup_x f_theta(x).
  virtual double density_sup(const Vector& theta) const = 0;

  virtual Frame frame(const Vector& theta) const = 0;

  /// Natural unit of each parameter coordinate at theta (e.g. sigma for a
  /// location, sigma^2 for a variance). Used to make residual norms unit-free.
  virtual Vector param_scale(const Vector& theta) const;

  /// Bijection between the constrained parameter space and R^p.
  virtual Vector to_unconstrained(const Vector& theta) const;
  virtual Vector from_unconstrained(const Vector& z) const;

  /// Outlier-resistant starting value computed from a sample.
  virtual Vector robust_start(std::span<const double> x) const;

  /// True if f_theta is symmetric about theta[0] (a location parameter).
  virtual bool symmetric_location() const { return false; }
};

/// N(mu, sigma^2) with theta = (mu, sigma^2).
class NormalLocationScale final : public Model {
 public:
  std::string name() const override { return "normal"; }
  std::size_t param_dim() const override { return 2; }
  std::vector<std::string> param_names() const override { return {"mu", "sigma2"}; }
  Support support() const override;
  void check(const Vector& theta) const override;
  double log_density(const Vector& theta, double x) const override;
  Vector score(const Vector& theta, double x) const override;
  Matrix information(const Vector& theta, double x) const override;
  double density_sup(const Vector& theta) const override;
  Frame frame(const Vector& theta) const override;
  Vector param_scale(const Vector& theta) const override;
  Vector to_unconstrained(const Vector& theta) const override;
  Vector from_unconstrained(const Vector& z) const override;
  /// (median, (1.4826 MAD)^2)
  Vector robust_start(std::span<const double> x) const override;
  bool symmetric_location() const override { return true; }
};

/// Exponential distribution parameterised by its mean: f(x) = e^{-x/m} / m, x >= 0.
class ExponentialMean final : public Model {
 public:
  std::string name() const override { return "exponential"; }
  std::size_t param_dim() const override { return 1; }
  std::vector<std::string> param_names() const override { return {"mean"}; }
  Support support() const override;
  void check(const Vector& theta) const override;
  double log_density(const Vector& theta, double x) const override;
  Vector score(const Vector& theta, double x) const override;
  Matrix information(const Vector& theta, double x) const override;
  double density_sup(const Vector& theta) const override;
  Frame frame(const Vector& theta) const override;
  Vector param_scale(const Vector& theta) const override;
  Vector to_unconstrained(const Vector& theta) const override;
  Vector from_unconstrained(const Vector& z) const override;
  /// median / log 2
  Vector robust_start(std::span<const double> x) const override;
};

/// Response i of the normal linear model Y_i ~ N(x_i' eta, sigma^2), with
/// theta = (eta_1, ..., eta_p, sigma^2) and the covariate row x_i fixed.
class RegressionObservation final : public Model {
 public:
  explicit RegressionObservation(Vector covariates);

  std::string name() const override { return "regression-normal"; }
  std::size_t param_dim() const override { return static_cast<std::size_t>(x_.size()) + 1; }
  std::vector<std::string> param_names() const override;
  Support support() const override;
  void check(const Vector& theta) const override;
  double log_density(const Vector& theta, double y) const override;
  Vector score(const Vector& theta, double y) const override;
  Matrix information(const Vector& theta, double y) const override;
  double density_sup(const Vector& theta) const override;
  Frame frame(const Vector& theta) const override;
  Vector param_scale(const Vector& theta) const override;
  Vector to_unconstrained(const Vector& theta) const override;
  Vector from_unconstrained(const Vector& z) const override;

  const Vector& covariates() const { return x_; }
  double mean(const Vector& theta) const;

 private:
  Vector x_;
};

/// "normal" or "exponential"; throws ParameterError otherwise.
std::unique_ptr<Model> make_model(std::string_view name);

/// Integrates integrand(x, out) over the model support at theta, working in the
/// standardised variable of Model::frame. The integrand sees x, not z.
VectorQuadratureResult integrate_over_support(const Model& model, const Vector& theta,
                                              std::size_t dim, const VectorIntegrand& integrand,
                                              const QuadratureOptions& options = {});

double median(std::vector<double> values);
/// Median absolute deviation about the median (unnormalised).
double mad(std::span<const double> values);

}  // namespace epd
