#include "epd/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "epd/errors.hpp"

namespace epd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMadToSigma = 1.482602218505602;

void check_dim(const Vector& theta, std::size_t p, const std::string& model) {
  if (static_cast<std::size_t>(theta.size()) != p) {
    std::ostringstream os;
    os << model << " model expects " << p << " parameters, got " << theta.size();
    throw ParameterError(os.str());
  }
  if (!theta.allFinite()) throw ParameterError(model + " parameters must be finite");
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) {
    std::ostringstream os;
    os << what << " must be positive, got " << v;
    throw ParameterError(os.str());
  }
}

double normal_log_density(double r, double s2) {
  return -0.5 * std::log(2.0 * std::numbers::pi * s2) - 0.5 * r * r / s2;
}

}  // namespace

double Model::density(const Vector& theta, double x) const {
  const double l = log_density(theta, x);
  return l == -kInf ? 0.0 : std::exp(l);
}

Vector Model::param_scale(const Vector& theta) const {
  return Vector::Ones(theta.size());
}

Vector Model::to_unconstrained(const Vector& theta) const { return theta; }
Vector Model::from_unconstrained(const Vector& z) const { return z; }

Vector Model::robust_start(std::span<const double>) const {
  throw EstimationError(name() + " model has no default starting value");
}

double median(std::vector<double> v) {
  if (v.empty()) throw DataError("median of an empty sample");
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + n / 2);
  return 0.5 * (lo + hi);
}

double mad(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  const double m = median(v);
  for (auto& x : v) x = std::abs(x - m);
  return median(std::move(v));
}

// --- NormalLocationScale ----------------------------------------------------

Support NormalLocationScale::support() const { return {-kInf, kInf}; }

void NormalLocationScale::check(const Vector& theta) const {
  check_dim(theta, 2, "normal");
  require_positive(theta[1], "normal variance");
}

double NormalLocationScale::log_density(const Vector& theta, double x) const {
  check(theta);
  return normal_log_density(x - theta[0], theta[1]);
}

Vector NormalLocationScale::score(const Vector& theta, double x) const {
  check(theta);
  const double r = x - theta[0];
  const double s2 = theta[1];
  Vector u(2);
  u << r / s2, (r * r - s2) / (2.0 * s2 * s2);
  return u;
}

Matrix NormalLocationScale::information(const Vector& theta, double x) const {
  check(theta);
  const double r = x - theta[0];
  const double s2 = theta[1];
  const double s4 = s2 * s2;
  Matrix i(2, 2);
  i << 1.0 / s2, r / s4, r / s4, r * r / (s4 * s2) - 0.5 / s4;
  return i;
}

double NormalLocationScale::density_sup(const Vector& theta) const {
  check(theta);
  return 1.0 / std::sqrt(2.0 * std::numbers::pi * theta[1]);
}

Frame NormalLocationScale::frame(const Vector& theta) const {
  check(theta);
  return {theta[0], std::sqrt(theta[1])};
}

Vector NormalLocationScale::param_scale(const Vector& theta) const {
  check(theta);
  Vector s(2);
  s << std::sqrt(theta[1]), theta[1];
  return s;
}

Vector NormalLocationScale::to_unconstrained(const Vector& theta) const {
  check(theta);
  Vector z(2);
  z << theta[0], std::log(theta[1]);
  return z;
}

Vector NormalLocationScale::from_unconstrained(const Vector& z) const {
  Vector theta(2);
  theta << z[0], std::exp(z[1]);
  return theta;
}

Vector NormalLocationScale::robust_start(std::span<const double> x) const {
  std::vector<double> v(x.begin(), x.end());
  const double m = median(v);
  double s = kMadToSigma * mad(x);
  if (!(s > 0.0)) {
    // more than half the sample is tied; fall back to the spread of the rest
    double ss = 0.0;
    for (double xi : x) ss += (xi - m) * (xi - m);
    s = std::sqrt(ss / static_cast<double>(x.size()));
    if (!(s > 0.0)) s = std::max(1e-3 * std::abs(m), 1e-8);
  }
  Vector theta(2);
  theta << m, s * s;
  return theta;
}

// --- ExponentialMean --------------------------------------------------------

Support ExponentialMean::support() const { return {0.0, kInf}; }

void ExponentialMean::check(const Vector& theta) const {
  check_dim(theta, 1, "exponential");
  require_positive(theta[0], "exponential mean");
}

double ExponentialMean::log_density(const Vector& theta, double x) const {
  check(theta);
  if (x < 0.0) return -kInf;
  return -std::log(theta[0]) - x / theta[0];
}

Vector ExponentialMean::score(const Vector& theta, double x) const {
  check(theta);
  const double m = theta[0];
  Vector u(1);
  u << (x - m) / (m * m);
  return u;
}

Matrix ExponentialMean::information(const Vector& theta, double x) const {
  check(theta);
  const double m = theta[0];
  Matrix i(1, 1);
  i << (2.0 * x - m) / (m * m * m);
  return i;
}

double ExponentialMean::density_sup(const Vector& theta) const {
  check(theta);
  return 1.0 / theta[0];
}

Frame ExponentialMean::frame(const Vector& theta) const {
  check(theta);
  return {0.0, theta[0]};
}

Vector ExponentialMean::param_scale(const Vector& theta) const {
  check(theta);
  return theta;
}

Vector ExponentialMean::to_unconstrained(const Vector& theta) const {
  check(theta);
  return theta.array().log().matrix();
}

Vector ExponentialMean::from_unconstrained(const Vector& z) const {
  return z.array().exp().matrix();
}

Vector ExponentialMean::robust_start(std::span<const double> x) const {
  std::vector<double> v(x.begin(), x.end());
  double m = median(v) / std::numbers::ln2;
  if (!(m > 0.0)) {
    double s = 0.0;
    for (double xi : x) s += xi;
    m = s / static_cast<double>(x.size());
    if (!(m > 0.0)) m = 1.0;
  }
  Vector theta(1);
  theta << m;
  return theta;
}

// --- RegressionObservation --------------------------------------------------

RegressionObservation::RegressionObservation(Vector covariates) : x_(std::move(covariates)) {
  if (x_.size() == 0 || !x_.allFinite()) {
    throw ParameterError("regression covariates must be a non-empty finite vector");
  }
}

std::vector<std::string> RegressionObservation::param_names() const {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < x_.size(); ++j) names.push_back("eta" + std::to_string(j));
  names.emplace_back("sigma2");
  return names;
}

Support RegressionObservation::support() const { return {-kInf, kInf}; }

void RegressionObservation::check(const Vector& theta) const {
  check_dim(theta, param_dim(), "regression");
  require_positive(theta[theta.size() - 1], "regression error variance");
}

double RegressionObservation::mean(const Vector& theta) const {
  return x_.dot(theta.head(x_.size()));
}

double RegressionObservation::log_density(const Vector& theta, double y) const {
  check(theta);
  return normal_log_density(y - mean(theta), theta[theta.size() - 1]);
}

Vector RegressionObservation::score(const Vector& theta, double y) const {
  check(theta);
  const Eigen::Index p = x_.size();
  const double s2 = theta[p];
  const double r = y - mean(theta);
  Vector u(p + 1);
  u.head(p) = (r / s2) * x_;
  u[p] = (r * r - s2) / (2.0 * s2 * s2);
  return u;
}

Matrix RegressionObservation::information(const Vector& theta, double y) const {
  check(theta);
  const Eigen::Index p = x_.size();
  const double s2 = theta[p];
  const double s4 = s2 * s2;
  const double r = y - mean(theta);
  Matrix i(p + 1, p + 1);
  i.topLeftCorner(p, p) = (x_ * x_.transpose()) / s2;
  i.topRightCorner(p, 1) = (r / s4) * x_;
  i.bottomLeftCorner(1, p) = (r / s4) * x_.transpose();
  i(p, p) = r * r / (s4 * s2) - 0.5 / s4;
  return i;
}

double RegressionObservation::density_sup(const Vector& theta) const {
  check(theta);
  return 1.0 / std::sqrt(2.0 * std::numbers::pi * theta[theta.size() - 1]);
}

Frame RegressionObservation::frame(const Vector& theta) const {
  check(theta);
  return {mean(theta), std::sqrt(theta[theta.size() - 1])};
}

Vector RegressionObservation::param_scale(const Vector& theta) const {
  check(theta);
  const double s2 = theta[theta.size() - 1];
  Vector s = Vector::Constant(theta.size(), std::sqrt(s2));
  s[s.size() - 1] = s2;
  return s;
}

Vector RegressionObservation::to_unconstrained(const Vector& theta) const {
  check(theta);
  Vector z = theta;
  z[z.size() - 1] = std::log(theta[theta.size() - 1]);
  return z;
}

Vector RegressionObservation::from_unconstrained(const Vector& z) const {
  Vector theta = z;
  theta[theta.size() - 1] = std::exp(z[z.size() - 1]);
  return theta;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Model> make_model(std::string_view name) {
  if (name == "normal") return std::make_unique<NormalLocationScale>();
  if (name == "exponential") return std::make_unique<ExponentialMean>();
  throw ParameterError("unknown model '" + std::string(name) +
                       "' (expected normal or exponential)");
}

VectorQuadratureResult integrate_over_support(const Model& model, const Vector& theta,
                                              std::size_t dim, const VectorIntegrand& integrand,
                                              const QuadratureOptions& options) {
  const Frame fr = model.frame(theta);
  const Support sup = model.support();
  const double zlo = std::isinf(sup.lower) ? sup.lower : (sup.lower - fr.center) / fr.scale;
  const double zhi = std::isinf(sup.upper) ? sup.upper : (sup.upper - fr.center) / fr.scale;
  const VectorIntegrand in_z = [&](double z, std::span<double> out) {
    integrand(fr.center + fr.scale * z, out);
    for (auto& v : out) v *= fr.scale;
  };
  return integrate_vector(in_z, dim, IntegrandDomain{zlo, zhi}, options);
}

}  // namespace epd
