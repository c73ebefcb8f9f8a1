#include "epd/divergence.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "epd/errors.hpp"

namespace epd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// log(DBL_MAX) ~ 709.78
constexpr double kExpOverflow = 709.0;
// |alpha t| below which the exponential summands use truncated series.
constexpr double kSeriesCut = 1e-3;

void check_argument(double t, const Triplet& trip) {
  trip.validate();
  if (!(t >= 0.0)) {
    std::ostringstream os;
    os << "density argument must be nonnegative, got " << t;
    throw DomainError(os.str());
  }
}

double exp_or_saturate(double x) { return x > kExpOverflow ? kInf : std::exp(x); }

// (e^{x} - 1 - x) / alpha^2 with x = alpha t
double bed_value(double t, double alpha) {
  const double x = alpha * t;
  if (std::abs(x) < kSeriesCut) {
    return t * t * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)));
  }
  if (x > kExpOverflow) return kInf;
  return (std::expm1(x) - x) / (alpha * alpha);
}

double bed_prime(double t, double alpha) {
  if (std::abs(alpha) < kAlphaLimit) return t * (1.0 + 0.5 * alpha * t);
  const double x = alpha * t;
  if (x > kExpOverflow) return kInf;
  return std::expm1(x) / alpha;
}

// (e^{x}(x - 1) + 1) / alpha^2
double bed_kernel(double t, double alpha) {
  const double x = alpha * t;
  if (std::abs(x) < kSeriesCut) {
    return t * t *
           (0.5 + x * (1.0 / 3.0 + x * (1.0 / 8.0 + x * (1.0 / 30.0 + x / 144.0))));
  }
  if (x > kExpOverflow) return kInf;
  return (std::exp(x) * (x - 1.0) + 1.0) / (alpha * alpha);
}

// t e^{alpha t}, in log space for large exponents
double bed_weight(double t, double alpha) {
  if (t == 0.0) return 0.0;
  const double x = alpha * t;
  if (x > kLogSpaceThreshold) return exp_or_saturate(x + std::log(t));
  return t * std::exp(x);
}

// (t^{gamma+1} - t) / gamma
double dpd_value(double t, double gamma) {
  if (t == 0.0) return 0.0;
  const double l = std::log(t);
  if (gamma < kGammaLimit) return t * (l + 0.5 * gamma * l * l);
  return t * std::expm1(gamma * l) / gamma;
}

// ((gamma+1) t^gamma - 1) / gamma from l = log t
double dpd_prime_from_log(double l, double gamma) {
  if (gamma < kGammaLimit) {
    if (l == -kInf) return -kInf;
    return l + 1.0 + gamma * (l + 0.5 * l * l);
  }
  if (l == -kInf) return -1.0 / gamma;
  return (gamma + 1.0) * std::expm1(gamma * l) / gamma + 1.0;
}

}  // namespace

void Triplet::validate() const {
  if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(gamma)) {
    throw ParameterError("tuning parameters must be finite: " + to_string());
  }
  if (beta < 0.0 || beta > 1.0) {
    throw ParameterError("beta must lie in [0, 1]: " + to_string());
  }
  if (gamma < 0.0) throw ParameterError("gamma must be nonnegative: " + to_string());
}

bool Triplet::is_kl() const { return beta == 0.0 && gamma < kGammaLimit; }

std::string Triplet::to_string() const {
  const auto shortest = [](double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  };
  return "(alpha=" + shortest(alpha) + ", beta=" + shortest(beta) + ", gamma=" + shortest(gamma) +
         ")";
}

double b_value(double t, const Triplet& trip) {
  check_argument(t, trip);
  double v = 0.0;
  if (trip.beta > 0.0) v += trip.beta * bed_value(t, trip.alpha);
  if (trip.beta < 1.0) v += (1.0 - trip.beta) * dpd_value(t, trip.gamma);
  return v;
}

double b_prime(double t, const Triplet& trip) {
  check_argument(t, trip);
  return b_prime_from_log(std::log(t), trip);
}

double b_prime_from_log(double log_t, const Triplet& trip) {
  trip.validate();
  if (std::isnan(log_t)) throw DomainError("log density is NaN");
  double v = 0.0;
  if (trip.beta > 0.0) v += trip.beta * bed_prime(std::exp(log_t), trip.alpha);
  if (trip.beta < 1.0) v += (1.0 - trip.beta) * dpd_prime_from_log(log_t, trip.gamma);
  return v;
}

double b_second(double t, const Triplet& trip) {
  check_argument(t, trip);
  double v = 0.0;
  if (trip.beta > 0.0) v += trip.beta * exp_or_saturate(trip.alpha * t);
  if (trip.beta < 1.0) {
    const double g = trip.gamma;
    if (t == 0.0) {
      if (g < 1.0) return kInf;
      v += (1.0 - trip.beta) * (g == 1.0 ? 2.0 : 0.0);
    } else {
      v += (1.0 - trip.beta) * (g + 1.0) * std::pow(t, g - 1.0);
    }
  }
  return v;
}

double weight(double t, const Triplet& trip) {
  check_argument(t, trip);
  double v = 0.0;
  if (trip.beta > 0.0) v += trip.beta * bed_weight(t, trip.alpha);
  if (trip.beta < 1.0) v += (1.0 - trip.beta) * (trip.gamma + 1.0) * std::pow(t, trip.gamma);
  return v;
}

double weight_slope(double t, const Triplet& trip) {
  check_argument(t, trip);
  double v = 0.0;
  if (trip.beta > 0.0) {
    const double tw = bed_weight(t, trip.alpha);
    v += trip.beta * (tw == kInf ? kInf : tw * (1.0 + trip.alpha * t));
  }
  if (trip.beta < 1.0 && trip.gamma > 0.0) {
    v += (1.0 - trip.beta) * (trip.gamma + 1.0) * trip.gamma * std::pow(t, trip.gamma);
  }
  return v;
}

double objective_kernel(double t, const Triplet& trip) {
  check_argument(t, trip);
  double v = 0.0;
  if (trip.beta > 0.0) v += trip.beta * bed_kernel(t, trip.alpha);
  if (trip.beta < 1.0) v += (1.0 - trip.beta) * std::pow(t, trip.gamma + 1.0);
  return v;
}

bool saturates(double t, const Triplet& trip) {
  check_argument(t, trip);
  return trip.beta > 0.0 && trip.alpha * t > kExpOverflow;
}

}  // namespace epd
