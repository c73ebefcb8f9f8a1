#include "epd/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "epd/errors.hpp"
#include "epd/optimize.hpp"

namespace epd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool admissible(const Model& model, const Vector& theta) {
  try {
    model.check(theta);
    return true;
  } catch (const ParameterError&) {
    return false;
  }
}

// Step in unconstrained coordinates equivalent to one natural unit of theta_j.
Vector unconstrained_unit(const Model& model, const Vector& theta) {
  const Vector z0 = model.to_unconstrained(theta);
  const Vector scale = model.param_scale(theta);
  Vector s(theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    Vector t = theta;
    t[j] += scale[j];
    s[j] = std::abs(model.to_unconstrained(t)[j] - z0[j]);
    if (!(s[j] > 0.0) || !std::isfinite(s[j])) s[j] = 1.0;
  }
  return s;
}

std::vector<Vector> starting_points(const Model& model, const Vector& base, int extra) {
  std::vector<Vector> starts{base};
  const Vector z0 = model.to_unconstrained(base);
  const Vector unit = unconstrained_unit(model, base);
  const auto p = static_cast<int>(base.size());
  for (int k = 0; k < extra; ++k) {
    const int j = k % p;
    const double sign = ((k / p) % 2 == 0) ? 1.0 : -1.0;
    const double mult = 1.0 + static_cast<double>(k / (2 * p));
    Vector z = z0;
    z[j] += sign * mult * unit[j];
    starts.push_back(model.from_unconstrained(z));
  }
  return starts;
}

struct StartOutcome {
  Vector theta;
  double objective = kInf;
  double residual_norm = kInf;
  bool converged = false;
  int iterations = 0;
};

}  // namespace

void Sample::validate(const Model& model) const {
  if (observations.size() < std::max<std::size_t>(model.param_dim(), 1)) {
    std::ostringstream os;
    os << "sample '" << name << "' has " << observations.size()
       << " observations; the model needs at least " << model.param_dim();
    throw DataError(os.str());
  }
  const Support sup = model.support();
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const double x = observations[i];
    if (!std::isfinite(x)) {
      throw DataError("sample '" + name + "' has a non-finite observation at index " +
                      std::to_string(i));
    }
    if (!sup.contains(x)) {
      std::ostringstream os;
      os << "observation " << x << " at index " << i << " lies outside the " << model.name()
         << " support";
      throw DataError(os.str());
    }
  }
}

Vector t_function(const Model& model, const Vector& theta, const Triplet& trip, double x) {
  return model.score(theta, x) * weight(model.density(theta, x), trip);
}

EmpiricalObjective::EmpiricalObjective(const Model& model, std::span<const double> observations,
                                       Triplet trip, QuadratureOptions quadrature)
    : model_(model), x_(observations.begin(), observations.end()), trip_(trip), quad_(quadrature) {
  trip_.validate();
  std::sort(x_.begin(), x_.end());
}

double EmpiricalObjective::integral_term(const Vector& theta) const {
  if (saturates(model_.density_sup(theta), trip_)) return kInf;
  const auto r = integrate_over_support(
      model_, theta, 1,
      [&](double x, std::span<double> out) {
        out[0] = objective_kernel(model_.density(theta, x), trip_);
      },
      quad_);
  max_quad_error_ = std::max(max_quad_error_, r.error[0]);
  return r.value[0];
}

double EmpiricalObjective::v_theta(const Vector& theta, double x) const {
  return integral_term(theta) - b_prime_from_log(model_.log_density(theta, x), trip_);
}

double EmpiricalObjective::value(const Vector& theta) const {
  const double integral = integral_term(theta);
  if (integral == kInf) return kInf;
  double s = 0.0;
  for (double x : x_) s += b_prime_from_log(model_.log_density(theta, x), trip_);
  return integral - s / static_cast<double>(x_.size());
}

Vector EmpiricalObjective::model_mean_t(const Vector& theta) const {
  const auto p = model_.param_dim();
  if (saturates(model_.density_sup(theta), trip_)) return Vector::Constant(p, kInf);
  const auto r = integrate_over_support(
      model_, theta, p,
      [&](double x, std::span<double> out) {
        const double f = model_.density(theta, x);
        if (f == 0.0) {
          std::fill(out.begin(), out.end(), 0.0);
          return;
        }
        const Vector u = model_.score(theta, x);
        const double wf = weight(f, trip_) * f;
        for (std::size_t k = 0; k < p; ++k) out[k] = u[k] * wf;
      },
      quad_);
  max_quad_error_ = std::max(max_quad_error_, r.max_error());
  return Eigen::Map<const Vector>(r.value.data(), static_cast<Eigen::Index>(p));
}

Vector EmpiricalObjective::sample_mean_t(const Vector& theta) const {
  Vector s = Vector::Zero(model_.param_dim());
  for (double x : x_) s += t_function(model_, theta, trip_, x);
  return s / static_cast<double>(x_.size());
}

Vector EmpiricalObjective::residual(const Vector& theta) const {
  return sample_mean_t(theta) - model_mean_t(theta);
}

double v_theta(const Model& model, const Vector& theta, const Triplet& trip, double x,
               const QuadratureOptions& quadrature) {
  const double one[1] = {x};
  return EmpiricalObjective(model, one, trip, quadrature).v_theta(theta, x);
}

double objective_hn(const Sample& sample, const Model& model, const Vector& theta,
                    const Triplet& trip, const QuadratureOptions& quadrature) {
  sample.validate(model);
  return EmpiricalObjective(model, sample.observations, trip, quadrature).value(theta);
}

Vector estimating_residual(const Sample& sample, const Model& model, const Vector& theta,
                           const Triplet& trip, const QuadratureOptions& quadrature) {
  sample.validate(model);
  return EmpiricalObjective(model, sample.observations, trip, quadrature).residual(theta);
}

FitResult fit_mepde(const Sample& sample, const Model& model, const Triplet& trip,
                    const std::optional<Vector>& init, const FitOptions& options) {
  trip.validate();
  sample.validate(model);
  Vector base = init ? *init : model.robust_start(sample.observations);
  model.check(base);

  const bool wide = options.always_multistart || trip.gamma >= 0.3 || trip.beta >= 0.5;
  const int extra = wide ? std::max(options.multistart - 1, 0) : 0;
  const auto starts = starting_points(model, base, extra);

  EmpiricalObjective obj(model, sample.observations, trip, options.search_quadrature);
  const Objective in_z = [&](const Vector& z) {
    try {
      return obj.value(model.from_unconstrained(z));
    } catch (const Error&) {
      return kInf;
    }
  };
  const VectorFunction residual = [&](const Vector& theta) { return obj.residual(theta); };

  SimplexOptions so;
  so.max_iterations = options.max_iterations;
  so.x_tol = options.simplex_tol;
  NewtonOptions no;
  no.tol = options.residual_tol * 1e-4;

  std::vector<StartOutcome> outcomes;
  for (const auto& start : starts) {
    StartOutcome out;
    obj.set_quadrature(options.search_quadrature);
    const Vector step = 0.25 * unconstrained_unit(model, start);
    const auto nm = nelder_mead(in_z, model.to_unconstrained(start), step, so);
    out.iterations = nm.iterations;
    out.theta = model.from_unconstrained(nm.x);
    if (!std::isfinite(nm.value) || !admissible(model, out.theta)) {
      outcomes.push_back(out);
      continue;
    }

    obj.set_quadrature(options.quadrature);
    const double h_nm = obj.value(out.theta);
    try {
      const auto polish =
          newton_polish(residual, out.theta, model.param_scale(out.theta),
                        [&](const Vector& t) { return admissible(model, t); }, no);
      out.iterations += polish.iterations;
      const double h_pol = obj.value(polish.x);
      const Vector scale = model.param_scale(out.theta);
      const double moved =
          ((polish.x - out.theta).array() / scale.array()).abs().maxCoeff();
      // A polish that climbs or leaves the basin is discarded.
      if (h_pol <= h_nm + 1e-9 * (1.0 + std::abs(h_nm)) && moved < 1e-2) {
        out.theta = polish.x;
      }
    } catch (const Error&) {
      // keep the simplex answer; convergence is judged below
    }
    out.objective = obj.value(out.theta);
    const Vector r = obj.residual(out.theta);
    out.residual_norm = (r.array() * model.param_scale(out.theta).array()).matrix().norm();
    out.converged = nm.converged && out.residual_norm <= options.residual_tol;
    outcomes.push_back(out);
  }

  // Lowest objective among converged starts, else lowest overall.
  std::size_t best = 0;
  bool have = false;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (!std::isfinite(o.objective)) continue;
    const auto& b = outcomes[best];
    const bool better = !have || (o.converged && !b.converged) ||
                        (o.converged == b.converged && o.objective < b.objective);
    if (better) {
      best = i;
      have = true;
    }
  }

  FitResult result;
  result.starts = static_cast<int>(outcomes.size());
  for (const auto& o : outcomes) result.iterations += o.iterations;
  if (!have) {
    result.theta_hat = base;
    result.objective = kInf;
    result.ee_residual_norm = kInf;
    result.converged = false;
    result.warnings.push_back("objective was not finite at any start");
    return result;
  }
  const auto& b = outcomes[best];
  result.theta_hat = b.theta;
  result.objective = b.objective;
  result.ee_residual_norm = b.residual_norm;
  result.converged = b.converged;
  result.quadrature_error = obj.quadrature_error();

  const Vector scale = model.param_scale(b.theta);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (i == best || !o.converged) continue;
    const double d = ((o.theta - b.theta).array() / scale.array()).abs().maxCoeff();
    if (d > 1e-4) {
      result.multiple_roots = true;
      std::ostringstream os;
      os.precision(10);
      os << "start " << i << " converged to a different root (objective " << o.objective
         << " vs " << b.objective << ")";
      result.warnings.push_back(os.str());
    }
  }
  if (!result.converged) {
    std::ostringstream os;
    os << "estimating equation not solved: residual norm " << result.ee_residual_norm
       << " exceeds " << options.residual_tol;
    result.warnings.push_back(os.str());
  }
  return result;
}

FitResult fit_mle(const Sample& sample, const Model& model, const FitOptions& options) {
  return fit_mepde(sample, model, Triplet::kl(), std::nullopt, options);
}

}  // namespace epd
