#include "epd/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "epd/asymptotics.hpp"
#include "epd/errors.hpp"
#include "epd/optimize.hpp"

namespace epd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> linspace(const Range& r, int n) {
  if (n <= 1 || r.lo == r.hi) return {r.lo};
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) v[static_cast<std::size_t>(k)] = r.lo + (r.hi - r.lo) * k / (n - 1);
  v.back() = r.hi;
  return v;
}

double get(const Triplet& t, int d) { return d == 0 ? t.alpha : d == 1 ? t.beta : t.gamma; }

void set(Triplet& t, int d, double v) {
  if (d == 0) t.alpha = v;
  else if (d == 1) t.beta = v;
  else t.gamma = v;
}

const Range& range(const TuneConfig& c, int d) {
  return d == 0 ? c.alpha : d == 1 ? c.beta : c.gamma;
}

class Search {
 public:
  Search(const MseEvaluator& evaluate, const TuneConfig& config)
      : evaluate_(evaluate), config_(config) {}

  MsePoint eval(Triplet t, const std::optional<Vector>& warm, bool refined) {
    // Parameters that do not enter the divergence are canonicalised.
    if (t.beta == 0.0) t.alpha = std::clamp(0.0, config_.alpha.lo, config_.alpha.hi);
    if (t.beta == 1.0) t.gamma = config_.gamma.lo;
    const std::array<double, 3> key{t.alpha, t.beta, t.gamma};
    if (auto it = cache_.find(key); it != cache_.end()) return points_[it->second];
    MsePoint p;
    try {
      p = evaluate_(t, warm);
    } catch (const Error& e) {
      p.mse = kInf;
      p.note = e.what();
    }
    p.triplet = t;
    p.refined = refined;
    if (!(p.mse >= 0.0) && p.mse != kInf) {
      p.note = "criterion not a number";
      p.mse = kInf;
    }
    cache_.emplace(key, points_.size());
    points_.push_back(p);
    return p;
  }

  MsePoint refine(const MsePoint& start, const std::vector<int>& free) {
    MsePoint best = start;
    if (free.empty() || !std::isfinite(start.mse)) return best;
    const auto k = static_cast<Eigen::Index>(free.size());
    Vector s0(k);
    Vector step(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const int d = free[static_cast<std::size_t>(i)];
      const Range& r = range(config_, d);
      s0[i] = (get(start.triplet, d) - r.lo) / (r.hi - r.lo);
      const int g = config_.grid[static_cast<std::size_t>(d)];
      step[i] = g > 1 ? 0.5 / (g - 1) : 0.1;
      // step inward from a box face
      if (s0[i] + step[i] > 1.0) step[i] = -step[i];
    }
    const Objective f = [&](const Vector& s) {
      Triplet t = start.triplet;
      for (Eigen::Index i = 0; i < k; ++i) {
        if (!(s[i] >= 0.0 && s[i] <= 1.0)) return kInf;
        const int d = free[static_cast<std::size_t>(i)];
        const Range& r = range(config_, d);
        set(t, d, r.lo + (r.hi - r.lo) * s[i]);
      }
      const MsePoint p = eval(t, best.theta_hat, true);
      if (preferred(p, best)) best = p;
      return p.mse;
    };
    SimplexOptions so;
    so.max_iterations = config_.refine_iterations;
    so.x_tol = 1e-7;
    so.f_tol = 1e-12;
    nelder_mead(f, s0, step, so);
    return best;
  }

  const std::vector<MsePoint>& points() const { return points_; }

 private:
  const MseEvaluator& evaluate_;
  const TuneConfig& config_;
  std::map<std::array<double, 3>, std::size_t> cache_;
  std::vector<MsePoint> points_;
};

std::vector<MsePoint> best_cells(std::vector<MsePoint> cells, int count) {
  std::stable_sort(cells.begin(), cells.end(), preferred);
  std::vector<MsePoint> out;
  for (const auto& c : cells) {
    if (static_cast<int>(out.size()) >= count || !std::isfinite(c.mse)) break;
    const bool seen = std::any_of(out.begin(), out.end(),
                                  [&](const MsePoint& o) { return o.triplet == c.triplet; });
    if (!seen) out.push_back(c);
  }
  return out;
}

const MsePoint& argmin(const std::vector<const MsePoint*>& pts) {
  const MsePoint* best = pts.front();
  for (const auto* p : pts) {
    if (preferred(*p, *best)) best = p;
  }
  return *best;
}

bool in_box(const Triplet& t, const TuneConfig& c) {
  return t.alpha >= c.alpha.lo && t.alpha <= c.alpha.hi && t.beta >= c.beta.lo &&
         t.beta <= c.beta.hi && t.gamma >= c.gamma.lo && t.gamma <= c.gamma.hi;
}

}  // namespace

std::string to_string(PlugIn p) { return p == PlugIn::model ? "model" : "empirical"; }

PlugIn plug_in_from_string(const std::string& s) {
  if (s == "model") return PlugIn::model;
  if (s == "empirical") return PlugIn::empirical;
  throw ParameterError("unknown plug-in '" + s + "' (expected model or empirical)");
}

void TuneConfig::validate() const {
  auto check = [](const Range& r, const char* name) {
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
      std::ostringstream os;
      os << name << " range [" << r.lo << ", " << r.hi << "] is empty or not finite";
      throw ParameterError(os.str());
    }
  };
  check(alpha, "alpha");
  check(beta, "beta");
  check(gamma, "gamma");
  if (beta.lo < 0.0 || beta.hi > 1.0) throw ParameterError("beta range must lie in [0, 1]");
  if (gamma.lo < 0.0) throw ParameterError("gamma range must be nonnegative");
  for (int g : grid) {
    if (g < 1) throw ParameterError("grid sizes must be positive");
  }
  if (refine_cells < 0 || refine_iterations < 0) {
    throw ParameterError("refinement counts must be nonnegative");
  }
  if (!(pilot_gamma > 0.0)) throw ParameterError("pilot gamma must be positive");
}

bool preferred(const MsePoint& a, const MsePoint& b) {
  if (std::isfinite(a.mse) != std::isfinite(b.mse)) return std::isfinite(a.mse);
  if (!std::isfinite(a.mse)) return false;
  const double tol = 1e-10 * std::max(std::abs(a.mse), std::abs(b.mse));
  if (std::abs(a.mse - b.mse) > tol) return a.mse < b.mse;
  if (a.triplet.gamma != b.triplet.gamma) return a.triplet.gamma < b.triplet.gamma;
  if (a.triplet.beta != b.triplet.beta) return a.triplet.beta < b.triplet.beta;
  return std::abs(a.triplet.alpha) < std::abs(b.triplet.alpha);
}

TuneResult search_triplets(const MseEvaluator& evaluate, const TuneConfig& config) {
  config.validate();
  Search search(evaluate, config);
  const auto alphas = linspace(config.alpha, config.grid[0]);
  const auto betas = linspace(config.beta, config.grid[1]);
  const auto gammas = linspace(config.gamma, config.grid[2]);
  const double alpha0 = std::clamp(0.0, config.alpha.lo, config.alpha.hi);

  // DPD-restricted companion.
  std::vector<MsePoint> dpd_cells;
  for (double g : gammas) dpd_cells.push_back(search.eval({alpha0, 0.0, g}, std::nullopt, false));
  if (config.refine && config.gamma.hi > config.gamma.lo) {
    for (const auto& c : best_cells(dpd_cells, config.refine_cells)) search.refine(c, {2});
  }

  if (!config.dpd_only) {
    std::vector<MsePoint> cells;
    for (double a : alphas) {
      for (double b : betas) {
        for (double g : gammas) cells.push_back(search.eval({a, b, g}, std::nullopt, false));
      }
    }
    if (config.refine) {
      std::vector<int> free;
      for (int d = 0; d < 3; ++d) {
        if (range(config, d).hi > range(config, d).lo) free.push_back(d);
      }
      for (const auto& c : best_cells(cells, config.refine_cells)) search.refine(c, free);
    }
  }

  TuneResult result;
  result.evaluations = static_cast<int>(search.points().size());
  std::vector<const MsePoint*> dpd;
  std::vector<const MsePoint*> box;
  for (const auto& p : search.points()) {
    if (p.triplet.beta == 0.0) dpd.push_back(&p);
    if (!config.dpd_only && in_box(p.triplet, config)) box.push_back(&p);
    if (config.dpd_only ? p.triplet.beta == 0.0 : in_box(p.triplet, config)) {
      result.surface.push_back(p);
    }
  }
  const MsePoint& d = argmin(dpd);
  if (std::isfinite(d.mse)) result.dpd = TuneOptimum{d.triplet, d.theta_hat, d.mse};
  const MsePoint& best = config.dpd_only || box.empty() ? d : argmin(box);
  if (!std::isfinite(best.mse)) {
    throw EstimationError("tuning failed: the criterion is infinite at every evaluated triplet");
  }
  result.triplet = best.triplet;
  result.theta_hat = best.theta_hat;
  result.empirical_mse = best.mse;
  return result;
}

Vector pilot_estimate(const Sample& sample, const Model& model, double pilot_gamma,
                      const FitOptions& options) {
  const FitResult fit = fit_mepde(sample, model, Triplet::dpd(pilot_gamma), std::nullopt, options);
  if (!fit.converged) {
    std::ostringstream os;
    os << "pilot fit at gamma = " << pilot_gamma << " did not converge (residual "
       << fit.ee_residual_norm << ")";
    throw EstimationError(os.str());
  }
  return fit.theta_hat;
}

MsePoint evaluate_mse(const Sample& sample, const Model& model, const Triplet& trip,
                      const Vector& pilot, PlugIn plug_in, const FitOptions& options,
                      const std::optional<Vector>& warm) {
  MsePoint p;
  p.triplet = trip;
  p.mse = kInf;
  const FitResult fit = fit_mepde(sample, model, trip, warm ? warm : pilot, options);
  p.theta_hat = fit.theta_hat;
  if (!fit.converged) {
    p.note = "fit did not converge";
    return p;
  }
  const SandwichMatrices s = plug_in == PlugIn::model
                                 ? model_jkxi(model, fit.theta_hat, trip, options.quadrature)
                                 : general_jk(sample.observations, model, fit.theta_hat, trip,
                                              options.quadrature);
  if (s.degenerate) {
    std::ostringstream os;
    os << "degenerate J (condition " << s.condition << ")";
    p.note = os.str();
    return p;
  }
  p.mse = asymptotic_summed_mse(fit.theta_hat, pilot, s.J, s.K,
                                static_cast<double>(sample.size()));
  return p;
}

double empirical_mse(const Sample& sample, const Model& model, const Triplet& trip,
                     const Vector& pilot, PlugIn plug_in, const FitOptions& options) {
  try {
    return evaluate_mse(sample, model, trip, pilot, plug_in, options).mse;
  } catch (const Error&) {
    return kInf;
  }
}

TuneResult tune_wj(const Sample& sample, const Model& model, const TuneConfig& config) {
  config.validate();
  sample.validate(model);
  const Vector pilot = pilot_estimate(sample, model, config.pilot_gamma, config.fit);
  const MseEvaluator evaluate = [&](const Triplet& t, const std::optional<Vector>& warm) {
    return evaluate_mse(sample, model, t, pilot, config.plug_in, config.fit, warm);
  };
  TuneResult r = search_triplets(evaluate, config);
  r.pilot = pilot;
  return r;
}

std::vector<PilotSensitivity> pilot_sensitivity(const Sample& sample, const Model& model,
                                                const Triplet& trip, const TuneConfig& config,
                                                const std::vector<double>& gammas) {
  const Vector pilot = pilot_estimate(sample, model, config.pilot_gamma, config.fit);
  const double base = empirical_mse(sample, model, trip, pilot, config.plug_in, config.fit);
  std::vector<PilotSensitivity> out;
  for (double g : gammas) {
    const Vector alt = pilot_estimate(sample, model, g, config.fit);
    const double m = empirical_mse(sample, model, trip, alt, config.plug_in, config.fit);
    out.push_back({g, m, m - base});
  }
  return out;
}

}  // namespace epd
