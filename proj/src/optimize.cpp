#include "epd/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "epd/errors.hpp"

namespace epd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_eval(const Objective& f, const Vector& x) {
  const double v = f(x);
  return std::isnan(v) ? kInf : v;
}

struct Simplex {
  std::vector<Vector> x;
  std::vector<double> f;

  void order() {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return f[a] < f[b]; });
    std::vector<Vector> xs;
    std::vector<double> fs;
    for (auto i : idx) {
      xs.push_back(x[i]);
      fs.push_back(f[i]);
    }
    x = std::move(xs);
    f = std::move(fs);
  }

  double diameter() const {
    double d = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
      d = std::max(d, (x[i] - x[0]).lpNorm<Eigen::Infinity>());
    }
    return d;
  }
};

// Returns true on convergence.
bool run_simplex(const Objective& f, Simplex& s, const SimplexOptions& o, int& iterations,
                 int budget) {
  const std::size_t n = s.x.size() - 1;
  for (int it = 0; it < budget; ++it) {
    s.order();
    const double scale = std::max(1.0, s.x[0].lpNorm<Eigen::Infinity>());
    const double fspread = std::abs(s.f[n] - s.f[0]);
    if (std::isfinite(s.f[0]) && std::isfinite(s.f[n]) &&
        (s.diameter() <= o.x_tol * scale || fspread <= o.f_tol * (1.0 + std::abs(s.f[0])))) {
      return true;
    }
    ++iterations;

    Vector centroid = Vector::Zero(s.x[0].size());
    for (std::size_t i = 0; i < n; ++i) centroid += s.x[i];
    centroid /= static_cast<double>(n);

    const Vector xr = centroid + (centroid - s.x[n]);
    const double fr = safe_eval(f, xr);
    if (fr < s.f[0]) {
      const Vector xe = centroid + 2.0 * (centroid - s.x[n]);
      const double fe = safe_eval(f, xe);
      if (fe < fr) {
        s.x[n] = xe;
        s.f[n] = fe;
      } else {
        s.x[n] = xr;
        s.f[n] = fr;
      }
      continue;
    }
    if (fr < s.f[n - 1]) {
      s.x[n] = xr;
      s.f[n] = fr;
      continue;
    }
    // contraction, outside or inside
    const bool outside = fr < s.f[n];
    const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid))
                              : Vector(centroid + 0.5 * (s.x[n] - centroid));
    const double fc = safe_eval(f, xc);
    if (fc < (outside ? fr : s.f[n])) {
      s.x[n] = xc;
      s.f[n] = fc;
      continue;
    }
    for (std::size_t i = 1; i <= n; ++i) {
      s.x[i] = s.x[0] + 0.5 * (s.x[i] - s.x[0]);
      s.f[i] = safe_eval(f, s.x[i]);
    }
  }
  s.order();
  return false;
}

Simplex make_simplex(const Objective& f, const Vector& start, const Vector& step) {
  Simplex s;
  s.x.push_back(start);
  s.f.push_back(safe_eval(f, start));
  for (Eigen::Index j = 0; j < start.size(); ++j) {
    Vector v = start;
    v[j] += step[j] != 0.0 ? step[j] : 0.05;
    s.x.push_back(v);
    s.f.push_back(safe_eval(f, v));
  }
  return s;
}

}  // namespace

SimplexResult nelder_mead(const Objective& f, const Vector& start, const Vector& step,
                          const SimplexOptions& options) {
  if (start.size() == 0 || step.size() != start.size()) {
    throw ParameterError("nelder_mead: start and step must have equal non-zero size");
  }
  int iterations = 0;
  Simplex s = make_simplex(f, start, step);
  bool ok = run_simplex(f, s, options, iterations, options.max_iterations);

  // Restart once around the best vertex to escape a collapsed simplex.
  if (ok && iterations < options.max_iterations) {
    const Vector best = s.x[0];
    Vector restart_step = step * 1e-2;
    Simplex r = make_simplex(f, best, restart_step);
    ok = run_simplex(f, r, options, iterations, options.max_iterations - iterations);
    if (r.f[0] <= s.f[0]) s = std::move(r);
  }
  return {s.x[0], s.f[0], iterations, ok && std::isfinite(s.f[0])};
}

Matrix finite_difference_jacobian(const VectorFunction& F, const Vector& x, const Vector& h) {
  const Eigen::Index n = x.size();
  Matrix jac;
  for (Eigen::Index j = 0; j < n; ++j) {
    Vector xp = x;
    Vector xm = x;
    xp[j] += h[j];
    xm[j] -= h[j];
    const Vector col = (F(xp) - F(xm)) / (2.0 * h[j]);
    if (j == 0) jac.resize(col.size(), n);
    jac.col(j) = col;
  }
  return jac;
}

NewtonResult newton_polish(const VectorFunction& F, const Vector& start, const Vector& scale,
                           const std::function<bool(const Vector&)>& admissible,
                           const NewtonOptions& options) {
  auto norm = [&](const Vector& r) { return (r.array() * scale.array()).matrix().norm(); };
  NewtonResult out;
  out.x = start;
  out.residual = F(start);
  out.residual_norm = norm(out.residual);
  for (int it = 0; it < options.max_iterations; ++it) {
    if (out.residual_norm <= options.tol) {
      out.converged = true;
      return out;
    }
    ++out.iterations;
    const Vector h = options.fd_step * scale;
    const Matrix jac = finite_difference_jacobian(F, out.x, h);
    const Vector step = jac.fullPivLu().solve(-out.residual);
    if (!step.allFinite()) return out;

    bool accepted = false;
    double lambda = 1.0;
    for (int k = 0; k < 30; ++k, lambda *= 0.5) {
      const Vector trial = out.x + lambda * step;
      if (!admissible(trial)) continue;
      Vector r;
      try {
        r = F(trial);
      } catch (const Error&) {
        continue;
      }
      if (!r.allFinite()) continue;
      const double rn = norm(r);
      if (rn < out.residual_norm) {
        out.x = trial;
        out.residual = std::move(r);
        out.residual_norm = rn;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  out.converged = out.residual_norm <= options.tol;
  return out;
}

}  // namespace epd
