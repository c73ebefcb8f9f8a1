#include "epd/regression.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "epd/asymptotics.hpp"
#include "epd/errors.hpp"
#include "epd/optimize.hpp"

namespace epd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMadToSigma = 1.482602218505602;

double normal_log_pdf(double r, double s2) {
  return -0.5 * std::log(2.0 * std::numbers::pi * s2) - 0.5 * r * r / s2;
}

Vector pack_theta(const Vector& eta, double s2) {
  Vector t(eta.size() + 1);
  t.head(eta.size()) = eta;
  t[eta.size()] = s2;
  return t;
}

// Objective and estimating function with the sigma^2-only integrals cached.
class Engine {
 public:
  Engine(const RegressionProblem& pr, const Triplet& trip, const QuadratureOptions& q)
      : pr_(pr), trip_(trip), q_(q) {
    trip_.validate();
    col_scale_ = (pr.design.colwise().norm() / std::sqrt(static_cast<double>(pr.n()))).transpose();
    for (Eigen::Index j = 0; j < col_scale_.size(); ++j) {
      if (!(col_scale_[j] > 0.0)) col_scale_[j] = 1.0;
    }
  }

  void set_quadrature(const QuadratureOptions& q) {
    q_ = q;
    cached_s2_ = -1.0;
  }

  Eigen::Index p() const { return pr_.p(); }
  const Vector& col_scale() const { return col_scale_; }

  double value(const Vector& theta) const {
    const double s2 = theta[p()];
    if (!(s2 > 0.0) || !theta.allFinite()) return kInf;
    if (saturates(1.0 / std::sqrt(2.0 * std::numbers::pi * s2), trip_)) return kInf;
    refresh(s2);
    const Vector r = pr_.response - pr_.design * theta.head(p());
    double s = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) s += b_prime_from_log(normal_log_pdf(r[i], s2), trip_);
    return integral_ - s / static_cast<double>(r.size());
  }

  Vector residual(const Vector& theta) const {
    const double s2 = theta[p()];
    if (!(s2 > 0.0)) throw ParameterError("regression error variance must be positive");
    if (saturates(1.0 / std::sqrt(2.0 * std::numbers::pi * s2), trip_)) {
      return Vector::Constant(p() + 1, kInf);
    }
    refresh(s2);
    const Vector r = pr_.response - pr_.design * theta.head(p());
    Vector out = Vector::Zero(p() + 1);
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const double w = weight(std::exp(normal_log_pdf(r[i], s2)), trip_);
      out.head(p()) += (r[i] * w / s2) * pr_.design.row(i).transpose();
      out[p()] += (r[i] * r[i] - s2) * w / (2.0 * s2 * s2);
    }
    out /= static_cast<double>(r.size());
    out[p()] -= center_;
    return out;
  }

  double quadrature_error() const { return quad_error_; }

 private:
  void refresh(double s2) const {
    if (s2 == cached_s2_) return;
    const NormalLocationScale normal;
    Vector th(2);
    th << 0.0, s2;
    const auto res = integrate_over_support(
        normal, th, 2,
        [&](double y, std::span<double> out) {
          const double f = normal.density(th, y);
          out[0] = objective_kernel(f, trip_);
          out[1] = (y * y - s2) / (2.0 * s2 * s2) * weight(f, trip_) * f;
        },
        q_);
    integral_ = res.value[0];
    center_ = res.value[1];
    quad_error_ = std::max(quad_error_, res.max_error());
    cached_s2_ = s2;
  }

  const RegressionProblem& pr_;
  Triplet trip_;
  QuadratureOptions q_;
  Vector col_scale_;
  mutable double cached_s2_ = -1.0;
  mutable double integral_ = 0.0;
  mutable double center_ = 0.0;
  mutable double quad_error_ = 0.0;
};

double robust_sigma2(const Vector& r) {
  std::vector<double> a(static_cast<std::size_t>(r.size()));
  for (Eigen::Index i = 0; i < r.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(r[i]);
  const double s = kMadToSigma * median(std::move(a));
  return s * s;
}

Vector residual_scale(const Engine& e, double s2) {
  Vector sc(e.p() + 1);
  sc.head(e.p()) = std::sqrt(s2) * e.col_scale().cwiseInverse();
  sc[e.p()] = s2;
  return sc;
}

struct Outcome {
  Vector theta;
  double objective = kInf;
  double residual_norm = kInf;
  bool converged = false;
  int iterations = 0;
};

// sigma^2 minimising H_n at fixed eta, searched in log sigma^2.
double sigma2_step(const Engine& e, const Vector& eta, double s2) {
  double centre = std::log(s2);
  for (int k = 0; k < 8; ++k) {
    const double lo = centre - 2.0;
    const double hi = centre + 2.0;
    const auto r = boost::math::tools::brent_find_minima(
        [&](double l) { return e.value(pack_theta(eta, std::exp(l))); }, lo, hi, 52);
    const bool edge = r.first - lo < 1e-3 || hi - r.first < 1e-3;
    centre = r.first;
    if (!edge) break;
  }
  return std::exp(centre);
}

// Relative change at which the alternating sweeps hand over to Newton.
constexpr double kSweepTol = 1e-8;

Outcome solve_from(const Engine& search, Engine& fine, const RegressionProblem& pr,
                   const Vector& start, const Triplet& trip, const RegressionFitOptions& o) {
  const Eigen::Index p = pr.p();
  Outcome out;
  Vector eta = start.head(p);
  double s2 = start[p];
  double h = search.value(pack_theta(eta, s2));
  bool settled = false;

  for (int sweep = 0; sweep < o.max_sweeps && std::isfinite(h); ++sweep) {
    ++out.iterations;
    const Vector r = pr.response - pr.design * eta;
    Vector w(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      w[i] = weight(std::exp(normal_log_pdf(r[i], s2)), trip);
    }
    if (!(w.maxCoeff() > 0.0)) break;
    const Matrix xtwx = pr.design.transpose() * w.asDiagonal() * pr.design;
    const Vector xtwy = pr.design.transpose() * (w.asDiagonal() * pr.response);
    const Eigen::LDLT<Matrix> ldlt(xtwx);
    if (ldlt.info() != Eigen::Success) break;
    const Vector eta_new = ldlt.solve(xtwy);
    if (!eta_new.allFinite()) break;
    const double s2_new = sigma2_step(search, eta_new, s2);
    const double h_new = search.value(pack_theta(eta_new, s2_new));
    // the reweighting step is not a descent step for every weight shape
    if (!(h_new <= h + 1e-12 * (1.0 + std::abs(h)))) break;
    const double change = std::max(
        ((eta_new - eta).cwiseProduct(search.col_scale()).cwiseAbs().maxCoeff()) / std::sqrt(s2),
        std::abs(std::log(s2_new / s2)));
    eta = eta_new;
    s2 = s2_new;
    h = h_new;
    if (change < kSweepTol) {
      settled = true;
      break;
    }
  }

  Vector theta = pack_theta(eta, s2);
  const auto polish = [&](Vector& t) {
    const double h_before = fine.value(t);
    if (!std::isfinite(h_before)) return false;
    NewtonOptions no;
    no.tol = o.residual_tol * 1e-4;
    try {
      const Vector scale = residual_scale(fine, t[p]);
      const auto pol = newton_polish([&](const Vector& v) { return fine.residual(v); }, t, scale,
                                     [&](const Vector& v) { return v[p] > 0.0 && v.allFinite(); },
                                     no);
      out.iterations += pol.iterations;
      const double moved = ((pol.x - t).cwiseQuotient(scale)).cwiseAbs().maxCoeff();
      if (fine.value(pol.x) <= h_before + 1e-9 * (1.0 + std::abs(h_before)) && moved < 1e-2) {
        t = pol.x;
        return fine.residual(t).cwiseProduct(residual_scale(fine, t[p])).norm() <=
               o.residual_tol;
      }
    } catch (const Error&) {
      // keep the unpolished point
    }
    return false;
  };

  // A slowly converging sweep usually ends close enough for Newton.
  if (!(settled && polish(theta))) {
    Vector candidate = theta;
    if (!std::isfinite(h) || !polish(candidate)) {
      // simplex on (eta_j * column scale, log sigma^2)
      const Vector cs = search.col_scale();
      auto to_z = [&](const Vector& t) {
        Vector z(p + 1);
        z.head(p) = t.head(p).cwiseProduct(cs);
        z[p] = std::log(t[p]);
        return z;
      };
      auto from_z = [&](const Vector& z) {
        Vector t(p + 1);
        t.head(p) = z.head(p).cwiseQuotient(cs);
        t[p] = std::exp(z[p]);
        return t;
      };
      Vector step = Vector::Constant(p + 1, 0.25 * std::sqrt(s2));
      step[p] = 0.25;
      SimplexOptions so;
      so.max_iterations = o.max_iterations;
      so.x_tol = 1e-9;
      const auto nm = nelder_mead([&](const Vector& z) { return search.value(from_z(z)); },
                                  to_z(theta), step, so);
      out.iterations += nm.iterations;
      if (std::isfinite(nm.value)) candidate = from_z(nm.x);
      polish(candidate);
    }
    theta = candidate;
  }
  out.theta = theta;
  out.objective = fine.value(theta);
  const Vector res = fine.residual(theta);
  out.residual_norm = res.cwiseProduct(residual_scale(fine, theta[p])).norm();
  out.converged = std::isfinite(out.objective) && out.residual_norm <= o.residual_tol;
  return out;
}

std::vector<Vector> elemental_starts(const RegressionProblem& pr, const Engine& e, int keep,
                                     int max_subsets, std::uint64_t seed) {
  const Eigen::Index n = pr.n();
  const Eigen::Index p = pr.p();
  std::vector<std::vector<Eigen::Index>> subsets;
  // enumerate p-subsets lexicographically while their count stays within the cap
  double count = 1.0;
  for (Eigen::Index k = 0; k < p; ++k) count = count * static_cast<double>(n - k) / (k + 1);
  if (count <= max_subsets) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(p));
    for (Eigen::Index k = 0; k < p; ++k) idx[static_cast<std::size_t>(k)] = k;
    while (true) {
      subsets.push_back(idx);
      Eigen::Index k = p - 1;
      while (k >= 0 && idx[static_cast<std::size_t>(k)] == n - p + k) --k;
      if (k < 0) break;
      ++idx[static_cast<std::size_t>(k)];
      for (Eigen::Index j = k + 1; j < p; ++j) {
        idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
      }
    }
  } else {
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    for (int s = 0; s < max_subsets; ++s) {
      for (Eigen::Index k = 0; k < p; ++k) {
        std::uniform_int_distribution<Eigen::Index> d(k, n - 1);
        std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(d(rng))]);
      }
      std::vector<Eigen::Index> idx(all.begin(), all.begin() + p);
      std::sort(idx.begin(), idx.end());
      subsets.push_back(idx);
    }
  }

  std::vector<std::pair<double, Vector>> scored;
  std::vector<std::pair<double, Vector>> lms;
  for (const auto& idx : subsets) {
    Matrix xs(p, p);
    Vector ys(p);
    for (Eigen::Index k = 0; k < p; ++k) {
      xs.row(k) = pr.design.row(idx[static_cast<std::size_t>(k)]);
      ys[k] = pr.response[idx[static_cast<std::size_t>(k)]];
    }
    const Eigen::FullPivLU<Matrix> lu(xs);
    if (!lu.isInvertible()) continue;
    const Vector eta = lu.solve(ys);
    const double s2 = robust_sigma2(pr.response - pr.design * eta);
    if (!(s2 > 0.0) || !eta.allFinite()) continue;
    const Vector theta = pack_theta(eta, s2);
    const double h = e.value(theta);
    if (std::isfinite(h)) scored.emplace_back(h, theta);
    lms.emplace_back(s2, theta);
  }
  // Candidates ranked by H_n and by the median squared residual.
  const auto by_first = [](const auto& a, const auto& b) { return a.first < b.first; };
  std::stable_sort(scored.begin(), scored.end(), by_first);
  std::stable_sort(lms.begin(), lms.end(), by_first);
  std::vector<Vector> out;
  for (const auto* ranked : {&scored, &lms}) {
    int taken = 0;
    for (const auto& [key, t] : *ranked) {
      if (taken >= keep) break;
      const Vector sc = residual_scale(e, t[p]);
      const bool dup = std::any_of(out.begin(), out.end(), [&](const Vector& o) {
        return ((o - t).cwiseQuotient(sc)).cwiseAbs().maxCoeff() < 0.05;
      });
      if (!dup) {
        out.push_back(t);
        ++taken;
      }
    }
  }
  return out;
}

}  // namespace

RegressionProblem RegressionProblem::with_intercept(const Matrix& x, const Vector& y,
                                                    std::vector<std::string> names,
                                                    std::string name) {
  RegressionProblem pr;
  pr.design.resize(x.rows(), x.cols() + 1);
  pr.design.col(0).setOnes();
  pr.design.rightCols(x.cols()) = x;
  pr.response = y;
  pr.column_names.emplace_back("intercept");
  for (auto& s : names) pr.column_names.push_back(std::move(s));
  pr.name = std::move(name);
  return pr;
}

void RegressionProblem::validate() const {
  if (design.rows() != response.size()) {
    std::ostringstream os;
    os << "design has " << design.rows() << " rows but the response has " << response.size()
       << " entries";
    throw DataError(os.str());
  }
  if (design.cols() == 0) throw DataError("design has no columns");
  if (!design.allFinite() || !response.allFinite()) {
    throw DataError("design and response must be finite");
  }
  if (n() <= p()) {
    std::ostringstream os;
    os << "need more observations (" << n() << ") than coefficients (" << p() << ")";
    throw DataError(os.str());
  }
  const Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < p()) {
    std::ostringstream os;
    os << "design matrix is rank deficient (rank " << qr.rank() << " < " << p() << ")";
    throw DataError(os.str());
  }
}

Vector RegressionFit::theta() const { return pack_theta(eta_hat, sigma2_hat); }

OlsResult ols(const RegressionProblem& problem) {
  problem.validate();
  OlsResult r;
  r.eta = problem.design.colPivHouseholderQr().solve(problem.response);
  const double rss = (problem.response - problem.design * r.eta).squaredNorm();
  r.sigma2_ml = rss / static_cast<double>(problem.n());
  r.sigma2_unbiased = rss / static_cast<double>(problem.n() - problem.p());
  return r;
}

Omegas omega_integrals(double sigma2, const Triplet& trip, const QuadratureOptions& q) {
  if (!(sigma2 > 0.0)) throw ParameterError("sigma2 must be positive");
  trip.validate();
  if (saturates(1.0 / std::sqrt(2.0 * std::numbers::pi * sigma2), trip)) {
    throw DomainError("exp(alpha f) overflows at " + trip.to_string());
  }
  const NormalLocationScale normal;
  Vector th(2);
  th << 0.0, sigma2;
  const double s4 = sigma2 * sigma2;
  const auto r = integrate_over_support(
      normal, th, 5,
      [&](double y, std::span<double> out) {
        const double f = normal.density(th, y);
        const double w = weight(f, trip);
        const double a = y * y / s4;
        const double b = (y * y - sigma2) * (y * y - sigma2) / (4.0 * s4 * s4);
        out[0] = a * w * f;
        out[1] = b * w * f;
        out[2] = a * w * w * f;
        out[3] = b * w * w * f;
        out[4] = (y * y - sigma2) / (2.0 * s4) * w * f;
      },
      q);
  return {r.value[0], r.value[1], r.value[2], r.value[3] - r.value[4] * r.value[4]};
}

InhMatrices psi_omega_matrices(const RegressionProblem& problem, double sigma2,
                               const Triplet& trip, const QuadratureOptions& q) {
  problem.validate();
  const Omegas om = omega_integrals(sigma2, trip, q);
  const Eigen::Index p = problem.p();
  const Matrix xtx = problem.design.transpose() * problem.design / static_cast<double>(problem.n());
  InhMatrices m;
  m.psi_n = Matrix::Zero(p + 1, p + 1);
  m.omega_n = Matrix::Zero(p + 1, p + 1);
  m.psi_n.topLeftCorner(p, p) = om.omega1 * xtx;
  m.psi_n(p, p) = om.omega2;
  m.omega_n.topLeftCorner(p, p) = om.omega3 * xtx;
  m.omega_n(p, p) = om.omega4;
  return m;
}

InhMatrices general_inh_matrices(const RegressionProblem& problem, const Triplet& trip,
                                 const Vector& theta, PlugIn plug_in,
                                 const QuadratureOptions& q) {
  problem.validate();
  const Eigen::Index p = problem.p();
  InhMatrices m;
  m.psi_n = Matrix::Zero(p + 1, p + 1);
  m.omega_n = Matrix::Zero(p + 1, p + 1);
  for (Eigen::Index i = 0; i < problem.n(); ++i) {
    const RegressionObservation obs(problem.design.row(i).transpose());
    const SandwichMatrices at_model = model_jkxi(obs, theta, trip, q);
    if (plug_in == PlugIn::model) {
      m.psi_n += at_model.J;
      m.omega_n += at_model.K;
      m.xi.push_back(at_model.xi);
    } else {
      const double y[1] = {problem.response[i]};
      const SandwichMatrices point = general_jk(y, obs, theta, trip, q);
      const Vector d = point.xi - at_model.xi;
      m.psi_n += point.J;
      m.omega_n += d * d.transpose();
      m.xi.push_back(point.xi);
    }
  }
  const double n = static_cast<double>(problem.n());
  m.psi_n /= n;
  m.omega_n /= n;
  return m;
}

double regression_objective(const RegressionProblem& problem, const Vector& theta,
                            const Triplet& trip, const QuadratureOptions& q) {
  problem.validate();
  if (theta.size() != problem.p() + 1) throw ParameterError("theta must have p + 1 entries");
  return Engine(problem, trip, q).value(theta);
}

Vector regression_residual(const RegressionProblem& problem, const Vector& theta,
                           const Triplet& trip, const QuadratureOptions& q) {
  problem.validate();
  if (theta.size() != problem.p() + 1) throw ParameterError("theta must have p + 1 entries");
  return Engine(problem, trip, q).residual(theta);
}

Vector regression_residual_per_observation(const RegressionProblem& problem,
                                           const Vector& theta, const Triplet& trip,
                                           const QuadratureOptions& q) {
  problem.validate();
  const Eigen::Index p = problem.p();
  Vector out = Vector::Zero(p + 1);
  for (Eigen::Index i = 0; i < problem.n(); ++i) {
    const RegressionObservation obs(problem.design.row(i).transpose());
    const double y[1] = {problem.response[i]};
    EmpiricalObjective e(obs, y, trip, q);
    out += e.residual(theta);
  }
  return out / static_cast<double>(problem.n());
}

Vector lad_start(const RegressionProblem& problem, int iterations) {
  problem.validate();
  Vector eta = problem.design.colPivHouseholderQr().solve(problem.response);
  const double floor = 1e-8 * std::max(1.0, problem.response.cwiseAbs().maxCoeff());
  for (int it = 0; it < iterations; ++it) {
    const Vector r = problem.response - problem.design * eta;
    const Vector w = r.cwiseAbs().cwiseMax(floor).cwiseInverse();
    const Matrix a = problem.design.transpose() * w.asDiagonal() * problem.design;
    const Vector b = problem.design.transpose() * (w.asDiagonal() * problem.response);
    const Vector next = a.ldlt().solve(b);
    if (!next.allFinite()) break;
    const double change = (next - eta).cwiseAbs().maxCoeff();
    eta = next;
    if (change <= 1e-12 * (1.0 + eta.cwiseAbs().maxCoeff())) break;
  }
  double s2 = robust_sigma2(problem.response - problem.design * eta);
  if (!(s2 > 0.0)) s2 = std::max(ols(problem).sigma2_ml, 1e-12);
  return pack_theta(eta, s2);
}

RegressionFit fit_regression_mepde(const RegressionProblem& problem, const Triplet& trip,
                                   const std::optional<Vector>& init,
                                   const RegressionFitOptions& options) {
  problem.validate();
  trip.validate();
  const Eigen::Index p = problem.p();
  if (init && (init->size() != p + 1 || !((*init)[p] > 0.0) || !init->allFinite())) {
    throw ParameterError("initial value must hold p coefficients and a positive variance");
  }
  Engine search(problem, trip, options.search_quadrature);
  Engine fine(problem, trip, options.quadrature);

  std::vector<Vector> starts;
  if (init) starts.push_back(*init);
  starts.push_back(lad_start(problem));
  if (!init) {
    for (auto& s : elemental_starts(problem, search, options.elemental_starts,
                                       options.max_subsets, options.seed)) {
      starts.push_back(std::move(s));
    }
  }

  std::vector<Outcome> outcomes;
  for (const auto& s : starts) outcomes.push_back(solve_from(search, fine, problem, s, trip, options));

  std::size_t best = 0;
  for (std::size_t i = 1; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    const auto& b = outcomes[best];
    if ((o.converged && !b.converged) ||
        (o.converged == b.converged && o.objective < b.objective)) {
      best = i;
    }
  }
  const Outcome& b = outcomes[best];

  RegressionFit fit;
  fit.starts = static_cast<int>(outcomes.size());
  for (const auto& o : outcomes) fit.iterations += o.iterations;
  if (b.theta.size() == 0) {
    fit.eta_hat = starts.front().head(p);
    fit.sigma2_hat = starts.front()[p];
    fit.objective = kInf;
    fit.ee_residual_norm = kInf;
    fit.warnings.push_back("objective was not finite at any start");
    return fit;
  }
  fit.eta_hat = b.theta.head(p);
  fit.sigma2_hat = b.theta[p];
  fit.objective = b.objective;
  fit.ee_residual_norm = b.residual_norm;
  fit.converged = b.converged;

  const Vector sc = residual_scale(fine, fit.sigma2_hat);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (i == best || !o.converged) continue;
    if (((o.theta - b.theta).cwiseQuotient(sc)).cwiseAbs().maxCoeff() > 1e-4) {
      fit.multiple_roots = true;
      std::ostringstream os;
      os.precision(10);
      os << "start " << i << " converged to a different root (objective " << o.objective
         << " vs " << b.objective << ")";
      fit.warnings.push_back(os.str());
    }
  }
  if (!fit.converged) {
    std::ostringstream os;
    os << "estimating equations not solved: residual norm " << fit.ee_residual_norm;
    fit.warnings.push_back(os.str());
  }

  try {
    const InhMatrices m = psi_omega_matrices(problem, fit.sigma2_hat, trip, options.quadrature);
    fit.psi_n = m.psi_n;
    fit.omega_n = m.omega_n;
    const SpdInverse inv = spd_inverse(m.psi_n);
    fit.variance = 0.5 * (inv.inverse * m.omega_n * inv.inverse +
                          (inv.inverse * m.omega_n * inv.inverse).transpose()) /
                   static_cast<double>(problem.n());
    if (inv.degenerate) fit.warnings.push_back("Psi_n is degenerate; variance unreliable");
  } catch (const Error& e) {
    fit.warnings.push_back(std::string("variance not available: ") + e.what());
  }
  return fit;
}

Vector regression_pilot(const RegressionProblem& problem, double pilot_gamma,
                        const RegressionFitOptions& options) {
  const RegressionFit fit =
      fit_regression_mepde(problem, Triplet::dpd(pilot_gamma), std::nullopt, options);
  if (!fit.converged) {
    throw EstimationError("regression pilot fit did not converge");
  }
  return fit.theta();
}

MsePoint evaluate_regression_mse(const RegressionProblem& problem, const Triplet& trip,
                                 const Vector& pilot, PlugIn plug_in,
                                 const RegressionFitOptions& options,
                                 const std::optional<Vector>& warm) {
  MsePoint pt;
  pt.triplet = trip;
  pt.mse = kInf;
  const RegressionFit fit = fit_regression_mepde(problem, trip, warm ? warm : pilot, options);
  pt.theta_hat = fit.theta();
  if (!fit.converged) {
    pt.note = "fit did not converge";
    return pt;
  }
  const InhMatrices m =
      plug_in == PlugIn::model
          ? psi_omega_matrices(problem, fit.sigma2_hat, trip, options.quadrature)
          : general_inh_matrices(problem, trip, fit.theta(), PlugIn::empirical, options.quadrature);
  const SpdInverse inv = spd_inverse(m.psi_n);
  if (inv.degenerate) {
    std::ostringstream os;
    os << "degenerate Psi_n (condition " << inv.condition << ")";
    pt.note = os.str();
    return pt;
  }
  pt.mse = asymptotic_summed_mse(fit.theta(), pilot, m.psi_n, m.omega_n,
                                 static_cast<double>(problem.n()));
  return pt;
}

TuneResult tune_regression_wj(const RegressionProblem& problem, const TuneConfig& config,
                              const RegressionFitOptions& options) {
  config.validate();
  problem.validate();
  const Vector pilot = regression_pilot(problem, config.pilot_gamma, options);
  const MseEvaluator evaluate = [&](const Triplet& t, const std::optional<Vector>& warm) {
    return evaluate_regression_mse(problem, t, pilot, config.plug_in, options, warm);
  };
  TuneResult r = search_triplets(evaluate, config);
  r.pilot = pilot;
  return r;
}

}  // namespace epd
