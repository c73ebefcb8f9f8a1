#include "epd/asymptotics.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "epd/errors.hpp"

namespace epd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix unpack(const std::vector<double>& v, std::size_t offset, Eigen::Index p) {
  return Eigen::Map<const Matrix>(v.data() + offset, p, p);
}

void pack(std::span<double> out, std::size_t offset, const Matrix& m) {
  std::copy(m.data(), m.data() + m.size(), out.begin() + static_cast<std::ptrdiff_t>(offset));
}

// h(x) = i w(f) - (t w'(t))|_{t=f} u u^T, the part of -grad psi that depends on g.
Matrix h_matrix(const Model& model, const Vector& theta, const Triplet& trip, double x,
                double f, const Vector& u) {
  return model.information(theta, x) * weight(f, trip) -
         weight_slope(f, trip) * (u * u.transpose());
}

// Integrals against f_theta: xi, int w f uu^T, int w^2 f uu^T, int f h.
struct ModelIntegrals {
  Vector xi;
  Matrix wf_uu;
  Matrix w2f_uu;
  Matrix f_h;
};

ModelIntegrals model_integrals(const Model& model, const Vector& theta, const Triplet& trip,
                               const QuadratureOptions& q, bool with_h) {
  model.check(theta);
  const auto p = static_cast<Eigen::Index>(model.param_dim());
  const std::size_t pp = static_cast<std::size_t>(p * p);
  const std::size_t dim = static_cast<std::size_t>(p) + (with_h ? 3 : 2) * pp;
  if (saturates(model.density_sup(theta), trip)) {
    throw DomainError("exp(alpha f) overflows at " + trip.to_string() +
                      "; the sandwich matrices are not finite");
  }
  const auto r = integrate_over_support(
      model, theta, dim,
      [&](double x, std::span<double> out) {
        const double f = model.density(theta, x);
        if (f == 0.0) {
          std::fill(out.begin(), out.end(), 0.0);
          return;
        }
        const Vector u = model.score(theta, x);
        const double w = weight(f, trip);
        const Matrix uu = u * u.transpose();
        for (Eigen::Index k = 0; k < p; ++k) out[static_cast<std::size_t>(k)] = u[k] * w * f;
        pack(out, static_cast<std::size_t>(p), (w * f) * uu);
        pack(out, static_cast<std::size_t>(p) + pp, (w * w * f) * uu);
        if (with_h) {
          pack(out, static_cast<std::size_t>(p) + 2 * pp, f * h_matrix(model, theta, trip, x, f, u));
        }
      },
      q);
  ModelIntegrals m;
  m.xi = Eigen::Map<const Vector>(r.value.data(), p);
  m.wf_uu = unpack(r.value, static_cast<std::size_t>(p), p);
  m.w2f_uu = unpack(r.value, static_cast<std::size_t>(p) + pp, p);
  if (with_h) m.f_h = unpack(r.value, static_cast<std::size_t>(p) + 2 * pp, p);
  if (model.symmetric_location()) {
    // odd integrands: set to their exact value rather than quadrature noise
    m.xi[0] = 0.0;
    for (Matrix* a : {&m.wf_uu, &m.w2f_uu, &m.f_h}) {
      if (a->size() == 0) continue;
      for (Eigen::Index k = 1; k < p; ++k) (*a)(0, k) = (*a)(k, 0) = 0.0;
    }
  }
  return m;
}

Matrix symmetrise(const Matrix& a) { return 0.5 * (a + a.transpose()); }

void finish(SandwichMatrices& s) {
  s.J = symmetrise(s.J);
  s.K = symmetrise(s.K);
  const SpdInverse inv = spd_inverse(s.J);
  s.condition = inv.condition;
  s.degenerate = inv.degenerate;
  s.variance = symmetrise(inv.inverse * s.K * inv.inverse);
}

Vector t_value(const Model& model, const Vector& theta, const Triplet& trip, double x) {
  return model.score(theta, x) * weight(model.density(theta, x), trip);
}

}  // namespace

SpdInverse spd_inverse(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw ParameterError("spd_inverse needs a non-empty square matrix");
  }
  SpdInverse out;
  const auto n = a.rows();
  if (!a.allFinite()) {
    out.inverse = Matrix::Constant(n, n, kNaN);
    out.condition = kInf;
    out.degenerate = true;
    return out;
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrise(a), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo > 0.0) {
    out.condition = hi / lo;
    out.inverse = symmetrise(a.llt().solve(Matrix::Identity(n, n)));
  } else {
    out.condition = kInf;
    const Eigen::FullPivLU<Matrix> lu(a);
    out.inverse = lu.isInvertible() ? Matrix(lu.inverse()) : Matrix::Constant(n, n, kNaN);
  }
  out.degenerate = !(out.condition <= kDegenerateCondition);
  return out;
}

SandwichMatrices model_jkxi(const Model& model, const Vector& theta, const Triplet& trip,
                            const QuadratureOptions& quadrature) {
  trip.validate();
  const ModelIntegrals m = model_integrals(model, theta, trip, quadrature, false);
  SandwichMatrices s;
  s.xi = m.xi;
  s.J = m.wf_uu;
  s.K = m.w2f_uu - m.xi * m.xi.transpose();
  finish(s);
  return s;
}

SandwichMatrices general_jk(const Density& g, const Model& model, const Vector& theta,
                            const Triplet& trip, const QuadratureOptions& quadrature) {
  trip.validate();
  const ModelIntegrals m = model_integrals(model, theta, trip, quadrature, true);
  const auto p = static_cast<Eigen::Index>(model.param_dim());
  const std::size_t pp = static_cast<std::size_t>(p * p);

  const Frame fr = g.frame;
  const double zlo = std::isinf(g.support.lower) ? g.support.lower
                                                 : (g.support.lower - fr.center) / fr.scale;
  const double zhi = std::isinf(g.support.upper) ? g.support.upper
                                                 : (g.support.upper - fr.center) / fr.scale;
  const Support fsup = model.support();
  const auto r = integrate_vector(
      [&](double z, std::span<double> out) {
        const double x = fr.center + fr.scale * z;
        const double gx = g.pdf(x);
        if (gx == 0.0 || !fsup.contains(x)) {
          std::fill(out.begin(), out.end(), 0.0);
          return;
        }
        const double f = model.density(theta, x);
        const Vector u = model.score(theta, x);
        const Vector t = u * weight(f, trip);
        const double c = gx * fr.scale;
        for (Eigen::Index k = 0; k < p; ++k) out[static_cast<std::size_t>(k)] = c * t[k];
        pack(out, static_cast<std::size_t>(p), c * (t * t.transpose()));
        pack(out, static_cast<std::size_t>(p) + pp, c * h_matrix(model, theta, trip, x, f, u));
      },
      static_cast<std::size_t>(p) + 2 * pp, IntegrandDomain{zlo, zhi}, quadrature);

  SandwichMatrices s;
  s.xi = Eigen::Map<const Vector>(r.value.data(), p);
  const Matrix ett = unpack(r.value, static_cast<std::size_t>(p), p);
  const Matrix gh = unpack(r.value, static_cast<std::size_t>(p) + pp, p);
  s.J = m.wf_uu - m.f_h + gh;
  s.K = ett - s.xi * s.xi.transpose();
  finish(s);
  return s;
}

SandwichMatrices general_jk(std::span<const double> sample, const Model& model,
                            const Vector& theta, const Triplet& trip,
                            const QuadratureOptions& quadrature) {
  trip.validate();
  if (sample.empty()) throw DataError("general_jk needs a non-empty sample");
  const ModelIntegrals m = model_integrals(model, theta, trip, quadrature, true);
  const auto p = static_cast<Eigen::Index>(model.param_dim());
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());

  std::vector<Vector> t;
  Vector tbar = Vector::Zero(p);
  Matrix hbar = Matrix::Zero(p, p);
  for (double xi : x) {
    const double f = model.density(theta, xi);
    const Vector u = model.score(theta, xi);
    t.push_back(u * weight(f, trip));
    tbar += t.back() - t.front();
    hbar += h_matrix(model, theta, trip, xi, f, u);
  }
  // shifted by the first point, so tied samples give exactly zero spread
  tbar = t.front() + tbar / n;
  hbar /= n;
  Matrix k = Matrix::Zero(p, p);
  for (const auto& ti : t) k += (ti - tbar) * (ti - tbar).transpose();

  SandwichMatrices s;
  s.xi = tbar;
  s.J = m.wf_uu - m.f_h + hbar;
  s.K = k / n;
  finish(s);
  return s;
}

InfluenceFunction::InfluenceFunction(const Model& model, Vector theta, Triplet trip,
                                     const QuadratureOptions& quadrature)
    : model_(model), theta_(std::move(theta)), trip_(trip) {
  m_ = model_jkxi(model_, theta_, trip_, quadrature);
  if (m_.degenerate) {
    throw DegenerateMatrixError("J is singular at " + trip_.to_string(), m_.condition);
  }
  j_inv_ = spd_inverse(m_.J).inverse;
}

Vector InfluenceFunction::operator()(double y) const {
  return j_inv_ * (t_value(model_, theta_, trip_, y) - m_.xi);
}

Vector influence(double y, const Model& model, const Vector& theta, const Triplet& trip) {
  return InfluenceFunction(model, theta, trip)(y);
}

GesResult ges(const Model& model, const Vector& theta, const Triplet& trip,
              const GesOptions& options) {
  if (options.grid_points < 3) throw ParameterError("GES grid needs at least 3 points");
  const InfluenceFunction ifn(model, theta, trip);
  const Frame fr = model.frame(theta);
  const Support sup = model.support();
  const bool lower_fixed = std::isfinite(sup.lower);
  const bool upper_fixed = std::isfinite(sup.upper);
  const auto norm_at = [&](double y) { return ifn(y).norm(); };

  double width = options.half_width;
  for (int round = 0;; ++round) {
    double lo;
    double hi;
    if (lower_fixed) {
      lo = sup.lower;
      hi = sup.lower + (20.0 / 12.0) * width * fr.scale;
    } else {
      lo = fr.center - width * fr.scale;
      hi = fr.center + width * fr.scale;
    }
    if (upper_fixed) hi = std::min(hi, sup.upper);

    const int m = options.grid_points;
    const double step = (hi - lo) / (m - 1);
    int best = 0;
    double best_v = -1.0;
    for (int k = 0; k < m; ++k) {
      const double v = norm_at(lo + step * k);
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    const bool open_edge = (best == 0 && !lower_fixed) || (best == m - 1 && !upper_fixed);
    if (open_edge) {
      if (round < options.extensions) {
        width *= 2.0;
        continue;
      }
      return {lo + step * best, kInf, true};
    }

    GesResult out{lo + step * best, best_v, false};
    const double a = lo + step * std::max(best - 1, 0);
    const double b = lo + step * std::min(best + 1, m - 1);
    const auto r = boost::math::tools::brent_find_minima(
        [&](double y) { return -norm_at(y); }, a, b, 40);
    if (-r.second > out.value) {
      out.y_star = r.first;
      out.value = -r.second;
    }
    return out;
  }
}

Matrix sandwich_variance(std::span<const double> sample, const Model& model,
                         const Vector& theta_hat, const Triplet& trip,
                         const QuadratureOptions& quadrature) {
  if (sample.size() < 2) throw DataError("sandwich variance needs at least two observations");
  const SandwichMatrices s = general_jk(sample, model, theta_hat, trip, quadrature);
  if (s.degenerate) {
    throw DegenerateMatrixError("J(G_n) is singular at " + trip.to_string(), s.condition);
  }
  const Vector ef = model_integrals(model, theta_hat, trip, quadrature, false).xi;
  const auto p = static_cast<Eigen::Index>(model.param_dim());
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  Matrix rr = Matrix::Zero(p, p);
  for (double xi : x) {
    const Vector r = t_value(model, theta_hat, trip, xi) - ef;
    rr += r * r.transpose();
  }
  const double n = static_cast<double>(x.size());
  rr /= (n - 1.0);
  const Matrix j_inv = spd_inverse(s.J).inverse;
  return symmetrise(j_inv * rr * j_inv) / n;
}

double asymptotic_summed_mse(const Vector& theta_g, const Vector& theta_star, const Matrix& J,
                             const Matrix& K, double n) {
  if (!(n > 0.0)) throw ParameterError("sample size must be positive");
  if (theta_g.size() != theta_star.size() || J.rows() != theta_g.size() ||
      K.rows() != J.rows() || K.cols() != J.cols()) {
    throw ParameterError("asymptotic_summed_mse: dimension mismatch");
  }
  const SpdInverse inv = spd_inverse(J);
  if (inv.degenerate) {
    std::ostringstream os;
    os << "J is singular (condition " << inv.condition << ")";
    throw DegenerateMatrixError(os.str(), inv.condition);
  }
  return (inv.inverse * K * inv.inverse).trace() / n + (theta_g - theta_star).squaredNorm();
}

}  // namespace epd
