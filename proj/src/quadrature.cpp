#include "epd/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "epd/errors.hpp"

namespace epd {

namespace {

// Kronrod abscissae; odd indices are the 7-point Gauss nodes.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = std::numeric_limits<double>::min();

enum class Map { kFinite, kBoth, kUpper, kLower };

struct Transform {
  Map map;
  double anchor;  // finite endpoint for the half-infinite maps

  // x(t) and dx/dt
  void apply(double t, double& x, double& jac) const {
    switch (map) {
      case Map::kFinite:
        x = t;
        jac = 1.0;
        return;
      case Map::kBoth: {
        const double d = 1.0 - t * t;
        x = t / d;
        jac = (1.0 + t * t) / (d * d);
        return;
      }
      case Map::kUpper: {
        const double d = 1.0 - t;
        x = anchor + t / d;
        jac = 1.0 / (d * d);
        return;
      }
      case Map::kLower: {
        const double d = 1.0 + t;
        x = anchor + t / d;
        jac = 1.0 / (d * d);
        return;
      }
    }
  }
};

struct Panel {
  double a;
  double b;
  std::vector<double> value;
  std::vector<double> error;
  double priority = 0.0;
};

class Integrator {
 public:
  Integrator(const VectorIntegrand& f, std::size_t dim, Transform tr)
      : f_(f), dim_(dim), tr_(tr), fc_(dim), f1_(dim * 7), f2_(dim * 7) {}

  int evaluations() const { return evaluations_; }

  void rule(Panel& p) {
    const double centr = 0.5 * (p.a + p.b);
    const double hlgth = 0.5 * (p.b - p.a);
    p.value.assign(dim_, 0.0);
    p.error.assign(dim_, 0.0);

    eval(centr, fc_);
    for (int j = 0; j < 7; ++j) {
      const double dx = hlgth * kXgk[j];
      eval(centr - dx, std::span<double>(f1_).subspan(j * dim_, dim_));
      eval(centr + dx, std::span<double>(f2_).subspan(j * dim_, dim_));
    }

    for (std::size_t k = 0; k < dim_; ++k) {
      double resg = kWg[3] * fc_[k];
      double resk = kWgk[7] * fc_[k];
      double resabs = std::abs(resk);
      for (int j = 0; j < 7; ++j) {
        const double s = f1_[j * dim_ + k] + f2_[j * dim_ + k];
        resk += kWgk[j] * s;
        resabs += kWgk[j] * (std::abs(f1_[j * dim_ + k]) + std::abs(f2_[j * dim_ + k]));
        if (j % 2 == 1) resg += kWg[j / 2] * s;
      }
      const double reskh = 0.5 * resk;
      double resasc = kWgk[7] * std::abs(fc_[k] - reskh);
      for (int j = 0; j < 7; ++j) {
        resasc += kWgk[j] *
                  (std::abs(f1_[j * dim_ + k] - reskh) + std::abs(f2_[j * dim_ + k] - reskh));
      }
      const double result = resk * hlgth;
      resabs *= std::abs(hlgth);
      resasc *= std::abs(hlgth);
      double err = std::abs((resk - resg) * hlgth);
      if (resasc != 0.0 && err != 0.0) {
        err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
      }
      if (resabs > kTiny / (50.0 * kEps)) err = std::max(50.0 * kEps * resabs, err);
      p.value[k] = result;
      p.error[k] = err;
    }
  }

 private:
  void eval(double t, std::span<double> out) {
    double x = 0.0;
    double jac = 0.0;
    tr_.apply(t, x, jac);
    f_(x, out);
    ++evaluations_;
    for (std::size_t k = 0; k < dim_; ++k) {
      if (!std::isfinite(out[k])) {
        std::ostringstream os;
        os.precision(17);
        os << "integrand is not finite (component " << k << " = " << out[k]
           << ") at x = " << x;
        throw QuadratureError(os.str(), x);
      }
      // 0 * (huge jacobian) must stay 0 near mapped infinite endpoints
      out[k] = out[k] == 0.0 ? 0.0 : out[k] * jac;
    }
  }

  const VectorIntegrand& f_;
  std::size_t dim_;
  Transform tr_;
  std::vector<double> fc_, f1_, f2_;
  int evaluations_ = 0;
};

void check_inputs(const IntegrandDomain& d, const QuadratureOptions& o) {
  if (std::isnan(d.lower) || std::isnan(d.upper) || !(d.lower < d.upper)) {
    std::ostringstream os;
    os << "integration domain must satisfy lower < upper, got [" << d.lower << ", "
       << d.upper << "]";
    throw ParameterError(os.str());
  }
  if (!(o.rel_tol > 0.0) || !(o.abs_tol > 0.0)) {
    throw ParameterError("quadrature tolerances must be positive");
  }
  if (o.initial_panels < 1 || o.max_subdivisions < 0) {
    throw ParameterError("invalid quadrature panel limits");
  }
}

}  // namespace

IntegrandDomain IntegrandDomain::real_line() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {-inf, inf};
}

IntegrandDomain IntegrandDomain::half_line(double lower) {
  return {lower, std::numeric_limits<double>::infinity()};
}

double VectorQuadratureResult::max_error() const {
  double e = 0.0;
  for (double v : error) e = std::max(e, v);
  return e;
}

VectorQuadratureResult integrate_vector(const VectorIntegrand& f, std::size_t dim,
                                        const IntegrandDomain& domain,
                                        const QuadratureOptions& options) {
  check_inputs(domain, options);
  const bool lo_inf = std::isinf(domain.lower);
  const bool hi_inf = std::isinf(domain.upper);
  Transform tr{Map::kFinite, 0.0};
  double ta = domain.lower;
  double tb = domain.upper;
  if (lo_inf && hi_inf) {
    tr = {Map::kBoth, 0.0};
    ta = -1.0;
    tb = 1.0;
  } else if (hi_inf) {
    tr = {Map::kUpper, domain.lower};
    ta = 0.0;
    tb = 1.0;
  } else if (lo_inf) {
    tr = {Map::kLower, domain.upper};
    ta = -1.0;
    tb = 0.0;
  }

  // Initial partition, geometrically graded toward a declared singular endpoint.
  std::vector<double> cuts;
  const int m = options.initial_panels;
  const bool grade_lo = domain.singular_lower && !lo_inf;
  const bool grade_hi = domain.singular_upper && !hi_inf;
  for (int i = 0; i <= m; ++i) {
    double s = static_cast<double>(i) / m;
    if (grade_lo && !grade_hi) {
      s = (i == 0) ? 0.0 : std::pow(2.0, -(m - i) * 2.0);
    } else if (grade_hi && !grade_lo) {
      s = (i == m) ? 1.0 : 1.0 - std::pow(2.0, -i * 2.0);
      if (i == 0) s = 0.0;
    }
    cuts.push_back(ta + s * (tb - ta));
  }

  Integrator integ(f, dim, tr);
  std::vector<Panel> panels;
  panels.reserve(static_cast<std::size_t>(m + 2 * options.max_subdivisions + 1));
  for (int i = 0; i < m; ++i) {
    Panel p{cuts[i], cuts[i + 1], {}, {}, 0.0};
    integ.rule(p);
    panels.push_back(std::move(p));
  }

  std::vector<double> total(dim, 0.0), total_err(dim, 0.0);
  auto recompute = [&] {
    std::fill(total.begin(), total.end(), 0.0);
    std::fill(total_err.begin(), total_err.end(), 0.0);
    for (const auto& p : panels) {
      for (std::size_t k = 0; k < dim; ++k) {
        total[k] += p.value[k];
        total_err[k] += p.error[k];
      }
    }
  };
  recompute();

  // Per-component error scale fixed from the initial estimate.
  std::vector<double> scale(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    scale[k] = std::max(options.abs_tol, options.rel_tol * std::abs(total[k]));
  }
  auto priority = [&](Panel& p) {
    double pr = 0.0;
    for (std::size_t k = 0; k < dim; ++k) pr = std::max(pr, p.error[k] / scale[k]);
    p.priority = pr;
  };

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry> heap;
  for (std::size_t i = 0; i < panels.size(); ++i) {
    priority(panels[i]);
    heap.push({panels[i].priority, i});
  }

  auto done = [&] {
    for (std::size_t k = 0; k < dim; ++k) {
      if (total_err[k] > std::max(options.abs_tol, options.rel_tol * std::abs(total[k]))) {
        return false;
      }
    }
    return true;
  };

  bool converged = done();
  int splits = 0;
  while (!converged && splits < options.max_subdivisions && !heap.empty()) {
    const std::size_t idx = heap.top().second;
    heap.pop();
    const double a = panels[idx].a;
    const double b = panels[idx].b;
    const double mid = 0.5 * (a + b);
    if (!(mid > a && mid < b)) break;  // panel at floating-point resolution

    Panel left{a, mid, {}, {}, 0.0};
    Panel right{mid, b, {}, {}, 0.0};
    integ.rule(left);
    integ.rule(right);
    for (std::size_t k = 0; k < dim; ++k) {
      total[k] += left.value[k] + right.value[k] - panels[idx].value[k];
      total_err[k] += left.error[k] + right.error[k] - panels[idx].error[k];
    }
    priority(left);
    priority(right);
    panels[idx] = std::move(left);
    heap.push({panels[idx].priority, idx});
    panels.push_back(std::move(right));
    heap.push({panels.back().priority, panels.size() - 1});
    ++splits;
    converged = done();
  }
  recompute();
  converged = done();

  VectorQuadratureResult out;
  out.value = std::move(total);
  out.error = std::move(total_err);
  out.evaluations = integ.evaluations();
  out.converged = converged;
  return out;
}

QuadratureResult integrate(const ScalarIntegrand& f, const IntegrandDomain& domain,
                           const QuadratureOptions& options) {
  const VectorIntegrand vf = [&f](double x, std::span<double> out) { out[0] = f(x); };
  auto r = integrate_vector(vf, 1, domain, options);
  return {r.value[0], r.error[0], r.evaluations, r.converged};
}

}  // namespace epd
