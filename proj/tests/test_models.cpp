#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "epd/errors.hpp"
#include "epd/models.hpp"
#include "oracles.hpp"

using namespace epd;
using doctest::Approx;

namespace {

Vector v(std::initializer_list<double> xs) {
  Vector out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

struct Case {
  std::shared_ptr<Model> model;
  Vector theta;
};

std::vector<Case> cases() {
  auto normal = std::make_shared<NormalLocationScale>();
  auto expo = std::make_shared<ExponentialMean>();
  auto reg = std::make_shared<RegressionObservation>(v({1.0, 2.5}));
  return {{normal, v({0.0, 1.0})},  {normal, v({-3.0, 0.04})}, {normal, v({120.0, 1.9e4})},
          {expo, v({1.0})},         {expo, v({14.36})},        {expo, v({0.02})},
          {reg, v({0.3, -1.0, 0.5})}};
}

const QuadratureOptions kTight{1e-12, 1e-14, 600, 8};

}  // namespace

TEST_CASE("density examples") {
  NormalLocationScale n;
  ExponentialMean e;
  CHECK(n.density(v({0, 1}), 0.0) == Approx(1.0 / std::sqrt(2 * std::numbers::pi)));
  CHECK(n.density(v({0, 1}), 0.0) == Approx(0.398942).epsilon(1e-6));
  CHECK(e.density(v({2}), 0.0) == Approx(0.5));
  CHECK(n.density(v({0, 1}), 1.0) == n.density(v({0, 1}), -1.0));
  CHECK(e.density(v({2}), -1.0) == 0.0);
  CHECK(e.log_density(v({2}), -1.0) == -std::numeric_limits<double>::infinity());
  CHECK(n.density(v({1.3, 0.7}), 0.2) == Approx(oracle::normal_pdf(0.2, 1.3, 0.7)).epsilon(1e-14));
}

TEST_CASE("score examples") {
  NormalLocationScale n;
  ExponentialMean e;
  const Vector u1 = n.score(v({0, 1}), 1.0);
  CHECK(u1[0] == Approx(1.0));
  CHECK(u1[1] == Approx(0.0));
  const Vector u0 = n.score(v({0, 1}), 0.0);
  CHECK(u0[0] == Approx(0.0));
  CHECK(u0[1] == Approx(-0.5));
  CHECK(e.score(v({2}), 2.0)[0] == Approx(0.0));
}

TEST_CASE("score and information by finite differences") {
  for (const auto& c : cases()) {
    const Model& m = *c.model;
    const Frame fr = m.frame(c.theta);
    for (double z : {-1.3, 0.2, 0.9, 2.4}) {
      const double x = m.support().lower == 0.0 ? fr.scale * (1.0 + 0.4 * z)
                                                 : fr.center + fr.scale * z;
      const Vector u = m.score(c.theta, x);
      const Matrix info = m.information(c.theta, x);
      CHECK((info - info.transpose()).norm() == 0.0);
      const Vector sc = m.param_scale(c.theta);
      for (Eigen::Index k = 0; k < c.theta.size(); ++k) {
        const double h = 1e-6 * sc[k];
        Vector tp = c.theta, tm = c.theta;
        tp[k] += h;
        tm[k] -= h;
        const double du = (m.log_density(tp, x) - m.log_density(tm, x)) / (2 * h);
        CHECK(du == Approx(u[k]).epsilon(1e-6).scale(1.0 / sc[k]));
        const Vector dscore = (m.score(tp, x) - m.score(tm, x)) / (2 * h);
        for (Eigen::Index j = 0; j < c.theta.size(); ++j) {
          CHECK(-dscore[j] == Approx(info(j, k)).epsilon(1e-6).scale(1.0 / (sc[j] * sc[k])));
        }
      }
    }
  }
}

TEST_CASE("normalisation, zero-mean score and the information identity") {
  for (const auto& c : cases()) {
    const Model& m = *c.model;
    const auto p = static_cast<std::size_t>(c.theta.size());
    const auto r = integrate_over_support(
        m, c.theta, 1 + p + 2 * p * p,
        [&](double x, std::span<double> out) {
          const double f = m.density(c.theta, x);
          const Vector u = m.score(c.theta, x);
          const Matrix i = m.information(c.theta, x);
          out[0] = f;
          for (std::size_t a = 0; a < p; ++a) {
            out[1 + a] = u[a] * f;
            for (std::size_t b = 0; b < p; ++b) {
              out[1 + p + a * p + b] = i(a, b) * f;
              out[1 + p + p * p + a * p + b] = u[a] * u[b] * f;
            }
          }
        },
        kTight);
    const Vector sc = m.param_scale(c.theta);
    CHECK(r.value[0] == Approx(1.0).epsilon(1e-8));
    for (std::size_t a = 0; a < p; ++a) {
      CHECK(std::abs(r.value[1 + a] * sc[a]) <= 1e-7);
      for (std::size_t b = 0; b < p; ++b) {
        const double lhs = r.value[1 + p + a * p + b] * sc[a] * sc[b];
        const double rhs = r.value[1 + p + p * p + a * p + b] * sc[a] * sc[b];
        CHECK(std::abs(lhs - rhs) <= 1e-6);
      }
    }
  }
}

TEST_CASE("expected information examples") {
  NormalLocationScale n;
  ExponentialMean e;
  const auto rn = integrate_over_support(
      n, v({0, 1}), 4,
      [&](double x, std::span<double> out) {
        const Matrix i = n.information(v({0, 1}), x);
        const double f = n.density(v({0, 1}), x);
        for (int k = 0; k < 4; ++k) out[k] = i(k / 2, k % 2) * f;
      },
      kTight);
  CHECK(rn.value[0] == Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(rn.value[1]) < 1e-12);
  CHECK(rn.value[3] == Approx(0.5).epsilon(1e-10));
  const auto re = integrate_over_support(
      e, v({1}), 1,
      [&](double x, std::span<double> out) {
        out[0] = e.information(v({1}), x)(0, 0) * e.density(v({1}), x);
      },
      kTight);
  CHECK(re.value[0] == Approx(1.0).epsilon(1e-10));
}

TEST_CASE("unconstrained coordinates round-trip") {
  for (const auto& c : cases()) {
    const Vector back = c.model->from_unconstrained(c.model->to_unconstrained(c.theta));
    CHECK((back - c.theta).norm() <= 1e-12 * (1.0 + c.theta.norm()));
  }
}

TEST_CASE("robust starts") {
  NormalLocationScale n;
  ExponentialMean e;
  const std::vector<double> x = {1, 2, 3, 4, 100};
  const Vector s = n.robust_start(x);
  CHECK(s[0] == 3.0);
  CHECK(s[1] == Approx(std::pow(1.4826 * 1.0, 2)).epsilon(1e-4));
  CHECK(e.robust_start(x)[0] == Approx(3.0 / std::numbers::ln2));
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  const std::vector<double> y = {5, 1, 9, 3};
  CHECK(mad(y) == 2.0);
}

TEST_CASE("parameter checks") {
  NormalLocationScale n;
  ExponentialMean e;
  CHECK_THROWS_AS(n.density(v({0, -1}), 0.0), ParameterError);
  CHECK_THROWS_AS(n.density(v({0}), 0.0), ParameterError);
  CHECK_THROWS_AS(e.density(v({0}), 1.0), ParameterError);
  CHECK_THROWS_AS(n.density(v({std::nan(""), 1}), 0.0), ParameterError);
  CHECK_THROWS_AS(make_model("cauchy"), ParameterError);
  CHECK(make_model("normal")->param_dim() == 2);
  CHECK(make_model("exponential")->param_dim() == 1);
}

TEST_CASE("density sup") {
  NormalLocationScale n;
  ExponentialMean e;
  CHECK(n.density_sup(v({2, 0.25})) == Approx(n.density(v({2, 0.25}), 2.0)));
  CHECK(e.density_sup(v({3})) == Approx(1.0 / 3.0));
}
