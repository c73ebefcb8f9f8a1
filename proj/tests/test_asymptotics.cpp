#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "epd/asymptotics.hpp"
#include "epd/errors.hpp"
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

const QuadratureOptions kTight{1e-12, 1e-15, 800, 8};

double max_rel(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

void check_psd(const Matrix& m) {
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * m.cwiseAbs().maxCoeff());
  const Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * m.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("Kullback-Leibler member gives the Fisher information") {
  const NormalLocationScale normal;
  const auto s = model_jkxi(normal, v({0, 1}), Triplet::kl());
  CHECK(s.J(0, 0) == Approx(1.0).epsilon(1e-9));
  CHECK(s.J(1, 1) == Approx(0.5).epsilon(1e-9));
  CHECK(s.J(0, 1) == 0.0);
  CHECK(s.K(0, 0) == Approx(1.0).epsilon(1e-9));
  CHECK(s.K(1, 1) == Approx(0.5).epsilon(1e-9));
  CHECK(s.variance(0, 0) == Approx(1.0).epsilon(1e-9));
  CHECK(s.variance(1, 1) == Approx(2.0).epsilon(1e-9));
  CHECK(std::abs(s.variance.trace() - 3.0) <= 1e-6);

  const auto t = model_jkxi(normal, v({4, 2.5}), Triplet::kl());
  CHECK(std::abs(t.variance.trace() - (2.5 + 2 * 2.5 * 2.5)) <= 1e-6);

  const ExponentialMean expo;
  const auto e = model_jkxi(expo, v({3.0}), Triplet::kl());
  CHECK(e.J(0, 0) == Approx(1.0 / 9.0).epsilon(1e-9));
  CHECK(e.K(0, 0) == Approx(1.0 / 9.0).epsilon(1e-9));
}

TEST_CASE("DPD blocks against closed-form Gaussian power integrals") {
  const NormalLocationScale normal;
  for (double g : {0.5, 1.0}) {
    for (double s2 : {1.0, 2.3, 0.04}) {
      CAPTURE(g);
      CAPTURE(s2);
      const auto s = model_jkxi(normal, v({0.7, s2}), Triplet::dpd(g), kTight);
      const auto o = oracle::normal_dpd_blocks(g, s2);
      CHECK(s.J(0, 0) == Approx(o.j_mu).epsilon(1e-6));
      CHECK(s.J(1, 1) == Approx(o.j_s2).epsilon(1e-6));
      CHECK(s.K(0, 0) == Approx(o.k_mu).epsilon(1e-6));
      CHECK(s.K(1, 1) == Approx(o.k_s2).epsilon(1e-6));
      CHECK(s.xi[1] == Approx(o.xi_s2).epsilon(1e-6));
      CHECK(s.xi[0] == 0.0);
      CHECK(s.J(0, 1) == 0.0);
    }
  }
}

TEST_CASE("location component of xi vanishes for every member") {
  const NormalLocationScale normal;
  for (const Triplet& t : {Triplet{-1.0, 0.4, 0.2}, Triplet{0.99, 0.8, 0.1}, Triplet{-30, 1, 0}}) {
    CHECK(model_jkxi(normal, v({-2, 3}), t).xi[0] == 0.0);
  }
}

TEST_CASE("general form with g = f reproduces the model form") {
  const NormalLocationScale normal;
  const ExponentialMean expo;
  for (const Triplet& t : {Triplet{-1.0, 0.4, 0.2}, Triplet{0.0, 0.0, 0.5}, Triplet{-20, 0.9, 0.7}}) {
    CAPTURE(t.to_string());
    const Vector th = v({1.0, 2.0});
    const Density g{[&](double x) { return oracle::normal_pdf(x, 1.0, 2.0); },
                    normal.support(), normal.frame(th)};
    const auto a = general_jk(g, normal, th, t, kTight);
    const auto b = model_jkxi(normal, th, t, kTight);
    CHECK((a.J - b.J).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK((a.K - b.K).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK((a.xi - b.xi).cwiseAbs().maxCoeff() <= 1e-7);

    const Vector te = v({1.5});
    const Density ge{[](double x) { return x < 0 ? 0.0 : std::exp(-x / 1.5) / 1.5; },
                     expo.support(), expo.frame(te)};
    const auto c = general_jk(ge, expo, te, t, kTight);
    const auto d = model_jkxi(expo, te, t, kTight);
    CHECK(std::abs(c.J(0, 0) - d.J(0, 0)) <= 1e-7);
    CHECK(std::abs(c.K(0, 0) - d.K(0, 0)) <= 1e-7);
  }
}

TEST_CASE("empirical plug-in converges to the model form") {
  const NormalLocationScale normal;
  std::mt19937_64 rng(2024);
  const auto x = oracle::normal_sample(rng, 100000, 0.0, 1.0);
  for (const Triplet& t : {Triplet{-1.0, 0.4, 0.2}, Triplet{0.0, 0.0, 0.5}}) {
    CAPTURE(t.to_string());
    const auto e = general_jk(x, normal, v({0, 1}), t);
    const auto m = model_jkxi(normal, v({0, 1}), t);
    for (int i = 0; i < 2; ++i) {
      CHECK(e.J(i, i) == Approx(m.J(i, i)).epsilon(0.02));
      CHECK(e.K(i, i) == Approx(m.K(i, i)).epsilon(0.02));
    }
    // off-diagonals are zero at the model; compare on the diagonal's scale
    CHECK(std::abs(e.J(0, 1)) <= 0.02 * m.J(0, 0));
    CHECK(std::abs(e.K(0, 1)) <= 0.02 * m.K(0, 0));
    const Matrix sv = sandwich_variance(x, normal, v({0, 1}), t) * static_cast<double>(x.size());
    CHECK(sv(0, 0) == Approx(m.variance(0, 0)).epsilon(0.05));
    CHECK(sv(1, 1) == Approx(m.variance(1, 1)).epsilon(0.05));
  }
  const Matrix kl = sandwich_variance(x, normal, v({0, 1}), Triplet::kl()) * 1e5;
  CHECK(kl(0, 0) == Approx(1.0).epsilon(0.03));
  CHECK(kl(1, 1) == Approx(2.0).epsilon(0.05));
}

TEST_CASE("identical points give K = 0") {
  const NormalLocationScale normal;
  const std::vector<double> x(10, 0.75);
  const auto s = general_jk(x, normal, v({0, 1}), {-1.0, 0.4, 0.2});
  CHECK(s.K.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sandwich variance under duplication") {
  const NormalLocationScale normal;
  std::mt19937_64 rng(8);
  const auto x = oracle::normal_sample(rng, 40, 0.0, 1.0);
  auto xx = x;
  xx.insert(xx.end(), x.begin(), x.end());
  const Triplet t{-1.0, 0.4, 0.2};
  const Vector th = v({0.1, 0.9});
  CHECK(max_rel(general_jk(xx, normal, th, t).J, general_jk(x, normal, th, t).J) <= 1e-12);
  const double n = 40.0;
  const Matrix a = sandwich_variance(x, normal, th, t);
  const Matrix b = sandwich_variance(xx, normal, th, t);
  CHECK(max_rel(b, a * (n - 1.0) / (2.0 * n - 1.0)) <= 1e-10);
  check_psd(a);
}

TEST_CASE("variance is symmetric PSD") {
  const NormalLocationScale normal;
  for (const Triplet& t : {Triplet{-1.0, 0.4, 0.2}, Triplet{0.99, 0.8, 0.1}, Triplet{-50, 1, 0},
                           Triplet{2.0, 0.3, 1.0}}) {
    const auto s = model_jkxi(normal, v({0.5, 1.7}), t);
    CAPTURE(t.to_string());
    CHECK_FALSE(s.degenerate);
    check_psd(s.K);
    check_psd(s.variance);
  }
}

TEST_CASE("influence function") {
  const NormalLocationScale normal;
  const InfluenceFunction ml(normal, v({0, 1}), Triplet::kl());
  for (double y : {-3.0, 0.5, 7.0}) {
    CHECK(ml(y)[0] == Approx(y).epsilon(1e-9));
    CHECK(ml(y)[1] == Approx(y * y - 1.0).epsilon(1e-8).scale(1.0));
  }
  for (const Triplet& t : {Triplet::kl(), Triplet{-1.0, 0.4, 0.1}, Triplet{0.99, 0.8, 0.1},
                           Triplet{0.0, 0.0, 0.5}}) {
    CAPTURE(t.to_string());
    const InfluenceFunction ifn(normal, v({2.0, 0.5}), t);
    CHECK(ifn(2.0)[0] == 0.0);
    for (double d : {0.25, 1.0, 3.5, 20.0}) {
      CHECK(ifn(2.0 + d)[0] == -ifn(2.0 - d)[0]);
      CHECK(ifn(2.0 + d)[1] == ifn(2.0 - d)[1]);
    }
  }
  CHECK(influence(1.5, normal, v({0, 1}), {-1.0, 0.4, 0.1}) ==
        InfluenceFunction(normal, v({0, 1}), {-1.0, 0.4, 0.1})(1.5));
}

TEST_CASE("bounded, redescending influence for gamma > 0") {
  const NormalLocationScale normal;
  for (double beta : {0.0, 0.4, 0.8}) {
    for (double alpha : {-50.0, -1.0, 0.99}) {
      for (double gamma : {0.05, 0.1, 0.5}) {
        const Triplet t{alpha, beta, gamma};
        CAPTURE(t.to_string());
        const InfluenceFunction ifn(normal, v({0, 1}), t);
        double peak = 0.0;
        for (int k = 0; k <= 400; ++k) {
          const double y = -10.0 + 0.05 * k;
          const double a = std::abs(ifn(y)[0]);
          CHECK(std::isfinite(a));
          peak = std::max(peak, a);
        }
        CHECK(std::abs(ifn(10.0)[0]) < peak);
        CHECK(std::abs(ifn(60.0)[0]) < std::abs(ifn(10.0)[0]));
      }
    }
  }
}

TEST_CASE("gross error sensitivity") {
  const NormalLocationScale normal;
  const auto ml = ges(normal, v({0, 1}), Triplet::kl());
  CHECK(ml.unbounded);
  CHECK(std::isinf(ml.value));

  const auto r = ges(normal, v({0, 1}), Triplet::dpd(0.1));
  CHECK_FALSE(r.unbounded);
  CHECK(std::isfinite(r.value));
  // independent grid supremum
  const InfluenceFunction ifn(normal, v({0, 1}), Triplet::dpd(0.1));
  double sup = 0.0;
  for (int k = 0; k <= 24000; ++k) sup = std::max(sup, ifn(-12.0 + 0.001 * k).norm());
  CHECK(r.value >= sup);
  CHECK(r.value == Approx(sup).epsilon(1e-6));
  for (double d : {1e-3, 1e-2, 0.1}) {
    CHECK(r.value >= ifn(r.y_star + d).norm());
    CHECK(r.value >= ifn(r.y_star - d).norm());
  }

  const ExponentialMean expo;
  CHECK(ges(expo, v({2.0}), Triplet::kl()).unbounded);
  CHECK_FALSE(ges(expo, v({2.0}), {-1.0, 0.4, 0.2}).unbounded);
}

TEST_CASE("summed mse arithmetic") {
  const Matrix id = Matrix::Identity(2, 2);
  CHECK(asymptotic_summed_mse(v({1, 2}), v({1, 2}), id, id, 100.0) == Approx(0.02).epsilon(1e-15));
  CHECK(asymptotic_summed_mse(v({1, 2}), v({0, 0}), id, id, 100.0) == Approx(5.02).epsilon(1e-15));
  const NormalLocationScale normal;
  const auto s = model_jkxi(normal, v({0, 1}), {-1.0, 0.4, 0.2});
  const double a = asymptotic_summed_mse(v({0, 1}), v({0, 1}), s.J, s.K, 50.0);
  const double b = asymptotic_summed_mse(v({0, 1}), v({0, 1}), s.J, s.K, 100.0);
  CHECK(a == Approx(2.0 * b).epsilon(1e-15));
  CHECK(a == Approx(s.variance.trace() / 50.0).epsilon(1e-12));
  CHECK_THROWS_AS(asymptotic_summed_mse(v({0, 1}), v({0, 1}), Matrix::Zero(2, 2), id, 10.0),
                  DegenerateMatrixError);
}

TEST_CASE("spd inverse") {
  Matrix a(2, 2);
  a << 4, 1, 1, 3;
  const auto inv = spd_inverse(a);
  CHECK_FALSE(inv.degenerate);
  CHECK((inv.inverse * a - Matrix::Identity(2, 2)).norm() <= 1e-14);
  Matrix b(2, 2);
  b << 1, 0, 0, 1e-14;
  CHECK(spd_inverse(b).degenerate);
  Matrix c(2, 2);
  c << 1, 2, 2, 1;
  CHECK(spd_inverse(c).degenerate);
}
