#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "epd/asymptotics.hpp"
#include "epd/data.hpp"
#include "epd/errors.hpp"
#include "epd/regression.hpp"
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

RegressionProblem simulated(int n, std::uint64_t seed, int outliers = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::normal_distribution<double> e(0.0, 0.8);
  Matrix x(n, 1);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = u(rng);
    y[i] = 1.5 - 0.7 * x(i, 0) + e(rng);
  }
  for (int i = 0; i < outliers; ++i) y[i] += 15.0;
  return RegressionProblem::with_intercept(x, y, {"x"}, "sim");
}

/// Regression MDPDE solved by its own fixed-point iteration: weighted least
/// squares with w_i = exp(-g r_i^2 / (2 s2)) and
/// s2 = sum w r^2 / (sum w - n g (1+g)^{-3/2}).
Vector mdpde_fixed_point(const RegressionProblem& pr, double g, Vector theta) {
  const Eigen::Index p = pr.p();
  const double n = static_cast<double>(pr.n());
  for (int it = 0; it < 100000; ++it) {
    const Vector r = pr.response - pr.design * theta.head(p);
    const Vector w = (-g * r.array().square() / (2.0 * theta[p])).exp().matrix();
    const Matrix xtwx = pr.design.transpose() * w.asDiagonal() * pr.design;
    const Vector eta = xtwx.ldlt().solve(pr.design.transpose() * (w.asDiagonal() * pr.response));
    const Vector r2 = pr.response - pr.design * eta;
    const Vector w2 = (-g * r2.array().square() / (2.0 * theta[p])).exp().matrix();
    const double s2 = (w2.array() * r2.array().square()).sum() /
                      (w2.sum() - n * g / std::pow(1.0 + g, 1.5));
    Vector next(p + 1);
    next << eta, s2;
    const double step = (next - theta).cwiseAbs().maxCoeff();
    theta = next;
    if (step < 1e-15) break;
  }
  return theta;
}

}  // namespace

TEST_CASE("omega integrals at the Kullback-Leibler member") {
  for (double s2 : {1.0, 0.3, 17.0}) {
    const Omegas o = omega_integrals(s2, Triplet::kl(), kTight);
    CHECK(o.omega1 == Approx(1.0 / s2).epsilon(1e-9));
    CHECK(o.omega3 == Approx(1.0 / s2).epsilon(1e-9));
    CHECK(o.omega2 == Approx(0.5 / (s2 * s2)).epsilon(1e-9));
    CHECK(o.omega4 == Approx(0.5 / (s2 * s2)).epsilon(1e-9));
  }
}

TEST_CASE("omega integrals against closed-form Gaussian power integrals") {
  for (double g : {0.5, 1.0}) {
    for (double s2 : {1.0, 2.3}) {
      CAPTURE(g);
      CAPTURE(s2);
      const Omegas o = omega_integrals(s2, Triplet::dpd(g), kTight);
      const auto b = oracle::normal_dpd_blocks(g, s2);
      CHECK(o.omega1 == Approx(b.j_mu).epsilon(1e-6));
      CHECK(o.omega2 == Approx(b.j_s2).epsilon(1e-6));
      CHECK(o.omega3 == Approx(b.k_mu).epsilon(1e-6));
      CHECK(o.omega4 == Approx(b.k_s2).epsilon(1e-6));
    }
  }
}

TEST_CASE("omega4 is below its uncentred second moment") {
  const Triplet t{-1.0, 0.4, 0.2};
  const double s2 = 1.4;
  const Omegas o = omega_integrals(s2, t, kTight);
  const NormalLocationScale normal;
  const auto m = model_jkxi(normal, v({0.0, s2}), t, kTight);
  CHECK(o.omega4 <= m.K(1, 1) + m.xi[1] * m.xi[1]);
  CHECK(o.omega4 == Approx(m.K(1, 1)).epsilon(1e-8));
  CHECK(o.omega1 == Approx(m.J(0, 0)).epsilon(1e-8));
}

TEST_CASE("block matrices") {
  const auto pr = simulated(30, 1);
  const double s2 = 0.7;
  const Triplet t{-1.0, 0.4, 0.2};
  const auto m = psi_omega_matrices(pr, s2, t, kTight);
  const Omegas o = omega_integrals(s2, t, kTight);
  const Matrix xtx = pr.design.transpose() * pr.design / static_cast<double>(pr.n());
  CHECK((m.psi_n.topLeftCorner(2, 2) - o.omega1 * xtx).norm() <= 1e-12 * xtx.norm());
  CHECK((m.omega_n.topLeftCorner(2, 2) - o.omega3 * xtx).norm() <= 1e-12 * xtx.norm());
  CHECK(m.psi_n(2, 2) == o.omega2);
  CHECK(m.omega_n(2, 2) == o.omega4);
  CHECK(m.psi_n.col(2).head(2).norm() == 0.0);

  const auto ml = psi_omega_matrices(pr, s2, Triplet::kl(), kTight);
  CHECK((ml.psi_n - ml.omega_n).norm() <= 1e-9 * ml.psi_n.norm());

  Matrix ones = Matrix::Zero(5, 0);
  const auto io = RegressionProblem::with_intercept(ones, v({1, 2, 3, 4, 9}));
  const auto mi = psi_omega_matrices(io, s2, t, kTight);
  CHECK(mi.psi_n(0, 0) == Approx(o.omega1).epsilon(1e-14));
}

TEST_CASE("general forms at the model reproduce the blocks") {
  const auto pr = simulated(12, 2);
  const Triplet t{-1.0, 0.4, 0.2};
  const Vector theta = v({1.2, -0.6, 0.9});
  const auto g = general_inh_matrices(pr, t, theta, PlugIn::model, kTight);
  const auto b = psi_omega_matrices(pr, 0.9, t, kTight);
  CHECK((g.psi_n - b.psi_n).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((g.omega_n - b.omega_n).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(g.psi_n.col(2).head(2).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(g.omega_n.col(2).head(2).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("empirical plug-in converges to the model blocks") {
  const auto pr = simulated(20000, 3);
  const Triplet t{-1.0, 0.4, 0.2};
  const Vector theta = v({1.5, -0.7, 0.64});
  const auto e = general_inh_matrices(pr, t, theta, PlugIn::empirical);
  const auto b = psi_omega_matrices(pr, 0.64, t);
  for (int i = 0; i < 3; ++i) {
    CAPTURE(i);
    CHECK(e.psi_n(i, i) == Approx(b.psi_n(i, i)).epsilon(0.03));
    CHECK(e.omega_n(i, i) == Approx(b.omega_n(i, i)).epsilon(0.03));
  }
}

TEST_CASE("shared sigma^2 integral equals the per-observation form") {
  const auto pr = simulated(15, 4, 2);
  for (const Triplet& t : {Triplet{-1.0, 0.4, 0.2}, Triplet::dpd(0.5), Triplet::kl()}) {
    const Vector theta = v({1.0, -0.5, 1.3});
    const Vector a = regression_residual(pr, theta, t, kTight);
    const Vector b = regression_residual_per_observation(pr, theta, t, kTight);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("residual is minus the gradient of the objective") {
  const auto pr = simulated(15, 5, 2);
  const Triplet t{-1.0, 0.4, 0.2};
  const Vector theta = v({1.0, -0.5, 1.3});
  const Vector r = regression_residual(pr, theta, t, kTight);
  for (int k = 0; k < 3; ++k) {
    const double h = 1e-5;
    Vector tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    const double g = (regression_objective(pr, tp, t, kTight) -
                      regression_objective(pr, tm, t, kTight)) / (2 * h);
    CHECK(-g == Approx(r[k]).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("Kullback-Leibler member gives least squares") {
  const auto pr = simulated(25, 6, 3);
  const auto fit = fit_regression_mepde(pr, Triplet::kl());
  const auto o = ols(pr);
  CHECK(fit.converged);
  CHECK((fit.eta_hat - o.eta).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(fit.sigma2_hat == Approx(o.sigma2_ml).epsilon(1e-8));
  CHECK(o.sigma2_unbiased == Approx(o.sigma2_ml * 25.0 / 23.0).epsilon(1e-14));
}

TEST_CASE("DPD member matches an independent regression MDPDE") {
  const auto pr = simulated(40, 7, 4);
  for (double g : {0.25, 0.5, 1.0}) {
    CAPTURE(g);
    const auto fit = fit_regression_mepde(pr, Triplet::dpd(g));
    REQUIRE(fit.converged);
    Vector start = fit.theta();
    start[0] += 0.05;
    start[2] *= 1.1;
    const Vector oracle = mdpde_fixed_point(pr, g, start);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(fit.theta()[k] - oracle[k]) <= 1e-6);
  }
}

TEST_CASE("converged fits solve the estimating equations") {
  const auto pr = simulated(30, 8, 3);
  const Triplet t{-5.0, 0.7, 0.4};
  const auto fit = fit_regression_mepde(pr, t);
  CHECK(fit.converged);
  CHECK(fit.ee_residual_norm <= 1e-7);
  const Vector r = regression_residual(pr, fit.theta(), t);
  CHECK(r.head(2).norm() * std::sqrt(fit.sigma2_hat) <= 1e-6 * pr.design.cwiseAbs().maxCoeff());
  CHECK(std::abs(r[2]) * fit.sigma2_hat <= 1e-7);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(fit.variance);
  CHECK(es.eigenvalues().minCoeff() >= 0.0);
  CHECK((fit.variance - fit.variance.transpose()).norm() <= 1e-12 * fit.variance.norm());
}

TEST_CASE("scaling a design column rescales its coefficient") {
  const auto pr = simulated(30, 9, 3);
  const Triplet t{-1.0, 0.4, 0.3};
  const auto a = fit_regression_mepde(pr, t);
  for (double c : {10.0, 0.125}) {
    RegressionProblem scaled = pr;
    scaled.design.col(1) *= c;
    const auto b = fit_regression_mepde(scaled, t);
    CAPTURE(c);
    CHECK(b.eta_hat[1] * c == Approx(a.eta_hat[1]).epsilon(1e-9));
    CHECK(b.eta_hat[0] == Approx(a.eta_hat[0]).epsilon(1e-9));
    CHECK(b.sigma2_hat == Approx(a.sigma2_hat).epsilon(1e-9));
  }
}

TEST_CASE("intercept-only model with symmetric responses") {
  Matrix none = Matrix::Zero(7, 0);
  const auto pr = RegressionProblem::with_intercept(none, v({-4, -1, -0.5, 0, 0.5, 1, 4}));
  Vector shifted = pr.response.array() + 3.0;
  const auto pr3 = RegressionProblem::with_intercept(none, shifted);
  for (const Triplet& t : {Triplet::kl(), Triplet{-1.0, 0.4, 0.2}, Triplet::dpd(0.7)}) {
    CAPTURE(t.to_string());
    CHECK(std::abs(fit_regression_mepde(pr, t).eta_hat[0]) <= 1e-9);
    CHECK(fit_regression_mepde(pr3, t).eta_hat[0] == Approx(3.0).epsilon(1e-9));
  }
}

TEST_CASE("published regression fits") {
  const auto star = load_dataset("star-cluster");
  REQUIRE(star.regression.has_value());
  const auto os = ols(*star.regression);
  CHECK(os.eta[0] == Approx(6.7935).epsilon(5e-3));
  CHECK(os.eta[1] == Approx(-0.4133).epsilon(5e-3));
  CHECK(os.sigma2_unbiased == Approx(0.3188).epsilon(5e-3));
  const auto fs = fit_regression_mepde(*star.regression, {-4.8715, 0.9897, 0.7558});
  CHECK(fs.converged);
  CHECK(fs.eta_hat[0] == Approx(-8.1389).epsilon(2e-2));
  CHECK(fs.eta_hat[1] == Approx(2.9660).epsilon(2e-2));
  CHECK(fs.sigma2_hat == Approx(0.1035).epsilon(2e-2));

  const auto bel = load_dataset("belgian-calls");
  const auto ob = ols(*bel.regression);
  CHECK(ob.eta[0] == Approx(-26.006).epsilon(5e-3));
  CHECK(ob.eta[1] == Approx(0.5041).epsilon(5e-3));
  CHECK(ob.sigma2_unbiased == Approx(31.6107).epsilon(5e-3));
  const auto fb = fit_regression_mepde(*bel.regression, {-4.2416, 0.0543, 0.3205});
  CHECK(fb.converged);
  CHECK(fb.eta_hat[0] == Approx(-5.2278).epsilon(2e-2));
  CHECK(fb.eta_hat[1] == Approx(0.1095).epsilon(2e-2));
  CHECK(fb.sigma2_hat == Approx(0.0123).epsilon(2e-2));
}

TEST_CASE("regression tuning on a small grid") {
  const auto pr = simulated(25, 10, 3);
  TuneConfig c;
  c.grid = {3, 3, 4};
  c.refine_cells = 1;
  c.refine_iterations = 20;
  const auto r = tune_regression_wj(pr, c);
  REQUIRE(r.dpd.has_value());
  CHECK(r.empirical_mse <= r.dpd->empirical_mse);
  CHECK(r.pilot.size() == 3);
  const auto ev = evaluate_regression_mse(pr, r.triplet, r.pilot);
  CHECK(ev.mse == Approx(r.empirical_mse).epsilon(1e-6));
}

TEST_CASE("invalid problems") {
  Matrix x(3, 1);
  x << 1, 1, 1;
  // constant column duplicates the intercept
  CHECK_THROWS_AS(fit_regression_mepde(RegressionProblem::with_intercept(x, v({1, 2, 3})),
                                       Triplet::kl()),
                  DataError);
  Matrix y2(2, 1);
  y2 << 1, 2;
  CHECK_THROWS_AS(fit_regression_mepde(RegressionProblem::with_intercept(y2, v({1, 2})),
                                       Triplet::kl()),
                  DataError);
}
