#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "dgp_helper.hpp"
#include "lyl/logistic.hpp"

using namespace lyl;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  throw std::logic_error("expected lyl::Error");
}

SurvivalDataset coin_flip_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> t(n), xv(n * 2);
  std::vector<int> e(n, 1), a(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = rng.exponential();
    a[i] = static_cast<int>(rng.below(2));
    xv[i * 2] = rng.uniform(-1.0, 1.0);
    xv[i * 2 + 1] = rng.uniform(-1.0, 1.0);
  }
  return SurvivalDataset(t, e, a, xv, 2);
}

}  // namespace

TEST_CASE("independent treatment yields estimates within three SEs of zero") {
  SurvivalDataset ds = coin_flip_data(2000, 314);
  LogisticFit fit = fit_logistic_propensity(ds);
  REQUIRE(fit.beta.size() == 3);
  for (int c = 0; c < 3; ++c) {
    CAPTURE(c);
    CHECK(std::abs(fit.beta[c]) <= 3.0 * fit.se[c]);
  }
  CHECK(fit.grad_norm <= 1e-8);
}

TEST_CASE("benchmark propensity model is recovered inside 99.9 percent CIs") {
  SurvivalDataset ds = testdgp::sample(5000, 271828);
  LogisticFit fit = fit_logistic_propensity(ds);
  REQUIRE(fit.beta.size() == 5);
  const double truth[5] = {0.0, 0.5, 0.5, 0.0, 0.0};
  const double z = normal_quantile(0.9995);
  for (int c = 0; c < 5; ++c) {
    CAPTURE(c);
    CHECK(std::abs(fit.beta[c] - truth[c]) <= z * fit.se[c]);
  }
}

TEST_CASE("single-arm samples are rejected") {
  Rng rng(9);
  std::vector<double> t{1.0, 2.0, 3.0}, xv{0.1, 0.2, 0.3};
  std::vector<int> e{1, 1, 1};
  CHECK(kind_of([&] {
          fit_logistic_propensity(SurvivalDataset(t, e, {1, 1, 1}, xv, 1));
        }) == ErrorKind::SingleArm);
  CHECK(kind_of([&] {
          fit_logistic_propensity(SurvivalDataset(t, e, {0, 0, 0}, xv, 1));
        }) == ErrorKind::SingleArm);
}

TEST_CASE("perfectly separated data is detected") {
  const std::size_t n = 200;
  Rng rng(17);
  std::vector<double> t(n), xv(n);
  std::vector<int> e(n, 1), a(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = rng.exponential();
    xv[i] = rng.uniform(-1.0, 1.0);
    a[i] = xv[i] > 0.0 ? 1 : 0;
  }
  CHECK(kind_of([&] {
          fit_logistic_propensity(SurvivalDataset(t, e, a, xv, 1));
        }) == ErrorKind::SeparableData);
}

TEST_CASE("duplicated covariate columns are rejected") {
  const std::size_t n = 100;
  Rng rng(23);
  std::vector<double> t(n), xv;
  std::vector<int> e(n, 1), a(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = rng.exponential();
    a[i] = static_cast<int>(rng.below(2));
    const double v = rng.uniform(-1.0, 1.0);
    xv.push_back(v);
    xv.push_back(-3.0 * v);
  }
  CHECK(kind_of([&] {
          fit_logistic_propensity(SurvivalDataset(t, e, a, xv, 2));
        }) == ErrorKind::SingularDesign);
}

TEST_CASE("analytic log-likelihood gradient matches finite differences") {
  SurvivalDataset ds = testdgp::sample(300, 55);
  Rng rng(77);
  const Eigen::Index p = 5;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd beta(p);
    for (Eigen::Index c = 0; c < p; ++c) beta[c] = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd g = logistic_gradient(ds, beta);
    Eigen::VectorXd fd(p);
    for (Eigen::Index c = 0; c < p; ++c) {
      const double h = 1e-5 * std::max(1.0, std::abs(beta[c]));
      Eigen::VectorXd bp = beta, bm = beta;
      bp[c] += h;
      bm[c] -= h;
      fd[c] = (logistic_loglik(ds, bp) - logistic_loglik(ds, bm)) / (2.0 * h);
    }
    CHECK((fd - g).norm() <= 1e-6 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("predictions are the logistic transform of the linear index") {
  SurvivalDataset ds = testdgp::sample(500, 100);
  LogisticFit fit = fit_logistic_propensity(ds);
  for (std::size_t i = 0; i < 20; ++i) {
    const double* x = ds.x_row(i);
    double eta = fit.beta[0];
    for (int c = 0; c < 4; ++c) eta += fit.beta[c + 1] * x[c];
    const double expect = 1.0 / (1.0 + std::exp(-eta));
    CHECK(fit.predict(x, 4) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(fit.predict(x, 4) > 0.0);
    CHECK(fit.predict(x, 4) < 1.0);
  }
}
