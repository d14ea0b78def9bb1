#include "lyl/logistic.hpp"

#include <cmath>

namespace lyl {

namespace {

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                  : std::exp(z) / (1.0 + std::exp(z));
}

Eigen::MatrixXd design(const SurvivalDataset& data) {
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto d = static_cast<Eigen::Index>(data.d());
  Eigen::MatrixXd X(n, d + 1);
  X.col(0).setOnes();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < d; ++c)
      X(i, c + 1) = data.x(static_cast<std::size_t>(i),
                           static_cast<std::size_t>(c));
  return X;
}

Eigen::VectorXd targets(const SurvivalDataset& data) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.n()));
  for (std::size_t i = 0; i < data.n(); ++i)
    y[static_cast<Eigen::Index>(i)] = data.treatment(i);
  return y;
}

}  // namespace

double LogisticFit::predict(const double* x, std::size_t d) const {
  double z = beta[0];
  for (std::size_t c = 0; c < d; ++c) z += beta[static_cast<Eigen::Index>(c + 1)] * x[c];
  return sigmoid(z);
}

double logistic_loglik(const SurvivalDataset& data,
                       const Eigen::VectorXd& beta) {
  Eigen::MatrixXd X = design(data);
  Eigen::VectorXd y = targets(data);
  Eigen::VectorXd eta = X * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // y*eta - log(1+e^eta), computed stably on both tails
    const double e = eta[i];
    const double log1pe = e > 0.0 ? e + std::log1p(std::exp(-e))
                                  : std::log1p(std::exp(e));
    ll += y[i] * e - log1pe;
  }
  return ll;
}

Eigen::VectorXd logistic_gradient(const SurvivalDataset& data,
                                  const Eigen::VectorXd& beta) {
  Eigen::MatrixXd X = design(data);
  Eigen::VectorXd y = targets(data);
  Eigen::VectorXd p = (X * beta).unaryExpr([](double z) { return sigmoid(z); });
  return X.transpose() * (y - p);
}

LogisticFit fit_logistic_propensity(const SurvivalDataset& data) {
  const std::size_t n1 = [&] {
    std::size_t c = 0;
    for (std::size_t i = 0; i < data.n(); ++i) c += data.treatment(i);
    return c;
  }();
  if (n1 == 0 || n1 == data.n())
    throw Error(ErrorKind::SingleArm,
                "logistic: both treatment arms must be present");

  Eigen::MatrixXd X = design(data);
  Eigen::VectorXd y = targets(data);
  const Eigen::Index p = X.cols();
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < p)
      throw Error(ErrorKind::SingularDesign,
                  "logistic: design matrix is rank deficient");
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  const double tol = 1e-8;
  const int cap = 100;
  int it = 0;
  for (;;) {
    Eigen::VectorXd prob =
        (X * beta).unaryExpr([](double z) { return sigmoid(z); });
    Eigen::VectorXd grad = X.transpose() * (y - prob);
    if (grad.norm() <= tol) break;
    if (++it > cap)
      throw Error(ErrorKind::NonConvergence,
                  "logistic: Newton failed to converge in 100 iterations");
    Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
    Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success)
      throw Error(ErrorKind::SingularDesign,
                  "logistic: information matrix is singular");
    beta += ldlt.solve(grad);
    if (beta.norm() > 30.0 * std::sqrt(static_cast<double>(p)))
      throw Error(ErrorKind::SeparableData,
                  "logistic: coefficients diverging (perfect separation)");
  }

  LogisticFit fit;
  fit.beta = beta;
  fit.iterations = it;
  fit.grad_norm = logistic_gradient(data, beta).norm();
  fit.loglik = logistic_loglik(data, beta);
  Eigen::VectorXd prob =
      (X * beta).unaryExpr([](double z) { return sigmoid(z); });
  Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
  Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  fit.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return fit;
}

}  // namespace lyl
