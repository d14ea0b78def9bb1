#pragma once

// Propensity model: maximum-likelihood logistic regression of treatment on
// covariates (intercept + mains), Newton-optimized with separation
// detection via a diverging coefficient norm.

#include <Eigen/Dense>

#include "lyl/dataset.hpp"

namespace lyl {

struct LogisticFit {
  Eigen::VectorXd beta;   // [intercept, x1..xd]
  Eigen::VectorXd se;
  int iterations = 0;
  double grad_norm = 0.0;
  double loglik = 0.0;

  // P(A=1 | x), unclipped
  double predict(const double* x, std::size_t d) const;
};

LogisticFit fit_logistic_propensity(const SurvivalDataset& data);

double logistic_loglik(const SurvivalDataset& data,
                       const Eigen::VectorXd& beta);
Eigen::VectorXd logistic_gradient(const SurvivalDataset& data,
                                  const Eigen::VectorXd& beta);

}  // namespace lyl
