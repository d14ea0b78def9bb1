#pragma once

// Cause-specific Cox proportional hazards: Breslow-tie partial likelihood
// maximized by damped Newton, with the matching Breslow baseline cumulative
// hazard.  Censoring fits reuse the same machinery with code 0 as the event.

#include <Eigen/Dense>

#include "lyl/dataset.hpp"
#include "lyl/step_fn.hpp"

namespace lyl {

// Covariate expansion applied to (a, x).
enum class FeatureExpansion {
  mains,                        // [x1..xd]
  mains_treatment,              // [x1..xd, a]
  mains_treatment_interactions, // [x1..xd, a, a*x1..a*xd]
};

const char* feature_expansion_name(FeatureExpansion fm);
std::size_t feature_dim(FeatureExpansion fm, std::size_t d);
void expand_features(FeatureExpansion fm, int a, const double* x,
                     std::size_t d, double* out);

struct CoxFit {
  int cause = 1;                 // 0 = censoring, 1 or 2 = cause
  FeatureExpansion fmap = FeatureExpansion::mains_treatment_interactions;
  Eigen::VectorXd beta;
  Eigen::VectorXd se;            // sqrt(diag(information^{-1}))
  StepFn baseline;               // Breslow estimator at features == 0
  int iterations = 0;
  double grad_norm = 0.0;
  double loglik = 0.0;

  // predicted cumulative hazard t -> baseline(t) * exp(beta . z(a,x))
  StepFn predict(int a, const double* x, std::size_t d) const;
  double risk_score(int a, const double* x, std::size_t d) const;
};

// Newton with step halving to gradient norm <= 1e-8 (cap 100 iterations).
CoxFit fit_cox_cause_specific(const SurvivalDataset& data, int cause,
                              FeatureExpansion fm);

// Evaluation helpers (property tests check the analytic gradient against
// finite differences of this log-likelihood).
double cox_partial_loglik(const SurvivalDataset& data, int cause,
                          FeatureExpansion fm, const Eigen::VectorXd& beta);
Eigen::VectorXd cox_partial_gradient(const SurvivalDataset& data, int cause,
                                     FeatureExpansion fm,
                                     const Eigen::VectorXd& beta);

}  // namespace lyl
