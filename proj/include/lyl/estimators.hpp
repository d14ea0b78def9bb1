#pragma once

// Cross-fitting orchestration: K-fold nuisance fitting, one-step ATE and
// variable-importance estimates with influence-function standard errors,
// covariate ranking by heterogeneity test, and positivity diagnostics.

#include <cstdint>
#include <vector>

#include "lyl/dataset.hpp"
#include "lyl/eif.hpp"
#include "lyl/folds.hpp"
#include "lyl/nuisance.hpp"
#include "lyl/report.hpp"

namespace lyl {

struct CrossFitConfig {
  int K = 10;
  std::uint64_t seed = 1;
  LearnerConfig learner;
  int j = 1;              // cause of interest
  double tstar = 0.0;     // horizon
  double level = 0.95;    // CI level
  std::size_t min_fold_rows = 10;
  int threads = 1;
};

// One-step cross-fitted average effect of treatment on cause-j years
// lost before tstar.  For each fold k the bundle is fit on the
// complement and evaluated on the fold; the point estimate is the
// sample mean of the influence values, the variance their centered
// second moment.  K=1 trains and evaluates on the full sample.
EstimateReport estimate_ate(const SurvivalDataset& data,
                            const CrossFitConfig& cfg);

// Same evaluation with a caller-supplied bundle used for every fold
// (no fitting).  With a fixed bundle the estimate is a plain sample
// mean, identical for every fold plan.
EstimateReport estimate_ate_with_bundle(const SurvivalDataset& data,
                                        const CrossFitConfig& cfg,
                                        const NuisanceFit& nu);

// Projection regressions for coordinate l (1-based): the fold-k effect
// surface tau_hat regressed on X_{-l}, and X_l regressed on X_{-l},
// both fit on the fold's training complement only.
struct CateProjection {
  XPredictor tau_proj;    // (full x row) -> projected effect
  XPredictor e_proj;      // (full x row) -> predicted X_l
  std::string tau_learner;
  std::string e_learner;
};

CateProjection fit_cate_projection(const SurvivalDataset& data,
                                   const CrossFitConfig& cfg, std::size_t l,
                                   const FoldPlan& plan, int k,
                                   const NuisanceFit& nu);

// Best-partially-linear-projection importance of coordinate l (1-based):
// Omega = Gamma / chi with Gamma the mean residual covariance between
// X_l and the effect surface and chi the mean residual variance of X_l;
// TST = Omega / se with a two-sided normal p-value.
VimReport estimate_vim(const SurvivalDataset& data, const CrossFitConfig& cfg,
                       std::size_t l);

// One VimReport per coordinate, sorted by ascending p-value with ties
// broken by descending |TST|.  Per-coordinate failures are recorded as
// degenerate entries (p = 1), not raised.
std::vector<VimReport> rank_covariates(const SurvivalDataset& data,
                                       const CrossFitConfig& cfg);

// Minima over the sample and both arms of the propensity, event
// survival at tstar, and censoring survival at tstar-; clip counts are
// read from the bundle's counters.  Flags raise when a minimum is at or
// below the floor eta.
PositivitySummary positivity_check(const NuisanceFit& nu,
                                   const SurvivalDataset& data, double tstar,
                                   double eta);

}  // namespace lyl
