#pragma once

// The fitted nuisance bundle nu = (Lambda1, Lambda2, Lambda_c, pi):
// type-erased predictors so that Cox fits, forests, and exact-truth
// oracles all flow through the same estimation code.  Positivity is
// handled by clipping pi to [eta, 1-eta] and flooring survival-type
// denominators at eta, with clip events counted on shared atomics.

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "lyl/dataset.hpp"
#include "lyl/forest.hpp"
#include "lyl/step_fn.hpp"

namespace lyl {

// (arm, covariate row) -> cumulative hazard on [0, horizon]
using HazardPredictor =
    std::function<StepFn(int a, const double* x, std::size_t d)>;
// covariate row -> raw P(A=1|x), before clipping
using PropensityPredictor =
    std::function<double(const double* x, std::size_t d)>;

struct ClipCounters {
  std::atomic<std::uint64_t> propensity{0};
  std::atomic<std::uint64_t> surv{0};
  std::atomic<std::uint64_t> cens{0};
};

struct NuisanceFit {
  HazardPredictor lambda1;
  HazardPredictor lambda2;
  HazardPredictor lambdac;
  PropensityPredictor propensity_raw;
  double eta = 0.01;
  double horizon = 0.0;  // t*; predictions beyond it are never consumed

  std::string hazard_learner = "unset";
  std::string censoring_learner = "unset";
  std::string propensity_learner = "unset";

  std::shared_ptr<ClipCounters> clips = std::make_shared<ClipCounters>();

  // pi clipped into [eta, 1-eta]; counts a clip when it engages
  double propensity(const double* x, std::size_t d) const;
  // floor a survival-type value at eta, counting on `which`
  double floor_surv(double s, std::atomic<std::uint64_t>& which) const;
};

// Learner family for the whole bundle: "cor" = Cox hazards + logistic
// propensity (+ linear projections downstream), "rf" = survival /
// probability forests (+ forest projections downstream).
enum class LearnerFlavor { cor, rf };

const char* learner_flavor_name(LearnerFlavor f);
// Accepts "cor", "rf", "RF"; anything else is an InputError.
LearnerFlavor parse_learner_flavor(const std::string& s);

struct LearnerConfig {
  LearnerFlavor flavor = LearnerFlavor::cor;
  double eta = 0.01;            // positivity floor carried into the bundle
  ForestParams forest;          // consumed by the rf flavor only
  // Below this many events of a cause the training split cannot support a
  // covariate model: causes 1/2 refuse (FoldTooSmall); censoring falls
  // back to a marginal Nelson-Aalen, or to a zero hazard when no row is
  // censored at all.
  std::size_t min_cause_events = 5;
};

// Fit all four nuisance components on `train`.  `seed` drives the forest
// flavor only; the parametric flavor is deterministic given the data.
NuisanceFit fit_nuisance_bundle(const SurvivalDataset& train,
                                const LearnerConfig& cfg, double horizon,
                                std::uint64_t seed);

}  // namespace lyl
