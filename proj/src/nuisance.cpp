#include "lyl/nuisance.hpp"

#include <algorithm>
#include <utility>
#include <vector>

#include "lyl/common.hpp"
#include "lyl/cox.hpp"
#include "lyl/logistic.hpp"

namespace lyl {

double NuisanceFit::propensity(const double* x, std::size_t d) const {
  double p = propensity_raw(x, d);
  if (p < eta) {
    clips->propensity.fetch_add(1, std::memory_order_relaxed);
    p = eta;
  } else if (p > 1.0 - eta) {
    clips->propensity.fetch_add(1, std::memory_order_relaxed);
    p = 1.0 - eta;
  }
  return p;
}

double NuisanceFit::floor_surv(double s,
                               std::atomic<std::uint64_t>& which) const {
  if (s < eta) {
    which.fetch_add(1, std::memory_order_relaxed);
    return eta;
  }
  return s;
}

const char* learner_flavor_name(LearnerFlavor f) {
  return f == LearnerFlavor::cor ? "cor" : "rf";
}

LearnerFlavor parse_learner_flavor(const std::string& s) {
  if (s == "cor") return LearnerFlavor::cor;
  if (s == "rf" || s == "RF") return LearnerFlavor::rf;
  throw Error(ErrorKind::InputError, "unknown learner flavor: " + s);
}

namespace {

// Marginal censoring Nelson-Aalen (no covariates), with the reverse-role
// convention: the censoring jump at a tied time divides by the at-risk
// count net of the event deaths at that time.
StepFn marginal_censoring_na(const SurvivalDataset& data) {
  struct Rec {
    double t;
    int ev;
  };
  std::vector<Rec> recs(data.n());
  for (std::size_t i = 0; i < data.n(); ++i)
    recs[i] = {data.time(i), data.event(i)};
  std::sort(recs.begin(), recs.end(),
            [](const Rec& a, const Rec& b) { return a.t < b.t; });
  std::vector<double> times, jumps;
  double at_risk = static_cast<double>(data.n());
  std::size_t i = 0;
  while (i < recs.size()) {
    std::size_t k = i;
    double d = 0.0, c = 0.0;
    while (k < recs.size() && recs[k].t == recs[i].t) {
      (recs[k].ev == 0 ? c : d) += 1.0;
      ++k;
    }
    if (c > 0.0) {
      times.push_back(recs[i].t);
      jumps.push_back(c / (at_risk - d));
    }
    at_risk -= d + c;
    i = k;
  }
  return StepFn(std::move(times), std::move(jumps));
}

}  // namespace

NuisanceFit fit_nuisance_bundle(const SurvivalDataset& train,
                                const LearnerConfig& cfg, double horizon,
                                std::uint64_t seed) {
  if (train.n() == 0)
    throw Error(ErrorKind::InputError, "fit_nuisance_bundle: empty training set");
  if (!(cfg.eta > 0.0 && cfg.eta < 0.5))
    throw Error(ErrorKind::InputError, "fit_nuisance_bundle: eta outside (0, 0.5)");
  if (!(horizon > 0.0))
    throw Error(ErrorKind::InputError, "fit_nuisance_bundle: horizon must be positive");

  for (int cause : {1, 2})
    if (train.count_events(cause) < cfg.min_cause_events)
      throw Error(ErrorKind::FoldTooSmall,
                  "fit_nuisance_bundle: fewer than " +
                      std::to_string(cfg.min_cause_events) + " events of cause " +
                      std::to_string(cause) + " in the training split");

  NuisanceFit nu;
  nu.eta = cfg.eta;
  nu.horizon = horizon;

  const std::size_t n_cens = train.count_events(0);

  if (cfg.flavor == LearnerFlavor::cor) {
    auto c1 = std::make_shared<CoxFit>(fit_cox_cause_specific(
        train, 1, FeatureExpansion::mains_treatment_interactions));
    auto c2 = std::make_shared<CoxFit>(fit_cox_cause_specific(
        train, 2, FeatureExpansion::mains_treatment_interactions));
    nu.lambda1 = [c1](int a, const double* x, std::size_t d) {
      return c1->predict(a, x, d);
    };
    nu.lambda2 = [c2](int a, const double* x, std::size_t d) {
      return c2->predict(a, x, d);
    };
    nu.hazard_learner = "cox_breslow";

    if (n_cens == 0) {
      nu.lambdac = [](int, const double*, std::size_t) { return StepFn({}, {}); };
      nu.censoring_learner = "none";
    } else if (n_cens < cfg.min_cause_events) {
      StepFn marg = marginal_censoring_na(train);
      nu.lambdac = [marg](int, const double*, std::size_t) { return marg; };
      nu.censoring_learner = "nelson_aalen";
    } else {
      auto cc = std::make_shared<CoxFit>(
          fit_cox_cause_specific(train, 0, FeatureExpansion::mains_treatment));
      nu.lambdac = [cc](int a, const double* x, std::size_t d) {
        return cc->predict(a, x, d);
      };
      nu.censoring_learner = "cox_breslow";
    }

    auto lg = std::make_shared<LogisticFit>(fit_logistic_propensity(train));
    nu.propensity_raw = [lg](const double* x, std::size_t d) {
      return lg->predict(x, d);
    };
    nu.propensity_learner = "logistic";
  } else {
    auto fparams = [&](std::uint64_t tag) {
      ForestParams p = cfg.forest;
      p.seed = derive_seed(seed, {tag});
      return p;
    };
    auto f1 = std::make_shared<SurvivalForestFit>(
        fit_survival_forest(train, 1, fparams(1)));
    auto f2 = std::make_shared<SurvivalForestFit>(
        fit_survival_forest(train, 2, fparams(2)));
    nu.lambda1 = [f1](int a, const double* x, std::size_t d) {
      return f1->predict(a, x, d);
    };
    nu.lambda2 = [f2](int a, const double* x, std::size_t d) {
      return f2->predict(a, x, d);
    };
    nu.hazard_learner = "survival_forest";

    if (n_cens == 0) {
      nu.lambdac = [](int, const double*, std::size_t) { return StepFn({}, {}); };
      nu.censoring_learner = "none";
    } else if (n_cens < cfg.min_cause_events) {
      StepFn marg = marginal_censoring_na(train);
      nu.lambdac = [marg](int, const double*, std::size_t) { return marg; };
      nu.censoring_learner = "nelson_aalen";
    } else {
      auto fc = std::make_shared<SurvivalForestFit>(
          fit_survival_forest(train, 0, fparams(3)));
      nu.lambdac = [fc](int a, const double* x, std::size_t d) {
        return fc->predict(a, x, d);
      };
      nu.censoring_learner = "survival_forest";
    }

    auto pf = std::make_shared<RegressionForestFit>(
        fit_probability_forest(train, fparams(4)));
    nu.propensity_raw = [pf](const double* x, std::size_t d) {
      return pf->predict(x, d);
    };
    nu.propensity_learner = "probability_forest";
  }

  return nu;
}

}  // namespace lyl
