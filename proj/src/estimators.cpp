#include "lyl/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>

#include "lyl/cause_system.hpp"
#include "lyl/common.hpp"

namespace lyl {

namespace {

// Neumaier-compensated accumulator: reductions stay exact to the last
// ulp of the total, so differently grouped sums of the same values
// agree far below the 1e-12 identity tolerances.
struct Kahan {
  double s = 0.0, c = 0.0;
  void add(double x) {
    const double t = s + x;
    if (std::abs(s) >= std::abs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  double total() const { return s + c; }
};

double mean_of(const std::vector<double>& v) {
  Kahan k;
  for (double x : v) k.add(x);
  return k.total() / static_cast<double>(v.size());
}

double mean_sq_dev(const std::vector<double>& v, double center) {
  Kahan k;
  for (double x : v) k.add((x - center) * (x - center));
  return k.total() / static_cast<double>(v.size());
}

void validate_config(const SurvivalDataset& data, const CrossFitConfig& cfg) {
  if (data.n() == 0)
    throw Error(ErrorKind::InputError, "estimator: empty dataset");
  if (cfg.K < 1) throw Error(ErrorKind::InputError, "estimator: K must be >= 1");
  if (!(cfg.tstar > 0.0))
    throw Error(ErrorKind::InputError, "estimator: tstar must be positive");
  if (cfg.j != 1 && cfg.j != 2)
    throw Error(ErrorKind::InputError, "estimator: cause must be 1 or 2");
  if (!(cfg.learner.eta > 0.0 && cfg.learner.eta < 0.5))
    throw Error(ErrorKind::InputError, "estimator: eta outside (0, 0.5)");
  if (!(cfg.level > 0.0 && cfg.level < 1.0))
    throw Error(ErrorKind::InputError, "estimator: level outside (0, 1)");
}

struct CrossFitEngine {
  FoldPlan plan;
  std::vector<std::vector<std::size_t>> fold_rows;
  std::vector<NuisanceFit> bundles;
  std::vector<FoldDiagnostic> diags;  // positivity filled after evaluation
};

CrossFitEngine fit_fold_bundles(const SurvivalDataset& data,
                                const CrossFitConfig& cfg) {
  CrossFitEngine eng;
  eng.plan = make_folds(data.n(), cfg.K, derive_seed(cfg.seed, {0xF0}));
  eng.fold_rows.resize(cfg.K);
  eng.bundles.resize(cfg.K);
  eng.diags.resize(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    eng.fold_rows[k] = eng.plan.fold_indices(k);
    if (eng.fold_rows[k].size() < cfg.min_fold_rows)
      throw Error(ErrorKind::FoldTooSmall,
                  "estimator: fold " + std::to_string(k + 1) + " has " +
                      std::to_string(eng.fold_rows[k].size()) +
                      " rows, below the configured minimum of " +
                      std::to_string(cfg.min_fold_rows));
  }
  parallel_for(static_cast<std::size_t>(cfg.K), cfg.threads,
               [&](std::size_t k) {
                 const SurvivalDataset train =
                     data.subset(eng.plan.complement_indices(static_cast<int>(k)));
                 eng.bundles[k] = fit_nuisance_bundle(
                     train, cfg.learner, cfg.tstar,
                     derive_seed(cfg.seed, {0x11, k}));
                 FoldDiagnostic& dg = eng.diags[k];
                 dg.fold = static_cast<int>(k) + 1;
                 dg.n_eval = eng.fold_rows[k].size();
                 dg.n_train = train.n();
                 dg.train_censored = train.count_events(0);
                 dg.train_events1 = train.count_events(1);
                 dg.train_events2 = train.count_events(2);
                 dg.hazard_learner = eng.bundles[k].hazard_learner;
                 dg.censoring_learner = eng.bundles[k].censoring_learner;
                 dg.propensity_learner = eng.bundles[k].propensity_learner;
               });
  return eng;
}

void fill_fold_positivity(CrossFitEngine& eng, const SurvivalDataset& data,
                          const CrossFitConfig& cfg) {
  for (int k = 0; k < cfg.K; ++k)
    eng.diags[k].positivity =
        positivity_check(eng.bundles[k], data.subset(eng.fold_rows[k]),
                         cfg.tstar, cfg.learner.eta);
}

void fill_base_report(EstimateReport& r, const SurvivalDataset& data,
                      const CrossFitConfig& cfg, const FoldPlan& plan) {
  r.cause = cfg.j;
  r.tstar = cfg.tstar;
  r.K = cfg.K;
  r.seed = cfg.seed;
  r.level = cfg.level;
  r.n = data.n();
  r.fold_redraws = plan.redraws;
}

void finish_point_estimate(EstimateReport& r, const std::vector<double>& phi) {
  const std::size_t n = phi.size();
  r.point = mean_of(phi);
  const double sigma2 = mean_sq_dev(phi, r.point);
  r.se = std::sqrt(sigma2 / static_cast<double>(n));
  const double z = normal_quantile(0.5 + r.level / 2.0);
  r.ci_lower = r.point - z * r.se;
  r.ci_upper = r.point + z * r.se;
  r.if_values.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.if_values[i] = phi[i] - r.point;
}

}  // namespace

EstimateReport estimate_ate(const SurvivalDataset& data,
                            const CrossFitConfig& cfg) {
  validate_config(data, cfg);
  CrossFitEngine eng = fit_fold_bundles(data, cfg);

  std::vector<double> phi(data.n());
  parallel_for(static_cast<std::size_t>(cfg.K), cfg.threads,
               [&](std::size_t k) {
                 EifContext ctx;
                 ctx.nu = &eng.bundles[k];
                 ctx.j = cfg.j;
                 ctx.tstar = cfg.tstar;
                 for (std::size_t i : eng.fold_rows[k])
                   phi[i] = uncentered_eif_ate(data.record(i), ctx);
               });

  EstimateReport r;
  r.estimand = "ate";
  fill_base_report(r, data, cfg, eng.plan);
  finish_point_estimate(r, phi);
  fill_fold_positivity(eng, data, cfg);
  r.folds = std::move(eng.diags);
  return r;
}

EstimateReport estimate_ate_with_bundle(const SurvivalDataset& data,
                                        const CrossFitConfig& cfg,
                                        const NuisanceFit& nu) {
  validate_config(data, cfg);
  FoldPlan plan = make_folds(data.n(), cfg.K, derive_seed(cfg.seed, {0xF0}));

  // one bundle for every row: the estimate is a plain sample mean and
  // does not depend on the fold plan
  EifContext ctx;
  ctx.nu = &nu;
  ctx.j = cfg.j;
  ctx.tstar = cfg.tstar;
  std::vector<double> phi(data.n());
  for (std::size_t i = 0; i < data.n(); ++i)
    phi[i] = uncentered_eif_ate(data.record(i), ctx);

  EstimateReport r;
  r.estimand = "ate";
  fill_base_report(r, data, cfg, plan);
  finish_point_estimate(r, phi);
  r.folds.resize(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    FoldDiagnostic& dg = r.folds[k];
    dg.fold = k + 1;
    dg.n_eval = plan.fold_indices(k).size();
    dg.n_train = 0;  // caller-supplied bundle, nothing was fit
    dg.hazard_learner = nu.hazard_learner;
    dg.censoring_learner = nu.censoring_learner;
    dg.propensity_learner = nu.propensity_learner;
    dg.positivity = positivity_check(nu, data.subset(plan.fold_indices(k)),
                                     cfg.tstar, cfg.learner.eta);
  }
  return r;
}

namespace {

XPredictor linear_predictor(Eigen::VectorXd beta, std::size_t l_col) {
  return [beta = std::move(beta), l_col](const double* x, std::size_t d) {
    double acc = beta[0];
    Eigen::Index idx = 1;
    for (std::size_t c = 0; c < d; ++c) {
      if (c == l_col) continue;
      acc += beta[idx++] * x[c];
    }
    return acc;
  };
}

XPredictor forest_predictor(std::shared_ptr<RegressionForestFit> fit,
                            std::size_t l_col) {
  return [fit = std::move(fit), l_col](const double* x, std::size_t d) {
    std::vector<double> sub;
    sub.reserve(d - 1);
    for (std::size_t c = 0; c < d; ++c)
      if (c != l_col) sub.push_back(x[c]);
    return fit->predict(sub.data(), sub.size());
  };
}

}  // namespace

CateProjection fit_cate_projection(const SurvivalDataset& data,
                                   const CrossFitConfig& cfg, std::size_t l,
                                   const FoldPlan& plan, int k,
                                   const NuisanceFit& nu) {
  const std::size_t d = data.d();
  if (l < 1 || l > d)
    throw Error(ErrorKind::InputError,
                "projection: coordinate out of range 1.." + std::to_string(d));
  if (d < 2)
    throw Error(ErrorKind::InputError,
                "projection: needs at least two covariates");
  const std::size_t l_col = l - 1;
  const std::vector<std::size_t> rows = plan.complement_indices(k);
  if (rows.empty())
    throw Error(ErrorKind::FoldTooSmall, "projection: empty training split");
  const std::size_t m = rows.size();

  std::vector<double> tau(m), xl(m);
  for (std::size_t r = 0; r < m; ++r) {
    const double* x = data.x_row(rows[r]);
    tau[r] = cate(nu, cfg.j, cfg.tstar, x, d);
    xl[r] = x[l_col];
  }

  CateProjection out;
  if (cfg.learner.flavor == LearnerFlavor::cor) {
    Eigen::MatrixXd A(m, d);  // [1, X_{-l}]
    Eigen::VectorXd yt(m), ye(m);
    for (std::size_t r = 0; r < m; ++r) {
      A(r, 0) = 1.0;
      Eigen::Index idx = 1;
      const double* x = data.x_row(rows[r]);
      for (std::size_t c = 0; c < d; ++c) {
        if (c == l_col) continue;
        A(r, idx++) = x[c];
      }
      yt(r) = tau[r];
      ye(r) = xl[r];
    }
    const auto qr = A.colPivHouseholderQr();
    out.tau_proj = linear_predictor(qr.solve(yt), l_col);
    out.e_proj = linear_predictor(qr.solve(ye), l_col);
    out.tau_learner = out.e_learner = "linear";
  } else {
    std::vector<double> feats(m * (d - 1));
    for (std::size_t r = 0; r < m; ++r) {
      const double* x = data.x_row(rows[r]);
      std::size_t idx = 0;
      for (std::size_t c = 0; c < d; ++c) {
        if (c == l_col) continue;
        feats[r * (d - 1) + idx++] = x[c];
      }
    }
    ForestParams pt = cfg.learner.forest;
    pt.seed = derive_seed(cfg.seed, {0x12, static_cast<std::uint64_t>(k), l});
    auto ft = std::make_shared<RegressionForestFit>(
        fit_regression_forest(feats, d - 1, tau, pt));
    ForestParams pe = cfg.learner.forest;
    pe.seed = derive_seed(cfg.seed, {0x13, static_cast<std::uint64_t>(k), l});
    auto fe = std::make_shared<RegressionForestFit>(
        fit_regression_forest(feats, d - 1, xl, pe));
    out.tau_proj = forest_predictor(std::move(ft), l_col);
    out.e_proj = forest_predictor(std::move(fe), l_col);
    out.tau_learner = out.e_learner = "regression_forest";
  }
  return out;
}

namespace {

VimReport vim_eval(const SurvivalDataset& data, const CrossFitConfig& cfg,
                   std::size_t l, CrossFitEngine& eng) {
  const std::size_t n = data.n();
  std::vector<double> pg(n), pc(n);
  parallel_for(static_cast<std::size_t>(cfg.K), cfg.threads,
               [&](std::size_t k) {
                 const CateProjection proj = fit_cate_projection(
                     data, cfg, l, eng.plan, static_cast<int>(k),
                     eng.bundles[k]);
                 EifContext ctx;
                 ctx.nu = &eng.bundles[k];
                 ctx.j = cfg.j;
                 ctx.tstar = cfg.tstar;
                 ctx.has_projection = true;
                 ctx.l_col = l - 1;
                 ctx.tau_proj = proj.tau_proj;
                 ctx.e_proj = proj.e_proj;
                 for (std::size_t i : eng.fold_rows[k]) {
                   const EifValues v = eif_values(data.record(i), ctx);
                   pg[i] = v.phi_gamma;
                   pc[i] = v.phi_chi;
                 }
               });

  const double gamma = mean_of(pg);
  const double chi = mean_of(pc);
  // degeneracy is judged relative to the coordinate's own scale: a
  // residual variance at rounding level means X_l is (numerically)
  // determined by the others
  Kahan kms;
  for (std::size_t i = 0; i < n; ++i) {
    const double xl = data.x(i, l - 1);
    kms.add(xl * xl);
  }
  const double msq = kms.total() / static_cast<double>(n);
  if (!(chi > 0.0) || chi <= msq * 1e-20)
    throw Error(ErrorKind::DegenerateDenominator,
                "vim: residual variance of coordinate " + std::to_string(l) +
                    " is zero (constant given the others)");
  const double omega = gamma / chi;

  std::vector<double> contribs(n);
  for (std::size_t i = 0; i < n; ++i)
    contribs[i] = omega_contrib(pg[i], pc[i], gamma, chi, omega);
  Kahan ksq;
  for (double v : contribs) ksq.add(v * v);
  const double sigma2 = ksq.total() / static_cast<double>(n);
  if (!std::isfinite(sigma2) || !(sigma2 > 0.0))
    throw Error(ErrorKind::DegenerateDenominator,
                "vim: influence values for Omega have no usable variance");

  VimReport r;
  r.estimand = "vim";
  fill_base_report(r, data, cfg, eng.plan);
  r.l = static_cast<int>(l);
  r.gamma = gamma;
  r.chi = chi;
  r.omega = omega;
  r.point = omega;
  r.se = std::sqrt(sigma2 / static_cast<double>(n));
  const double z = normal_quantile(0.5 + cfg.level / 2.0);
  r.ci_lower = omega - z * r.se;
  r.ci_upper = omega + z * r.se;
  r.tst = omega / r.se;
  r.p_value = std::min(1.0, std::max(0.0, 2.0 * (1.0 - normal_cdf(std::abs(r.tst)))));
  r.if_values = std::move(contribs);
  return r;
}

}  // namespace

VimReport estimate_vim(const SurvivalDataset& data, const CrossFitConfig& cfg,
                       std::size_t l) {
  validate_config(data, cfg);
  if (data.d() < 2)
    throw Error(ErrorKind::InputError, "vim: needs at least two covariates");
  if (l < 1 || l > data.d())
    throw Error(ErrorKind::InputError,
                "vim: coordinate out of range 1.." + std::to_string(data.d()));
  CrossFitEngine eng = fit_fold_bundles(data, cfg);
  VimReport r = vim_eval(data, cfg, l, eng);
  fill_fold_positivity(eng, data, cfg);
  r.folds = eng.diags;
  return r;
}

std::vector<VimReport> rank_covariates(const SurvivalDataset& data,
                                       const CrossFitConfig& cfg) {
  validate_config(data, cfg);
  if (data.d() < 2)
    throw Error(ErrorKind::InputError, "rank: needs at least two covariates");
  CrossFitEngine eng = fit_fold_bundles(data, cfg);

  std::vector<VimReport> out;
  out.reserve(data.d());
  for (std::size_t l = 1; l <= data.d(); ++l) {
    try {
      out.push_back(vim_eval(data, cfg, l, eng));
    } catch (const Error& e) {
      VimReport r;
      r.estimand = "vim";
      fill_base_report(r, data, cfg, eng.plan);
      r.l = static_cast<int>(l);
      r.degenerate = true;
      r.degenerate_reason = std::string(error_kind_name(e.kind())) + ": " + e.what();
      r.p_value = 1.0;
      out.push_back(std::move(r));
    }
  }
  fill_fold_positivity(eng, data, cfg);
  for (auto& r : out) r.folds = eng.diags;

  std::stable_sort(out.begin(), out.end(),
                   [](const VimReport& a, const VimReport& b) {
                     if (a.p_value != b.p_value) return a.p_value < b.p_value;
                     if (std::abs(a.tst) != std::abs(b.tst))
                       return std::abs(a.tst) > std::abs(b.tst);
                     return a.l < b.l;
                   });
  return out;
}

PositivitySummary positivity_check(const NuisanceFit& nu,
                                   const SurvivalDataset& data, double tstar,
                                   double eta) {
  PositivitySummary s;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const double* x = data.x_row(i);
    const double p = nu.propensity_raw(x, data.d());
    s.min_propensity = std::min(s.min_propensity, std::min(p, 1.0 - p));
    for (int a = 0; a < 2; ++a) {
      const ArmCurves curves = predict_arm_curves(nu, a, x, data.d());
      s.min_surv_tstar = std::min(s.min_surv_tstar, curves.system.surv(tstar));
      s.min_cens_surv_tstar =
          std::min(s.min_cens_surv_tstar, curves.cens_surv.value_left(tstar));
    }
  }
  s.clips_propensity = nu.clips->propensity.load(std::memory_order_relaxed);
  s.clips_surv = nu.clips->surv.load(std::memory_order_relaxed);
  s.clips_cens = nu.clips->cens.load(std::memory_order_relaxed);
  s.flag_propensity = s.min_propensity <= eta;
  s.flag_surv = s.min_surv_tstar <= eta;
  s.flag_cens = s.min_cens_surv_tstar <= eta;
  return s;
}

}  // namespace lyl
