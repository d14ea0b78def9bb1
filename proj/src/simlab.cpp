#include "lyl/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "json.hpp"
#include "lyl/cause_system.hpp"
#include "lyl/quadrature.hpp"

namespace lyl {

namespace {

// Neumaier-compensated sum; MC aggregates over 1e5 draws need it to
// keep reduction error far below the reported standard errors.
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
  return v.empty() ? 0.0 : k.total() / static_cast<double>(v.size());
}

// sample SD with the n-1 denominator
double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  Kahan k;
  for (double x : v) k.add((x - mean) * (x - mean));
  return std::sqrt(k.total() / static_cast<double>(v.size() - 1));
}

double expit(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double dot_pad(const std::vector<double>& coef, const double* x,
               std::size_t d) {
  const std::size_t m = std::min(coef.size(), d);
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) s += coef[i] * x[i];
  return s;
}

void check_model(const HazardModel& h, const char* name, bool scale_positive,
                 std::size_t d) {
  if (scale_positive ? !(h.scale > 0.0) : !(h.scale >= 0.0))
    throw Error(ErrorKind::InputError,
                std::string("sim config: bad scale for ") + name);
  if (!(h.shape > 0.0))
    throw Error(ErrorKind::InputError,
                std::string("sim config: bad shape for ") + name);
  if (h.x_coef.size() > d || h.ax_coef.size() > d)
    throw Error(ErrorKind::InputError,
                std::string("sim config: coefficient vector longer than d "
                            "for ") +
                    name);
}

double propensity_true(const SimConfig& cfg, const double* x) {
  return expit(cfg.propensity_intercept +
               dot_pad(cfg.propensity_coef, x, cfg.d));
}

// g(R) = int_0^{t*} (t*-s) s^{k-1} e^{-R s^k} ds, so that the years
// lost to cause j at arm a are r_j * k * g(r_1 + r_2): by Fubini the
// double integral of the sub-distribution collapses to one pass.
double weighted_tail_integral(double R, double shape, double tstar) {
  return integrate_gk(
             [R, shape, tstar](double s) {
               return (tstar - s) * std::pow(s, shape - 1.0) *
                      std::exp(-R * std::pow(s, shape));
             },
             0.0, tstar)
      .value;
}

struct ArmEval {
  double r1 = 0.0;  // relative-risk-scaled Weibull scales at this arm
  double r2 = 0.0;
  double kg = 0.0;  // shape * g(r1 + r2): years lost = r_j * kg
};

ArmEval arm_eval(const SimConfig& cfg, int a, const double* x, double tstar) {
  ArmEval e;
  e.r1 = cfg.cause1.scale * std::exp(log_rel_risk(cfg.cause1, a, x, cfg.d));
  e.r2 = cfg.cause2.scale * std::exp(log_rel_risk(cfg.cause2, a, x, cfg.d));
  e.kg = cfg.cause1.shape *
         weighted_tail_integral(e.r1 + e.r2, cfg.cause1.shape, tstar);
  return e;
}

double tau_core(const SimConfig& cfg, int j, double tstar, const double* x) {
  const ArmEval a1 = arm_eval(cfg, 1, x, tstar);
  const ArmEval a0 = arm_eval(cfg, 0, x, tstar);
  return j == 1 ? a1.r1 * a1.kg - a0.r1 * a0.kg
                : a1.r2 * a1.kg - a0.r2 * a0.kg;
}

void check_cause_and_horizon(int j, double tstar) {
  if (j != 1 && j != 2)
    throw Error(ErrorKind::InputError, "cause must be 1 or 2");
  if (!(tstar > 0.0))
    throw Error(ErrorKind::InputError, "tstar must be positive");
}

}  // namespace

SimConfig SimConfig::benchmark() {
  SimConfig cfg;
  cfg.d = 4;
  cfg.cause1 = HazardModel{0.0025, 2.0, {-1.0, -1.0, -0.2, 0.0}, -2.0,
                           {0.5, -0.3, 0.0, 0.0}};
  cfg.cause2 =
      HazardModel{0.00025, 2.0, {-1.0, -1.0, -0.2, 0.0}, 1.0, {}};
  cfg.censoring = HazardModel{0.00025, 2.0, {-0.5}, 0.0, {}};
  cfg.propensity_coef = {0.5, 0.5, 0.0, 0.0};
  cfg.propensity_intercept = 0.0;
  cfg.tstar = 30.0;
  return cfg;
}

void validate_sim_config(const SimConfig& cfg) {
  if (cfg.d < 1)
    throw Error(ErrorKind::InputError, "sim config: d must be >= 1");
  check_model(cfg.cause1, "cause1", true, cfg.d);
  check_model(cfg.cause2, "cause2", true, cfg.d);
  check_model(cfg.censoring, "censoring", false, cfg.d);
  if (cfg.cause1.shape != cfg.cause2.shape)
    throw Error(ErrorKind::InputError,
                "sim config: cause shapes must match (the closed-form "
                "event-time inverse needs a shared shape)");
  if (cfg.propensity_coef.size() > cfg.d)
    throw Error(ErrorKind::InputError,
                "sim config: propensity coefficients longer than d");
  if (!(cfg.tstar > 0.0))
    throw Error(ErrorKind::InputError, "sim config: tstar must be positive");
}

double log_rel_risk(const HazardModel& h, int a, const double* x,
                    std::size_t d) {
  double lp = dot_pad(h.x_coef, x, d);
  if (a != 0) lp += h.a_coef + dot_pad(h.ax_coef, x, d);
  return lp;
}

double cum_hazard(const HazardModel& h, int a, const double* x, std::size_t d,
                  double t) {
  if (t <= 0.0) return 0.0;
  return h.scale * std::pow(t, h.shape) * std::exp(log_rel_risk(h, a, x, d));
}

SurvivalDataset sample_dgp(const SimConfig& cfg, std::size_t n,
                           std::uint64_t seed) {
  validate_sim_config(cfg);
  if (n < 1) throw Error(ErrorKind::InputError, "sample_dgp: n must be >= 1");
  const bool censored = cfg.censoring.scale > 0.0;
  Rng rng(seed);
  std::vector<double> times(n), x(n * cfg.d);
  std::vector<int> events(n), arms(n);
  for (std::size_t row = 0; row < n; ++row) {
    double* xr = x.data() + row * cfg.d;
    for (std::size_t c = 0; c < cfg.d; ++c) xr[c] = rng.uniform(-1.0, 1.0);
    const int a = rng.uniform() < propensity_true(cfg, xr) ? 1 : 0;
    const double r1 =
        cfg.cause1.scale * std::exp(log_rel_risk(cfg.cause1, a, xr, cfg.d));
    const double r2 =
        cfg.cause2.scale * std::exp(log_rel_risk(cfg.cause2, a, xr, cfg.d));
    const double t_event =
        std::pow(rng.exponential() / (r1 + r2), 1.0 / cfg.cause1.shape);
    const int cause = rng.uniform() < r1 / (r1 + r2) ? 1 : 2;
    double t_cens = std::numeric_limits<double>::infinity();
    if (censored) {
      const double rc = cfg.censoring.scale *
                        std::exp(log_rel_risk(cfg.censoring, a, xr, cfg.d));
      t_cens = std::pow(rng.exponential() / rc, 1.0 / cfg.censoring.shape);
    }
    arms[row] = a;
    if (t_event <= t_cens) {  // ties count as events
      times[row] = t_event;
      events[row] = cause;
    } else {
      times[row] = t_cens;
      events[row] = 0;
    }
  }
  return SurvivalDataset(std::move(times), std::move(events), std::move(arms),
                         std::move(x), cfg.d);
}

double years_lost_oracle(const SimConfig& cfg, int j, int a, const double* x,
                         double tstar) {
  validate_sim_config(cfg);
  check_cause_and_horizon(j, tstar);
  const ArmEval e = arm_eval(cfg, a != 0 ? 1 : 0, x, tstar);
  return (j == 1 ? e.r1 : e.r2) * e.kg;
}

double cate_oracle(const SimConfig& cfg, int j, double tstar,
                   const double* x) {
  validate_sim_config(cfg);
  check_cause_and_horizon(j, tstar);
  return tau_core(cfg, j, tstar, x);
}

OracleValues true_values_oracle(const SimConfig& cfg, double tstar,
                                std::size_t mc_draws, std::uint64_t seed) {
  validate_sim_config(cfg);
  check_cause_and_horizon(1, tstar);
  if (mc_draws < 2)
    throw Error(ErrorKind::InputError, "oracle: mc_draws must be >= 2");

  OracleValues out;
  out.seed = seed;
  out.psi_draws = mc_draws;
  out.chi = 1.0 / 3.0;

  std::vector<double> x(cfg.d);

  // psi_j = E[tau_j(X)]: one pass of covariate draws, both causes.
  {
    Rng rng(derive_seed(seed, {1}));
    std::vector<double> t1(mc_draws), t2(mc_draws);
    for (std::size_t r = 0; r < mc_draws; ++r) {
      for (std::size_t c = 0; c < cfg.d; ++c) x[c] = rng.uniform(-1.0, 1.0);
      const ArmEval a1 = arm_eval(cfg, 1, x.data(), tstar);
      const ArmEval a0 = arm_eval(cfg, 0, x.data(), tstar);
      t1[r] = a1.r1 * a1.kg - a0.r1 * a0.kg;
      t2[r] = a1.r2 * a1.kg - a0.r2 * a0.kg;
    }
    out.psi1 = mean_of(t1);
    out.psi2 = mean_of(t2);
    const double root = std::sqrt(static_cast<double>(mc_draws));
    out.psi1_se = sample_sd(t1, out.psi1) / root;
    out.psi2_se = sample_sd(t2, out.psi2) / root;
  }

  // Gamma^l = E[cov(X_l, tau_1 | X_{-l})]: the conditional law of X_l
  // is Unif[-1,1] with mean 0, so the inner covariance is
  // int_{-1}^{1} (x_l / 2) tau_1(x) dx_l, done by quadrature; the outer
  // expectation over X_{-l} by MC.  Fewer draws than psi: each one
  // costs a nested quadrature, and the integrated inner coordinate cuts
  // the variance.
  const std::size_t gd =
      std::min(mc_draws, std::max<std::size_t>(1000, mc_draws / 5));
  out.gamma_draws = gd;
  {
    Rng rng(derive_seed(seed, {2}));
    std::vector<std::vector<double>> cov_l(cfg.d,
                                           std::vector<double>(gd, 0.0));
    for (std::size_t r = 0; r < gd; ++r) {
      for (std::size_t c = 0; c < cfg.d; ++c) x[c] = rng.uniform(-1.0, 1.0);
      for (std::size_t l = 0; l < cfg.d; ++l) {
        std::vector<double> xl = x;
        cov_l[l][r] = integrate_gk(
                          [&](double v) {
                            xl[l] = v;
                            return 0.5 * v * tau_core(cfg, 1, tstar, xl.data());
                          },
                          -1.0, 1.0)
                          .value;
      }
    }
    const double root = std::sqrt(static_cast<double>(gd));
    out.gamma.resize(cfg.d);
    out.gamma_se.resize(cfg.d);
    out.omega.resize(cfg.d);
    out.omega_se.resize(cfg.d);
    for (std::size_t l = 0; l < cfg.d; ++l) {
      out.gamma[l] = mean_of(cov_l[l]);
      out.gamma_se[l] = sample_sd(cov_l[l], out.gamma[l]) / root;
      out.omega[l] = out.gamma[l] / out.chi;
      out.omega_se[l] = out.gamma_se[l] / out.chi;
    }
  }
  return out;
}

NuisanceFit make_oracle_bundle(const SimConfig& cfg, double tstar, int m_grid,
                               double eta) {
  validate_sim_config(cfg);
  check_cause_and_horizon(1, tstar);
  if (m_grid < 1)
    throw Error(ErrorKind::InputError, "oracle bundle: m_grid must be >= 1");
  if (!(eta > 0.0 && eta < 0.5))
    throw Error(ErrorKind::InputError, "oracle bundle: eta must be in (0,0.5)");

  auto grid = std::make_shared<std::vector<double>>();
  grid->resize(static_cast<std::size_t>(m_grid));
  for (int k = 0; k < m_grid; ++k)
    (*grid)[static_cast<std::size_t>(k)] = tstar * (k + 1) / m_grid;

  const auto discretize = [cfg, grid](const HazardModel& h) {
    return [cfg, grid, h](int a, const double* x, std::size_t d) {
      if (d != cfg.d)
        throw Error(ErrorKind::InputError,
                    "oracle bundle: covariate dimension mismatch");
      std::vector<double> sizes(grid->size());
      double prev = 0.0;
      for (std::size_t k = 0; k < grid->size(); ++k) {
        const double cur = cum_hazard(h, a, x, d, (*grid)[k]);
        sizes[k] = cur - prev;
        prev = cur;
      }
      return StepFn(*grid, std::move(sizes));
    };
  };

  NuisanceFit nu;
  nu.lambda1 = discretize(cfg.cause1);
  nu.lambda2 = discretize(cfg.cause2);
  if (cfg.censoring.scale > 0.0)
    nu.lambdac = discretize(cfg.censoring);
  else
    nu.lambdac = [](int, const double*, std::size_t) { return StepFn(); };
  nu.propensity_raw = [cfg](const double* x, std::size_t d) {
    if (d != cfg.d)
      throw Error(ErrorKind::InputError,
                  "oracle bundle: covariate dimension mismatch");
    return propensity_true(cfg, x);
  };
  nu.eta = eta;
  nu.horizon = tstar;
  nu.hazard_learner = "oracle";
  nu.censoring_learner = "oracle";
  nu.propensity_learner = "oracle";
  return nu;
}

// ---------------------------------------------------------------------
// Replication harness
// ---------------------------------------------------------------------

std::vector<McMethod> standard_methods() {
  return {McMethod{"cor", LearnerFlavor::cor, 1},
          McMethod{"corCF", LearnerFlavor::cor, 10},
          McMethod{"RF", LearnerFlavor::rf, 1},
          McMethod{"RFCF", LearnerFlavor::rf, 10}};
}

McMethod parse_method(const std::string& name) {
  for (const auto& m : standard_methods())
    if (m.name == name) return m;
  throw Error(ErrorKind::InputError,
              "unknown method '" + name + "' (expected cor, corCF, RF, RFCF)");
}

namespace {

struct RepOut {
  bool ok = false;
  double point = 0.0, se = 0.0, lo = 0.0, hi = 0.0, p = 1.0;
};

}  // namespace

SimSummary run_monte_carlo(const McConfig& cfg, double truth) {
  validate_sim_config(cfg.sim);
  check_cause_and_horizon(cfg.j, cfg.tstar);
  if (cfg.methods.empty())
    throw Error(ErrorKind::InputError, "monte carlo: no methods");
  if (cfg.n_grid.empty())
    throw Error(ErrorKind::InputError, "monte carlo: empty n grid");
  if (cfg.reps < 1)
    throw Error(ErrorKind::InputError, "monte carlo: reps must be >= 1");
  if (!(cfg.level > 0.0 && cfg.level < 1.0))
    throw Error(ErrorKind::InputError, "monte carlo: level must be in (0,1)");
  if (cfg.vim_l > cfg.sim.d)
    throw Error(ErrorKind::InputError, "monte carlo: vim_l out of range");
  if (!std::isfinite(truth))
    throw Error(ErrorKind::InputError, "monte carlo: truth must be finite");

  const std::size_t n_methods = cfg.methods.size();
  const std::size_t tasks = cfg.n_grid.size() * cfg.reps;
  std::vector<std::vector<RepOut>> slots(n_methods,
                                         std::vector<RepOut>(tasks));

  parallel_for(tasks, cfg.threads, [&](std::size_t t) {
    const std::size_t ni = t / cfg.reps;
    const std::size_t r = t % cfg.reps;
    const std::uint64_t rep_seed =
        derive_seed(cfg.seed, {0x20, static_cast<std::uint64_t>(ni),
                               static_cast<std::uint64_t>(r)});
    const SurvivalDataset data = sample_dgp(cfg.sim, cfg.n_grid[ni], rep_seed);
    for (std::size_t m = 0; m < n_methods; ++m) {
      CrossFitConfig cc;
      cc.K = cfg.methods[m].K;
      cc.seed = derive_seed(rep_seed, {0x21, static_cast<std::uint64_t>(m)});
      cc.learner.flavor = cfg.methods[m].flavor;
      cc.learner.eta = cfg.eta;
      cc.learner.forest = cfg.forest;
      cc.learner.forest.threads = 1;
      cc.j = cfg.j;
      cc.tstar = cfg.tstar;
      cc.level = cfg.level;
      cc.min_fold_rows = cfg.min_fold_rows;
      cc.threads = 1;
      RepOut& out = slots[m][t];
      try {
        if (cfg.vim_l >= 1) {
          const VimReport v = estimate_vim(data, cc, cfg.vim_l);
          out = RepOut{true, v.point, v.se, v.ci_lower, v.ci_upper,
                       v.p_value};
        } else {
          const EstimateReport e = estimate_ate(data, cc);
          const double z = e.se > 0.0 ? std::abs(e.point / e.se)
                                      : std::numeric_limits<double>::infinity();
          const double p =
              std::clamp(2.0 * (1.0 - normal_cdf(z)), 0.0, 1.0);
          out = RepOut{true, e.point, e.se, e.ci_lower, e.ci_upper, p};
        }
      } catch (const Error&) {
        out.ok = false;  // recorded by seed in the aggregation below
      }
    }
  });

  SimSummary s;
  s.estimand = cfg.vim_l >= 1 ? "vim" : "ate";
  s.cause = cfg.j;
  s.vim_l = cfg.vim_l;
  s.tstar = cfg.tstar;
  s.level = cfg.level;
  s.truth = truth;
  s.seed = cfg.seed;
  s.reps = cfg.reps;
  const double alpha = 1.0 - cfg.level;
  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      McCell cell;
      cell.method = cfg.methods[m].name;
      cell.n = cfg.n_grid[ni];
      cell.reps_requested = cfg.reps;
      std::vector<double> points, ses;
      std::size_t covered = 0, rejected = 0;
      for (std::size_t r = 0; r < cfg.reps; ++r) {
        const std::size_t t = ni * cfg.reps + r;
        const RepOut& out = slots[m][t];
        if (!out.ok) {
          ++cell.failures;
          cell.failed_seeds.push_back(
              derive_seed(cfg.seed, {0x20, static_cast<std::uint64_t>(ni),
                                     static_cast<std::uint64_t>(r)}));
          continue;
        }
        points.push_back(out.point);
        ses.push_back(out.se);
        if (out.lo <= truth && truth <= out.hi) ++covered;
        if (out.p < alpha) ++rejected;
      }
      cell.reps_done = points.size();
      if (cell.reps_done >= 1) {
        const double mean_point = mean_of(points);
        const double done = static_cast<double>(cell.reps_done);
        cell.bias = mean_point - truth;
        cell.mean_se = mean_of(ses);
        cell.coverage = static_cast<double>(covered) / done;
        cell.rejection = static_cast<double>(rejected) / done;
        cell.coverage_se =
            std::sqrt(cell.coverage * (1.0 - cell.coverage) / done);
        cell.rejection_se =
            std::sqrt(cell.rejection * (1.0 - cell.rejection) / done);
        if (cell.reps_done >= 2) {
          cell.sd = sample_sd(points, mean_point);
          cell.sd_defined = true;
          cell.bias_se = cell.sd / std::sqrt(done);
        }
      }
      s.cells.push_back(std::move(cell));
    }
  }
  return s;
}

namespace {

nlohmann::json cell_json(const McCell& c) {
  nlohmann::json j{{"method", c.method},
                   {"n", c.n},
                   {"reps_requested", c.reps_requested},
                   {"reps_done", c.reps_done},
                   {"failures", c.failures},
                   {"failed_seeds", c.failed_seeds},
                   {"bias", c.bias},
                   {"sd_defined", c.sd_defined},
                   {"mean_se", c.mean_se},
                   {"coverage", c.coverage},
                   {"rejection", c.rejection},
                   {"coverage_se", c.coverage_se},
                   {"rejection_se", c.rejection_se}};
  if (c.sd_defined) {
    j["sd"] = c.sd;
    j["bias_se"] = c.bias_se;
  }
  return j;
}

}  // namespace

std::string sim_summary_to_json(const SimSummary& s) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : s.cells) cells.push_back(cell_json(c));
  nlohmann::json j{{"estimand", s.estimand}, {"cause", s.cause},
                   {"vim_l", s.vim_l},       {"tstar", s.tstar},
                   {"level", s.level},       {"truth", s.truth},
                   {"seed", s.seed},         {"reps", s.reps},
                   {"cells", cells}};
  return j.dump(2);
}

std::string sim_summary_to_csv(const SimSummary& s) {
  std::string out =
      "method,n,reps,done,failures,bias,sd,mean_se,coverage,rejection\n";
  char buf[512];
  for (const auto& c : s.cells) {
    std::string sd = "NA";
    if (c.sd_defined) {
      std::snprintf(buf, sizeof(buf), "%.10g", c.sd);
      sd = buf;
    }
    std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%zu,%zu,%.10g,%s,%.10g,%.10g,%.10g\n",
                  c.method.c_str(), c.n, c.reps_requested, c.reps_done,
                  c.failures, c.bias, sd.c_str(), c.mean_se, c.coverage,
                  c.rejection);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------
// Remainder diagnostic
// ---------------------------------------------------------------------

RemainderDiagnostic remainder_diagnostic(const NuisanceFit& nu,
                                         const SimConfig& cfg, int j,
                                         double tstar, std::size_t mc_draws,
                                         std::uint64_t seed, int truth_grid) {
  validate_sim_config(cfg);
  check_cause_and_horizon(j, tstar);
  if (mc_draws < 2)
    throw Error(ErrorKind::InputError, "remainder: mc_draws must be >= 2");
  if (truth_grid < 1)
    throw Error(ErrorKind::InputError, "remainder: truth_grid must be >= 1");
  if (nu.horizon < tstar)
    throw Error(ErrorKind::InputError,
                "remainder: bundle horizon is shorter than tstar");

  std::vector<double> grid(static_cast<std::size_t>(truth_grid));
  for (int k = 0; k < truth_grid; ++k)
    grid[static_cast<std::size_t>(k)] = tstar * (k + 1) / truth_grid;

  Rng rng(derive_seed(seed, {0x33}));
  std::vector<double> x(cfg.d);
  std::vector<double> v0(mc_draws), v1(mc_draws), vd(mc_draws);

  for (std::size_t r = 0; r < mc_draws; ++r) {
    for (std::size_t c = 0; c < cfg.d; ++c) x[c] = rng.uniform(-1.0, 1.0);
    const double p1_true = propensity_true(cfg, x.data());
    const double p1_hat = std::clamp(nu.propensity_raw(x.data(), cfg.d),
                                     nu.eta, 1.0 - nu.eta);
    double value[2] = {0.0, 0.0};
    for (int a = 0; a <= 1; ++a) {
      const ArmCurves curves = predict_arm_curves(nu, a, x.data(), cfg.d);
      const double pa_true = a ? p1_true : 1.0 - p1_true;
      const double pa_hat = a ? p1_hat : 1.0 - p1_hat;
      const double rtot =
          cfg.cause1.scale *
              std::exp(log_rel_risk(cfg.cause1, a, x.data(), cfg.d)) +
          cfg.cause2.scale *
              std::exp(log_rel_risk(cfg.cause2, a, x.data(), cfg.d));
      const double rc =
          cfg.censoring.scale > 0.0
              ? cfg.censoring.scale *
                    std::exp(log_rel_risk(cfg.censoring, a, x.data(), cfg.d))
              : 0.0;
      const auto weight = [&](int i, double s) {
        const double s_true =
            std::exp(-rtot * std::pow(s, cfg.cause1.shape));
        const double sc_true =
            rc > 0.0 ? std::exp(-rc * std::pow(s, cfg.censoring.shape)) : 1.0;
        const double sc_hat =
            std::max(curves.cens_surv.value_left(s), nu.eta);
        const double h = h_kernel(curves.system, i, j, s, tstar, nu.eta,
                                  /*floor_at_eta=*/true, nullptr);
        return s_true * h * (1.0 - pa_true * sc_true / (pa_hat * sc_hat));
      };
      Kahan fitted, truth;
      for (int i = 1; i <= 2; ++i) {
        const HazardModel& model = i == 1 ? cfg.cause1 : cfg.cause2;
        const StepFn lam =
            (i == 1 ? nu.lambda1 : nu.lambda2)(a, x.data(), cfg.d);
        const auto& ts = lam.times();
        const auto& dl = lam.sizes();
        for (std::size_t k = 0; k < ts.size() && ts[k] <= tstar; ++k)
          fitted.add(weight(i, ts[k]) * dl[k]);
        double prev = 0.0;
        for (double t : grid) {
          const double cur = cum_hazard(model, a, x.data(), cfg.d, t);
          truth.add(weight(i, t) * (cur - prev));
          prev = cur;
        }
      }
      value[a] = fitted.total() - truth.total();
    }
    v0[r] = value[0];
    v1[r] = value[1];
    vd[r] = value[1] - value[0];
  }

  RemainderDiagnostic out;
  out.draws = mc_draws;
  const double root = std::sqrt(static_cast<double>(mc_draws));
  out.arm0 = mean_of(v0);
  out.arm1 = mean_of(v1);
  out.arm0_se = sample_sd(v0, out.arm0) / root;
  out.arm1_se = sample_sd(v1, out.arm1) / root;
  out.contrast = mean_of(vd);
  out.contrast_se = sample_sd(vd, out.contrast) / root;
  return out;
}

}  // namespace lyl
