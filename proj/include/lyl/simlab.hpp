#pragma once

// Simulation laboratory: a Weibull-type competing-risks data generator,
// independent numerical oracles for the true effect and importance
// values, a replication harness with per-replication seed derivation,
// and a nuisance-quality diagnostic that evaluates the product-bias
// remainder against the known truth.

#include <cstdint>
#include <string>
#include <vector>

#include "lyl/dataset.hpp"
#include "lyl/estimators.hpp"
#include "lyl/forest.hpp"
#include "lyl/nuisance.hpp"

namespace lyl {

// lambda(t | a, x) = scale * shape * t^{shape-1}
//                    * exp(x_coef.x + a * (a_coef + ax_coef.x))
// so the cumulative hazard is scale * t^shape * exp(...).  Coefficient
// vectors shorter than d are implicitly zero-padded.
struct HazardModel {
  double scale = 0.0;
  double shape = 2.0;
  std::vector<double> x_coef;
  double a_coef = 0.0;
  std::vector<double> ax_coef;
};

struct SimConfig {
  std::size_t d = 4;  // covariates X ~ Unif[-1,1]^d, i.i.d.
  HazardModel cause1;
  HazardModel cause2;
  HazardModel censoring;  // scale 0 disables censoring entirely
  std::vector<double> propensity_coef;
  double propensity_intercept = 0.0;
  double tstar = 30.0;

  // The benchmark generator: shape-2 baselines
  //   lambda1: 0.0025 * exp(-x1 - x2 - 0.2 x3 + a(0.5 x1 - 0.3 x2 - 2))
  //   lambda2: 0.00025 * exp(-x1 - x2 - 0.2 x3 + a)
  //   lambdaC: 0.00025 * exp(-0.5 x1)
  // and P(A=1|x) = expit(0.5 x1 + 0.5 x2), d = 4, t* = 30.
  static SimConfig benchmark();
};

// Throws InputError unless: d >= 1, cause scales > 0, censoring scale
// >= 0, shapes > 0, cause1.shape == cause2.shape (the closed-form
// inverse needs the shared shape), and no coefficient vector is longer
// than d.
void validate_sim_config(const SimConfig& cfg);

// Closed-form pieces of the generator, exposed for oracles and tests.
// log relative risk at (a, x); cumulative hazard Lambda(t | a, x).
double log_rel_risk(const HazardModel& h, int a, const double* x,
                    std::size_t d);
double cum_hazard(const HazardModel& h, int a, const double* x, std::size_t d,
                  double t);

// Inverse-transform sampler: X uniform on the box, A ~
// Bernoulli(expit), T = (E / (r1+r2))^{1/shape} with E ~ Exp(1), cause
// 1 with probability r1/(r1+r2), C by the same inversion of the
// censoring hazard (infinite when its scale is 0).  Ties T == C count
// as events.  Same seed, same dataset.
SurvivalDataset sample_dgp(const SimConfig& cfg, std::size_t n,
                           std::uint64_t seed);

// Exact conditional quantities at one covariate row, by adaptive
// quadrature (abs tol 1e-8): years lost to cause j before tstar at arm
// a, and the arm contrast.
double years_lost_oracle(const SimConfig& cfg, int j, int a, const double* x,
                         double tstar);
double cate_oracle(const SimConfig& cfg, int j, double tstar,
                   const double* x);

struct OracleValues {
  double psi1 = 0.0;  // E[tau_1(X)]
  double psi2 = 0.0;
  double psi1_se = 0.0;  // MC standard errors of the outer expectation
  double psi2_se = 0.0;
  std::vector<double> gamma;  // cause-1 residual covariances, one per l
  std::vector<double> gamma_se;
  double chi = 1.0 / 3.0;  // Var(X_l | X_{-l}) for the uniform box
  std::vector<double> omega;  // gamma / chi
  std::vector<double> omega_se;
  std::size_t psi_draws = 0;
  std::size_t gamma_draws = 0;
  std::uint64_t seed = 0;
};

// Truth by quadrature-inside-Monte-Carlo: tau_j(x) by adaptive
// quadrature at both arms, psi_j as the mean over mc_draws covariate
// draws, Gamma^l = E[cov(X_l, tau_1 | X_{-l})] with the inner integral
// over X_l ~ Unif[-1,1] done by adaptive quadrature and the outer
// expectation over mc_draws/5 draws of the remaining coordinates.
// chi = 1/3 exactly.  All MC means carry standard errors.
OracleValues true_values_oracle(const SimConfig& cfg, double tstar,
                                std::size_t mc_draws, std::uint64_t seed);

// The generator's own nuisance bundle: cumulative hazards discretized
// onto the uniform grid {tstar * k / m_grid}, exact propensity.  Feeding
// it to the estimator isolates the influence-function layer from
// learner error.
NuisanceFit make_oracle_bundle(const SimConfig& cfg, double tstar, int m_grid,
                               double eta = 1e-12);

// ---------------------------------------------------------------------
// Replication harness
// ---------------------------------------------------------------------

struct McMethod {
  std::string name;  // label in summaries ("corCF", "RF", ...)
  LearnerFlavor flavor = LearnerFlavor::cor;
  int K = 1;  // 1 = no cross-fitting
};

// cor (K=1), corCF (K=10), RF (K=1), RFCF (K=10)
std::vector<McMethod> standard_methods();
// Look up one of the standard names; InputError otherwise.
McMethod parse_method(const std::string& name);

struct McConfig {
  SimConfig sim;
  int j = 1;
  double tstar = 30.0;
  // 0: average-effect study (coverage of psi_j, rejection of zero
  // effect).  >= 1: importance study for coordinate vim_l (coverage of
  // Omega, rejection by the heterogeneity test at level 1 - `level`).
  std::size_t vim_l = 0;
  std::vector<McMethod> methods;
  std::vector<std::size_t> n_grid;
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  double level = 0.95;
  double eta = 0.01;
  ForestParams forest;  // shared by the forest-flavored methods
  std::size_t min_fold_rows = 10;
  int threads = 1;
};

struct McCell {
  std::string method;
  std::size_t n = 0;
  std::size_t reps_requested = 0;
  std::size_t reps_done = 0;  // successes; aggregates use only these
  std::size_t failures = 0;
  std::vector<std::uint64_t> failed_seeds;  // replication seeds, for replay
  double bias = 0.0;
  double sd = 0.0;  // sample SD (n-1); meaningless unless sd_defined
  bool sd_defined = false;
  double mean_se = 0.0;
  double coverage = 0.0;
  double rejection = 0.0;
  // MC error bars: bias_se = sd / sqrt(reps_done), binomial ses for the
  // two proportions.
  double bias_se = 0.0;
  double coverage_se = 0.0;
  double rejection_se = 0.0;
};

struct SimSummary {
  std::string estimand;  // "ate" or "vim"
  int cause = 1;
  std::size_t vim_l = 0;
  double tstar = 0.0;
  double level = 0.95;
  double truth = 0.0;
  std::uint64_t seed = 0;
  std::size_t reps = 0;
  std::vector<McCell> cells;  // methods x n_grid, n-major order
};

// Per (n, replication): one dataset, shared by every method; the
// replication seed is derive_seed(master, {0x20, n_index, rep}) and
// each method's estimator seed hangs off it.  Replication failures are
// recorded with their seed and excluded from the aggregates.  `truth`
// is the oracle value of the studied parameter (psi_j, or Omega at
// vim_l).  Bitwise-reproducible from (cfg, truth) for any thread count.
SimSummary run_monte_carlo(const McConfig& cfg, double truth);

std::string sim_summary_to_json(const SimSummary& s);
// One row per method x n: method,n,reps,done,failures,bias,sd,mean_se,
// coverage,rejection.  An undefined SD prints as NA.
std::string sim_summary_to_csv(const SimSummary& s);

// ---------------------------------------------------------------------
// Remainder diagnostic
// ---------------------------------------------------------------------

struct RemainderDiagnostic {
  double arm0 = 0.0;  // per-arm remainder values
  double arm1 = 0.0;
  double arm0_se = 0.0;
  double arm1_se = 0.0;
  double contrast = 0.0;  // arm1 - arm0, the effect-scale remainder
  double contrast_se = 0.0;
  std::size_t draws = 0;
};

// Evaluates, for each arm a, the product-bias term
//   E[ sum_i int_0^{t*} S(s) Hhat_ij(s) (1 - pi S_C(s) / (pihat
//      ShatC(s-))) d(Lambdahat_i - Lambda_i)(s) ]
// by MC over covariate draws: the true S, S_C, pi, Lambda_i come from
// cfg in closed form (Lambda_i discretized onto the uniform grid
// {tstar * k / truth_grid}), the hatted quantities from the fitted
// bundle.  This is the term whose decay the one-step estimator's
// root-n behaviour rides on; a bundle built by make_oracle_bundle with
// m_grid == truth_grid gives exactly zero.
RemainderDiagnostic remainder_diagnostic(const NuisanceFit& nu,
                                         const SimConfig& cfg, int j,
                                         double tstar, std::size_t mc_draws,
                                         std::uint64_t seed,
                                         int truth_grid = 2000);

}  // namespace lyl
