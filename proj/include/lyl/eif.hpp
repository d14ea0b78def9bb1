#pragma once

// Influence-function evaluation for the treatment effect on cause-specific
// life-years lost: the censoring-martingale correction, the uncentered
// one-step summand phi_j, the projection residual pieces (phi_Gamma,
// phi_chi) behind the heterogeneity measure Omega_j^l, and a
// finite-difference functional-derivative validator that re-evaluates the
// plug-in on perturbed discrete empirical measures.

#include <cstdint>
#include <functional>
#include <vector>

#include "lyl/cause_system.hpp"
#include "lyl/dataset.hpp"
#include "lyl/nuisance.hpp"

namespace lyl {

// covariate row -> real (projection predictors receive the full row and
// are fitted so that coordinate l_col carries no signal)
using XPredictor = std::function<double(const double* x, std::size_t d)>;

struct EifContext {
  const NuisanceFit* nu = nullptr;
  int j = 1;            // target cause
  double tstar = 0.0;
  // true: survival-type denominators floored at nu->eta with clips counted
  // (the estimation path); false: a denominator below eta raises
  // PositivityBreach (the validation path).
  bool floor_denominators = true;

  // projection pieces, present only on the variable-importance path
  bool has_projection = false;
  std::size_t l_col = 0;   // 0-based target coordinate
  XPredictor tau_proj;     // x -> projection of tau_j on x_{-l}
  XPredictor e_proj;       // x -> E[X_l | x_{-l}]
};

// sum_{i=1,2} int over (0, min(T~,t*)] of H_ij(s,t*) / S_C(s-) dM_i(s),
// where M_i(dt) = N_i(dt) - 1(T~ >= t) dLambda_i(t).  Atoms exactly at T~
// are inside the at-risk set (closed interval).  `curves` must be the
// predicted curves for the arm the correction is evaluated under.
double martingale_correction(const ObservationRecord& o, const EifContext& ctx,
                             const ArmCurves& curves);
// Convenience overload: predicts the curves for arm `a` first.
double martingale_correction(const ObservationRecord& o, const EifContext& ctx,
                             int a);

// phi_j(O) = tau_j(X) + (1(A=1)/pi(1|X) - 1(A=0)/pi(0|X)) * correction(O)
double uncentered_eif_ate(const ObservationRecord& o, const EifContext& ctx);

// [phi_j(O) - tau_proj(X)] * [X_l - e_proj(X)]
double phi_gamma(const ObservationRecord& o, const EifContext& ctx);
// [X_l - e_proj(X)]^2
double phi_chi(const ObservationRecord& o, const EifContext& ctx);

// (phi_g - gamma_hat - omega_hat * (phi_c - chi_hat)) / chi_hat;
// chi_hat <= 0 raises DegenerateDenominator.
double omega_contrib(double phi_g, double phi_c, double gamma_hat,
                     double chi_hat, double omega_hat);
double eif_omega_contrib(const ObservationRecord& o, const EifContext& ctx,
                         double gamma_hat, double chi_hat, double omega_hat);

// All per-observation pieces from one composition of the two arm curves
// (the batched path the estimators use).
struct EifValues {
  double tau = 0.0;        // tau_j(x)
  double phi = 0.0;        // uncentered ATE summand
  double phi_gamma = 0.0;  // 0 unless a projection is present
  double phi_chi = 0.0;
};
EifValues eif_values(const ObservationRecord& o, const EifContext& ctx);

// ---------------------------------------------------------------------
// Finite-difference functional-derivative check on discrete data.
//
// The plug-in functional assigns each (a, x) cell its weighted
// Nelson-Aalen cause hazards, composes them by product limit, and
// averages the years-lost contrast over the covariate cells.  Censoring
// hazards use the events-first tie rule dLc(s) = c(s)/(Y(s) - d(s)), so
// that Y(s) = W(a,x) * S(s-) * S_C(s-) holds exactly and the influence
// function below is the exact derivative of the plug-in along Dirac
// directions.
// ---------------------------------------------------------------------

// psi_j of the weighted empirical measure; weights are per-row masses
// summing to 1.  Every (a, x) cell must hold >= 5 rows (SparseCell).
double plugin_years_lost_ate(const SurvivalDataset& data,
                             const std::vector<double>& weights, int j,
                             double tstar);

// Cell-wise Nelson-Aalen hazards + empirical propensity as a bundle
// (eta = 1e-12: effectively no clipping, so derivatives stay exact).
NuisanceFit plugin_bundle(const SurvivalDataset& data, double tstar);

struct GateauxCheck {
  double fd = 0.0;   // (psi(P_eps) - psi(P)) / eps along the Dirac at index
  double eif = 0.0;  // phi_j(O_index; plug-in) - psi(P)
  double gap = 0.0;  // |fd - eif|
};
GateauxCheck gateaux_fd_check(const SurvivalDataset& data, int j, double tstar,
                              std::size_t index, double eps);

}  // namespace lyl
