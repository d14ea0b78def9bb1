#pragma once

// Deterministic composition of two cause-specific cumulative hazards into
// survival, cumulative incidence, years-lost functionals, and the EIF
// kernel H_ij.  All arithmetic is exact step-function work on the merged
// jump grid -- no quadrature anywhere in this layer.

#include <vector>

#include "lyl/nuisance.hpp"
#include "lyl/step_fn.hpp"

namespace lyl {

enum class CompositionRule {
  product_limit,  // S(t) = prod_{s<=t} (1 - dL1(s) - dL2(s)); exact S+F1+F2=1
  exponential,    // S(t) = exp(-L1(t)-L2(t)); comparison mode only
};

struct YearsLost {
  int j;
  double tstar;
  double value;
};

class CauseSystem {
 public:
  // S right-continuous; F_j(t) = sum_{s<=t} S(s-) dL_j(s).
  double surv(double t) const;
  double surv_left(double t) const;
  double cif(int j, double t) const;
  double cif_left(int j, double t) const;
  // I_j(t) = int_0^t F_j(u) du, exact (F_j is a step function)
  double cif_integral(int j, double t) const;

  std::size_t n_grid() const { return t_.size(); }
  const std::vector<double>& grid() const { return t_; }
  double hazard_jump(int j, std::size_t k) const {
    return j == 1 ? dl1_[k] : dl2_[k];
  }

  // StepFn views (materialized on demand)
  StepFn surv_fn() const;
  StepFn cif_fn(int j) const;

  friend CauseSystem compose_cause_system(const StepFn&, const StepFn&,
                                          CompositionRule);

 private:
  std::vector<double> t_;    // merged jump grid, strictly increasing
  std::vector<double> dl1_, dl2_;
  std::vector<double> s_;    // S(t_k)
  std::vector<double> f1_, f2_;
  std::vector<double> i1_, i2_;  // I_j(t_k)

  std::ptrdiff_t last_leq(double t) const;
  std::ptrdiff_t last_lt(double t) const;
};

CauseSystem compose_cause_system(
    const StepFn& lambda1, const StepFn& lambda2,
    CompositionRule rule = CompositionRule::product_limit);

// L_j(0,t*) = int_0^{t*} F_j(u) du, exact rectangle sum.
YearsLost years_lost(const CauseSystem& system, int j, double tstar);

// H_ij(s,t*) = int_s^{t*} [ 1(i=j) + (F_j(s) - F_j(u))/S(s) ] du, with the
// u-integral evaluated exactly on F_j's jump grid.  S and F_j enter at
// their right-continuous values: that makes the kernel the exact Gateaux
// derivative of the product-limit plug-in functional (see the
// finite-difference validator), and coincides with the continuous-time
// formula whenever s is not an atom.
//
// floor_at_eta=false: S(s) < eta raises PositivityBreach (the documented
// contract).  floor_at_eta=true: the denominator is floored at eta and
// the clip counted on `clip_count` -- the estimator path.
double h_kernel(const CauseSystem& system, int i, int j, double s,
                double tstar, double eta, bool floor_at_eta = false,
                std::atomic<std::uint64_t>* clip_count = nullptr);

// tau_j(x) = L_j(0,t*|1,x) - L_j(0,t*|0,x) from the bundle's predictions.
double cate(const NuisanceFit& nu, int j, double tstar, const double* x,
            std::size_t d);

// Curves the EIF needs for one (arm, x): the composed cause system plus
// the censoring survival (product-limit of the predicted censoring
// hazard).
struct ArmCurves {
  CauseSystem system;
  StepFn cens_surv;
};
ArmCurves predict_arm_curves(const NuisanceFit& nu, int a, const double* x,
                             std::size_t d,
                             CompositionRule rule = CompositionRule::product_limit);

}  // namespace lyl
