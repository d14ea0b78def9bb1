#pragma once

// Right-continuous step functions and exact Stieltjes sums.  These carry
// every fitted cumulative hazard, survival curve, and CIF in the library,
// so evaluation is O(log m) via a precomputed cumulative table.

#include <functional>
#include <vector>

#include "lyl/common.hpp"

namespace lyl {

class StepFn {
 public:
  // Value `baseline` on [0, first jump).  Times may arrive unsorted and
  // with ties; ties are merged at construction by summing their jumps
  // (Breslow estimators produce tied jump times under tied event times).
  StepFn() : baseline_(0.0) {}
  StepFn(std::vector<double> times, std::vector<double> sizes,
         double baseline = 0.0);

  static StepFn constant(double value) { return StepFn({}, {}, value); }

  // f(t) = baseline + sum of jumps at s <= t   (right-continuous)
  double value(double t) const;
  // f(t-): excludes a jump exactly at t
  double value_left(double t) const;
  // jump size at exactly t (0 if t is not a jump time)
  double jump_at(double t) const;

  std::size_t n_jumps() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& sizes() const { return sizes_; }
  double baseline() const { return baseline_; }
  double final_value() const {
    return cum_.empty() ? baseline_ : cum_.back();
  }

  // New StepFn with all jump sizes multiplied by c (relative-risk scaling
  // of a Breslow baseline).
  StepFn scaled(double c) const;
  // New StepFn keeping only jumps at times <= horizon.
  StepFn truncated(double horizon) const;

  // True iff baseline == 0 and every jump size >= 0.
  bool is_cumulative_hazard() const;

 private:
  std::vector<double> times_;   // strictly increasing
  std::vector<double> sizes_;
  std::vector<double> cum_;     // cum_[k] = baseline + sizes_[0..k]
  double baseline_;

  // index of last jump time <= t, or -1
  std::ptrdiff_t last_leq(double t) const;
};

// Exact sum over jumps: integral of g dLambda on (0, t], no quadrature.
double stieltjes_integrate(const std::function<double(double)>& g,
                           const StepFn& lambda, double t);

// Product-limit survival from a cumulative hazard: S(t) = prod_{s<=t}(1 - dL(s)).
// With `exponential_form`, S(t) = exp(-L(t)) instead.  Jumps >= 1 in
// product-limit mode raise SuperunitJump.
StepFn survival_from_hazard(const StepFn& cumhaz, bool exponential_form = false);

}  // namespace lyl
