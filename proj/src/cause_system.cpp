#include "lyl/cause_system.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lyl {

std::ptrdiff_t CauseSystem::last_leq(double t) const {
  auto it = std::upper_bound(t_.begin(), t_.end(), t);
  return static_cast<std::ptrdiff_t>(it - t_.begin()) - 1;
}

std::ptrdiff_t CauseSystem::last_lt(double t) const {
  auto it = std::lower_bound(t_.begin(), t_.end(), t);
  return static_cast<std::ptrdiff_t>(it - t_.begin()) - 1;
}

double CauseSystem::surv(double t) const {
  const auto k = last_leq(t);
  return k < 0 ? 1.0 : s_[static_cast<std::size_t>(k)];
}

double CauseSystem::surv_left(double t) const {
  const auto k = last_lt(t);
  return k < 0 ? 1.0 : s_[static_cast<std::size_t>(k)];
}

double CauseSystem::cif(int j, double t) const {
  const auto k = last_leq(t);
  if (k < 0) return 0.0;
  return (j == 1 ? f1_ : f2_)[static_cast<std::size_t>(k)];
}

double CauseSystem::cif_left(int j, double t) const {
  const auto k = last_lt(t);
  if (k < 0) return 0.0;
  return (j == 1 ? f1_ : f2_)[static_cast<std::size_t>(k)];
}

double CauseSystem::cif_integral(int j, double t) const {
  const auto k = last_leq(t);
  if (k < 0) return 0.0;
  const auto ku = static_cast<std::size_t>(k);
  const auto& f = (j == 1 ? f1_ : f2_);
  const auto& iacc = (j == 1 ? i1_ : i2_);
  return iacc[ku] + f[ku] * (t - t_[ku]);
}

StepFn CauseSystem::surv_fn() const {
  std::vector<double> sizes(t_.size());
  double prev = 1.0;
  for (std::size_t k = 0; k < t_.size(); ++k) {
    sizes[k] = s_[k] - prev;
    prev = s_[k];
  }
  return StepFn(t_, std::move(sizes), 1.0);
}

StepFn CauseSystem::cif_fn(int j) const {
  const auto& f = (j == 1 ? f1_ : f2_);
  std::vector<double> sizes(t_.size());
  double prev = 0.0;
  for (std::size_t k = 0; k < t_.size(); ++k) {
    sizes[k] = f[k] - prev;
    prev = f[k];
  }
  return StepFn(t_, std::move(sizes), 0.0);
}

CauseSystem compose_cause_system(const StepFn& lambda1, const StepFn& lambda2,
                                 CompositionRule rule) {
  if (!lambda1.is_cumulative_hazard() || !lambda2.is_cumulative_hazard())
    throw Error(ErrorKind::NonFiniteValue,
                "compose_cause_system: inputs must be cumulative hazards");
  CauseSystem sys;
  const auto& t1 = lambda1.times();
  const auto& t2 = lambda2.times();
  sys.t_.resize(t1.size() + t2.size());
  std::merge(t1.begin(), t1.end(), t2.begin(), t2.end(), sys.t_.begin());
  sys.t_.erase(std::unique(sys.t_.begin(), sys.t_.end()), sys.t_.end());

  const std::size_t m = sys.t_.size();
  sys.dl1_.resize(m);
  sys.dl2_.resize(m);
  sys.s_.resize(m);
  sys.f1_.resize(m);
  sys.f2_.resize(m);
  sys.i1_.resize(m);
  sys.i2_.resize(m);

  // walk both jump lists along the merged grid
  std::size_t k1 = 0, k2 = 0;
  double s = 1.0, f1 = 0.0, f2 = 0.0, i1 = 0.0, i2 = 0.0, tprev = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double t = sys.t_[k];
    double d1 = 0.0, d2 = 0.0;
    if (k1 < t1.size() && t1[k1] == t) d1 = lambda1.sizes()[k1++];
    if (k2 < t2.size() && t2[k2] == t) d2 = lambda2.sizes()[k2++];
    if (d1 + d2 >= 1.0)
      throw Error(ErrorKind::SuperunitJump,
                  "compose_cause_system: dL1+dL2 >= 1 at t=" +
                      std::to_string(t));
    i1 += f1 * (t - tprev);  // integrate the step value over [tprev, t)
    i2 += f2 * (t - tprev);
    const double s_minus = s;
    f1 += s_minus * d1;
    f2 += s_minus * d2;
    if (rule == CompositionRule::product_limit) {
      s = s_minus * (1.0 - d1 - d2);
    } else {
      s = std::exp(-(lambda1.value(t) + lambda2.value(t)));
    }
    sys.dl1_[k] = d1;
    sys.dl2_[k] = d2;
    sys.s_[k] = s;
    sys.f1_[k] = f1;
    sys.f2_[k] = f2;
    sys.i1_[k] = i1;
    sys.i2_[k] = i2;
    tprev = t;
  }
  return sys;
}

YearsLost years_lost(const CauseSystem& system, int j, double tstar) {
  if (tstar <= 0.0)
    throw Error(ErrorKind::InputError, "years_lost: t* must be positive");
  return YearsLost{j, tstar, system.cif_integral(j, tstar)};
}

double h_kernel(const CauseSystem& system, int i, int j, double s,
                double tstar, double eta, bool floor_at_eta,
                std::atomic<std::uint64_t>* clip_count) {
  const double ind = (i == j) ? (tstar - s) : 0.0;
  const double fj_s = system.cif(j, s);
  // int_s^{t*} (F_j(s) - F_j(u)) du, exact on the jump grid
  const double num =
      fj_s * (tstar - s) - (system.cif_integral(j, tstar) - system.cif_integral(j, s));
  if (num == 0.0) return ind;  // F_j flat on [s,t*]: ratio term vanishes
  double denom = system.surv(s);
  if (denom < eta) {
    if (!floor_at_eta)
      throw Error(ErrorKind::PositivityBreach,
                  "h_kernel: S(s) < eta at s=" + std::to_string(s));
    if (clip_count) clip_count->fetch_add(1, std::memory_order_relaxed);
    denom = eta;
  }
  return ind + num / denom;
}

namespace {

// Atoms beyond the bundle's horizon are never consumed by any
// functional, but a learner's tail atoms (tiny risk sets scaled by a
// large relative risk) can carry superunit jumps that would poison the
// product-limit composition; drop them before composing.
StepFn to_horizon(StepFn f, double horizon) {
  return horizon > 0.0 ? f.truncated(horizon) : std::move(f);
}

// The same pathology can land inside the horizon at small n: a Breslow
// atom with a near-empty risk set times a large relative risk gives
// dL1 + dL2 >= 1, where the product-limit survival would hit or cross
// zero.  Rescale both causes' jumps at such an atom to total kMaxAtom:
// survival collapses to ~1e-9 there and the eta floor takes over
// downstream, instead of the prediction aborting the whole estimate.
// The threshold leaves jumps of exactly 1 - 1e-9 (the discrete
// plug-in's terminal atoms) untouched.
constexpr double kMaxAtom = 1.0 - 1e-9;

void cap_joint_jumps(StepFn& l1, StepFn& l2) {
  const auto& t1 = l1.times();
  const auto& t2 = l2.times();
  const auto& s1 = l1.sizes();
  const auto& s2 = l2.sizes();
  const auto walk = [&](auto&& atom) {  // atom(i, j, total) over merged times
    for (std::size_t i = 0, j = 0; i < t1.size() || j < t2.size();) {
      if (j >= t2.size() || (i < t1.size() && t1[i] < t2[j])) {
        atom(static_cast<std::ptrdiff_t>(i), std::ptrdiff_t{-1}, s1[i]);
        ++i;
      } else if (i >= t1.size() || t2[j] < t1[i]) {
        atom(std::ptrdiff_t{-1}, static_cast<std::ptrdiff_t>(j), s2[j]);
        ++j;
      } else {
        atom(static_cast<std::ptrdiff_t>(i), static_cast<std::ptrdiff_t>(j),
             s1[i] + s2[j]);
        ++i;
        ++j;
      }
    }
  };
  bool bad = false;
  walk([&](std::ptrdiff_t, std::ptrdiff_t, double total) {
    bad = bad || total > kMaxAtom;
  });
  if (!bad) return;
  std::vector<double> n1 = s1, n2 = s2;
  walk([&](std::ptrdiff_t i, std::ptrdiff_t j, double total) {
    if (total <= kMaxAtom) return;
    const double scale = kMaxAtom / total;
    if (i >= 0) n1[static_cast<std::size_t>(i)] *= scale;
    if (j >= 0) n2[static_cast<std::size_t>(j)] *= scale;
  });
  l1 = StepFn(t1, std::move(n1), l1.baseline());
  l2 = StepFn(t2, std::move(n2), l2.baseline());
}

void cap_single_jumps(StepFn& l) {
  const auto& s = l.sizes();
  bool bad = false;
  for (double v : s) bad = bad || v > kMaxAtom;
  if (!bad) return;
  std::vector<double> ns = s;
  for (double& v : ns) v = std::min(v, kMaxAtom);
  l = StepFn(l.times(), std::move(ns), l.baseline());
}

}  // namespace

ArmCurves predict_arm_curves(const NuisanceFit& nu, int a, const double* x,
                             std::size_t d, CompositionRule rule) {
  StepFn l1 = to_horizon(nu.lambda1(a, x, d), nu.horizon);
  StepFn l2 = to_horizon(nu.lambda2(a, x, d), nu.horizon);
  StepFn lc = to_horizon(nu.lambdac(a, x, d), nu.horizon);
  const bool exponential = rule == CompositionRule::exponential;
  if (!exponential) {
    cap_joint_jumps(l1, l2);
    cap_single_jumps(lc);
  }
  return ArmCurves{compose_cause_system(l1, l2, rule),
                   survival_from_hazard(lc, exponential)};
}

double cate(const NuisanceFit& nu, int j, double tstar, const double* x,
            std::size_t d) {
  const auto arm_system = [&](int a) {
    StepFn l1 = to_horizon(nu.lambda1(a, x, d), nu.horizon);
    StepFn l2 = to_horizon(nu.lambda2(a, x, d), nu.horizon);
    cap_joint_jumps(l1, l2);
    return compose_cause_system(l1, l2);
  };
  return years_lost(arm_system(1), j, tstar).value -
         years_lost(arm_system(0), j, tstar).value;
}

}  // namespace lyl
