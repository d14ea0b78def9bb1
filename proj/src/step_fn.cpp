#include "lyl/step_fn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lyl {

const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::BadEventCode: return "BadEventCode";
    case ErrorKind::BadTreatmentCode: return "BadTreatmentCode";
    case ErrorKind::InfeasibleFolds: return "InfeasibleFolds";
    case ErrorKind::SingularDesign: return "SingularDesign";
    case ErrorKind::NoEvents: return "NoEvents";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::SeparableData: return "SeparableData";
    case ErrorKind::SingleArm: return "SingleArm";
    case ErrorKind::InfeasibleParams: return "InfeasibleParams";
    case ErrorKind::SuperunitJump: return "SuperunitJump";
    case ErrorKind::PositivityBreach: return "PositivityBreach";
    case ErrorKind::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorKind::SparseCell: return "SparseCell";
    case ErrorKind::FoldTooSmall: return "FoldTooSmall";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::UsageError: return "UsageError";
    case ErrorKind::InputError: return "InputError";
  }
  return "Unknown";
}

StepFn::StepFn(std::vector<double> times, std::vector<double> sizes,
               double baseline)
    : baseline_(baseline) {
  if (times.size() != sizes.size())
    throw Error(ErrorKind::NonFiniteValue,
                "StepFn: times/sizes length mismatch");
  const std::size_t n = times.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0 || !std::isfinite(sizes[i]))
      throw Error(ErrorKind::NonFiniteValue,
                  "StepFn: jump times must be finite nonnegative, sizes finite");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  times_.reserve(n);
  sizes_.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = times[order[k]];
    const double s = sizes[order[k]];
    if (!times_.empty() && times_.back() == t)
      sizes_.back() += s;  // merge ties by summing
    else {
      times_.push_back(t);
      sizes_.push_back(s);
    }
  }
  cum_.resize(times_.size());
  double acc = baseline_;
  for (std::size_t k = 0; k < times_.size(); ++k) {
    acc += sizes_[k];
    cum_[k] = acc;
  }
}

std::ptrdiff_t StepFn::last_leq(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  return static_cast<std::ptrdiff_t>(it - times_.begin()) - 1;
}

double StepFn::value(double t) const {
  const auto k = last_leq(t);
  return k < 0 ? baseline_ : cum_[static_cast<std::size_t>(k)];
}

double StepFn::value_left(double t) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  const auto k = static_cast<std::ptrdiff_t>(it - times_.begin()) - 1;
  return k < 0 ? baseline_ : cum_[static_cast<std::size_t>(k)];
}

double StepFn::jump_at(double t) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.end() || *it != t) return 0.0;
  return sizes_[static_cast<std::size_t>(it - times_.begin())];
}

StepFn StepFn::scaled(double c) const {
  StepFn out(*this);
  for (std::size_t k = 0; k < out.sizes_.size(); ++k) {
    out.sizes_[k] *= c;
  }
  double acc = out.baseline_;
  for (std::size_t k = 0; k < out.sizes_.size(); ++k) {
    acc += out.sizes_[k];
    out.cum_[k] = acc;
  }
  return out;
}

StepFn StepFn::truncated(double horizon) const {
  const auto k = last_leq(horizon);
  const auto m = static_cast<std::size_t>(k + 1);
  StepFn out;
  out.baseline_ = baseline_;
  out.times_.assign(times_.begin(), times_.begin() + m);
  out.sizes_.assign(sizes_.begin(), sizes_.begin() + m);
  out.cum_.assign(cum_.begin(), cum_.begin() + m);
  return out;
}

bool StepFn::is_cumulative_hazard() const {
  if (baseline_ != 0.0) return false;
  for (double s : sizes_)
    if (s < 0.0) return false;
  return true;
}

double stieltjes_integrate(const std::function<double(double)>& g,
                           const StepFn& lambda, double t) {
  const auto& times = lambda.times();
  const auto& sizes = lambda.sizes();
  double acc = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] <= 0.0) continue;
    if (times[k] > t) break;
    acc += g(times[k]) * sizes[k];
  }
  return acc;
}

StepFn survival_from_hazard(const StepFn& cumhaz, bool exponential_form) {
  const auto& times = cumhaz.times();
  const auto& sizes = cumhaz.sizes();
  std::vector<double> jt, js;
  jt.reserve(times.size());
  js.reserve(times.size());
  double s = 1.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    double snext;
    if (exponential_form) {
      snext = std::exp(-cumhaz.value(times[k]));
    } else {
      if (sizes[k] >= 1.0)
        throw Error(ErrorKind::SuperunitJump,
                    "survival_from_hazard: hazard jump >= 1 at t=" +
                        std::to_string(times[k]));
      snext = s * (1.0 - sizes[k]);
    }
    jt.push_back(times[k]);
    js.push_back(snext - s);
    s = snext;
  }
  return StepFn(std::move(jt), std::move(js), 1.0);
}

}  // namespace lyl
