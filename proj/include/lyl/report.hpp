#pragma once

// Estimate reports (point, SE, normal CI, stored influence-function
// values, per-fold diagnostics) and their JSON serialization.

#include <cstdint>
#include <string>
#include <vector>

#include "lyl/common.hpp"

namespace lyl {

struct PositivitySummary {
  double min_propensity = 1.0;        // min over sample of min(pi, 1-pi)
  double min_surv_tstar = 1.0;        // min over sample & arms of S(t*)
  double min_cens_surv_tstar = 1.0;   // min over sample & arms of S_C(t*-)
  std::uint64_t clips_propensity = 0;
  std::uint64_t clips_surv = 0;
  std::uint64_t clips_cens = 0;
  bool flag_propensity = false;       // raised when a minimum sits at the floor
  bool flag_surv = false;
  bool flag_cens = false;
};

struct FoldDiagnostic {
  int fold = 1;                       // 1-based for reporting
  std::size_t n_eval = 0;
  std::size_t n_train = 0;
  std::size_t train_censored = 0;
  std::size_t train_events1 = 0;
  std::size_t train_events2 = 0;
  std::string hazard_learner;         // e.g. "cox" / "survival_forest"
  std::string censoring_learner;      // may fall back, e.g. "nelson_aalen"
  std::string propensity_learner;
  PositivitySummary positivity;
};

struct EstimateReport {
  std::string estimand = "ate";       // "ate" | "vim"
  int cause = 1;
  double tstar = 0.0;
  int K = 1;
  std::uint64_t seed = 0;
  double level = 0.95;
  std::size_t n = 0;
  double point = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  int fold_redraws = 0;
  std::vector<double> if_values;      // one per observation, row order,
                                      // centered at the point estimate
  std::vector<FoldDiagnostic> folds;
};

struct VimReport : EstimateReport {
  int l = 1;                          // 1-based coordinate
  double gamma = 0.0;
  double chi = 0.0;
  double omega = 0.0;                 // == point
  double tst = 0.0;
  double p_value = 1.0;
  bool degenerate = false;
  std::string degenerate_reason;
};

// JSON text (full-precision reals).  include_if_values=false drops the
// per-observation array (used for compact CSV-side summaries).
std::string report_to_json(const EstimateReport& r,
                           bool include_if_values = true);
std::string vim_report_to_json(const VimReport& r,
                               bool include_if_values = true);
std::string vim_reports_to_json(const std::vector<VimReport>& rs,
                                bool include_if_values = true);

// Write with a temp file + atomic rename; no partial outputs on failure.
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace lyl
