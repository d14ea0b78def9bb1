#include "lyl/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace lyl {

using nlohmann::json;

namespace {

json positivity_json(const PositivitySummary& p) {
  return json{{"min_propensity", p.min_propensity},
              {"min_surv_tstar", p.min_surv_tstar},
              {"min_cens_surv_tstar", p.min_cens_surv_tstar},
              {"clips_propensity", p.clips_propensity},
              {"clips_surv", p.clips_surv},
              {"clips_cens", p.clips_cens},
              {"flag_propensity", p.flag_propensity},
              {"flag_surv", p.flag_surv},
              {"flag_cens", p.flag_cens}};
}

json fold_json(const FoldDiagnostic& f) {
  return json{{"fold", f.fold},
              {"n_eval", f.n_eval},
              {"n_train", f.n_train},
              {"train_censored", f.train_censored},
              {"train_events1", f.train_events1},
              {"train_events2", f.train_events2},
              {"hazard_learner", f.hazard_learner},
              {"censoring_learner", f.censoring_learner},
              {"propensity_learner", f.propensity_learner},
              {"positivity", positivity_json(f.positivity)}};
}

json base_json(const EstimateReport& r, bool include_if_values) {
  json j{{"estimand", r.estimand}, {"cause", r.cause},   {"tstar", r.tstar},
         {"K", r.K},               {"seed", r.seed},     {"level", r.level},
         {"n", r.n},               {"point", r.point},   {"se", r.se},
         {"ci_lower", r.ci_lower}, {"ci_upper", r.ci_upper},
         {"fold_redraws", r.fold_redraws}};
  if (include_if_values) j["if_values"] = r.if_values;
  json folds = json::array();
  for (const auto& f : r.folds) folds.push_back(fold_json(f));
  j["folds"] = folds;
  return j;
}

json vim_json(const VimReport& r, bool include_if_values) {
  json j = base_json(r, include_if_values);
  j["l"] = r.l;
  j["gamma"] = r.gamma;
  j["chi"] = r.chi;
  j["omega"] = r.omega;
  j["tst"] = r.tst;
  j["p_value"] = r.p_value;
  j["degenerate"] = r.degenerate;
  if (r.degenerate) j["degenerate_reason"] = r.degenerate_reason;
  return j;
}

}  // namespace

std::string report_to_json(const EstimateReport& r, bool include_if_values) {
  return base_json(r, include_if_values).dump(2);
}

std::string vim_report_to_json(const VimReport& r, bool include_if_values) {
  return vim_json(r, include_if_values).dump(2);
}

std::string vim_reports_to_json(const std::vector<VimReport>& rs,
                                bool include_if_values) {
  json arr = json::array();
  for (const auto& r : rs) arr.push_back(vim_json(r, include_if_values));
  return arr.dump(2);
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::InputError, "cannot write " + tmp.string());
    out << content;
    if (!out.flush())
      throw Error(ErrorKind::InputError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorKind::InputError,
                "atomic rename failed for " + path + ": " + ec.message());
  }
}

}  // namespace lyl
