#include "lyl/cli.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lyl/common.hpp"
#include "lyl/dataset.hpp"
#include "lyl/eif.hpp"
#include "lyl/estimators.hpp"
#include "lyl/report.hpp"
#include "lyl/simlab.hpp"

namespace lyl {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- config text

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void config_fail(std::size_t lineno, const std::string& what) {
  throw Error(ErrorKind::InputError,
              "config line " + std::to_string(lineno) + ": " + what);
}

bool valid_key(const std::string& k) {
  if (k.empty() || k.front() == '.' || k.back() == '.') return false;
  char prev = 0;
  for (char c : k) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
                    c == '.';
    if (!ok) return false;
    if (c == '.' && prev == '.') return false;
    prev = c;
  }
  return true;
}

double parse_number_token(const std::string& tok, std::size_t lineno) {
  if (tok.empty()) config_fail(lineno, "empty number");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size() || !std::isfinite(v))
    config_fail(lineno, "cannot parse number '" + tok + "'");
  return v;
}

ConfigValue parse_value(const std::string& val, std::size_t lineno) {
  if (val.empty()) config_fail(lineno, "missing value after '='");
  if (val.front() == '"') {
    if (val.size() < 2 || val.back() != '"')
      config_fail(lineno, "unterminated string");
    const std::string inner = val.substr(1, val.size() - 2);
    if (inner.find('"') != std::string::npos)
      config_fail(lineno, "embedded quote in string");
    return inner;
  }
  if (val == "true") return true;
  if (val == "false") return false;
  if (val.front() == '[') {
    if (val.back() != ']') config_fail(lineno, "unterminated array");
    std::vector<double> out;
    const std::string inner = trim(val.substr(1, val.size() - 2));
    if (inner.empty()) return out;
    std::size_t pos = 0;
    while (pos <= inner.size()) {
      const std::size_t comma = inner.find(',', pos);
      const std::string tok =
          trim(comma == std::string::npos ? inner.substr(pos)
                                          : inner.substr(pos, comma - pos));
      out.push_back(parse_number_token(tok, lineno));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return out;
  }
  return parse_number_token(val, lineno);
}

// ------------------------------------------------------------- typed view

// Wraps a parsed tree with typed getters that default when a key is
// absent and refuse when it holds the wrong shape.  Every key touched
// (present or not) counts as part of the command's vocabulary; what is
// left over at the end is reported as unused.
class ConfigView {
 public:
  explicit ConfigView(ConfigTree tree) : tree_(std::move(tree)) {}

  bool has(const std::string& key) const {
    used_.insert(key);
    return tree_.count(key) != 0;
  }

  double number(const std::string& key, double def) const {
    used_.insert(key);
    auto it = tree_.find(key);
    if (it == tree_.end()) return def;
    if (const double* v = std::get_if<double>(&it->second)) return *v;
    type_fail(key, "a number");
  }

  std::string text(const std::string& key, const std::string& def) const {
    used_.insert(key);
    auto it = tree_.find(key);
    if (it == tree_.end()) return def;
    if (const std::string* v = std::get_if<std::string>(&it->second)) return *v;
    type_fail(key, "a string");
  }

  bool flag(const std::string& key, bool def) const {
    used_.insert(key);
    auto it = tree_.find(key);
    if (it == tree_.end()) return def;
    if (const bool* v = std::get_if<bool>(&it->second)) return *v;
    type_fail(key, "true or false");
  }

  std::vector<double> numbers(const std::string& key,
                              std::vector<double> def) const {
    used_.insert(key);
    auto it = tree_.find(key);
    if (it == tree_.end()) return def;
    if (const std::vector<double>* v =
            std::get_if<std::vector<double>>(&it->second))
      return *v;
    type_fail(key, "an array of numbers");
  }

  // Nonnegative integer stored as a number.
  std::size_t index(const std::string& key, std::size_t def) const {
    const double v = number(key, static_cast<double>(def));
    if (!(v >= 0) || v != std::floor(v) || v > 9.007199254740992e15)
      throw Error(ErrorKind::InputError, "config key '" + key +
                                             "': expected a nonnegative "
                                             "integer");
    return static_cast<std::size_t>(v);
  }

  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : tree_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

 private:
  [[noreturn]] void type_fail(const std::string& key,
                              const char* want) const {
    throw Error(ErrorKind::InputError,
                "config key '" + key + "': expected " + want);
  }

  ConfigTree tree_;
  mutable std::set<std::string> used_;
};

// ------------------------------------------------------------- output side

json value_json(const ConfigValue& v) {
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  if (const double* d = std::get_if<double>(&v)) return *d;
  if (const std::string* s = std::get_if<std::string>(&v)) return *s;
  return std::get<std::vector<double>>(v);
}

json tree_json(const ConfigTree& t) {
  json out = json::object();
  for (const auto& [k, v] : t) out[k] = value_json(v);
  return out;
}

std::string value_text(const ConfigValue& v) {
  return value_json(v).dump();  // shortest-round-trip reals
}

std::string num_text(double v) { return json(v).dump(); }

// Leading `# key = value` provenance comments for CSV outputs.
std::string csv_preamble(const std::string& command, const ConfigTree& t) {
  std::string out = "# command = " + command + "\n";
  for (const auto& [k, v] : t) out += "# " + k + " = " + value_text(v) + "\n";
  return out;
}

void deliver(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
    std::fflush(stdout);
  } else {
    write_text_atomic(out_path, text);
    std::fprintf(stderr, "wrote %s\n", out_path.c_str());
  }
}

void warn_unused(const ConfigView& cv) {
  for (const std::string& k : cv.unused())
    std::fprintf(stderr, "warning: unused config key '%s'\n", k.c_str());
}

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::UsageError:
      return 2;
    case ErrorKind::InputError:
    case ErrorKind::MissingColumn:
    case ErrorKind::NonFiniteValue:
    case ErrorKind::BadEventCode:
    case ErrorKind::BadTreatmentCode:
      return 3;
    default:
      return 4;
  }
}

void emit_error(const std::string& kind, const std::string& message,
                int code) {
  json err{{"error", {{"kind", kind}, {"message", message}, {"exit", code}}}};
  std::fprintf(stderr, "%s\n", err.dump().c_str());
}

// ------------------------------------------------------------- flag wiring

// One value store shared by all subcommands (only one parses per run);
// presence is checked through the registered option handles.
struct Opts {
  std::string config, out, format;
  std::string data, time_col, event_col, treat_col, covariates;
  std::string learner, methods, n_grid;
  std::uint64_t seed = 1;
  std::int64_t threads = 1, K = 10, j = 1, l = 0, index = 0, reps = 0,
               draws = 0;
  double tstar = 0, level = 0.95, eta = 0.01, truth = 0, eps = 1e-5;
  bool if_values = false;
};

class Flags {
 public:
  CLI::Option* add(CLI::App* sub, const std::string& name, auto& target,
                   const std::string& desc) {
    CLI::Option* o = sub->add_option(name, target, desc);
    handles_[name].push_back(o);
    return o;
  }
  CLI::Option* add_flag(CLI::App* sub, const std::string& name, bool& target,
                        const std::string& desc) {
    CLI::Option* o = sub->add_flag(name, target, desc);
    handles_[name].push_back(o);
    return o;
  }
  bool seen(const std::string& name) const {
    auto it = handles_.find(name);
    if (it == handles_.end()) return false;
    for (const CLI::Option* o : it->second)
      if (o->count() > 0) return true;
    return false;
  }

 private:
  std::map<std::string, std::vector<CLI::Option*>> handles_;
};

std::size_t checked_size(const char* what, std::int64_t v) {
  if (v < 0)
    throw Error(ErrorKind::InputError,
                std::string(what) + " must be nonnegative");
  return static_cast<std::size_t>(v);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    const std::string tok = trim(comma == std::string::npos
                                     ? s.substr(pos)
                                     : s.substr(pos, comma - pos));
    if (!tok.empty()) out.push_back(tok);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// Effective value = flag if given, else config key, else default.
struct Resolver {
  const Flags& flags;
  const ConfigView& cv;
  ConfigTree& resolved;

  double num(const std::string& flag_name, double flag_val,
             const std::string& key, double def) const {
    const double v = flags.seen(flag_name) ? flag_val : cv.number(key, def);
    resolved[key] = v;
    return v;
  }
  std::size_t idx(const std::string& flag_name, std::int64_t flag_val,
                  const std::string& key, std::size_t def) const {
    const std::size_t v = flags.seen(flag_name)
                              ? checked_size(key.c_str(), flag_val)
                              : cv.index(key, def);
    resolved[key] = static_cast<double>(v);
    return v;
  }
  std::string text(const std::string& flag_name, const std::string& flag_val,
                   const std::string& key, const std::string& def) const {
    const std::string v = flags.seen(flag_name) ? flag_val : cv.text(key, def);
    resolved[key] = v;
    return v;
  }
};

std::uint64_t resolve_seed(const Flags& flags, const ConfigView& cv,
                           std::uint64_t flag_val, ConfigTree& resolved) {
  std::uint64_t s;
  if (flags.seen("--seed")) {
    s = flag_val;
  } else {
    const double v = cv.number("seed", 1.0);
    if (!(v >= 0) || v != std::floor(v) || v > 1.8446744073709552e19)
      throw Error(ErrorKind::InputError,
                  "config key 'seed': expected a nonnegative integer");
    s = static_cast<std::uint64_t>(v);
  }
  resolved["seed"] = static_cast<double>(s);
  return s;
}

// Thread-count precedence: flag, then LYL_THREADS, then config, then 1.
int resolve_thread_request(const Flags& flags, const ConfigView& cv,
                           std::int64_t flag_val, ConfigTree& resolved) {
  int t;
  if (flags.seen("--threads")) {
    t = static_cast<int>(flag_val);
  } else if (const char* env = std::getenv("LYL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0)
      throw Error(ErrorKind::InputError,
                  std::string("LYL_THREADS: expected a nonnegative integer, "
                              "got '") +
                      env + "'");
    t = static_cast<int>(v);
  } else {
    t = static_cast<int>(cv.index("threads", 1));
  }
  if (t < 0) throw Error(ErrorKind::InputError, "threads must be >= 0");
  resolved["threads"] = static_cast<double>(t);
  return t;
}

std::string resolve_format(const Flags& flags, const Opts& o,
                           const ConfigView& cv, const std::string& def,
                           ConfigTree& resolved) {
  const std::string f =
      flags.seen("--format") ? o.format : cv.text("format", def);
  if (f != "json" && f != "csv")
    throw Error(ErrorKind::InputError, "format must be json or csv");
  resolved["format"] = f;
  return f;
}

// ------------------------------------------------------------- sim config

// Default coefficient vectors inherited from the benchmark generator are
// trimmed to the configured dimension; vectors the user supplied are kept
// as given so the oversize diagnostic still fires.
void coef_from_config(const ConfigView& cv, const Resolver& r,
                      const std::string& key, std::size_t d,
                      std::vector<double>& coef) {
  if (cv.has(key))
    coef = cv.numbers(key, coef);
  else if (coef.size() > d)
    coef.resize(d);
  r.resolved[key] = coef;
}

void hazard_from_config(const ConfigView& cv, const Resolver& r,
                        const std::string& prefix, std::size_t d,
                        HazardModel& h) {
  h.scale = r.num("", 0, prefix + ".scale", h.scale);
  h.shape = r.num("", 0, prefix + ".shape", h.shape);
  h.a_coef = r.num("", 0, prefix + ".a_coef", h.a_coef);
  coef_from_config(cv, r, prefix + ".x_coef", d, h.x_coef);
  coef_from_config(cv, r, prefix + ".ax_coef", d, h.ax_coef);
}

SimConfig sim_from_config(const ConfigView& cv, const Resolver& r) {
  SimConfig sim = SimConfig::benchmark();
  sim.d = r.idx("", 0, "sim.d", sim.d);
  sim.tstar = r.num("", 0, "sim.tstar", sim.tstar);
  sim.propensity_intercept =
      r.num("", 0, "sim.propensity_intercept", sim.propensity_intercept);
  coef_from_config(cv, r, "sim.propensity_coef", sim.d, sim.propensity_coef);
  hazard_from_config(cv, r, "sim.cause1", sim.d, sim.cause1);
  hazard_from_config(cv, r, "sim.cause2", sim.d, sim.cause2);
  hazard_from_config(cv, r, "sim.censoring", sim.d, sim.censoring);
  validate_sim_config(sim);
  return sim;
}

ForestParams forest_from_config(const Resolver& r, int threads) {
  ForestParams fp;
  fp.n_trees = static_cast<int>(r.idx("", 0, "forest.n_trees",
                                      static_cast<std::size_t>(fp.n_trees)));
  fp.mtry = static_cast<int>(
      r.idx("", 0, "forest.mtry", static_cast<std::size_t>(fp.mtry)));
  fp.min_leaf = static_cast<int>(r.idx("", 0, "forest.min_leaf",
                                       static_cast<std::size_t>(fp.min_leaf)));
  fp.n_split = static_cast<int>(
      r.idx("", 0, "forest.n_split", static_cast<std::size_t>(fp.n_split)));
  fp.max_grid = static_cast<int>(r.idx("", 0, "forest.max_grid",
                                       static_cast<std::size_t>(fp.max_grid)));
  fp.threads = threads;
  return fp;
}

// ------------------------------------------------------------- estimation

struct EstimateSetup {
  std::string data_path;
  CsvSchema schema;
  CrossFitConfig cfg;
  double eta = 0.01;
};

EstimateSetup estimate_setup(const Flags& flags, const Opts& o,
                             const ConfigView& cv, ConfigTree& resolved) {
  Resolver r{flags, cv, resolved};
  EstimateSetup s;
  s.data_path = r.text("--data", o.data, "data.path", "");
  if (s.data_path.empty())
    throw Error(ErrorKind::UsageError,
                "no dataset: pass --data FILE or set data.path");
  s.schema.time = r.text("--time-col", o.time_col, "data.time", "time");
  s.schema.event = r.text("--event-col", o.event_col, "data.event", "event");
  s.schema.treatment =
      r.text("--treatment-col", o.treat_col, "data.treatment", "treatment");
  const std::string covs =
      r.text("--covariate-cols", o.covariates, "data.covariates", "");
  s.schema.covariates = split_commas(covs);

  s.cfg.seed = resolve_seed(flags, cv, o.seed, resolved);
  s.cfg.threads = resolve_thread_request(flags, cv, o.threads, resolved);
  s.cfg.K = static_cast<int>(r.idx("--K", o.K, "estimate.K", 10));
  if (s.cfg.K < 1) throw Error(ErrorKind::InputError, "K must be >= 1");
  s.cfg.j = static_cast<int>(r.idx("--j", o.j, "estimate.j", 1));
  s.cfg.tstar = r.num("--tstar", o.tstar, "estimate.tstar", 0.0);
  if (!(s.cfg.tstar > 0))
    throw Error(ErrorKind::UsageError,
                "no horizon: pass --tstar T or set estimate.tstar");
  s.cfg.level = r.num("--level", o.level, "estimate.level", 0.95);
  s.cfg.min_fold_rows = r.idx("", 0, "estimate.min_fold_rows", 10);
  s.eta = r.num("--eta", o.eta, "estimate.eta", 0.01);
  const std::string learner =
      r.text("--learner", o.learner, "estimate.learner", "cor");
  s.cfg.learner.flavor = parse_learner_flavor(learner);
  s.cfg.learner.eta = s.eta;
  s.cfg.learner.min_cause_events = cv.index("estimate.min_cause_events", 5);
  resolved["estimate.min_cause_events"] =
      static_cast<double>(s.cfg.learner.min_cause_events);
  s.cfg.learner.forest = forest_from_config(r, s.cfg.threads);
  return s;
}

std::string estimate_csv(const EstimateReport& rep) {
  std::string out =
      "estimand,cause,tstar,K,seed,level,n,point,se,ci_lower,ci_upper,"
      "fold_redraws\n";
  out += rep.estimand + "," + std::to_string(rep.cause) + "," +
         num_text(rep.tstar) + "," + std::to_string(rep.K) + "," +
         std::to_string(rep.seed) + "," + num_text(rep.level) + "," +
         std::to_string(rep.n) + "," + num_text(rep.point) + "," +
         num_text(rep.se) + "," + num_text(rep.ci_lower) + "," +
         num_text(rep.ci_upper) + "," + std::to_string(rep.fold_redraws) +
         "\n";
  return out;
}

std::string vim_csv_header() {
  return "l,omega,se,ci_lower,ci_upper,gamma,chi,tst,p_value,degenerate\n";
}

std::string vim_csv_row(const VimReport& v) {
  return std::to_string(v.l) + "," + num_text(v.omega) + "," +
         num_text(v.se) + "," + num_text(v.ci_lower) + "," +
         num_text(v.ci_upper) + "," + num_text(v.gamma) + "," +
         num_text(v.chi) + "," + num_text(v.tst) + "," +
         num_text(v.p_value) + "," + (v.degenerate ? "true" : "false") + "\n";
}

int cmd_ate(const Flags& flags, const Opts& o, const ConfigView& cv) {
  ConfigTree resolved;
  const EstimateSetup s = estimate_setup(flags, o, cv, resolved);
  const std::string format = resolve_format(flags, o, cv, "json", resolved);
  warn_unused(cv);
  const SurvivalDataset data = load_dataset(s.data_path, s.schema);
  const EstimateReport rep = estimate_ate(data, s.cfg);
  std::string text;
  if (format == "json") {
    json out{{"command", "ate"},
             {"config", tree_json(resolved)},
             {"report", json::parse(report_to_json(rep, o.if_values))}};
    text = out.dump(2) + "\n";
  } else {
    text = csv_preamble("ate", resolved) + estimate_csv(rep);
  }
  deliver(text, o.out);
  return 0;
}

int cmd_vim(const Flags& flags, const Opts& o, const ConfigView& cv) {
  ConfigTree resolved;
  const EstimateSetup s = estimate_setup(flags, o, cv, resolved);
  Resolver r{flags, cv, resolved};
  const std::size_t l = r.idx("--l", o.l, "estimate.l", 0);
  if (l < 1)
    throw Error(ErrorKind::UsageError,
                "no coordinate: pass --l L (1-based) or set estimate.l");
  const std::string format = resolve_format(flags, o, cv, "json", resolved);
  warn_unused(cv);
  const SurvivalDataset data = load_dataset(s.data_path, s.schema);
  const VimReport rep = estimate_vim(data, s.cfg, l);
  std::string text;
  if (format == "json") {
    json out{{"command", "vim"},
             {"config", tree_json(resolved)},
             {"report", json::parse(vim_report_to_json(rep, o.if_values))}};
    text = out.dump(2) + "\n";
  } else {
    text = csv_preamble("vim", resolved) + vim_csv_header() + vim_csv_row(rep);
  }
  deliver(text, o.out);
  return 0;
}

int cmd_rank(const Flags& flags, const Opts& o, const ConfigView& cv) {
  ConfigTree resolved;
  const EstimateSetup s = estimate_setup(flags, o, cv, resolved);
  const std::string format = resolve_format(flags, o, cv, "csv", resolved);
  warn_unused(cv);
  const SurvivalDataset data = load_dataset(s.data_path, s.schema);
  const std::vector<VimReport> reps = rank_covariates(data, s.cfg);
  std::string text;
  if (format == "json") {
    json out{{"command", "rank"},
             {"config", tree_json(resolved)},
             {"reports", json::parse(vim_reports_to_json(reps, o.if_values))}};
    text = out.dump(2) + "\n";
  } else {
    text = csv_preamble("rank", resolved) + "rank," + vim_csv_header();
    for (std::size_t i = 0; i < reps.size(); ++i)
      text += std::to_string(i + 1) + "," + vim_csv_row(reps[i]);
  }
  deliver(text, o.out);
  return 0;
}

// ------------------------------------------------------------- simulation

int cmd_simulate(const Flags& flags, const Opts& o, const ConfigView& cv) {
  ConfigTree resolved;
  Resolver r{flags, cv, resolved};
  McConfig mc;
  mc.sim = sim_from_config(cv, r);
  mc.seed = resolve_seed(flags, cv, o.seed, resolved);
  mc.threads = resolve_thread_request(flags, cv, o.threads, resolved);
  mc.j = static_cast<int>(r.idx("--j", o.j, "mc.j", 1));
  mc.vim_l = r.idx("--l", o.l, "mc.vim_l", 0);
  mc.tstar = r.num("--tstar", o.tstar, "mc.tstar", mc.sim.tstar);
  mc.reps = r.idx("--reps", o.reps, "mc.reps", 50);
  mc.level = r.num("--level", o.level, "mc.level", 0.95);
  mc.eta = r.num("--eta", o.eta, "mc.eta", 0.01);
  mc.min_fold_rows = cv.index("mc.min_fold_rows", 10);
  resolved["mc.min_fold_rows"] = static_cast<double>(mc.min_fold_rows);
  mc.forest = forest_from_config(r, mc.threads);

  const std::string methods =
      r.text("--methods", o.methods, "mc.methods", "corCF");
  for (const std::string& m : split_commas(methods))
    mc.methods.push_back(parse_method(m));
  if (mc.methods.empty())
    throw Error(ErrorKind::InputError, "mc.methods: no methods named");

  std::vector<double> ns{200};
  if (flags.seen("--n")) {
    ns.clear();
    for (const std::string& tok : split_commas(o.n_grid)) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size() || !std::isfinite(v))
        throw Error(ErrorKind::InputError,
                    "--n: cannot parse sample size '" + tok + "'");
      ns.push_back(v);
    }
    cv.has("mc.n_grid");  // flag overrides; still part of the vocabulary
  } else {
    ns = cv.numbers("mc.n_grid", ns);
  }
  mc.n_grid.clear();
  for (double v : ns) {
    if (!(v >= 1) || v != std::floor(v))
      throw Error(ErrorKind::InputError,
                  "mc.n_grid: sample sizes must be positive integers");
    mc.n_grid.push_back(static_cast<std::size_t>(v));
  }
  resolved["mc.n_grid"] = ns;
  resolved["mc.methods"] = methods;

  // Truth precedence: explicit value, else the quadrature + MC oracle at
  // the configured generator.
  double truth;
  if (flags.seen("--truth")) {
    truth = o.truth;
    cv.has("mc.truth");  // flag overrides any configured value
  } else if (cv.has("mc.truth")) {
    truth = cv.number("mc.truth", 0.0);
  } else {
    if (mc.vim_l > 0 && mc.j != 1)
      throw Error(ErrorKind::InputError,
                  "built-in importance truths cover cause 1 only; set "
                  "mc.truth for cause 2");
    if (mc.vim_l > mc.sim.d)
      throw Error(ErrorKind::InputError, "mc.vim_l exceeds sim.d");
    const std::size_t draws = cv.index("mc.oracle_draws", 100000);
    resolved["mc.oracle_draws"] = static_cast<double>(draws);
    std::fprintf(stderr, "computing oracle truth (%zu draws)\n", draws);
    const OracleValues tv = true_values_oracle(
        mc.sim, mc.tstar, draws, derive_seed(mc.seed, {0x40}));
    truth = mc.vim_l == 0 ? (mc.j == 1 ? tv.psi1 : tv.psi2)
                          : tv.omega[mc.vim_l - 1];
  }
  resolved["mc.truth"] = truth;
  const std::string format = resolve_format(flags, o, cv, "json", resolved);
  warn_unused(cv);

  const SimSummary summary = run_monte_carlo(mc, truth);
  std::string text;
  if (format == "json") {
    json out{{"command", "simulate"},
             {"config", tree_json(resolved)},
             {"summary", json::parse(sim_summary_to_json(summary))}};
    text = out.dump(2) + "\n";
  } else {
    text = csv_preamble("simulate", resolved) + sim_summary_to_csv(summary);
  }
  deliver(text, o.out);
  return 0;
}

int cmd_oracle(const Flags& flags, const Opts& o, const ConfigView& cv) {
  ConfigTree resolved;
  Resolver r{flags, cv, resolved};
  const SimConfig sim = sim_from_config(cv, r);
  const std::uint64_t seed = resolve_seed(flags, cv, o.seed, resolved);
  const double tstar = r.num("--tstar", o.tstar, "oracle.tstar", sim.tstar);
  const std::size_t draws = r.idx("--draws", o.draws, "oracle.draws", 100000);
  const std::string format = resolve_format(flags, o, cv, "json", resolved);
  warn_unused(cv);

  const OracleValues tv = true_values_oracle(sim, tstar, draws, seed);
  std::string text;
  if (format == "json") {
    json out{{"command", "oracle"},
             {"config", tree_json(resolved)},
             {"oracle",
              {{"psi1", tv.psi1},
               {"psi1_se", tv.psi1_se},
               {"psi2", tv.psi2},
               {"psi2_se", tv.psi2_se},
               {"gamma", tv.gamma},
               {"gamma_se", tv.gamma_se},
               {"chi", tv.chi},
               {"omega", tv.omega},
               {"omega_se", tv.omega_se},
               {"psi_draws", tv.psi_draws},
               {"gamma_draws", tv.gamma_draws},
               {"seed", tv.seed}}}};
    text = out.dump(2) + "\n";
  } else {
    text = csv_preamble("oracle", resolved) + "parameter,value,mc_se\n";
    text += "psi1," + num_text(tv.psi1) + "," + num_text(tv.psi1_se) + "\n";
    text += "psi2," + num_text(tv.psi2) + "," + num_text(tv.psi2_se) + "\n";
    for (std::size_t l = 0; l < tv.gamma.size(); ++l)
      text += "gamma" + std::to_string(l + 1) + "," + num_text(tv.gamma[l]) +
              "," + num_text(tv.gamma_se[l]) + "\n";
    text += "chi," + num_text(tv.chi) + ",0\n";
    for (std::size_t l = 0; l < tv.omega.size(); ++l)
      text += "omega" + std::to_string(l + 1) + "," + num_text(tv.omega[l]) +
              "," + num_text(tv.omega_se[l]) + "\n";
  }
  deliver(text, o.out);
  return 0;
}

// ------------------------------------------------------------- fd probe

int cmd_fd_check(const Flags& flags, const Opts& o, const ConfigView& cv) {
  ConfigTree resolved;
  Resolver r{flags, cv, resolved};
  const std::string data_path = r.text("--data", o.data, "data.path", "");
  if (data_path.empty())
    throw Error(ErrorKind::UsageError,
                "no dataset: pass --data FILE or set data.path");
  CsvSchema schema;
  schema.time = r.text("--time-col", o.time_col, "data.time", "time");
  schema.event = r.text("--event-col", o.event_col, "data.event", "event");
  schema.treatment =
      r.text("--treatment-col", o.treat_col, "data.treatment", "treatment");
  schema.covariates = split_commas(
      r.text("--covariate-cols", o.covariates, "data.covariates", ""));
  const int j = static_cast<int>(r.idx("--j", o.j, "fd.j", 1));
  const double tstar = r.num("--tstar", o.tstar, "fd.tstar", 0.0);
  if (!(tstar > 0))
    throw Error(ErrorKind::UsageError,
                "no horizon: pass --tstar T or set fd.tstar");
  const std::size_t index = r.idx("--index", o.index, "fd.index", 0);
  const double eps = r.num("--eps", o.eps, "fd.eps", 1e-5);
  const std::string format = resolve_format(flags, o, cv, "json", resolved);
  warn_unused(cv);

  const SurvivalDataset data = load_dataset(data_path, schema);
  const GateauxCheck chk = gateaux_fd_check(data, j, tstar, index, eps);
  std::string text;
  if (format == "json") {
    json out{{"command", "fd-check"},
             {"config", tree_json(resolved)},
             {"check",
              {{"fd", chk.fd}, {"eif", chk.eif}, {"gap", chk.gap}}}};
    text = out.dump(2) + "\n";
  } else {
    text = csv_preamble("fd-check", resolved) + "fd,eif,gap\n" +
           num_text(chk.fd) + "," + num_text(chk.eif) + "," +
           num_text(chk.gap) + "\n";
  }
  deliver(text, o.out);
  return 0;
}

}  // namespace

// ---------------------------------------------------------------- parsing

ConfigTree parse_config_text(const std::string& text) {
  ConfigTree out;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::string line;
    bool quoted = false;
    for (char c : raw) {
      if (c == '"') quoted = !quoted;
      if (c == '#' && !quoted) break;
      line.push_back(c);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') config_fail(lineno, "unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) config_fail(lineno, "bad section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) config_fail(lineno, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!valid_key(key)) config_fail(lineno, "bad key '" + key + "'");
    if (!section.empty()) key = section + "." + key;
    out[key] = parse_value(val, lineno);  // later assignments win
  }
  return out;
}

ConfigTree load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorKind::InputError, "cannot read config file '" + path +
                                           "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

// ---------------------------------------------------------------- driver

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{
      "Treatment effects on cause-specific life years lost under competing "
      "risks: cross-fitted one-step estimation, covariate importance, and a "
      "simulation laboratory."};
  app.name("lyl");
  app.require_subcommand(1);

  Opts o;
  Flags flags;

  CLI::App* ate = app.add_subcommand(
      "ate", "Average treatment effect on years lost to one cause");
  CLI::App* vim = app.add_subcommand(
      "vim", "Importance of one covariate for effect heterogeneity");
  CLI::App* rank = app.add_subcommand(
      "rank", "All covariates ranked by heterogeneity test p-value");
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Replicated synthetic study of the estimators");
  CLI::App* oracle = app.add_subcommand(
      "oracle", "True effect and importance values at a known generator");
  CLI::App* fd = app.add_subcommand(
      "fd-check",
      "Finite-difference probe of one influence-function contribution");

  for (CLI::App* sub : {ate, vim, rank, simulate, oracle, fd}) {
    flags.add(sub, "--config", o.config, "config file (key = value tree)");
    flags.add(sub, "--out", o.out, "write output here (atomic) not stdout");
    flags.add(sub, "--format", o.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    flags.add(sub, "--seed", o.seed, "master RNG seed");
    flags.add(sub, "--threads", o.threads, "worker threads (0 = all cores)");
  }
  for (CLI::App* sub : {ate, vim, rank, fd}) {
    flags.add(sub, "--data", o.data, "CSV dataset");
    flags.add(sub, "--time-col", o.time_col, "time column name");
    flags.add(sub, "--event-col", o.event_col,
              "event column name (0/1/2 codes)");
    flags.add(sub, "--treatment-col", o.treat_col, "treatment column name");
    flags.add(sub, "--covariate-cols", o.covariates,
              "comma-separated covariate columns (default: all others)");
    flags.add(sub, "--j", o.j, "cause of interest (1 or 2)");
    flags.add(sub, "--tstar", o.tstar, "horizon");
  }
  for (CLI::App* sub : {ate, vim, rank}) {
    flags.add(sub, "--K", o.K, "cross-fitting folds (1 = no sample split)");
    flags.add(sub, "--learner", o.learner, "nuisance family: cor or rf");
    flags.add(sub, "--eta", o.eta, "positivity floor");
    flags.add(sub, "--level", o.level, "confidence level");
    flags.add_flag(sub, "--if-values", o.if_values,
                   "include per-observation influence values (json)");
  }
  flags.add(vim, "--l", o.l, "covariate coordinate, 1-based");
  flags.add(simulate, "--l", o.l, "importance coordinate (0 = effect study)");
  flags.add(simulate, "--j", o.j, "cause of interest (1 or 2)");
  flags.add(simulate, "--tstar", o.tstar, "horizon");
  flags.add(simulate, "--reps", o.reps, "replications per sample size");
  flags.add(simulate, "--methods", o.methods,
            "comma list from cor,corCF,RF,RFCF");
  flags.add(simulate, "--n", o.n_grid, "comma list of sample sizes");
  flags.add(simulate, "--truth", o.truth, "target value (skips the oracle)");
  flags.add(simulate, "--level", o.level, "confidence level");
  flags.add(simulate, "--eta", o.eta, "positivity floor");
  flags.add(oracle, "--tstar", o.tstar, "horizon");
  flags.add(oracle, "--draws", o.draws, "Monte Carlo draws");
  flags.add(fd, "--index", o.index, "observation to perturb, 0-based");
  flags.add(fd, "--eps", o.eps, "perturbation mass");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("lyl");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("UsageError", e.what(), 2);
    return 2;
  }

  try {
    const ConfigTree tree =
        o.config.empty() ? ConfigTree{} : load_config(o.config);
    const ConfigView cv(tree);
    if (app.got_subcommand(ate)) return cmd_ate(flags, o, cv);
    if (app.got_subcommand(vim)) return cmd_vim(flags, o, cv);
    if (app.got_subcommand(rank)) return cmd_rank(flags, o, cv);
    if (app.got_subcommand(simulate)) return cmd_simulate(flags, o, cv);
    if (app.got_subcommand(oracle)) return cmd_oracle(flags, o, cv);
    if (app.got_subcommand(fd)) return cmd_fd_check(flags, o, cv);
    emit_error("UsageError", "no subcommand", 2);
    return 2;
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    emit_error(error_kind_name(e.kind()), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    emit_error("ComputeError", e.what(), 4);
    return 4;
  }
}

}  // namespace lyl
