#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lyl/cli.hpp"
#include "lyl/common.hpp"
#include "lyl/dataset.hpp"
#include "lyl/estimators.hpp"
#include "lyl/simlab.hpp"

#include <json.hpp>

using namespace lyl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  throw std::logic_error("expected lyl::Error");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

fs::path tmp_dir() {
  auto p = fs::temp_directory_path() / "lyl_test_cli";
  fs::create_directories(p);
  return p;
}

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

// Spawn the installed binary through the shell, capturing both streams.
RunResult run_bin(const std::vector<std::string>& args,
                  const std::string& env_prefix = "") {
  static int counter = 0;
  const fs::path dir = tmp_dir();
  const fs::path out = dir / ("stdout." + std::to_string(counter));
  const fs::path err = dir / ("stderr." + std::to_string(counter));
  ++counter;
  std::string cmd = env_prefix + std::string(LYL_BINARY);
  for (const std::string& a : args) cmd += " '" + a + "'";
  cmd += " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out.string());
  r.err = slurp(err.string());
  return r;
}

json error_object(const RunResult& r) {
  // the error object is the last stderr line
  std::istringstream in(r.err);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  return json::parse(last);
}

// A benchmark-generator draw saved as CSV, shared across the cases.
std::string dataset_csv(std::size_t n, std::uint64_t seed) {
  const fs::path p =
      tmp_dir() / ("data_" + std::to_string(n) + "_" + std::to_string(seed) +
                   ".csv");
  if (!fs::exists(p))
    save_dataset(sample_dgp(SimConfig::benchmark(), n, seed), p.string());
  return p.string();
}

}  // namespace

// ---------------------------------------------------------------------
// config text
// ---------------------------------------------------------------------

TEST_CASE("config parser: sections, types, comments, precedence") {
  const std::string text =
      "# header comment\r\n"
      "seed = 42\n"
      "label = \"with # inside\"  # trailing\n"
      "flag = true\n"
      "other = false\n"
      "\n"
      "[estimate]\n"
      "K = 5\n"
      "tstar = 30.5\n"
      "[sim.cause1]\n"
      "x_coef = [-1, -1, -0.2, 0]\n"
      "empty = []\n"
      "dotted.key = 1\n"
      "K = 2\n";  // section persists; no clash with estimate.K
  const ConfigTree t = parse_config_text(text);
  CHECK(std::get<double>(t.at("seed")) == 42.0);
  CHECK(std::get<std::string>(t.at("label")) == "with # inside");
  CHECK(std::get<bool>(t.at("flag")) == true);
  CHECK(std::get<bool>(t.at("other")) == false);
  CHECK(std::get<double>(t.at("estimate.K")) == 5.0);
  CHECK(std::get<double>(t.at("estimate.tstar")) == 30.5);
  const auto& xc = std::get<std::vector<double>>(t.at("sim.cause1.x_coef"));
  CHECK(xc == std::vector<double>{-1, -1, -0.2, 0});
  CHECK(std::get<std::vector<double>>(t.at("sim.cause1.empty")).empty());
  CHECK(std::get<double>(t.at("sim.cause1.dotted.key")) == 1.0);
  CHECK(std::get<double>(t.at("sim.cause1.K")) == 2.0);

  // later assignment wins
  const ConfigTree t2 = parse_config_text("a = 1\na = 2\n");
  CHECK(std::get<double>(t2.at("a")) == 2.0);
}

TEST_CASE("config parser: malformed input is refused with a line number") {
  auto fails = [](const std::string& text) {
    return kind_of([&] { parse_config_text(text); });
  };
  CHECK(fails("just words\n") == ErrorKind::InputError);
  CHECK(fails("k = \"open\n") == ErrorKind::InputError);
  CHECK(fails("k = [1, 2\n") == ErrorKind::InputError);
  CHECK(fails("k = [1, x]\n") == ErrorKind::InputError);
  CHECK(fails("k = twelve\n") == ErrorKind::InputError);
  CHECK(fails("k =\n") == ErrorKind::InputError);
  CHECK(fails("[sec\nk = 1\n") == ErrorKind::InputError);
  CHECK(fails("bad key = 1\n") == ErrorKind::InputError);
  CHECK(fails("a..b = 1\n") == ErrorKind::InputError);
  try {
    parse_config_text("ok = 1\nk = [oops]\n");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(kind_of([] { load_config("/no/such/config.toml"); }) ==
        ErrorKind::InputError);
}

// ---------------------------------------------------------------------
// usage and error surfaces
// ---------------------------------------------------------------------

TEST_CASE("binary: help, usage errors, and the error object") {
  auto help = run_bin({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("ate") != std::string::npos);
  CHECK(help.out.find("simulate") != std::string::npos);

  auto none = run_bin({});
  CHECK(none.code == 2);
  CHECK(none.out.empty());
  CHECK(error_object(none)["error"]["kind"] == "UsageError");
  CHECK(error_object(none)["error"]["exit"] == 2);

  auto unknown = run_bin({"ate", "--no-such-flag"});
  CHECK(unknown.code == 2);

  auto nodata = run_bin({"ate", "--tstar", "30"});
  CHECK(nodata.code == 2);
  CHECK(error_object(nodata)["error"]["kind"] == "UsageError");

  auto nohorizon = run_bin({"ate", "--data", dataset_csv(60, 5)});
  CHECK(nohorizon.code == 2);
  CHECK(error_object(nohorizon)["error"]["message"]
            .get<std::string>()
            .find("tstar") != std::string::npos);

  auto badformat = run_bin({"ate", "--data", "x.csv", "--format", "xml"});
  CHECK(badformat.code == 2);  // rejected at flag level
}

TEST_CASE("binary: input errors exit 3, compute errors exit 4") {
  auto missing = run_bin({"ate", "--data", "/no/such/file.csv", "--tstar",
                          "30"});
  CHECK(missing.code == 3);
  CHECK(missing.out.empty());
  const json err = error_object(missing);
  CHECK(err["error"]["kind"] == "InputError");
  CHECK(err["error"]["exit"] == 3);

  const fs::path badcfg = tmp_dir() / "bad.toml";
  spit(badcfg, "k = [1,\n");
  auto cfg = run_bin({"oracle", "--config", badcfg.string()});
  CHECK(cfg.code == 3);
  CHECK(error_object(cfg)["error"]["message"]
            .get<std::string>()
            .find("line 1") != std::string::npos);

  auto noconf = run_bin({"oracle", "--config", "/no/such.toml"});
  CHECK(noconf.code == 3);

  // every row treated: the propensity fit cannot see two arms
  const fs::path onearm = tmp_dir() / "onearm.csv";
  {
    std::string csv = "time,event,treatment,x1\n";
    for (int i = 0; i < 50; ++i)
      csv += std::to_string(1.0 + i) + "," + std::to_string(1 + (i % 2)) +
             ",1," + std::to_string(0.01 * i) + "\n";
    spit(onearm, csv);
  }
  auto single = run_bin({"ate", "--data", onearm.string(), "--tstar", "20",
                         "--K", "1"});
  CHECK(single.code == 4);
  CHECK(error_object(single)["error"]["exit"] == 4);

  auto badn = run_bin({"simulate", "--n", "12.5", "--truth", "0"});
  CHECK(badn.code == 3);

  auto badidx = run_bin({"fd-check", "--data", dataset_csv(60, 5), "--tstar",
                         "30", "--index", "999"});
  CHECK(badidx.code == 3);
}

// ---------------------------------------------------------------------
// estimation commands
// ---------------------------------------------------------------------

TEST_CASE("ate: json output, config echo, determinism, library agreement") {
  const std::string data = dataset_csv(400, 31);
  auto r = run_bin({"ate", "--data", data, "--tstar", "30", "--K", "2",
                    "--seed", "5"});
  REQUIRE(r.code == 0);
  CHECK(r.err.find("warning") == std::string::npos);
  const json out = json::parse(r.out);
  CHECK(out["command"] == "ate");
  CHECK(out["config"]["estimate.K"] == 2.0);
  CHECK(out["config"]["estimate.learner"] == "cor");
  CHECK(out["config"]["seed"] == 5.0);
  CHECK(out["config"]["data.path"] == data);
  const json rep = out["report"];
  CHECK(rep["estimand"] == "ate");
  CHECK(rep["n"] == 400);
  CHECK(rep["K"] == 2);
  CHECK(rep["seed"] == 5);
  CHECK(!rep.contains("if_values"));

  // exact agreement with a direct library call
  CrossFitConfig cfg;
  cfg.K = 2;
  cfg.seed = 5;
  cfg.tstar = 30;
  const EstimateReport direct = estimate_ate(load_dataset(data), cfg);
  CHECK(rep["point"].get<double>() == direct.point);
  CHECK(rep["se"].get<double>() == direct.se);

  // same invocation, byte-identical output
  auto r2 = run_bin({"ate", "--data", data, "--tstar", "30", "--K", "2",
                     "--seed", "5"});
  CHECK(r2.code == 0);
  CHECK(r2.out == r.out);

  // --if-values includes one influence value per row
  auto r3 = run_bin({"ate", "--data", data, "--tstar", "30", "--K", "2",
                     "--seed", "5", "--if-values"});
  CHECK(json::parse(r3.out)["report"]["if_values"].size() == 400);
}

TEST_CASE("ate: csv format and atomic --out") {
  const std::string data = dataset_csv(400, 31);
  const std::vector<std::string> base{"ate",  "--data", data,  "--tstar",
                                      "30",   "--K",    "2",   "--seed",
                                      "5"};

  auto csv = [&] {
    auto args = base;
    args.push_back("--format");
    args.push_back("csv");
    return args;
  }();
  auto rc = run_bin(csv);
  REQUIRE(rc.code == 0);
  CHECK(rc.out.rfind("# command = ate\n", 0) == 0);
  CHECK(rc.out.find("# estimate.K = 2.0\n") != std::string::npos);
  CHECK(rc.out.find("estimand,cause,tstar,K,seed,level,n,point,se,") !=
        std::string::npos);

  // the CSV row round-trips to the same point estimate as the json run
  auto rj = run_bin(base);
  const double point = json::parse(rj.out)["report"]["point"].get<double>();
  std::istringstream lines(rc.out);
  std::string line, row;
  while (std::getline(lines, line))
    if (!line.empty() && line[0] != '#' && line.rfind("estimand", 0) != 0)
      row = line;
  std::vector<std::string> cells;
  std::istringstream cs(row);
  while (std::getline(cs, line, ',')) cells.push_back(line);
  REQUIRE(cells.size() == 12);
  CHECK(std::strtod(cells[7].c_str(), nullptr) == point);

  // --out writes the same bytes and leaves stdout clean
  const fs::path outfile = tmp_dir() / "ate_out.json";
  fs::remove(outfile);
  auto args = base;
  args.push_back("--out");
  args.push_back(outfile.string());
  auto ro = run_bin(args);
  CHECK(ro.code == 0);
  CHECK(ro.out.empty());
  CHECK(slurp(outfile.string()) == rj.out);

  // failure to write leaves nothing behind and exits as bad input
  auto bad = base;
  bad.push_back("--out");
  bad.push_back("/no/such/dir/out.json");
  auto rb = run_bin(bad);
  CHECK(rb.code == 3);
  CHECK(rb.out.empty());
}

TEST_CASE("vim and rank: outputs, coordinate checks, csv ordering") {
  const std::string data = dataset_csv(300, 77);
  auto rv = run_bin({"vim", "--data", data, "--tstar", "30", "--K", "2",
                     "--seed", "5", "--l", "1"});
  REQUIRE(rv.code == 0);
  const json vrep = json::parse(rv.out)["report"];
  CHECK(vrep["estimand"] == "vim");
  CHECK(vrep["l"] == 1);
  CHECK(vrep["omega"] == vrep["point"]);
  CHECK(vrep["p_value"].get<double>() >= 0.0);
  CHECK(vrep["p_value"].get<double>() <= 1.0);

  auto rnol = run_bin({"vim", "--data", data, "--tstar", "30"});
  CHECK(rnol.code == 2);

  auto rr = run_bin({"rank", "--data", data, "--tstar", "30", "--K", "2",
                     "--seed", "5"});
  REQUIRE(rr.code == 0);
  CHECK(rr.out.rfind("# command = rank\n", 0) == 0);  // csv by default
  std::istringstream lines(rr.out);
  std::string line;
  std::vector<std::string> rows;
  bool saw_header = false;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("rank,l,omega", 0) == 0) {
      saw_header = true;
      continue;
    }
    rows.push_back(line);
  }
  CHECK(saw_header);
  REQUIRE(rows.size() == 4);
  // ranks count up and p-values never decrease
  double prev_p = -1.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> cells;
    std::istringstream cs(rows[i]);
    std::string cell;
    while (std::getline(cs, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 11);
    CHECK(cells[0] == std::to_string(i + 1));
    const double p = std::strtod(cells[9].c_str(), nullptr);
    CHECK(p >= prev_p);
    prev_p = p;
  }

  auto rrj = run_bin({"rank", "--data", data, "--tstar", "30", "--K", "2",
                      "--seed", "5", "--format", "json"});
  REQUIRE(rrj.code == 0);
  CHECK(json::parse(rrj.out)["reports"].size() == 4);
}

// ---------------------------------------------------------------------
// config files, precedence, environment
// ---------------------------------------------------------------------

TEST_CASE("config file drives a run; flags override it; unknown keys warn") {
  const std::string data = dataset_csv(400, 31);
  const fs::path cfg = tmp_dir() / "est.toml";
  spit(cfg, "seed = 9\n"
            "[data]\n"
            "path = \"" + data + "\"\n"
            "[estimate]\n"
            "K = 2\n"
            "tstar = 30\n"
            "learner = \"cor\"\n"
            "[bogus]\n"
            "z = 1\n");

  auto r = run_bin({"ate", "--config", cfg.string()});
  REQUIRE(r.code == 0);
  const json out = json::parse(r.out);
  CHECK(out["config"]["seed"] == 9.0);
  CHECK(out["config"]["estimate.K"] == 2.0);
  CHECK(out["report"]["seed"] == 9);
  CHECK(r.err.find("unused config key 'bogus.z'") != std::string::npos);

  auto rf = run_bin({"ate", "--config", cfg.string(), "--K", "3", "--seed",
                     "11"});
  REQUIRE(rf.code == 0);
  const json outf = json::parse(rf.out);
  CHECK(outf["config"]["estimate.K"] == 3.0);
  CHECK(outf["config"]["seed"] == 11.0);
  CHECK(outf["report"]["K"] == 3);
  CHECK(outf["report"]["seed"] == 11);
}

TEST_CASE("thread count: flag beats environment beats config") {
  const std::string data = dataset_csv(400, 31);
  const fs::path cfg = tmp_dir() / "thr.toml";
  spit(cfg, "threads = 1\n");
  const std::vector<std::string> base{"ate",  "--data",  data, "--tstar",
                                      "30",   "--K",     "1",  "--seed",
                                      "5",    "--config", cfg.string()};

  auto from_cfg = run_bin(base);
  REQUIRE(from_cfg.code == 0);
  CHECK(json::parse(from_cfg.out)["config"]["threads"] == 1.0);

  auto from_env = run_bin(base, "LYL_THREADS=2 ");
  REQUIRE(from_env.code == 0);
  CHECK(json::parse(from_env.out)["config"]["threads"] == 2.0);

  auto flag_args = base;
  flag_args.push_back("--threads");
  flag_args.push_back("1");
  auto from_flag = run_bin(flag_args, "LYL_THREADS=2 ");
  REQUIRE(from_flag.code == 0);
  CHECK(json::parse(from_flag.out)["config"]["threads"] == 1.0);

  // thread count must not move the numbers
  CHECK(json::parse(from_env.out)["report"]["point"] ==
        json::parse(from_cfg.out)["report"]["point"]);

  auto bad = run_bin(base, "LYL_THREADS=abc ");
  CHECK(bad.code == 3);
}

// ---------------------------------------------------------------------
// oracle / simulate / fd-check
// ---------------------------------------------------------------------

TEST_CASE("oracle: values, internal consistency, determinism, csv") {
  auto r = run_bin({"oracle", "--draws", "2000", "--seed", "3"});
  REQUIRE(r.code == 0);
  const json o = json::parse(r.out)["oracle"];
  CHECK(o["psi_draws"] == 2000);
  const double psi1 = o["psi1"].get<double>();
  const double se = o["psi1_se"].get<double>();
  CHECK(psi1 < -9.0);
  CHECK(psi1 > -10.3);
  CHECK(std::abs(psi1 - (-9.6157024912)) < 4 * se);
  CHECK(o["chi"].get<double>() == 1.0 / 3.0);
  REQUIRE(o["gamma"].size() == 4);
  REQUIRE(o["omega"].size() == 4);
  for (int l = 0; l < 4; ++l)
    CHECK(o["omega"][l].get<double>() ==
          doctest::Approx(o["gamma"][l].get<double>() * 3.0).epsilon(1e-12));

  auto r2 = run_bin({"oracle", "--draws", "2000", "--seed", "3"});
  CHECK(r2.out == r.out);

  auto rc = run_bin({"oracle", "--draws", "2000", "--seed", "3", "--format",
                     "csv"});
  REQUIRE(rc.code == 0);
  CHECK(rc.out.find("parameter,value,mc_se\n") != std::string::npos);
  CHECK(rc.out.find("psi1,") != std::string::npos);
  CHECK(rc.out.find("omega4,") != std::string::npos);
}

TEST_CASE("simulate: explicit truth, oracle truth, replicated summaries") {
  auto r = run_bin({"simulate", "--methods", "cor", "--n", "120", "--reps",
                    "2", "--truth", "-9.6157024912", "--seed", "77"});
  REQUIRE(r.code == 0);
  const json out = json::parse(r.out);
  CHECK(out["config"]["mc.truth"] == -9.6157024912);
  CHECK(out["config"]["mc.methods"] == "cor");
  const json summary = out["summary"];
  CHECK(summary["truth"] == -9.6157024912);
  REQUIRE(summary["cells"].size() == 1);
  CHECK(summary["cells"][0]["n"] == 120);
  CHECK(summary["cells"][0]["reps_done"] == 2);

  auto r2 = run_bin({"simulate", "--methods", "cor", "--n", "120", "--reps",
                     "2", "--truth", "-9.6157024912", "--seed", "77"});
  CHECK(r2.out == r.out);

  auto rc = run_bin({"simulate", "--methods", "cor", "--n", "120", "--reps",
                     "2", "--truth", "-9.6157024912", "--seed", "77",
                     "--format", "csv"});
  REQUIRE(rc.code == 0);
  CHECK(rc.out.find("method,n,reps,done,failures,") != std::string::npos);

  // with no truth given the oracle supplies it
  const fs::path cfg = tmp_dir() / "sim.toml";
  spit(cfg, "[mc]\noracle_draws = 2000\n");
  auto ro = run_bin({"simulate", "--config", cfg.string(), "--methods",
                     "cor", "--n", "100", "--reps", "1", "--seed", "7"});
  REQUIRE(ro.code == 0);
  CHECK(ro.err.find("computing oracle truth") != std::string::npos);
  const double truth = json::parse(ro.out)["summary"]["truth"].get<double>();
  CHECK(std::abs(truth - (-9.6157024912)) < 0.6);  // 2000-draw oracle

  // built-in importance truths exist for cause 1 only
  auto rbad = run_bin({"simulate", "--methods", "cor", "--n", "100", "--reps",
                       "1", "--l", "1", "--j", "2"});
  CHECK(rbad.code == 3);
}

namespace {

// The probe's plug-in law is saturated over (arm, covariate) cells, so
// it needs a handful of rows per cell: binary covariates, lattice times.
std::string discrete_csv() {
  const fs::path p = tmp_dir() / "discrete.csv";
  if (fs::exists(p)) return p.string();
  std::vector<double> t, xv;
  std::vector<int> ev, a;
  Rng rng(29);
  for (int arm = 0; arm < 2; ++arm)
    for (int x1 = 0; x1 < 2; ++x1)
      for (int x2 = 0; x2 < 2; ++x2)
        for (int rep = 0; rep < 2; ++rep) {
          t.push_back(15.0);
          ev.push_back(0);
          a.push_back(arm);
          xv.push_back(x1);
          xv.push_back(x2);
        }
  for (std::size_t i = 0; i < 180; ++i) {
    const double x1 = rng.uniform() < 0.5 ? 1.0 : 0.0;
    const double x2 = rng.uniform() < 0.5 ? 1.0 : 0.0;
    const int arm = rng.uniform() < 0.5 ? 1 : 0;
    const double T = 1.0 + static_cast<double>(rng.below(12)) + arm;
    const int cause = rng.uniform() < 0.6 ? 1 : 2;
    const double C = 3.0 + 2.0 * static_cast<double>(rng.below(4));
    t.push_back(std::min(T, C));
    ev.push_back(T <= C ? cause : 0);
    a.push_back(arm);
    xv.push_back(x1);
    xv.push_back(x2);
  }
  save_dataset(SurvivalDataset(t, ev, a, xv, 2), p.string());
  return p.string();
}

}  // namespace

TEST_CASE("fd-check: probe output and schema overrides") {
  const std::string data = discrete_csv();
  auto r = run_bin({"fd-check", "--data", data, "--tstar", "10", "--index",
                    "3", "--eps", "1e-4"});
  REQUIRE(r.code == 0);
  const json chk = json::parse(r.out)["check"];
  const double fd = chk["fd"].get<double>();
  const double eif = chk["eif"].get<double>();
  const double gap = chk["gap"].get<double>();
  CHECK(std::isfinite(fd));
  CHECK(gap == doctest::Approx(std::abs(fd - eif)).epsilon(1e-12));
  CHECK(gap < 0.05 * std::max(1.0, std::abs(eif)));

  // the same rows under renamed columns give the same probe
  SurvivalDataset d = load_dataset(data);
  const fs::path renamed = tmp_dir() / "renamed.csv";
  CsvSchema schema;
  schema.time = "t";
  schema.event = "ev";
  schema.treatment = "arm";
  schema.covariates = {"a", "b"};
  save_dataset(d, renamed.string(), schema);
  auto r2 = run_bin({"fd-check", "--data", renamed.string(), "--time-col",
                     "t", "--event-col", "ev", "--treatment-col", "arm",
                     "--covariate-cols", "a,b", "--tstar", "10", "--index",
                     "3", "--eps", "1e-4"});
  REQUIRE(r2.code == 0);
  CHECK(json::parse(r2.out)["check"]["fd"] == chk["fd"]);

  auto rcsv = run_bin({"fd-check", "--data", data, "--tstar", "10",
                       "--index", "3", "--format", "csv"});
  REQUIRE(rcsv.code == 0);
  CHECK(rcsv.out.find("fd,eif,gap\n") != std::string::npos);
}
