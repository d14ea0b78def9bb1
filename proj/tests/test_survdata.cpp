#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "lyl/common.hpp"
#include "lyl/dataset.hpp"
#include "lyl/folds.hpp"
#include "lyl/report.hpp"
#include "lyl/step_fn.hpp"

#include <json.hpp>

using namespace lyl;
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

fs::path tmp_dir() {
  auto p = fs::temp_directory_path() / "lyl_test_survdata";
  fs::create_directories(p);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------
// StepFn
// ---------------------------------------------------------------------

TEST_CASE("step function merges ties and sorts times at construction") {
  StepFn f({2.0, 1.0, 2.0}, {0.2, 0.1, 0.3});
  CHECK(f.n_jumps() == 2);
  CHECK(f.times()[0] == 1.0);
  CHECK(f.times()[1] == 2.0);
  CHECK(f.sizes()[0] == 0.1);
  CHECK(f.sizes()[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(f.value(0.5) == 0.0);
  CHECK(f.value(1.0) == 0.1);
  CHECK(f.value_left(1.0) == 0.0);
  CHECK(f.value(1.5) == 0.1);
  CHECK(f.value(2.0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(f.value_left(2.0) == 0.1);
  CHECK(f.value(100.0) == f.final_value());
  CHECK(f.jump_at(2.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(f.jump_at(1.5) == 0.0);
}

TEST_CASE("constant step function has no jumps") {
  StepFn c = StepFn::constant(3.5);
  CHECK(c.n_jumps() == 0);
  CHECK(c.value(0.0) == 3.5);
  CHECK(c.value(1e9) == 3.5);
  CHECK(c.value_left(0.0) == 3.5);
  CHECK(c.final_value() == 3.5);
}

TEST_CASE("scaling multiplies jumps and keeps the baseline") {
  StepFn f({1.0, 2.0}, {0.1, 0.5}, 0.0);
  StepFn g = f.scaled(2.0);
  CHECK(g.value(2.0) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(g.value(1.0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(g.baseline() == 0.0);
  StepFn h = StepFn({1.0}, {0.5}, 2.0).scaled(3.0);
  CHECK(h.baseline() == 2.0);
  CHECK(h.value(1.0) == doctest::Approx(3.5).epsilon(1e-15));
}

TEST_CASE("truncation drops jumps beyond the horizon") {
  StepFn f({1.0, 2.0, 3.0}, {0.1, 0.2, 0.3});
  StepFn g = f.truncated(2.0);
  CHECK(g.n_jumps() == 2);
  CHECK(g.final_value() == doctest::Approx(0.3).epsilon(1e-15));
  StepFn h = f.truncated(0.5);
  CHECK(h.n_jumps() == 0);
  CHECK(h.final_value() == 0.0);
}

TEST_CASE("cumulative-hazard check requires zero baseline and nonnegative jumps") {
  CHECK(StepFn({1.0}, {0.5}).is_cumulative_hazard());
  CHECK(StepFn({}, {}).is_cumulative_hazard());
  CHECK_FALSE(StepFn({1.0}, {-0.1}).is_cumulative_hazard());
  CHECK_FALSE(StepFn({1.0}, {0.5}, 0.5).is_cumulative_hazard());
}

TEST_CASE("step function rejects non-finite or negative jump times") {
  CHECK(kind_of([] { StepFn({-1.0}, {0.1}); }) == ErrorKind::NonFiniteValue);
  CHECK(kind_of([] {
          StepFn({std::nan("")}, {0.1});
        }) == ErrorKind::NonFiniteValue);
  CHECK(kind_of([] {
          StepFn({1.0}, {std::numeric_limits<double>::infinity()});
        }) == ErrorKind::NonFiniteValue);
}

// ---------------------------------------------------------------------
// Stieltjes sums
// ---------------------------------------------------------------------

TEST_CASE("stieltjes sum of a constant against a single jump") {
  StepFn lam({1.0}, {0.5});
  auto g = [](double) { return 2.0; };
  CHECK(stieltjes_integrate(g, lam, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(stieltjes_integrate(g, lam, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(stieltjes_integrate(g, lam, 0.999) == 0.0);
}

TEST_CASE("stieltjes sum respects the half-open upper endpoint") {
  StepFn lam({1.0, 2.0, 3.0}, {0.1, 0.1, 0.1});
  auto id = [](double s) { return s; };
  CHECK(stieltjes_integrate(id, lam, 2.5) ==
        doctest::Approx(0.3).epsilon(1e-14));
  CHECK(stieltjes_integrate(id, lam, 3.0) ==
        doctest::Approx(0.6).epsilon(1e-14));
  CHECK(stieltjes_integrate(id, lam, 0.5) == 0.0);
}

// ---------------------------------------------------------------------
// survival_from_hazard
// ---------------------------------------------------------------------

TEST_CASE("product-limit survival from a cumulative hazard") {
  StepFn lam({1.0, 2.0}, {0.2, 0.3});
  StepFn s = survival_from_hazard(lam);
  CHECK(s.value(0.5) == 1.0);
  CHECK(s.value(1.0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(s.value_left(1.0) == 1.0);
  CHECK(s.value(2.0) == doctest::Approx(0.56).epsilon(1e-15));
  CHECK(s.value(50.0) == doctest::Approx(0.56).epsilon(1e-15));
}

TEST_CASE("unit hazard jump is rejected in product-limit mode") {
  CHECK(kind_of([] {
          survival_from_hazard(StepFn({1.0}, {1.0}));
        }) == ErrorKind::SuperunitJump);
  CHECK(kind_of([] {
          survival_from_hazard(StepFn({1.0}, {1.5}));
        }) == ErrorKind::SuperunitJump);
  // exponential form tolerates any nonnegative jump
  StepFn s = survival_from_hazard(StepFn({1.0}, {1.5}), true);
  CHECK(s.value(1.0) == doctest::Approx(std::exp(-1.5)).epsilon(1e-15));
}

TEST_CASE("exponential-form survival equals exp(-cumulative hazard)") {
  StepFn lam({1.0, 3.0}, {0.5, 0.25});
  StepFn s = survival_from_hazard(lam, true);
  CHECK(s.value(0.5) == 1.0);
  CHECK(s.value(1.0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(s.value(3.0) == doctest::Approx(std::exp(-0.75)).epsilon(1e-15));
}

// ---------------------------------------------------------------------
// SurvivalDataset validation
// ---------------------------------------------------------------------

TEST_CASE("dataset accepts valid rows and counts events") {
  SurvivalDataset ds({1.0, 2.0, 3.0}, {0, 1, 2}, {0, 1, 1},
                     {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, 2);
  CHECK(ds.n() == 3);
  CHECK(ds.d() == 2);
  CHECK(ds.count_events(0) == 1);
  CHECK(ds.count_events(1) == 1);
  CHECK(ds.count_events(2) == 1);
  CHECK(ds.x(1, 0) == 0.3);
  CHECK(ds.x_row(2)[1] == 0.6);
  ObservationRecord r = ds.record(1);
  CHECK(r.time == 2.0);
  CHECK(r.event == 1);
  CHECK(r.treatment == 1);
  CHECK(r.x == std::vector<double>{0.3, 0.4});
}

TEST_CASE("dataset rejects bad codes and non-finite values with typed errors") {
  CHECK(kind_of([] {
          SurvivalDataset({-1.0}, {0}, {0}, {0.0}, 1);
        }) == ErrorKind::NonFiniteValue);
  CHECK(kind_of([] {
          SurvivalDataset({std::nan("")}, {0}, {0}, {0.0}, 1);
        }) == ErrorKind::NonFiniteValue);
  CHECK(kind_of([] {
          SurvivalDataset({1.0}, {3}, {0}, {0.0}, 1);
        }) == ErrorKind::BadEventCode);
  CHECK(kind_of([] {
          SurvivalDataset({1.0}, {0}, {2}, {0.0}, 1);
        }) == ErrorKind::BadTreatmentCode);
  CHECK(kind_of([] {
          SurvivalDataset({1.0}, {0}, {0}, {std::nan("")}, 1);
        }) == ErrorKind::NonFiniteValue);
  CHECK(kind_of([] {
          SurvivalDataset({1.0, 2.0}, {0}, {0}, {0.0, 0.0}, 1);
        }) == ErrorKind::InputError);
}

TEST_CASE("subset keeps rows in the requested order") {
  SurvivalDataset ds({1.0, 2.0, 3.0}, {0, 1, 2}, {0, 1, 1},
                     {10, 20, 30, 40, 50, 60}, 2);
  SurvivalDataset sub = ds.subset({2, 0});
  CHECK(sub.n() == 2);
  CHECK(sub.time(0) == 3.0);
  CHECK(sub.time(1) == 1.0);
  CHECK(sub.x(0, 1) == 60);
  CHECK(sub.x(1, 0) == 10);
}

// ---------------------------------------------------------------------
// CSV I/O
// ---------------------------------------------------------------------

TEST_CASE("csv round trip is value-exact and byte-stable") {
  Rng rng(12345);
  const std::size_t n = 64, d = 3;
  std::vector<double> t, xv;
  std::vector<int> e, a;
  for (std::size_t i = 0; i < n; ++i) {
    t.push_back(rng.exponential() * 12.3456789);
    e.push_back(static_cast<int>(rng.below(3)));
    a.push_back(static_cast<int>(rng.below(2)));
    for (std::size_t c = 0; c < d; ++c) xv.push_back(rng.uniform(-5.0, 5.0));
  }
  t[0] = 0.1;  // not exactly representable: exercises shortest round trip
  t[1] = 0.0;
  SurvivalDataset ds(t, e, a, xv, d);

  auto dir = tmp_dir();
  auto p1 = (dir / "rt1.csv").string();
  auto p2 = (dir / "rt2.csv").string();
  save_dataset(ds, p1);
  SurvivalDataset back = load_dataset(p1);
  REQUIRE(back.n() == n);
  REQUIRE(back.d() == d);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(back.time(i) == ds.time(i));  // bit-exact
    CHECK(back.event(i) == ds.event(i));
    CHECK(back.treatment(i) == ds.treatment(i));
    for (std::size_t c = 0; c < d; ++c) CHECK(back.x(i, c) == ds.x(i, c));
  }
  save_dataset(back, p2);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("csv loader reports missing columns and bad fields by kind") {
  auto dir = tmp_dir();
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir / name);
    out << body;
    return (dir / name).string();
  };

  auto no_event = write("no_event.csv", "time,treatment,x1\n1.0,0,0.5\n");
  CHECK(kind_of([&] { load_dataset(no_event); }) == ErrorKind::MissingColumn);

  auto no_cov = write("no_cov.csv", "time,event,treatment\n1.0,0,0\n");
  CHECK(kind_of([&] { load_dataset(no_cov); }) == ErrorKind::MissingColumn);

  auto bad_event =
      write("bad_event.csv", "time,event,treatment,x1\n1.0,7,0,0.5\n");
  CHECK(kind_of([&] { load_dataset(bad_event); }) == ErrorKind::BadEventCode);

  auto bad_treat =
      write("bad_treat.csv", "time,event,treatment,x1\n1.0,0,9,0.5\n");
  CHECK(kind_of([&] { load_dataset(bad_treat); }) ==
        ErrorKind::BadTreatmentCode);

  auto bad_time =
      write("bad_time.csv", "time,event,treatment,x1\nnan,0,0,0.5\n");
  CHECK(kind_of([&] { load_dataset(bad_time); }) == ErrorKind::NonFiniteValue);

  auto junk = write("junk.csv", "time,event,treatment,x1\nabc,0,0,0.5\n");
  CHECK_THROWS_AS(load_dataset(junk), Error);

  auto ragged = write("ragged.csv", "time,event,treatment,x1\n1.0,0,0\n");
  CHECK(kind_of([&] { load_dataset(ragged); }) == ErrorKind::InputError);
}

TEST_CASE("csv schema can rename columns and select covariates") {
  auto dir = tmp_dir();
  auto p = (dir / "schema.csv").string();
  {
    std::ofstream out(p);
    out << "age,status,arm,stop,z\n0.5,1,0,2.5,-1.0\n0.7,0,1,3.5,2.0\n";
  }
  CsvSchema sch;
  sch.time = "stop";
  sch.event = "status";
  sch.treatment = "arm";
  sch.covariates = {"z"};
  SurvivalDataset ds = load_dataset(p, sch);
  CHECK(ds.n() == 2);
  CHECK(ds.d() == 1);
  CHECK(ds.time(0) == 2.5);
  CHECK(ds.x(1, 0) == 2.0);

  // default: every unclaimed column becomes a covariate, header order
  CsvSchema sch2;
  sch2.time = "stop";
  sch2.event = "status";
  sch2.treatment = "arm";
  SurvivalDataset ds2 = load_dataset(p, sch2);
  CHECK(ds2.d() == 2);
  CHECK(ds2.x(0, 0) == 0.5);   // age
  CHECK(ds2.x(0, 1) == -1.0);  // z
}

// ---------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------

TEST_CASE("fold sizes concentrate near n/K and partition the rows") {
  const std::size_t n = 10000;
  const int K = 10;
  FoldPlan plan = make_folds(n, K, 777);
  REQUIRE(plan.fold_of.size() == n);
  auto sizes = plan.fold_sizes();
  REQUIRE(sizes.size() == static_cast<std::size_t>(K));
  std::size_t total = 0;
  const double mean = static_cast<double>(n) / K;
  const double sd = std::sqrt(n * (1.0 / K) * (1.0 - 1.0 / K));
  for (auto s : sizes) {
    total += s;
    CHECK(std::abs(static_cast<double>(s) - mean) < 5.0 * sd);
  }
  CHECK(total == n);

  std::vector<char> seen(n, 0);
  for (int k = 0; k < K; ++k) {
    auto idx = plan.fold_indices(k);
    auto comp = plan.complement_indices(k);
    CHECK(idx.size() + comp.size() == n);
    for (auto i : idx) {
      CHECK(plan.fold_of[i] == k);
      seen[i] = 1;
    }
    for (auto i : comp) CHECK(plan.fold_of[i] != k);
  }
  CHECK(std::count(seen.begin(), seen.end(), 1) ==
        static_cast<std::ptrdiff_t>(n));
}

TEST_CASE("single-fold plan trains and evaluates on the full sample") {
  FoldPlan plan = make_folds(20, 1, 5);
  CHECK(plan.K == 1);
  CHECK(plan.fold_indices(0).size() == 20);
  CHECK(plan.complement_indices(0).size() == 20);
  CHECK(plan.fold_indices(0) == plan.complement_indices(0));
}

TEST_CASE("infeasible fold requests are rejected") {
  CHECK(kind_of([] { make_folds(10, 0, 1); }) == ErrorKind::InfeasibleFolds);
  CHECK(kind_of([] { make_folds(10, -2, 1); }) == ErrorKind::InfeasibleFolds);
  CHECK(kind_of([] { make_folds(3, 4, 1); }) == ErrorKind::InfeasibleFolds);
}

TEST_CASE("empty folds are redrawn and plans are seed-deterministic") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    FoldPlan plan = make_folds(4, 3, seed);
    for (auto s : plan.fold_sizes()) CHECK(s >= 1);
    CHECK(plan.redraws >= 0);
    FoldPlan again = make_folds(4, 3, seed);
    CHECK(plan.fold_of == again.fold_of);
    CHECK(plan.redraws == again.redraws);
  }
}

// ---------------------------------------------------------------------
// RNG determinism and seed derivation
// ---------------------------------------------------------------------

TEST_CASE("rng streams are reproducible and seed-sensitive") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    auto ua = a.next_u64(), ub = b.next_u64(), uc = c.next_u64();
    all_equal = all_equal && (ua == ub);
    any_diff = any_diff || (ua != uc);
  }
  CHECK(all_equal);
  CHECK(any_diff);

  Rng u(7);
  for (int i = 0; i < 1000; ++i) {
    double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("derived seeds separate by path and stay reproducible") {
  auto s1 = derive_seed(99, {1, 2});
  auto s2 = derive_seed(99, {1, 2});
  auto s3 = derive_seed(99, {2, 1});
  auto s4 = derive_seed(99, {1});
  auto s5 = derive_seed(100, {1, 2});
  CHECK(s1 == s2);
  CHECK(s1 != s3);
  CHECK(s1 != s4);
  CHECK(s1 != s5);
}

TEST_CASE("normal quantile inverts the normal cdf") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(normal_quantile(0.975) ==
        doctest::Approx(1.959963984540054).epsilon(1e-10));
  for (double z = -5.0; z <= 5.0; z += 0.25) {
    CHECK(normal_quantile(normal_cdf(z)) == doctest::Approx(z).epsilon(1e-8));
  }
}

TEST_CASE("parallel map results do not depend on the worker count") {
  const std::size_t n = 1000;
  std::vector<double> one(n), four(n);
  auto fill = [](std::vector<double>& out) {
    return [&out](std::size_t i) {
      Rng r(derive_seed(5, {i}));
      out[i] = r.uniform();
    };
  };
  parallel_for(n, 1, fill(one));
  parallel_for(n, 4, fill(four));
  CHECK(one == four);
}

TEST_CASE("parallel map propagates worker exceptions") {
  CHECK_THROWS_AS(parallel_for(8, 4,
                               [](std::size_t i) {
                                 if (i == 3)
                                   throw Error(ErrorKind::InputError, "boom");
                               }),
                  Error);
}

// ---------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------

TEST_CASE("estimate report serializes with full precision") {
  EstimateReport r;
  r.estimand = "ate";
  r.cause = 1;
  r.tstar = 30.0;
  r.K = 5;
  r.seed = 123;
  r.level = 0.95;
  r.n = 4;
  r.point = -9.615702491234567;
  r.se = 0.0123456789012345;
  r.ci_lower = r.point - normal_quantile(0.975) * r.se;
  r.ci_upper = r.point + normal_quantile(0.975) * r.se;
  r.if_values = {0.25, -0.5, 1.0 / 3.0, 0.0};
  FoldDiagnostic fd;
  fd.fold = 1;
  fd.n_eval = 2;
  fd.n_train = 2;
  fd.hazard_learner = "cox";
  fd.censoring_learner = "cox";
  fd.propensity_learner = "logit";
  r.folds = {fd};

  auto j = nlohmann::json::parse(report_to_json(r));
  CHECK(j["estimand"] == "ate");
  CHECK(j["cause"] == 1);
  CHECK(j["tstar"].get<double>() == 30.0);
  CHECK(j["K"] == 5);
  CHECK(j["n"] == 4);
  CHECK(j["point"].get<double>() == r.point);  // bit-exact through JSON
  CHECK(j["se"].get<double>() == r.se);
  CHECK(j["ci_lower"].get<double>() == r.ci_lower);
  CHECK(j["ci_upper"].get<double>() == r.ci_upper);
  REQUIRE(j["if_values"].size() == 4);
  CHECK(j["if_values"][2].get<double>() == 1.0 / 3.0);
  CHECK(j["folds"][0]["hazard_learner"] == "cox");

  auto j2 = nlohmann::json::parse(report_to_json(r, false));
  CHECK_FALSE(j2.contains("if_values"));
}

TEST_CASE("vim report carries the projection block") {
  VimReport v;
  v.estimand = "vim";
  v.l = 2;
  v.gamma = 1.5;
  v.chi = 1.0 / 3.0;
  v.omega = 4.5;
  v.point = 4.5;
  v.tst = 3.2;
  v.p_value = 0.0013;
  auto j = nlohmann::json::parse(vim_report_to_json(v));
  CHECK(j["l"] == 2);
  CHECK(j["gamma"].get<double>() == 1.5);
  CHECK(j["chi"].get<double>() == 1.0 / 3.0);
  CHECK(j["omega"].get<double>() == 4.5);
  CHECK(j["tst"].get<double>() == 3.2);
  CHECK(j["p_value"].get<double>() == 0.0013);

  auto arr = nlohmann::json::parse(vim_reports_to_json({v, v}, false));
  REQUIRE(arr.is_array());
  CHECK(arr.size() == 2);
}

TEST_CASE("atomic text writes replace the target completely or not at all") {
  auto dir = tmp_dir();
  auto p = (dir / "atomic.txt").string();
  write_text_atomic(p, "first");
  CHECK(slurp(p) == "first");
  write_text_atomic(p, "second, longer content");
  CHECK(slurp(p) == "second, longer content");
  // no stray temp files left behind
  int files = 0;
  for (auto& ent : fs::directory_iterator(dir)) {
    auto name = ent.path().filename().string();
    if (name.find("atomic") != std::string::npos) ++files;
  }
  CHECK(files == 1);
}
