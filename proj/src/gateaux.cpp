#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "lyl/eif.hpp"

// Discrete-support plug-in: every (a, x) cell carries weighted
// Nelson-Aalen cause hazards (d_j(s)/Y(s)) and an events-first censoring
// hazard (c(s)/(Y(s) - d(s))), which makes Y(s) = W(a,x) S(s-) S_C(s-)
// an exact identity and the influence function the exact derivative of
// the plug-in functional along Dirac directions.

namespace lyl {

namespace {

constexpr std::size_t kMinCell = 5;

bool same_row(const double* a, const double* b, std::size_t d) {
  for (std::size_t c = 0; c < d; ++c)
    if (a[c] != b[c]) return false;
  return true;
}

struct ArmHazards {
  StepFn l1{{}, {}};
  StepFn l2{{}, {}};
  StepFn lc{{}, {}};
};

// Weighted Nelson-Aalen hazards for the rows of one (a, x) cell.
ArmHazards cell_hazards(const SurvivalDataset& data,
                        const std::vector<std::size_t>& rows,
                        const std::vector<double>& w) {
  struct Rec {
    double t;
    int ev;
    double w;
  };
  std::vector<Rec> rec;
  rec.reserve(rows.size());
  double at_risk = 0.0;
  for (std::size_t i : rows) {
    rec.push_back({data.time(i), data.event(i), w[i]});
    at_risk += w[i];
  }
  std::sort(rec.begin(), rec.end(),
            [](const Rec& a, const Rec& b) { return a.t < b.t; });

  std::vector<double> t1, j1, t2, j2, tc, jc;
  std::size_t k = 0;
  while (k < rec.size()) {
    const double s = rec[k].t;
    double d1 = 0.0, d2 = 0.0, c = 0.0;
    while (k < rec.size() && rec[k].t == s) {
      if (rec[k].ev == 1) d1 += rec[k].w;
      else if (rec[k].ev == 2) d2 += rec[k].w;
      else c += rec[k].w;
      ++k;
    }
    if (d1 > 0.0) { t1.push_back(s); j1.push_back(d1 / at_risk); }
    if (d2 > 0.0) { t2.push_back(s); j2.push_back(d2 / at_risk); }
    if (c > 0.0) {
      const double jump = c / (at_risk - d1 - d2);
      // a jump of (numerically) one empties the cell: the censoring
      // survival is consumed only strictly before such an atom, so it
      // can be dropped without changing any evaluated quantity
      if (jump < 1.0 - 1e-9) { tc.push_back(s); jc.push_back(jump); }
    }
    at_risk -= d1 + d2 + c;
  }
  ArmHazards out;
  out.l1 = StepFn(std::move(t1), std::move(j1));
  out.l2 = StepFn(std::move(t2), std::move(j2));
  out.lc = StepFn(std::move(tc), std::move(jc));
  return out;
}

struct XCell {
  const double* x;                   // representative row
  std::vector<std::size_t> rows[2];  // per arm
};

std::vector<XCell> build_cells(const SurvivalDataset& data) {
  const std::size_t d = data.d();
  std::vector<XCell> cells;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const double* xi = data.x_row(i);
    XCell* hit = nullptr;
    for (XCell& c : cells)
      if (same_row(c.x, xi, d)) { hit = &c; break; }
    if (hit == nullptr) {
      cells.push_back(XCell{xi, {{}, {}}});
      hit = &cells.back();
    }
    hit->rows[data.treatment(i)].push_back(i);
  }
  for (const XCell& c : cells)
    if (c.rows[0].size() < kMinCell || c.rows[1].size() < kMinCell)
      throw Error(ErrorKind::SparseCell,
                  "plug-in: an (arm, covariate) cell holds fewer than 5 rows");
  return cells;
}

double cell_weight(const std::vector<std::size_t>& rows,
                   const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i : rows) s += w[i];
  return s;
}

}  // namespace

double plugin_years_lost_ate(const SurvivalDataset& data,
                             const std::vector<double>& weights, int j,
                             double tstar) {
  if (weights.size() != data.n())
    throw Error(ErrorKind::InputError, "plug-in: one weight per row required");
  if (!(tstar > 0.0))
    throw Error(ErrorKind::InputError, "plug-in: horizon must be > 0");
  for (double wi : weights)
    if (!(wi >= 0.0) || !std::isfinite(wi))
      throw Error(ErrorKind::InputError, "plug-in: weights must be >= 0");

  const std::vector<XCell> cells = build_cells(data);
  double psi = 0.0;
  double total = 0.0;
  for (const XCell& cell : cells) {
    double lj[2];
    for (int a = 0; a < 2; ++a) {
      const ArmHazards hz = cell_hazards(data, cell.rows[a], weights);
      const CauseSystem sys = compose_cause_system(hz.l1, hz.l2);
      lj[a] = years_lost(sys, j, tstar).value;
    }
    const double wx =
        cell_weight(cell.rows[0], weights) + cell_weight(cell.rows[1], weights);
    psi += wx * (lj[1] - lj[0]);
    total += wx;
  }
  return psi / total;
}

NuisanceFit plugin_bundle(const SurvivalDataset& data, double tstar) {
  if (!(tstar > 0.0))
    throw Error(ErrorKind::InputError, "plug-in: horizon must be > 0");
  const std::size_t d = data.d();
  const std::vector<double> w(data.n(), 1.0 / static_cast<double>(data.n()));

  struct StoredCell {
    std::vector<double> x;
    ArmHazards arm[2];
    double pi1;
  };
  auto store = std::make_shared<std::vector<StoredCell>>();
  for (const XCell& cell : build_cells(data)) {
    StoredCell sc;
    sc.x.assign(cell.x, cell.x + d);
    const double w0 = cell_weight(cell.rows[0], w);
    const double w1 = cell_weight(cell.rows[1], w);
    sc.pi1 = w1 / (w0 + w1);
    for (int a = 0; a < 2; ++a)
      sc.arm[a] = cell_hazards(data, cell.rows[a], w);
    store->push_back(std::move(sc));
  }

  auto find_cell = [store](const double* x, std::size_t dq) -> const StoredCell& {
    for (const StoredCell& sc : *store)
      if (sc.x.size() == dq && same_row(sc.x.data(), x, dq)) return sc;
    throw Error(ErrorKind::InputError,
                "plug-in: query off the training support");
  };

  NuisanceFit nu;
  nu.eta = 1e-12;
  nu.horizon = tstar;
  nu.hazard_learner = "cellwise_nelson_aalen";
  nu.censoring_learner = "cellwise_nelson_aalen";
  nu.propensity_learner = "empirical";
  nu.lambda1 = [find_cell](int a, const double* x, std::size_t dq) {
    return find_cell(x, dq).arm[a].l1;
  };
  nu.lambda2 = [find_cell](int a, const double* x, std::size_t dq) {
    return find_cell(x, dq).arm[a].l2;
  };
  nu.lambdac = [find_cell](int a, const double* x, std::size_t dq) {
    return find_cell(x, dq).arm[a].lc;
  };
  nu.propensity_raw = [find_cell](const double* x, std::size_t dq) {
    return find_cell(x, dq).pi1;
  };
  return nu;
}

GateauxCheck gateaux_fd_check(const SurvivalDataset& data, int j, double tstar,
                              std::size_t index, double eps) {
  if (index >= data.n())
    throw Error(ErrorKind::InputError, "fd check: index out of range");
  if (!(eps > 0.0) || !(eps < 1.0))
    throw Error(ErrorKind::InputError, "fd check: eps must lie in (0,1)");
  const std::size_t n = data.n();

  std::vector<double> w0(n, 1.0 / static_cast<double>(n));
  const double psi0 = plugin_years_lost_ate(data, w0, j, tstar);

  std::vector<double> we(n, (1.0 - eps) / static_cast<double>(n));
  we[index] += eps;
  const double psie = plugin_years_lost_ate(data, we, j, tstar);

  const NuisanceFit nu = plugin_bundle(data, tstar);
  EifContext ctx;
  ctx.nu = &nu;
  ctx.j = j;
  ctx.tstar = tstar;
  ctx.floor_denominators = false;

  GateauxCheck r;
  r.fd = (psie - psi0) / eps;
  r.eif = uncentered_eif_ate(data.record(index), ctx) - psi0;
  r.gap = std::abs(r.fd - r.eif);
  return r;
}

}  // namespace lyl
