#include "lyl/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lyl {

namespace {

void check_params(const ForestParams& p, std::size_t n, std::size_t n_feat) {
  if (p.n_trees < 1 || p.min_leaf < 1 || p.n_split < 1 || p.max_grid < 2)
    throw Error(ErrorKind::InfeasibleParams, "forest: bad hyperparameters");
  if (n_feat < 1)
    throw Error(ErrorKind::InfeasibleParams, "forest: empty feature set");
  if (n < 2 * static_cast<std::size_t>(p.min_leaf))
    throw Error(ErrorKind::InfeasibleParams,
                "forest: need at least 2*min_leaf rows, have " +
                    std::to_string(n));
  if (p.resample_override &&
      p.resample_override->size() != static_cast<std::size_t>(p.n_trees))
    throw Error(ErrorKind::InputError,
                "forest: resample override must supply one draw per tree");
}

int resolve_mtry(int mtry, std::size_t p) {
  if (mtry <= 0)
    mtry = static_cast<int>(
        std::ceil(std::sqrt(static_cast<double>(p))));
  return std::min<int>(mtry, static_cast<int>(p));
}

// k distinct draws from [0, u), ascending; partial Fisher-Yates so the
// stream consumption depends only on u and k.
std::vector<std::uint32_t> draw_distinct(Rng& rng, std::uint32_t u, int k) {
  std::vector<std::uint32_t> pool(u);
  std::iota(pool.begin(), pool.end(), 0u);
  const int take = std::min<int>(k, static_cast<int>(u));
  for (int i = 0; i < take; ++i) {
    const auto j = i + static_cast<int>(rng.below(u - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  std::sort(pool.begin(), pool.end());
  return pool;
}

// sorted unique values of one feature over the node rows
std::vector<double> node_unique(const std::vector<double>& col,
                                const std::vector<std::uint32_t>& rows) {
  std::vector<double> v;
  v.reserve(rows.size());
  for (auto r : rows) v.push_back(col[r]);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = -std::numeric_limits<double>::infinity();
};

// ------------------------------------------------------------------
// survival trees
// ------------------------------------------------------------------

struct SurvGrower {
  const std::vector<std::vector<double>>& cols;  // p columns over n rows
  const std::vector<double>& time;
  const std::vector<int>& status;  // 1 iff the modeled event
  const std::vector<double>& grid;
  std::vector<double>& leaf_store;
  Tree& tree;
  Rng& rng;
  int mtry, n_split, min_leaf;

  // rows must stay sorted ascending by time; duplicates carry bootstrap
  // multiplicity
  int grow(std::vector<std::uint32_t>& rows) {
    const int me = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    std::size_t events = 0;
    for (auto r : rows) events += static_cast<std::size_t>(status[r]);
    if (rows.size() < 2 * static_cast<std::size_t>(min_leaf) || events == 0)
      return make_leaf(me, rows);

    SplitChoice best = pick_split(rows);
    if (best.feature < 0) return make_leaf(me, rows);

    std::vector<std::uint32_t> left, right;
    left.reserve(rows.size());
    right.reserve(rows.size());
    for (auto r : rows)  // stable partition keeps the time order
      (cols[best.feature][r] <= best.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    tree.nodes[me].feature = best.feature;
    tree.nodes[me].threshold = best.threshold;
    const int l = grow(left);
    tree.nodes[me].left = l;
    const int r = grow(right);
    tree.nodes[me].right = r;
    return me;
  }

  SplitChoice pick_split(const std::vector<std::uint32_t>& rows) {
    const auto p = static_cast<std::uint32_t>(cols.size());
    auto feats = draw_distinct(rng, p, mtry);
    SplitChoice best;
    for (auto f : feats) {
      std::vector<double> vals = node_unique(cols[f], rows);
      if (vals.size() < 2) continue;
      const auto cuts = draw_distinct(
          rng, static_cast<std::uint32_t>(vals.size() - 1), n_split);
      for (auto c : cuts) {
        const double thr = 0.5 * (vals[c] + vals[c + 1]);
        double stat;
        if (logrank(rows, cols[f], thr, &stat) && stat > best.score) {
          best.feature = static_cast<int>(f);
          best.threshold = thr;
          best.score = stat;
        }
      }
    }
    return best;
  }

  // two-sample log-rank on the node, left group = {feature <= thr};
  // returns false when a child violates min_leaf or the variance is zero
  bool logrank(const std::vector<std::uint32_t>& rows,
               const std::vector<double>& col, double thr, double* stat) {
    const std::size_t m = rows.size();
    std::size_t n_left = 0;
    for (auto r : rows) n_left += static_cast<std::size_t>(col[r] <= thr);
    if (n_left < static_cast<std::size_t>(min_leaf) ||
        m - n_left < static_cast<std::size_t>(min_leaf))
      return false;

    double U = 0.0, V = 0.0;
    double Y = 0.0, YL = 0.0;
    std::size_t k = m;
    while (k > 0) {
      const double t = time[rows[k - 1]];
      int d = 0, dL = 0;
      while (k > 0 && time[rows[k - 1]] == t) {
        const auto r = rows[--k];
        const bool left = col[r] <= thr;
        Y += 1.0;
        YL += left ? 1.0 : 0.0;
        if (status[r]) {
          ++d;
          dL += left ? 1 : 0;
        }
      }
      if (d > 0) {
        const double frac = YL / Y;
        U += dL - frac * d;
        if (Y > 1.0) V += frac * (1.0 - frac) * d * (Y - d) / (Y - 1.0);
      }
    }
    if (!(V > 1e-12)) return false;
    *stat = U * U / V;
    return true;
  }

  int make_leaf(int me, const std::vector<std::uint32_t>& rows) {
    const std::size_t g = grid.size();
    const int leaf_id = static_cast<int>(leaf_store.size() / std::max<std::size_t>(g, 1));
    std::vector<double> jumps(g, 0.0);
    // Nelson-Aalen over the node multiset, snapped up to the shared grid
    double Y = static_cast<double>(rows.size());
    std::size_t k = 0;
    while (k < rows.size()) {
      const double t = time[rows[k]];
      int d = 0;
      double cnt = 0.0;
      while (k < rows.size() && time[rows[k]] == t) {
        d += status[rows[k]];
        cnt += 1.0;
        ++k;
      }
      if (d > 0) {
        const auto cell = static_cast<std::size_t>(
            std::lower_bound(grid.begin(), grid.end(), t) - grid.begin());
        jumps[std::min(cell, g - 1)] += d / Y;
      }
      Y -= cnt;
    }
    double acc = 0.0;
    for (std::size_t c = 0; c < g; ++c) {
      acc += jumps[c];
      leaf_store.push_back(acc);
    }
    tree.nodes[me].leaf = leaf_id;
    return me;
  }
};

// ------------------------------------------------------------------
// regression trees
// ------------------------------------------------------------------

struct RegGrower {
  const std::vector<std::vector<double>>& cols;
  const std::vector<double>& y;
  std::vector<double>& leaf_means;
  Tree& tree;
  Rng& rng;
  int mtry, n_split, min_leaf;

  int grow(std::vector<std::uint32_t>& rows) {
    const int me = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (rows.size() < 2 * static_cast<std::size_t>(min_leaf))
      return make_leaf(me, rows);
    SplitChoice best = pick_split(rows);
    if (best.feature < 0) return make_leaf(me, rows);

    std::vector<std::uint32_t> left, right;
    left.reserve(rows.size());
    right.reserve(rows.size());
    for (auto r : rows)
      (cols[best.feature][r] <= best.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    tree.nodes[me].feature = best.feature;
    tree.nodes[me].threshold = best.threshold;
    const int l = grow(left);
    tree.nodes[me].left = l;
    const int r = grow(right);
    tree.nodes[me].right = r;
    return me;
  }

  SplitChoice pick_split(const std::vector<std::uint32_t>& rows) {
    const auto p = static_cast<std::uint32_t>(cols.size());
    auto feats = draw_distinct(rng, p, mtry);
    SplitChoice best;
    std::vector<std::pair<double, double>> vy;  // (value, target), canonical
    for (auto f : feats) {
      vy.clear();
      vy.reserve(rows.size());
      for (auto r : rows) vy.emplace_back(cols[f][r], y[r]);
      std::sort(vy.begin(), vy.end());
      // aggregate per unique value: counts and target sums
      std::vector<double> uval, usum;
      std::vector<std::size_t> ucnt;
      for (std::size_t i = 0; i < vy.size();) {
        const double v = vy[i].first;
        double s = 0.0;
        std::size_t c = 0;
        while (i < vy.size() && vy[i].first == v) {
          s += vy[i].second;
          ++c;
          ++i;
        }
        uval.push_back(v);
        usum.push_back(s);
        ucnt.push_back(c);
      }
      if (uval.size() < 2) continue;
      const auto cuts = draw_distinct(
          rng, static_cast<std::uint32_t>(uval.size() - 1), n_split);
      // prefix aggregates over the unique-value buckets
      std::vector<double> psum(uval.size());
      std::vector<std::size_t> pcnt(uval.size());
      double s = 0.0;
      std::size_t c = 0;
      for (std::size_t i = 0; i < uval.size(); ++i) {
        s += usum[i];
        c += ucnt[i];
        psum[i] = s;
        pcnt[i] = c;
      }
      const double total = s;
      const std::size_t m = c;
      for (auto cut : cuts) {
        const std::size_t nL = pcnt[cut];
        const std::size_t nR = m - nL;
        if (nL < static_cast<std::size_t>(min_leaf) ||
            nR < static_cast<std::size_t>(min_leaf))
          continue;
        const double sL = psum[cut], sR = total - sL;
        const double score = sL * sL / nL + sR * sR / nR;
        if (score > best.score) {
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (uval[cut] + uval[cut + 1]);
          best.score = score;
        }
      }
    }
    return best;
  }

  int make_leaf(int me, const std::vector<std::uint32_t>& rows) {
    // canonical summation order keeps leaf means invariant to row
    // permutation of the training data
    std::vector<double> vals;
    vals.reserve(rows.size());
    for (auto r : rows) vals.push_back(y[r]);
    std::sort(vals.begin(), vals.end());
    double s = 0.0;
    for (double v : vals) s += v;
    const int leaf_id = static_cast<int>(leaf_means.size());
    leaf_means.push_back(s / static_cast<double>(rows.size()));
    tree.nodes[me].leaf = leaf_id;
    return me;
  }
};

std::vector<std::uint32_t> bootstrap_rows(Rng& rng, std::size_t n) {
  std::vector<std::uint32_t> rows(n);
  for (auto& r : rows)
    r = static_cast<std::uint32_t>(rng.below(n));
  return rows;
}

}  // namespace

// ------------------------------------------------------------------
// survival forest
// ------------------------------------------------------------------

SurvivalForestFit fit_survival_forest(const SurvivalDataset& data, int cause,
                                      const ForestParams& params) {
  const std::size_t n = data.n(), d = data.d();
  const std::size_t p = d + 1;  // [a, x...]
  check_params(params, n, p);
  if (cause < 0 || cause > 2)
    throw Error(ErrorKind::InputError, "forest: cause must be 0, 1, or 2");
  const int mtry = resolve_mtry(params.mtry, p);

  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  std::vector<double> time(n);
  std::vector<int> status(n);
  for (std::size_t i = 0; i < n; ++i) {
    cols[0][i] = data.treatment(i);
    for (std::size_t c = 0; c < d; ++c) cols[c + 1][i] = data.x(i, c);
    time[i] = data.time(i);
    status[i] = data.event(i) == cause ? 1 : 0;
  }

  SurvivalForestFit fit;
  fit.cause_ = cause;
  fit.d_ = d;
  // shared grid: unique event times, thinned to max_grid quantile points
  {
    std::vector<double> ev;
    for (std::size_t i = 0; i < n; ++i)
      if (status[i]) ev.push_back(time[i]);
    std::sort(ev.begin(), ev.end());
    ev.erase(std::unique(ev.begin(), ev.end()), ev.end());
    const std::size_t u = ev.size();
    if (u <= static_cast<std::size_t>(params.max_grid)) {
      fit.grid_ = std::move(ev);
    } else {
      fit.grid_.reserve(params.max_grid);
      for (int k = 1; k <= params.max_grid; ++k) {
        const auto idx = static_cast<std::size_t>(
            std::llround(static_cast<double>(k) * u / params.max_grid)) - 1;
        fit.grid_.push_back(ev[std::min(idx, u - 1)]);
      }
      fit.grid_.erase(std::unique(fit.grid_.begin(), fit.grid_.end()),
                      fit.grid_.end());
    }
  }

  const std::size_t g = fit.grid_.size();
  fit.trees_.resize(params.n_trees);
  std::vector<std::vector<double>> tree_leaves(params.n_trees);
  std::vector<std::vector<char>> inbag(params.n_trees,
                                       std::vector<char>(n, 0));

  parallel_for(params.n_trees, params.threads, [&](std::size_t tr) {
    Rng rng(derive_seed(params.seed, {0x5u, tr}));
    std::vector<std::uint32_t> rows =
        params.resample_override ? (*params.resample_override)[tr]
                                 : bootstrap_rows(rng, n);
    for (auto r : rows) inbag[tr][r] = 1;
    std::stable_sort(rows.begin(), rows.end(),
                     [&](std::uint32_t a, std::uint32_t b) {
                       return time[a] < time[b];
                     });
    SurvGrower grower{cols,         time, status,
                      fit.grid_,    tree_leaves[tr], fit.trees_[tr],
                      rng,          mtry, params.n_split, params.min_leaf};
    grower.grow(rows);
  });

  // concatenate per-tree leaf stores, rebasing the leaf ids
  std::size_t total = 0;
  for (auto& v : tree_leaves) total += v.size();
  fit.leaf_chf_.reserve(total);
  for (int tr = 0; tr < params.n_trees; ++tr) {
    const auto base =
        static_cast<int>(fit.leaf_chf_.size() / std::max<std::size_t>(g, 1));
    for (auto& node : fit.trees_[tr].nodes)
      if (node.feature < 0) node.leaf += base;
    fit.leaf_chf_.insert(fit.leaf_chf_.end(), tree_leaves[tr].begin(),
                         tree_leaves[tr].end());
    tree_leaves[tr].clear();
    tree_leaves[tr].shrink_to_fit();
  }

  // out-of-bag concordance on the final cumulative hazard as risk score
  if (g > 0) {
    std::vector<double> risk(n, 0.0);
    std::vector<int> n_oob(n, 0);
    std::vector<double> z(p);
    for (std::size_t i = 0; i < n; ++i) {
      z[0] = cols[0][i];
      for (std::size_t c = 1; c < p; ++c) z[c] = cols[c][i];
      for (int tr = 0; tr < params.n_trees; ++tr) {
        if (inbag[tr][i]) continue;
        const int leaf = fit.trees_[tr].descend(z.data());
        risk[i] += fit.leaf_chf_[static_cast<std::size_t>(leaf) * g + (g - 1)];
        ++n_oob[i];
      }
      if (n_oob[i] > 0) risk[i] /= n_oob[i];
    }
    double conc = 0.0, usable = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!status[i] || n_oob[i] == 0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i || n_oob[j] == 0 || time[i] >= time[j]) continue;
        usable += 1.0;
        if (risk[i] > risk[j])
          conc += 1.0;
        else if (risk[i] == risk[j])
          conc += 0.5;
      }
    }
    fit.oob_concordance_ = usable > 0.0 ? conc / usable : 0.5;
  } else {
    fit.oob_concordance_ = 0.5;
  }
  return fit;
}

StepFn SurvivalForestFit::predict(int a, const double* x,
                                  std::size_t d) const {
  const std::size_t g = grid_.size();
  if (g == 0) return StepFn();
  std::vector<double> z(d + 1);
  z[0] = a;
  for (std::size_t c = 0; c < d; ++c) z[c + 1] = x[c];
  std::vector<double> acc(g, 0.0);
  for (const auto& tree : trees_) {
    const auto leaf = static_cast<std::size_t>(tree.descend(z.data()));
    const double* block = &leaf_chf_[leaf * g];
    for (std::size_t c = 0; c < g; ++c) acc[c] += block[c];
  }
  const double inv = 1.0 / static_cast<double>(trees_.size());
  std::vector<double> sizes(g);
  double prev = 0.0;
  for (std::size_t c = 0; c < g; ++c) {
    const double v = acc[c] * inv;
    sizes[c] = v - prev;
    prev = v;
  }
  return StepFn(std::vector<double>(grid_), std::move(sizes));
}

// ------------------------------------------------------------------
// regression forest
// ------------------------------------------------------------------

RegressionForestFit fit_regression_forest(const std::vector<double>& features,
                                          std::size_t p,
                                          const std::vector<double>& target,
                                          const ForestParams& params) {
  if (p < 1)
    throw Error(ErrorKind::InfeasibleParams, "forest: empty feature set");
  const std::size_t n = target.size();
  if (features.size() != n * p)
    throw Error(ErrorKind::InputError, "forest: feature matrix shape");
  check_params(params, n, p);
  const int mtry = resolve_mtry(params.mtry, p);

  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < p; ++c) cols[c][i] = features[i * p + c];

  RegressionForestFit fit;
  fit.p_ = p;
  fit.trees_.resize(params.n_trees);
  std::vector<std::vector<double>> tree_means(params.n_trees);

  parallel_for(params.n_trees, params.threads, [&](std::size_t tr) {
    Rng rng(derive_seed(params.seed, {0x6u, tr}));
    std::vector<std::uint32_t> rows =
        params.resample_override ? (*params.resample_override)[tr]
                                 : bootstrap_rows(rng, n);
    std::sort(rows.begin(), rows.end());  // canonical node order
    RegGrower grower{cols, target, tree_means[tr], fit.trees_[tr],
                     rng,  mtry,   params.n_split, params.min_leaf};
    grower.grow(rows);
  });

  for (int tr = 0; tr < params.n_trees; ++tr) {
    const auto base = static_cast<int>(fit.leaf_mean_.size());
    for (auto& node : fit.trees_[tr].nodes)
      if (node.feature < 0) node.leaf += base;
    fit.leaf_mean_.insert(fit.leaf_mean_.end(), tree_means[tr].begin(),
                          tree_means[tr].end());
  }
  return fit;
}

double RegressionForestFit::predict(const double* x, std::size_t p) const {
  (void)p;
  double acc = 0.0;
  for (const auto& tree : trees_)
    acc += leaf_mean_[static_cast<std::size_t>(tree.descend(x))];
  return acc / static_cast<double>(trees_.size());
}

RegressionForestFit fit_probability_forest(const SurvivalDataset& data,
                                           const ForestParams& params) {
  const std::size_t n = data.n(), d = data.d();
  std::vector<double> X(n * d);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) X[i * d + c] = data.x(i, c);
    y[i] = data.treatment(i);
  }
  return fit_regression_forest(X, d, y, params);
}

}  // namespace lyl
