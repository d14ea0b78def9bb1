#pragma once

// Bagged tree ensembles: survival forests with log-rank splits and in-leaf
// Nelson-Aalen cumulative hazards on a shared coarse time grid, plus
// variance-split regression forests (also covering binary targets as
// probability forests).  Given identical per-tree resampling indices the
// fitted ensembles are invariant to row permutation of the training data:
// all node statistics aggregate over tied times / tied feature values, and
// split candidates are drawn from sorted unique values, never row slots.

#include <cstdint>
#include <vector>

#include "lyl/dataset.hpp"
#include "lyl/step_fn.hpp"

namespace lyl {

struct ForestParams {
  int n_trees = 500;
  int mtry = 0;        // 0: ceil(sqrt(#features))
  int min_leaf = 15;
  int n_split = 10;    // random candidate thresholds per feature
  int max_grid = 128;  // time-grid coarsening for leaf hazards
  std::uint64_t seed = 1;
  int threads = 1;
  // Test hook: per-tree resampled row ids (size must equal n_trees).
  // Null means bootstrap resampling from the per-tree RNG stream.
  const std::vector<std::vector<std::uint32_t>>* resample_override = nullptr;
};

struct TreeNode {
  int feature = -1;      // -1: leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf = -1;         // payload index when feature == -1
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int descend(const double* z) const {
    int k = 0;
    while (nodes[k].feature >= 0)
      k = z[nodes[k].feature] <= nodes[k].threshold ? nodes[k].left
                                                    : nodes[k].right;
    return nodes[k].leaf;
  }
};

class SurvivalForestFit {
 public:
  // features are [a, x1..xd]
  StepFn predict(int a, const double* x, std::size_t d) const;
  double oob_concordance() const { return oob_concordance_; }
  const std::vector<double>& grid() const { return grid_; }
  int n_trees() const { return static_cast<int>(trees_.size()); }
  int cause() const { return cause_; }

 private:
  friend SurvivalForestFit fit_survival_forest(const SurvivalDataset&, int,
                                               const ForestParams&);
  std::vector<Tree> trees_;
  std::vector<double> grid_;       // shared jump times, ascending
  std::vector<double> leaf_chf_;   // blocks of grid_.size() cumulative values
  double oob_concordance_ = 0.0;
  int cause_ = 1;
  std::size_t d_ = 0;
};

class RegressionForestFit {
 public:
  double predict(const double* x, std::size_t p) const;
  std::size_t n_features() const { return p_; }

 private:
  friend RegressionForestFit fit_regression_forest(const std::vector<double>&,
                                                   std::size_t,
                                                   const std::vector<double>&,
                                                   const ForestParams&);
  std::vector<Tree> trees_;
  std::vector<double> leaf_mean_;
  std::size_t p_ = 0;
};

// Cause-specific survival forest (cause 0 = censoring); competing events
// act as censored rows both in the split statistic and the leaf hazards.
SurvivalForestFit fit_survival_forest(const SurvivalDataset& data, int cause,
                                      const ForestParams& params);

// Variance-split regression forest on a row-major feature matrix.
RegressionForestFit fit_regression_forest(const std::vector<double>& features,
                                          std::size_t p,
                                          const std::vector<double>& target,
                                          const ForestParams& params);

// Probability forest for the propensity: regression forest on the 0/1
// treatment indicator against the covariates.
RegressionForestFit fit_probability_forest(const SurvivalDataset& data,
                                           const ForestParams& params);

}  // namespace lyl
