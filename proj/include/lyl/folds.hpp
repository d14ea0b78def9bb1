#pragma once

// K-fold plans with multinomial assignment (each row lands in fold k with
// probability 1/K), redrawn with an incremented seed until no fold is
// empty.  K=1 is the no-cross-fitting plan: the single fold trains and
// evaluates on the full sample.

#include <cstdint>
#include <vector>

#include "lyl/common.hpp"

namespace lyl {

struct FoldPlan {
  int K = 1;
  std::uint64_t seed = 0;   // the seed that produced the accepted draw
  int redraws = 0;          // how many empty-fold draws were discarded
  std::vector<int> fold_of; // per-row fold index in [0, K)

  std::vector<std::size_t> fold_indices(int k) const;
  std::vector<std::size_t> complement_indices(int k) const;
  std::vector<std::size_t> fold_sizes() const;
};

FoldPlan make_folds(std::size_t n, int K, std::uint64_t seed);

}  // namespace lyl
