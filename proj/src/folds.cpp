#include "lyl/folds.hpp"

#include <algorithm>
#include <string>

namespace lyl {

std::vector<std::size_t> FoldPlan::fold_indices(int k) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == k) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::complement_indices(int k) const {
  if (K == 1) return fold_indices(0);  // no-CF plan: train on the fold itself
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != k) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
  std::vector<std::size_t> sz(static_cast<std::size_t>(K), 0);
  for (int f : fold_of) ++sz[static_cast<std::size_t>(f)];
  return sz;
}

FoldPlan make_folds(std::size_t n, int K, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::InfeasibleFolds, "make_folds: empty data");
  if (K < 1 || static_cast<std::size_t>(K) > n)
    throw Error(ErrorKind::InfeasibleFolds,
                "make_folds: need 1 <= K <= n, got K=" + std::to_string(K) +
                    ", n=" + std::to_string(n));
  FoldPlan plan;
  plan.K = K;
  plan.fold_of.assign(n, 0);
  if (K == 1) {
    plan.seed = seed;
    return plan;
  }
  const int kMaxRedraws = 100;
  for (int attempt = 0; attempt <= kMaxRedraws; ++attempt) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt);
    Rng rng(derive_seed(s, {0xf01d5ULL}));
    std::vector<std::size_t> count(static_cast<std::size_t>(K), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
      plan.fold_of[i] = k;
      ++count[static_cast<std::size_t>(k)];
    }
    if (std::find(count.begin(), count.end(), std::size_t{0}) == count.end()) {
      plan.seed = s;
      plan.redraws = attempt;
      return plan;
    }
  }
  throw Error(ErrorKind::InfeasibleFolds,
              "make_folds: no nonempty assignment after redraw budget");
}

}  // namespace lyl
