#pragma once

// Shared infrastructure: error taxonomy, deterministic RNG streams,
// normal-distribution helpers, and a slot-based parallel map whose
// results do not depend on the number of worker threads.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lyl {

enum class ErrorKind {
  // survdata
  MissingColumn,
  NonFiniteValue,
  BadEventCode,
  BadTreatmentCode,
  InfeasibleFolds,
  // learners
  SingularDesign,
  NoEvents,
  NonConvergence,
  SeparableData,
  SingleArm,
  InfeasibleParams,
  // lifeyears / eif
  SuperunitJump,
  PositivityBreach,
  DegenerateDenominator,
  SparseCell,
  // estimators
  FoldTooSmall,
  // simlab
  QuadratureFailure,
  // cli / io
  UsageError,
  InputError,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

const char* error_kind_name(ErrorKind k);

// ---------------------------------------------------------------------
// RNG: xoshiro256++ seeded through splitmix64.  Self-contained so that
// streams are identical across platforms and standard libraries.
// ---------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& si : s_) si = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform on [0,1) with 53-bit resolution
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double exponential() {  // rate 1; uses -log(1-U) so 0 is safe
    return -std::log1p(-uniform());
  }
  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// Deterministic sub-stream derivation: hash-chain the master seed with a
// list of stream labels (fold index, replication index, tree index, ...).
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t st = master ^ 0x6a09e667f3bcc908ULL;
  std::uint64_t h = splitmix64(st);
  for (std::uint64_t p : path) {
    st ^= p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h = splitmix64(st);
  }
  return h;
}

// ---------------------------------------------------------------------
// Normal distribution helpers
// ---------------------------------------------------------------------

double normal_cdf(double z);
// Inverse CDF (Acklam's rational approximation polished by one Halley step);
// |error| < 1e-13 on (0,1).
double normal_quantile(double p);

// ---------------------------------------------------------------------
// parallel_for: run fn(i) for i in [0, n) on up to `threads` workers.
// Each index writes only to its own output slot, so results are
// bit-identical regardless of thread count.  threads <= 1 runs inline.
// ---------------------------------------------------------------------

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

// Resolve a requested thread count: 0 means "hardware concurrency",
// clamped to at least 1.
int resolve_threads(int requested);

}  // namespace lyl
