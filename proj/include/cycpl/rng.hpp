#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cycpl {

/// Seeded generator with platform-stable draws.
///
/// std::mt19937_64 output is fully specified by the standard, but the
/// std::*_distribution adaptors are not, so the mappings to uniform and
/// normal variates are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives a child seed from a parent seed and a list of stream indices
/// (splitmix64 chaining), so parallel consumers get independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

/// 64-bit FNV-1a, used for dataset fingerprints.
class Fnv1a {
 public:
  void update(const void* data, std::size_t len);
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace cycpl
