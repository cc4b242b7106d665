#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace omib {

/// Seeded generator with distribution code written out explicitly, so a seed
/// produces the same stream on every standard library (std::normal_distribution
/// and std::shuffle are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound), unbiased.
  std::uint64_t below(std::uint64_t bound);
  double normal();
  void fill_normal(std::span<double> out);
  std::vector<std::size_t> permutation(std::size_t n);
  template <class T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Independent child seed for a named stream: splitmix64 over the parent seed
/// and an FNV-1a hash of the label.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace omib
