#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace wmg {

/// Seedable, splittable random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. All derived draws (uniform doubles, bounded integers, coin flips)
/// are computed here rather than through <random> distributions, so streams are
/// identical across standard libraries and platforms. Substreams are seeded
/// with splitmix64(seed ^ splitmix64(stream + golden)); this derivation is part
/// of the on-disk reproducibility contract and must not change.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream number `stream` derived from `seed`.
  static Rng substream(std::uint64_t seed, std::uint64_t stream);
  /// Engine seed used by substream(seed, stream).
  static std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  /// Uniform in the open interval (lo, hi); never returns an endpoint.
  double uniform_open(double lo, double hi);
  /// Uniform in [lo, hi).
  double uniform_range(double lo, double hi);
  /// Unbiased integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);
  bool coin();
  /// Index drawn proportionally to non-negative weights (at least one positive).
  std::size_t categorical(std::span<const double> weights);

  std::string serialize() const;
  void deserialize(const std::string& text);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace wmg
