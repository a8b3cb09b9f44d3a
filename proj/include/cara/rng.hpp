#pragma once

#include <cstdint>
#include <initializer_list>

namespace cara {

/// Counter-based random stream. Streams are derived from a key path
/// (seed, design, replicate, purpose, ...) so that every consumer owns an
/// independent sequence: adding a design or reordering work never shifts
/// the randomness seen elsewhere.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64();

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller; second draw of each pair is cached.
  double normal();

  /// Bernoulli(p) as {0,1}.
  int bernoulli(double p);

 private:
  std::uint64_t state_ = 0x9E3779B97F4A7C15ull;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

/// Derive a stream key by folding path elements into the seed.
std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

inline RngStream derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  return RngStream(derive_key(seed, path));
}

} // namespace cara
