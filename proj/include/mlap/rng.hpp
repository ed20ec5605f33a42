#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace mlap {

/// Counter-based random stream (Philox4x32-10).
///
/// A stream is fully determined by (seed, stream id); the draw index is the
/// counter. Two streams with different ids never share a counter block, so
/// Monte Carlo workers can be given disjoint streams and results are
/// reproducible independently of scheduling.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

  /// Independent child stream; children of distinct indices are disjoint.
  RngStream substream(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }
  std::uint64_t draw_index() const { return counter_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer, used to derive stream ids.
std::uint64_t mix64(std::uint64_t x);

}  // namespace mlap
