#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace infocnf {

/// Philox4x32-10 block function (Salmon et al., Random123). Exposed so the
/// known-answer vectors can be checked directly.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer, used to derive child stream identifiers.
std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based random stream.
///
/// The 64-bit seed is the Philox key. The 128-bit counter is laid out as
/// (block index low, block index high, stream low, stream high), so every
/// (seed, stream) pair addresses an independent sequence and any stream can
/// be split into children without shared state:
///
///     child.stream = splitmix64(parent.stream ^ splitmix64(tag))
///
/// Uniform doubles use the top 53 bits of a 64-bit draw; Gaussian draws use
/// the Marsaglia polar method with the spare value cached.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double stddev);
  /// +1 or -1 with equal probability.
  double rademacher();
  std::size_t below(std::size_t n);

  Rng split(std::uint64_t tag) const;
  Rng split(std::string_view tag) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// FNV-1a hash of a tag string, for naming sub-streams.
std::uint64_t stream_tag(std::string_view tag);

}  // namespace infocnf
