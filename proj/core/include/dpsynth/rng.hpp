#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace dpsynth {

/// Philox4x32-10 counter-based generator (Salmon et al.): a keyed bijection on 128-bit counters.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key) noexcept;
};

/// Stateless random source: every draw is a pure function of (key, index, stream).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) noexcept;

  std::array<std::uint32_t, 4> block(std::uint64_t index, std::uint32_t stream,
                                     std::uint32_t lane = 0) const noexcept;
  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform(std::uint64_t index, std::uint32_t stream = 0) const noexcept;
  /// Standard normal via the inverse CDF of one uniform draw.
  double normal(std::uint64_t index, std::uint32_t stream = 0) const noexcept;
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n, std::uint64_t index, std::uint32_t stream = 0) const noexcept;

 private:
  Philox4x32::Key key_;
};

/// 64-bit FNV-1a.
std::uint64_t hash_string(std::string_view text) noexcept;

/// Derives a child key from a seed and a list of identifiers.
std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) noexcept;

double standard_normal_quantile(double p) noexcept;

}  // namespace dpsynth
