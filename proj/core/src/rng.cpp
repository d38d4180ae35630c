#include "dpsynth/rng.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <limits>

namespace dpsynth {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
constexpr int kRounds = 10;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) noexcept {
  for (int round = 0; round < kRounds; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

CounterRng::CounterRng(std::uint64_t key) noexcept
    : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

std::array<std::uint32_t, 4> CounterRng::block(std::uint64_t index, std::uint32_t stream,
                                               std::uint32_t lane) const noexcept {
  return Philox4x32::generate(
      {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), stream, lane}, key_);
}

double CounterRng::uniform(std::uint64_t index, std::uint32_t stream) const noexcept {
  const auto b = block(index, stream);
  const std::uint64_t bits = ((static_cast<std::uint64_t>(b[0]) << 32) | b[1]) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t index, std::uint32_t stream) const noexcept {
  return standard_normal_quantile(uniform(index, stream));
}

std::uint64_t CounterRng::below(std::uint64_t n, std::uint64_t index, std::uint32_t stream) const noexcept {
  if (n == 0) return 0;
  const auto b = block(index, stream);
  const std::uint64_t bits = (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits) * n) >> 64);
}

std::uint64_t hash_string(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

double standard_normal_quantile(double p) noexcept {
  if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
  if (!(p < 1.0)) return std::numeric_limits<double>::infinity();
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

}  // namespace dpsynth
