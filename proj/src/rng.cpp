#include "regen/rng.hpp"

#include <cmath>
#include <numbers>

namespace regen {

namespace {

constexpr std::uint32_t kW0 = 0x9E3779B9;
constexpr std::uint32_t kW1 = 0xBB67AE85;
constexpr std::uint32_t kM0 = 0xD2511F53;
constexpr std::uint32_t kM1 = 0xCD9E8D57;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(prod >> 32);
  lo = static_cast<std::uint32_t>(prod);
}

}  // namespace

std::array<std::uint32_t, 4> Philox::block() {
  std::array<std::uint32_t, 4> ctr = counter_;
  std::array<std::uint32_t, 2> key = key_;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, ctr[0], hi0, lo0);
    mulhilo(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  // 128-bit counter increment
  for (auto& c : counter_) {
    if (++c != 0) break;
  }
  return ctr;
}

std::uint32_t Philox::next_u32() {
  if (buffered_ == 0) {
    buffer_ = block();
    buffered_ = 4;
  }
  return buffer_[4 - buffered_--];
}

std::uint64_t Philox::next_u64() {
  const std::uint64_t hi = next_u32();
  return (hi << 32) | next_u32();
}

double Philox::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Philox derive_stream(std::uint64_t master_seed, std::uint64_t replicate_index, Stream stream) {
  std::uint64_t key = mix64(master_seed);
  key = mix64(key ^ replicate_index);
  key = mix64(key ^ static_cast<std::uint64_t>(stream));
  return Philox(key);
}

ReplicateRng derive_replicate_rng(std::uint64_t master_seed, std::uint64_t replicate_index) {
  return ReplicateRng{derive_stream(master_seed, replicate_index, Stream::Beta),
                      derive_stream(master_seed, replicate_index, Stream::Eta),
                      derive_stream(master_seed, replicate_index, Stream::Initial),
                      derive_stream(master_seed, replicate_index, Stream::Aux)};
}

double sample_exponential(Philox& rng, double rate) { return -std::log(rng.uniform_pos()) / rate; }

double sample_standard_normal(Philox& rng) {
  // Box-Muller; one variate per call keeps streams position-independent.
  const double u1 = rng.uniform_pos();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double sample_gamma(Philox& rng, double shape, double scale) {
  if (shape < 1.0) {
    const double g = sample_gamma(rng, shape + 1.0, 1.0);
    return scale * g * std::pow(rng.uniform_pos(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = sample_standard_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
  }
}

}  // namespace regen
