#pragma once

#include <array>
#include <cstdint>

namespace regen {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A stream is
/// fully determined by its 64-bit key; draws walk a 128-bit counter, so any
/// stream can be reconstructed without replaying others.
class Philox {
 public:
  explicit Philox(std::uint64_t key) : key_{static_cast<std::uint32_t>(key),
                                            static_cast<std::uint32_t>(key >> 32)} {}

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1], safe for logarithms.
  double uniform_pos() { return 1.0 - uniform(); }

 private:
  std::array<std::uint32_t, 4> block();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
};

/// SplitMix64 finalizer, used to hash (seed, index, stream-id) into a key.
std::uint64_t mix64(std::uint64_t x);

/// Sub-stream identifiers. Each replicate draws beta and eta from disjoint
/// streams so changing one law never perturbs the other sequence.
enum class Stream : std::uint64_t { Beta = 1, Eta = 2, Initial = 3, Aux = 4 };

Philox derive_stream(std::uint64_t master_seed, std::uint64_t replicate_index, Stream stream);

/// The per-replicate random source: one Philox stream per consumer.
struct ReplicateRng {
  Philox beta;
  Philox eta;
  Philox initial;
  Philox aux;
};

ReplicateRng derive_replicate_rng(std::uint64_t master_seed, std::uint64_t replicate_index);

double sample_exponential(Philox& rng, double rate);
double sample_standard_normal(Philox& rng);
/// Marsaglia-Tsang gamma sampler.
double sample_gamma(Philox& rng, double shape, double scale);

}  // namespace regen
