#ifndef PARACON_RNG_HPP_
#define PARACON_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace paracon {

// Seeded random source. All conversions from raw engine output are done here
// rather than through <random> distributions, whose algorithms differ between
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  // Standard normal deviate (Box-Muller, one value per call).
  double normal();

  // Independent stream derived from this generator's seed and a stream id.
  // Does not advance this generator.
  Rng stream(std::uint64_t stream_id) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a, used wherever a stable string hash is needed.
std::uint64_t stable_hash(std::string_view text);

}  // namespace paracon

#endif  // PARACON_RNG_HPP_
