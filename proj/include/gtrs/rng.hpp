#pragma once

#include <cstdint>
#include <string_view>

namespace gtrs {

// Deterministic splittable random stream (xoshiro256** core, splitmix64
// seeding). Every consumer derives its own named substream from a parent
// key, so the draw layout of one component never shifts another's.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream derived from this stream's key (not its state);
  // deriving is stable no matter how many numbers were drawn before.
  Rng derive(std::string_view name) const;
  Rng derive(std::uint64_t index) const;

  std::uint64_t next_u64();
  std::uint64_t below(std::uint64_t n);  // uniform in [0, n)
  double uniform01();                    // [0, 1), 53-bit
  double uniform(double lo, double hi);
  double normal();                       // standard normal

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// FNV-1a, used for substream derivation and artifact config hashes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ull);

}  // namespace gtrs
