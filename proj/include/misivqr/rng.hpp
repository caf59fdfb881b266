#pragma once

#include <cstdint>

namespace misivqr {

namespace detail {

// splitmix64 finalizer; full-avalanche 64-bit mixer
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

}  // namespace detail

// Derive an independent child seed from (seed, tag). Used to key substreams
// for replications, bootstrap draws, etc. without overlapping sequences.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return detail::mix64(seed + detail::kGolden * (tag + 1));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag1, std::uint64_t tag2) {
  return derive_seed(derive_seed(seed, tag1), tag2);
}

// Counter-based splittable generator. A stream is fully determined by
// (seed, stream); draws are a splitmix64 walk from the mixed key, so
// generating stream i never depends on any other stream having been
// consumed. That makes parallel generation order-independent.
class SplitRng {
 public:
  SplitRng(std::uint64_t seed, std::uint64_t stream)
      : state_(detail::mix64(derive_seed(seed, stream) + detail::kGolden)) {}

  std::uint64_t next_u64() {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  // Uniform on the open interval (0,1): (k + 0.5) / 2^53 for a 53-bit k.
  // Never returns 0 or 1, so inverse-CDF transforms stay finite.
  double next_double() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  }

 private:
  std::uint64_t state_;
};

}  // namespace misivqr
