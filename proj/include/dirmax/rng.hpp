#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dirmax {

/// Name recorded in run manifests for the seeded generator protocol.
/// mt19937_64 is bit-specified by the standard; the 53-bit uniform mapping is
/// done by hand because std::uniform_real_distribution is not.
inline constexpr std::string_view kGeneratorName = "mt19937_64/u53:v1";

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x ^= x >> 30; x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27; x *= 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1), 53 random bits.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), n > 0. Unbiased via rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = eng_();
    while (v >= limit) v = eng_();
    return v % n;
  }

  /// Independent stream for subtask `k`, derived from the seed alone so it is
  /// stable no matter how much of this stream has been consumed.
  Rng fork(std::uint64_t k) const {
    return Rng(detail::splitmix64(seed_ ^ detail::splitmix64(k + 1)));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

/// FNV-1a 64-bit; used for config hashes and output checksums in manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  return fnv1a64(s.data(), s.size());
}

}  // namespace dirmax
