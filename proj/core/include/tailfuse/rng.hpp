#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tailfuse {

/// FNV-1a over a byte string; also used for config fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);

/// Derive the seed of a named substream from a base seed. Every stochastic
/// choice in the toolkit (init, shuffle, crop, clip start, ...) draws from its
/// own substream so that toggling one feature does not perturb the others.
std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose);
std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose,
                          std::uint64_t index);
std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose,
                          std::uint64_t index, std::uint64_t subindex);

/// mt19937_64 with hand-rolled sampling helpers. The C++ standard pins the
/// engine's output sequence but not the library distributions, so all
/// conversions happen here and streams are bit-stable across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) from the top 53 bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  /// Unbiased integer in [0, n); rejection sampling. n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  /// Standard normal via Box-Muller; the spare draw is cached.
  double next_gaussian();

  /// Fisher-Yates shuffle driven by next_below.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline Rng make_stream(std::uint64_t seed, std::string_view purpose) {
  return Rng(derive_seed(seed, purpose));
}
inline Rng make_stream(std::uint64_t seed, std::string_view purpose,
                       std::uint64_t index) {
  return Rng(derive_seed(seed, purpose, index));
}
inline Rng make_stream(std::uint64_t seed, std::string_view purpose,
                       std::uint64_t index, std::uint64_t subindex) {
  return Rng(derive_seed(seed, purpose, index, subindex));
}

}  // namespace tailfuse
