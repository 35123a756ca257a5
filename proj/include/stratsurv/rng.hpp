#ifndef STRATSURV_RNG_HPP
#define STRATSURV_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace stratsurv {

// Counter-based generator: output = mix(key + counter * gamma), so a stream
// is fully determined by its key and draw index regardless of which thread
// consumes it. Keys are derived from (seed, purpose tag, stream index).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static std::uint64_t derive_key(std::uint64_t seed, std::string_view purpose,
                                  std::uint64_t index = 0) {
    std::uint64_t h = mix(seed ^ 0x6a09e667f3bcc909ULL);
    for (char c : purpose) h = mix(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    return mix(h ^ mix(index + 0x9e3779b97f4a7c15ULL));
  }

  static CounterRng stream(std::uint64_t seed, std::string_view purpose,
                           std::uint64_t index = 0) {
    return CounterRng(derive_key(seed, purpose, index));
  }

  std::uint64_t next_u64() {
    counter_ += 0x9e3779b97f4a7c15ULL;
    return mix(key_ ^ counter_);
  }

  // Uniform on (0, 1); never returns 0 or 1.
  double uniform() {
    const std::uint64_t bits = next_u64() >> 11;  // 53 bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer uniform on [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  // Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace stratsurv

#endif
