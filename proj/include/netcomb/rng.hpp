#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace netcomb {

/// Stage tags used to derive independent random streams. Streams are keyed
/// by (seed, stage, tick, ids...) so gating a stage on or off never shifts
/// the draws seen by another stage.
enum class Stage : std::uint64_t {
  population = 1,
  mobility = 2,
  services = 3,
  shadowing = 4,
  small_scale_init = 5,
  small_scale_step = 6,
  event = 7,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Folds a list of identifiers into one 64-bit stream key.
inline constexpr std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

/// Counter-based generator (SplitMix64 over a keyed counter). Cheap to
/// construct, so a fresh stream per (tick, user) costs nothing. All
/// distribution transforms are written out here rather than taken from
/// <random>, whose distributions are implementation-defined and would break
/// bit-exact reproducibility across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t key) noexcept : key_(key) {}
  Rng(std::uint64_t seed, Stage stage, std::initializer_list<std::uint64_t> ids) noexcept
      : key_(derive(seed, stage, ids)) {}

  std::uint64_t next_u64() noexcept { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform in [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; one value per call.
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Poisson by sequential inversion. Callers keep mean below a few hundred.
  std::uint32_t poisson(double mean) noexcept {
    if (mean <= 0.0) return 0;
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint32_t k = 0;
    while (u >= cdf && p > 0.0) {
      ++k;
      p *= mean / k;
      cdf += p;
    }
    return k;
  }

  static std::uint64_t derive(std::uint64_t seed, Stage stage,
                              std::initializer_list<std::uint64_t> ids) noexcept {
    std::uint64_t h = stream_key({seed, static_cast<std::uint64_t>(stage)});
    for (auto id : ids) h = splitmix64(h ^ splitmix64(id + 0x2545f4914f6cdd1dULL));
    return h;
  }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace netcomb
