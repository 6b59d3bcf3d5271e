#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace consol {

/// Seeded stream used for every random draw in the toolkit.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Conversions to uniform and normal variates are implemented here
/// rather than through <random> distributions so that streams are identical
/// across standard library implementations.
class Rng {
 public:
  static constexpr std::string_view kName = "mt19937_64/u53/box-muller";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi); returns lo when the range is collapsed.
  double uniform(double lo, double hi) { return lo == hi ? lo : lo + (hi - lo) * uniform01(); }

  /// Uniform integer on [0, n), n > 0, by rejection.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via the Box-Muller transform; variates are produced in pairs.
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer, used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Child seed for item `index` of stream `stream` under `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace consol
