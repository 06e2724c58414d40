#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>

namespace dbvae {

// Seedable generator whose derived draws (uniform, normal, integers) are
// computed here rather than by <random> distributions, so sequences are
// identical across standard libraries and survive serialization exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(mix(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), unbiased.
  int uniform_int(int n);

  // Standard normal via Box-Muller; consumes exactly two engine draws.
  double normal();

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
      std::swap(values[i - 1], values[j]);
    }
  }

  // Independent child stream; does not advance this generator.
  Rng fork(std::uint64_t stream) const;

  std::string serialize() const;
  static Rng deserialize(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::mt19937_64 engine_;
};

// Deterministic seed for (base, stream) pairs, e.g. per-sample render seeds.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return Rng::mix(base ^ Rng::mix(stream + 0x9e3779b97f4a7c15ULL));
}

}  // namespace dbvae
