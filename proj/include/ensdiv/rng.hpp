#pragma once

#include <cstdint>
#include <vector>

namespace ensdiv {

/// Counter-based deterministic generator built on the splitmix64 mixing
/// function. A given seed yields the same draw sequence on every platform.
/// Single-owner: never share one instance across threads; use stream() to
/// derive independent generators for parallel work.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform on [0, 1).
  double uniform();

  /// Standard normal via Box-Muller (two uniforms per draw, no cached spare).
  double normal();

  /// Uniform integer in [0, n), n > 0. Rejection-sampled, unbiased.
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Gamma(shape, 1), shape > 0. Marsaglia-Tsang with the alpha<1 boost.
  double gamma(double shape);

  /// Beta(a, b), a > 0, b > 0.
  double beta(double a, double b);

  /// Independent generator for the given stream id; does not advance *this.
  Rng stream(std::uint64_t id) const;

  /// seed XOR hash(id); used to give each learner its own reproducible seed.
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t id);

 private:
  std::uint64_t state_;
};

}  // namespace ensdiv
