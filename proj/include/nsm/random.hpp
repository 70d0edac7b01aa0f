#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace nsm {

/// Seeded random source shared by every stochastic operation. Draw order is
/// part of the reproducibility contract: same seed, same calls, same values.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  // Uniform on (0, 1); never returns 0 so log(uniform()) is finite.
  double uniform() {
    double u;
    do {
      u = std::generate_canonical<double, 53>(engine_);
    } while (u <= 0.0);
    return u;
  }
  // Cauchy(scale, 0) by inversion.
  double cauchy(double scale) { return scale * std::tan(std::numbers::pi * (uniform() - 0.5)); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace nsm
