#pragma once
// Seeded generators of smooth periodic test fields.

#include <cstdint>
#include <random>
#include <vector>

#include "mfe/surface.hpp"

namespace mfe {

/// Sum of cos/sin modes with |k_i| <= max_mode and coefficients uniform in
/// [-amplitude, amplitude] scaled by 1 / (1 + |k|^2).
inline ScalarField random_smooth_field(const GridPtr& grid, std::mt19937_64& rng, int max_mode = 3,
                                       double amplitude = 1.0) {
  std::uniform_real_distribution<double> coef(-amplitude, amplitude);
  struct Term {
    int k1, k2;
    double c, s;
  };
  std::vector<Term> terms;
  for (int k1 = -max_mode; k1 <= max_mode; ++k1) {
    for (int k2 = 0; k2 <= max_mode; ++k2) {
      if (k2 == 0 && k1 <= 0) continue;
      const double decay = 1.0 / (1.0 + k1 * k1 + k2 * k2);
      const double c = coef(rng) * decay;
      const double s = coef(rng) * decay;
      terms.push_back({k1, k2, c, s});
    }
  }
  const double offset = coef(rng);
  return ScalarField::from_function(grid, [&](double x1, double x2) {
    double v = offset;
    for (const auto& t : terms) {
      const double arg = 2.0 * pi * (t.k1 * x1 + t.k2 * x2);
      v += t.c * std::cos(arg) + t.s * std::sin(arg);
    }
    return v;
  });
}

/// Nonnegative smooth weight: 1 + 0.9 * (random field rescaled into [-1, 1]).
inline ScalarField random_positive_weight(const GridPtr& grid, std::mt19937_64& rng) {
  const auto f = random_smooth_field(grid, rng, 2, 1.0);
  const double lo = f.min();
  const double hi = f.max();
  const double mid = 0.5 * (hi + lo);
  const double half = 0.5 * (hi - lo);
  return f.map([=](double v) { return 1.0 + 0.9 * (v - mid) / half; });
}

}  // namespace mfe
