#pragma once
// Green function of Delta G = 8 pi - 8 pi delta_p with zero mean on the flat
// torus, the local expansion
//   G(x) = -4 log r + A + b1 x1 + b2 x2 + c1 x1^2 + 2 c2 x1 x2 + c3 x2^2 + O(r^3),
// and an Ewald-summed reference value for A on the unit square torus.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include "mfe/surface.hpp"

namespace mfe {

struct Annulus {
  double r_min = 0.0;
  double r_max = 0.0;
};

struct GreenExpansion {
  GridPoint p;
  double A = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double fit_residual = 0.0;  ///< RMS misfit over the fitted nodes
  Annulus annulus;
  std::size_t samples = 0;

  /// Expansion evaluated at displacement (y1, y2) from p, including -4 log r.
  double evaluate(double y1, double y2) const {
    return -4.0 * std::log(std::hypot(y1, y2)) + A + b1 * y1 + b2 * y2 + c1 * y1 * y1 + 2.0 * c2 * y1 * y2 +
           c3 * y2 * y2;
  }
};

inline void require_flat(const TorusGrid& grid) {
  if (!grid.flat()) throw Error(ErrorKind::unsupported_metric, "Green machinery needs the flat metric");
}

/// Spectral solve with the source as a unit point mass at node p. The kernel
/// is computed once for the origin and translated by whole nodes, so sources
/// at different nodes give node-wise identical shifted fields.
inline ScalarField solve_green(const GridPtr& grid, const GridPoint& p) {
  require_flat(*grid);
  const int n = grid->n();
  if (p.i < 0 || p.i >= n || p.j < 0 || p.j >= n) throw Error(ErrorKind::invalid_parameter, "source is not a grid node");
  const double point_mass = 1.0 / (grid->spacing() * grid->spacing());
  std::vector<double> rhs(grid->size(), 8.0 * pi);
  rhs[0] -= 8.0 * pi * point_mass;
  const auto kernel = solve_poisson(grid, ScalarField(grid, std::move(rhs)));
  std::vector<double> g(grid->size());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) g[grid->index(i, j)] = kernel((i - p.i + n) % n, (j - p.j + n) % n);
  }
  return {grid, std::move(g)};
}

/// Least-squares fit of G + 4 log r on {1, x1, x2, x1^2, x1 x2, x2^2} over the
/// nodes with r in [r_min, r_max] (minimal-image coordinates centred at p).
/// `keep` optionally drops nodes from the fit, e.g. to hold some out.
inline GreenExpansion extract_expansion(const GridPtr& grid, const ScalarField& G, const GridPoint& p, double r_min,
                                        double r_max,
                                        const std::function<bool(const GridPoint&)>& keep = nullptr) {
  require_flat(*grid);
  detail::require_compatible(grid, G);
  const double tol = 1e-12;
  if (r_min < 4.0 * grid->spacing() - tol) {
    throw Error(ErrorKind::invalid_parameter, "r_min must be at least four grid spacings");
  }
  if (r_max > 0.25 + tol) throw Error(ErrorKind::invalid_parameter, "r_max must not exceed 1/4");
  if (!(r_max > r_min)) throw Error(ErrorKind::insufficient_samples, "annulus is empty");

  std::vector<std::array<double, 3>> rows;  // y1, y2, target
  const int n = grid->n();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double y1 = minimal_image(grid->coordinate(i) - p.x1);
      const double y2 = minimal_image(grid->coordinate(j) - p.x2);
      const double r = std::hypot(y1, y2);
      if (r < r_min || r > r_max) continue;
      if (keep && !keep(grid->point(i, j))) continue;
      rows.push_back({y1, y2, G(i, j) + 4.0 * std::log(r)});
    }
  }
  if (rows.size() < 50) {
    throw Error(ErrorKind::insufficient_samples, "annulus holds " + std::to_string(rows.size()) + " nodes, need 50");
  }
  Eigen::MatrixXd basis(rows.size(), 6);
  Eigen::VectorXd target(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto [y1, y2, t] = rows[k];
    basis.row(static_cast<Eigen::Index>(k)) << 1.0, y1, y2, y1 * y1, y1 * y2, y2 * y2;
    target(static_cast<Eigen::Index>(k)) = t;
  }
  const Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(target);
  const Eigen::VectorXd misfit = basis * coef - target;

  GreenExpansion e;
  e.p = p;
  e.A = coef(0);
  e.b1 = coef(1);
  e.b2 = coef(2);
  e.c1 = coef(3);
  e.c2 = 0.5 * coef(4);
  e.c3 = coef(5);
  e.fit_residual = std::sqrt(misfit.squaredNorm() / static_cast<double>(rows.size()));
  e.annulus = {r_min, r_max};
  e.samples = rows.size();
  return e;
}

/// Constant A of the continuum Green function of the unit square torus,
/// G(x, 0) + 4 log |x| -> A, from an Ewald split with parameter pi. Both lattice
/// sums run over the `terms` points nearest the origin (a disc of area terms).
inline double robin_oracle(int terms) {
  if (terms < 100) throw Error(ErrorKind::invalid_parameter, "robin_oracle needs at least 100 terms");
  const double alpha = pi;
  const double radius = std::sqrt(terms / pi);
  const int reach = static_cast<int>(std::ceil(radius));
  double reciprocal = 0.0;
  double direct = 0.0;
  // shells in increasing |m|^2 so the small tail terms are added last
  for (int r2 = 1; r2 <= static_cast<int>(radius * radius); ++r2) {
    int count = 0;
    for (int a = -reach; a <= reach; ++a) {
      const int rem = r2 - a * a;
      if (rem < 0) continue;
      const int b = static_cast<int>(std::lround(std::sqrt(static_cast<double>(rem))));
      if (b * b != rem) continue;
      count += b == 0 ? 1 : 2;
    }
    if (count == 0) continue;
    const double k2 = r2;
    reciprocal += count * std::exp(-pi * pi * k2 / alpha) / (4.0 * pi * pi * k2);
    direct += count * -std::expint(-alpha * k2) / (4.0 * pi);
  }
  const double regular =
      reciprocal + direct - (std::numbers::egamma + std::log(alpha)) / (4.0 * pi) - 1.0 / (4.0 * alpha);
  return 8.0 * pi * regular;
}

}  // namespace mfe
