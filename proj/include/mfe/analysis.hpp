#pragma once
// Blow-up and existence diagnostics: the lower bound C0, the sufficient
// condition at the maximizer of A + 2 log h, concentration masses, the
// entire-plane bubble and comparison with rescaled solutions, and the
// zero-avoidance witness for continuation runs.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mfe/functional.hpp"
#include "mfe/green.hpp"
#include "mfe/minimizer.hpp"
#include "mfe/random_fields.hpp"

namespace mfe {

/// Largest flat distance between two points of the unit square torus.
inline const double torus_diameter = std::sqrt(0.5);

// ---------------------------------------------------------------------------
// C0 and the sufficient condition

struct C0Report {
  double c0 = 0.0;
  GridPoint argmax_point;
  double A_used = 0.0;
  double max_functional = 0.0;  ///< max of A + 2 log h over admissible nodes
  double h_min_threshold = 0.0;
  std::vector<GridPoint> runner_ups;  ///< next three admissible nodes by A + 2 log h
};

/// Default admissibility threshold: 1e-8 of max h.
inline double default_h_threshold(const ScalarField& h) { return 1e-8 * h.max(); }

/// C0 = -8 pi - 8 pi log pi - 4 pi max_p (A + 2 log h(p)). On the flat torus A
/// does not depend on p, so the maximizer is the largest admissible h.
inline C0Report compute_C0(const GridPtr& grid, const ScalarField& h, double green_A, double h_min_threshold) {
  require_flat(*grid);
  detail::require_compatible(grid, h);
  if (!(h_min_threshold > 0.0)) throw Error(ErrorKind::invalid_parameter, "threshold must be positive");
  std::vector<std::size_t> admissible;
  for (std::size_t k = 0; k < h.size(); ++k) {
    if (h[k] > h_min_threshold) admissible.push_back(k);
  }
  if (admissible.empty()) throw Error(ErrorKind::empty_admissible_set, "no node has h above the threshold");
  // stable: equal values keep lexicographic order
  std::stable_sort(admissible.begin(), admissible.end(), [&](std::size_t a, std::size_t b) { return h[a] > h[b]; });

  C0Report r;
  r.A_used = green_A;
  r.h_min_threshold = h_min_threshold;
  r.argmax_point = grid->point(admissible.front());
  r.max_functional = green_A + 2.0 * std::log(h[admissible.front()]);
  r.c0 = -8.0 * pi - 8.0 * pi * std::log(pi) - 4.0 * pi * r.max_functional;
  for (std::size_t k = 1; k < std::min<std::size_t>(4, admissible.size()); ++k) {
    r.runner_ups.push_back(grid->point(admissible[k]));
  }
  return r;
}

struct ConditionReport {
  GridPoint p_star;
  double lhs = 0.0;  ///< Delta h + 2 (b1 k1 + b2 k2)
  double rhs = 0.0;  ///< -(8 pi + b1^2 + b2^2 - 2 K) h
  double margin = 0.0;
  bool holds = false;
  double k1 = 0.0;
  double k2 = 0.0;
  double K_at_p = 0.0;
  double laplacian_h = 0.0;
  double h_at_p = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
};

/// Evaluates the sufficient condition at p_star. Derivatives are spectral; the
/// gradient is expressed in normal coordinates, which at p differ from the
/// flat ones by the factor e^{-phi(p)}.
inline ConditionReport check_condition(const GridPtr& grid, const ScalarField& h, const GridPoint& p_star, double b1,
                                       double b2) {
  detail::require_compatible(grid, h);
  const auto lap = laplacian(grid, h);
  const auto [d1, d2] = gradient(grid, h);
  const auto curvature = gauss_curvature(grid);
  const double scale = std::exp(-grid->conformal_factor()[grid->index(p_star.i, p_star.j)]);

  ConditionReport r;
  r.p_star = p_star;
  r.b1 = b1;
  r.b2 = b2;
  r.h_at_p = h.at(p_star);
  r.laplacian_h = lap.at(p_star);
  r.k1 = scale * d1.at(p_star);
  r.k2 = scale * d2.at(p_star);
  r.K_at_p = curvature.at(p_star);
  r.lhs = r.laplacian_h + 2.0 * (b1 * r.k1 + b2 * r.k2);
  r.rhs = -(8.0 * pi + b1 * b1 + b2 * b2 - 2.0 * r.K_at_p) * r.h_at_p;
  r.margin = r.lhs - r.rhs;
  r.holds = r.margin > 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Bubble

struct BubbleParams {
  double h_p = 1.0;
};

inline void require_bubble(const BubbleParams& params) {
  if (!(params.h_p > 0.0)) throw Error(ErrorKind::invalid_bubble, "the bubble needs h(p) > 0");
}

/// phi(x) = -2 log(1 + pi h_p |x|^2), the entire-plane solution of
/// Delta phi + 8 pi h_p e^phi = 0 with phi(0) = 0 = sup phi.
inline double bubble_value(const BubbleParams& params, double y1, double y2) {
  return -2.0 * std::log1p(pi * params.h_p * (y1 * y1 + y2 * y2));
}

inline std::vector<double> bubble_profile(const BubbleParams& params, const std::vector<std::array<double, 2>>& points) {
  require_bubble(params);
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(bubble_value(params, p[0], p[1]));
  return out;
}

/// int_{|x| < R} h_p e^phi dx = 1 - 1 / (1 + pi h_p R^2).
inline double bubble_mass(const BubbleParams& params, double radius) {
  require_bubble(params);
  return 1.0 - 1.0 / (1.0 + pi * params.h_p * radius * radius);
}

enum class BubbleDistance {
  minimal_image,  ///< flat distance; Lipschitz across the cell boundary
  chordal,        ///< (sin^2(pi y1) + sin^2(pi y2)) / pi^2 in place of r^2; smooth
};

/// lambda + phi(e^{lambda/2} (x - center)) placed on the torus.
inline ScalarField synthetic_bubble(const GridPtr& grid, const GridPoint& center, double lambda, double h_p,
                                    BubbleDistance distance = BubbleDistance::minimal_image) {
  require_bubble({h_p});
  const double scale2 = std::exp(lambda);
  return ScalarField::from_function(grid, [&](double x1, double x2) {
    const double y1 = minimal_image(x1 - center.x1);
    const double y2 = minimal_image(x2 - center.x2);
    double r2 = y1 * y1 + y2 * y2;
    if (distance == BubbleDistance::chordal) {
      const double s1 = std::sin(pi * y1);
      const double s2 = std::sin(pi * y2);
      r2 = (s1 * s1 + s2 * s2) / (pi * pi);
    }
    return lambda - 2.0 * std::log1p(pi * h_p * scale2 * r2);
  });
}

namespace detail {

/// Keys cubic convolution weights (a = -1/2) for fractional offset t in [0,1).
inline std::array<double, 4> cubic_weights(double t) {
  const double a = -0.5;
  auto near = [a](double x) { return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0; };
  auto far = [a](double x) { return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a; };
  return {far(1.0 + t), near(t), near(1.0 - t), far(2.0 - t)};
}

}  // namespace detail

/// Periodic bicubic (cubic-convolution) interpolation at (x1, x2).
inline double interpolate_bicubic(const ScalarField& f, double x1, double x2) {
  const auto& grid = *f.grid();
  const int n = grid.n();
  const double s1 = x1 * n;
  const double s2 = x2 * n;
  const double f1 = std::floor(s1);
  const double f2 = std::floor(s2);
  const auto w1 = detail::cubic_weights(s1 - f1);
  const auto w2 = detail::cubic_weights(s2 - f2);
  const int i0 = static_cast<int>(f1);
  const int j0 = static_cast<int>(f2);
  double v = 0.0;
  for (int a = 0; a < 4; ++a) {
    const int i = (((i0 - 1 + a) % n) + n) % n;
    double row = 0.0;
    for (int b = 0; b < 4; ++b) row += w2[b] * f(i, (((j0 - 1 + b) % n) + n) % n);
    v += w1[a] * row;
  }
  return v;
}

struct BubbleComparison {
  double sup_deviation = 0.0;
  double gradient_deviation = 0.0;  ///< secondary C^1 diagnostic in y-variables
  std::size_t window_nodes = 0;
  std::size_t samples = 0;
};

/// Rescales u around x_center by e^{lambda/2}, subtracts lambda and compares
/// with the bubble for h_p = h(x_center) on the physical window
/// |x - x_center| <= window_radius. Samples sit on a lattice of half the grid
/// spacing, so most of them are interpolated.
inline BubbleComparison compare_to_bubble_detailed(const GridPtr& grid, const ScalarField& h, const ScalarField& u,
                                                   double lambda, const GridPoint& x_center, double window_radius) {
  detail::require_compatible(grid, h);
  detail::require_compatible(grid, u);
  const BubbleParams params{h.at(x_center)};
  require_bubble(params);
  if (!(lambda > 0.0)) throw Error(ErrorKind::invalid_parameter, "lambda must be positive");
  const double s = grid->spacing();
  const int reach = static_cast<int>(std::floor(window_radius / s));
  BubbleComparison out;
  for (int a = -reach; a <= reach; ++a) {
    for (int b = -reach; b <= reach; ++b) {
      if (std::hypot(a, b) * s <= window_radius) ++out.window_nodes;
    }
  }
  if (out.window_nodes < 10) throw Error(ErrorKind::insufficient_samples, "bubble window holds fewer than 10 nodes");

  const double stretch = std::exp(0.5 * lambda);
  const double fd = 0.25 * s;
  for (int a = -2 * reach; a <= 2 * reach; ++a) {
    for (int b = -2 * reach; b <= 2 * reach; ++b) {
      const double y1 = 0.5 * a * s;
      const double y2 = 0.5 * b * s;
      if (std::hypot(y1, y2) > window_radius) continue;
      const double x1 = x_center.x1 + y1;
      const double x2 = x_center.x2 + y2;
      auto at = [&](double p, double q) { return interpolate_bicubic(u, p - std::floor(p), q - std::floor(q)); };
      const double disc = at(x1, x2) - lambda;
      const double z1 = y1 * stretch;
      const double z2 = y2 * stretch;
      out.sup_deviation = std::max(out.sup_deviation, std::abs(disc - bubble_value(params, z1, z2)));
      const double g1 = (at(x1 + fd, x2) - at(x1 - fd, x2)) / (2.0 * fd) / stretch;
      const double g2 = (at(x1, x2 + fd) - at(x1, x2 - fd)) / (2.0 * fd) / stretch;
      const double denom = 1.0 + pi * params.h_p * (z1 * z1 + z2 * z2);
      const double e1 = -4.0 * pi * params.h_p * z1 / denom;
      const double e2 = -4.0 * pi * params.h_p * z2 / denom;
      out.gradient_deviation = std::max(out.gradient_deviation, std::hypot(g1 - e1, g2 - e2));
      ++out.samples;
    }
  }
  return out;
}

inline double compare_to_bubble(const GridPtr& grid, const ScalarField& h, const ScalarField& u, double lambda,
                                const GridPoint& x_center, double window_radius) {
  return compare_to_bubble_detailed(grid, h, u, lambda, x_center, window_radius).sup_deviation;
}

// ---------------------------------------------------------------------------
// Concentration

struct MassSample {
  double r = 0.0;
  double mass = 0.0;
};

struct BlowupDiagnostics {
  std::optional<double> epsilon;
  double lambda_eps = 0.0;
  GridPoint x_eps;
  double h_at_xeps = 0.0;
  std::vector<MassSample> masses;  ///< int_{B_r(x_eps)} e^v dv_g, v = u - log int e^u
  double total_mass = 0.0;         ///< int e^v dv_g over the whole torus
  std::optional<double> bubble_dev;
};

/// Masses of e^v over minimal-image balls centred at the argmax of u. Radii
/// may go up to the torus diameter, where the ball is the whole surface.
inline BlowupDiagnostics concentration_masses(const GridPtr& grid, const ScalarField& h, const ScalarField& u,
                                              std::vector<double> radii) {
  detail::require_compatible(grid, h);
  detail::require_compatible(grid, u);
  for (double r : radii) {
    if (!(r > 0.0 && r <= torus_diameter + 1e-12)) {
      throw Error(ErrorKind::invalid_parameter, "radii must lie in (0, sqrt(2)/2]");
    }
  }
  std::sort(radii.begin(), radii.end());
  BlowupDiagnostics out;
  out.x_eps = argmax(u);
  out.lambda_eps = u.at(out.x_eps);
  out.h_at_xeps = h.at(out.x_eps);
  const auto we = detail::weighted_exp(grid, nullptr, u);

  std::vector<std::pair<double, double>> by_distance;  // (r, weighted density)
  by_distance.reserve(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const auto p = grid->point(k);
    const double r = torus_distance(p.x1, p.x2, out.x_eps.x1, out.x_eps.x2);
    const double w = we.density[k] * grid->weight(k);
    by_distance.emplace_back(r, w);
    out.total_mass += w;
  }
  std::sort(by_distance.begin(), by_distance.end());
  double running = 0.0;
  std::size_t next = 0;
  for (double r : radii) {
    while (next < by_distance.size() && by_distance[next].first <= r) running += by_distance[next++].second;
    out.masses.push_back({r, running});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inequality suites

struct TmSample {
  std::string family;
  double parameter = 0.0;
  TMReport report;
};

struct TmSweep {
  std::vector<TmSample> samples;
  double max_ratio = 0.0;
  bool all_finite = true;
};

/// Trudinger-Moser ratios over constants, single Fourier modes t cos(2 pi x1)
/// for t in 0..10, and smooth truncated bubbles at the given heights.
inline TmSweep tm_sweep(const GridPtr& grid, const std::vector<double>& bubble_lambdas = {2.0, 4.0, 6.0, 8.0}) {
  TmSweep sweep;
  auto add = [&](std::string family, double parameter, const ScalarField& u) {
    const auto rep = tm_ratio(grid, u);
    sweep.all_finite = sweep.all_finite && std::isfinite(rep.tm_ratio);
    sweep.max_ratio = std::max(sweep.max_ratio, rep.tm_ratio);
    sweep.samples.push_back({std::move(family), parameter, rep});
  };
  for (double c : {-3.0, 0.0, 5.0}) add("constant", c, ScalarField::constant(grid, c));
  for (int t = 0; t <= 10; ++t) {
    add("mode", t, ScalarField::from_function(grid, [t](double x1, double) { return t * std::cos(2.0 * pi * x1); }));
  }
  const auto center = grid->point(grid->n() / 2, grid->n() / 2);
  for (double lambda : bubble_lambdas) {
    add("bubble", lambda, synthetic_bubble(grid, center, lambda, 1.0, BubbleDistance::chordal));
  }
  return sweep;
}

struct JensenSummary {
  std::size_t count = 0;
  double min_gap = std::numeric_limits<double>::infinity();
  double max_gap = 0.0;
  std::size_t violations = 0;  ///< gaps below -1e-12
};

inline JensenSummary jensen_suite(const GridPtr& grid, std::uint64_t seed, std::size_t count = 20) {
  std::mt19937_64 rng(seed);
  JensenSummary s;
  for (std::size_t k = 0; k < count; ++k) {
    const auto v = random_smooth_field(grid, rng, 3, 2.0);
    const double gap = jensen_gap(grid, v);
    ++s.count;
    s.min_gap = std::min(s.min_gap, gap);
    s.max_gap = std::max(s.max_gap, gap);
    if (gap < -1e-12) ++s.violations;
  }
  return s;
}

struct EnergyIdentity {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// Trudinger-Moser step of the energy chain with an empirical constant:
///   1/2 D + rho ubar - rho (D / 16 pi + ubar)
///     <= J_eps(u) + rho log(c_emp * int h e^u / int e^u).
/// Both sides differ by rho (log c_emp - log tm_ratio(u)), so the check holds
/// exactly when u's ratio does not exceed c_emp.
inline EnergyIdentity energy_identity_check(const GridPtr& grid, const ScalarField& h, const ScalarField& u,
                                            double epsilon, double c_emp) {
  if (!(c_emp > 0.0)) throw Error(ErrorKind::invalid_parameter, "empirical constant must be positive");
  const double rho = critical_parameter - epsilon;
  const auto report = eval_functional(grid, h, u, epsilon);
  const double dirichlet = 2.0 * report.dirichlet_term;
  const double ubar = integrate(grid, u);
  const double log_h_mass = detail::weighted_exp(grid, &h, u).log_mass;
  const double log_mass = detail::weighted_exp(grid, nullptr, u).log_mass;
  EnergyIdentity out;
  out.lhs = 0.5 * dirichlet + rho * ubar - rho * (dirichlet / (16.0 * pi) + ubar);
  out.rhs = report.value + rho * (std::log(c_emp) + log_h_mass - log_mass);
  out.holds = out.lhs <= out.rhs + 1e-10 * (1.0 + std::abs(out.rhs));
  return out;
}

// ---------------------------------------------------------------------------
// Zero avoidance

struct ZeroAvoidance {
  double min_h_at_xeps = 0.0;
  double max_h = 0.0;
  double threshold_frac = 0.0;
  bool passes = false;
  /// Smallest distance, in grid nodes, from any x_eps to a node where h
  /// vanishes; nullopt when h has no zero node.
  std::optional<double> min_nodes_to_zero_set;
};

inline ZeroAvoidance zero_avoidance_report(const ContinuationResult& cont, const ScalarField& h, double threshold_frac) {
  if (cont.steps.empty()) throw Error(ErrorKind::invalid_parameter, "continuation has no steps");
  const auto& grid = *h.grid();
  ZeroAvoidance out;
  out.threshold_frac = threshold_frac;
  out.max_h = h.max();
  out.min_h_at_xeps = std::numeric_limits<double>::infinity();
  for (const auto& s : cont.steps) out.min_h_at_xeps = std::min(out.min_h_at_xeps, s.h_at_xeps);
  out.passes = out.min_h_at_xeps >= threshold_frac * out.max_h;

  const double zero_level = 1e-12 * out.max_h;
  for (std::size_t k = 0; k < h.size(); ++k) {
    if (h[k] > zero_level) continue;
    const auto z = grid.point(k);
    for (const auto& s : cont.steps) {
      const double d = torus_distance(z.x1, z.x2, s.x_eps.x1, s.x_eps.x2) / grid.spacing();
      out.min_nodes_to_zero_set = std::min(out.min_nodes_to_zero_set.value_or(d), d);
    }
  }
  return out;
}

}  // namespace mfe
