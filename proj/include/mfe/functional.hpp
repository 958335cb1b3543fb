#pragma once
// The mean-field functional
//   J_eps(u) = 1/2 int |grad u|^2 + rho int u - rho log int h e^u,  rho = 8 pi - eps,
// its L^2(dv_g) gradient, gauge normalizations and the inequality probes
// (Trudinger-Moser ratio, Jensen gap).

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mfe/surface.hpp"

namespace mfe {

inline constexpr double critical_parameter = 8.0 * pi;

struct FunctionalReport {
  double dirichlet_term = 0.0;  ///< 1/2 int |grad u|^2
  double mean_term = 0.0;       ///< (8 pi - eps) int u
  double logmass_term = 0.0;    ///< (8 pi - eps) log int h e^u
  double value = 0.0;
  double epsilon = 0.0;
};

struct TMReport {
  double tm_ratio = 0.0;  ///< int e^{u - ubar} / exp(|grad u|^2 / 16 pi)
  double dirichlet = 0.0;
  double mass = 0.0;      ///< int e^{u - ubar}; may be +inf for huge amplitudes
  double log_mass = 0.0;
};

namespace detail {

inline void require_epsilon(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < critical_parameter)) {
    throw Error(ErrorKind::invalid_parameter, "epsilon must lie in [0, 8 pi)");
  }
}

/// h >= 0 at every node with no tolerance, and not identically zero.
inline void require_weight(const GridPtr& grid, const ScalarField& h) {
  require_compatible(grid, h);
  bool any_positive = false;
  for (double v : h.values()) {
    if (v < 0.0) throw Error(ErrorKind::invalid_parameter, "h has a negative node value");
    any_positive = any_positive || v > 0.0;
  }
  if (!any_positive) throw Error(ErrorKind::degenerate_mass, "h vanishes identically");
}

/// Density of h e^u against dv_g, normalized to unit mass, together with
/// log int h e^u dv_g. Exponentials are shifted by the largest exponent that
/// carries weight, so amplitudes of several hundred do not overflow.
struct WeightedExp {
  double log_mass = 0.0;
  std::vector<double> density;  ///< h e^u / int h e^u
};

inline WeightedExp weighted_exp(const GridPtr& grid, const ScalarField* h, const ScalarField& u) {
  const auto uv = u.values();
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < uv.size(); ++k) {
    if (!h || (*h)[k] > 0.0) top = std::max(top, uv[k]);
  }
  if (!std::isfinite(top)) throw Error(ErrorKind::degenerate_mass, "int h e^u vanishes");
  WeightedExp out;
  out.density.resize(uv.size());
  const auto area = grid->area_element();
  double sum = 0.0;
  for (std::size_t k = 0; k < uv.size(); ++k) {
    const double hk = h ? (*h)[k] : 1.0;
    out.density[k] = hk > 0.0 ? hk * std::exp(uv[k] - top) : 0.0;
    sum += out.density[k] * area[k];
  }
  sum *= grid->spacing() * grid->spacing();
  if (!(sum > 0.0) || !std::isfinite(sum)) throw Error(ErrorKind::degenerate_mass, "int h e^u is not positive");
  for (double& d : out.density) d /= sum;
  out.log_mass = top + std::log(sum);
  return out;
}

inline double l2_norm(const GridPtr& grid, std::span<const double> f) {
  const auto area = grid->area_element();
  double sum = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) sum += f[k] * f[k] * area[k];
  return std::sqrt(sum * grid->spacing() * grid->spacing());
}

inline double inner(const GridPtr& grid, std::span<const double> a, std::span<const double> b) {
  const auto area = grid->area_element();
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += a[k] * b[k] * area[k];
  return sum * grid->spacing() * grid->spacing();
}

/// log int q e^{t} for a probability vector q (already multiplied by the
/// quadrature weights). Small exponents go through expm1/log1p so increments
/// far below the rounding level of the functional value are still resolved.
inline double log_expectation(std::span<const double> q, std::span<const double> t) {
  double span_t = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (q[k] > 0.0) span_t = std::max(span_t, std::abs(t[k]));
  }
  if (span_t < 1.0) {
    double s = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) s += q[k] * std::expm1(t[k]);
    return std::log1p(s);
  }
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (q[k] > 0.0) top = std::max(top, t[k]);
  }
  double s = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) s += q[k] * std::exp(t[k] - top);
  return top + std::log(s);
}

}  // namespace detail

inline FunctionalReport eval_functional(const GridPtr& grid, const ScalarField& h, const ScalarField& u, double epsilon) {
  detail::require_epsilon(epsilon);
  detail::require_weight(grid, h);
  detail::require_compatible(grid, u);
  const double rho = critical_parameter - epsilon;
  const auto we = detail::weighted_exp(grid, &h, u);
  FunctionalReport r;
  r.epsilon = epsilon;
  r.dirichlet_term = 0.5 * dirichlet_energy(grid, u);
  r.mean_term = rho * integrate(grid, u);
  r.logmass_term = rho * we.log_mass;
  r.value = r.dirichlet_term + r.mean_term - r.logmass_term;
  return r;
}

/// L^2(dv_g) gradient: -Delta_g u + (8 pi - eps)(1 - h e^u / int h e^u).
inline ScalarField grad_functional(const GridPtr& grid, const ScalarField& h, const ScalarField& u, double epsilon) {
  detail::require_epsilon(epsilon);
  detail::require_weight(grid, h);
  const double rho = critical_parameter - epsilon;
  const auto we = detail::weighted_exp(grid, &h, u);
  const auto lap = laplacian(grid, u);
  std::vector<double> g(u.size());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = -lap[k] + rho * (1.0 - we.density[k]);
  return {u.grid(), std::move(g)};
}

/// u - int u dv_g.
inline ScalarField normalize_mean_zero(const GridPtr& grid, const ScalarField& u) { return u - integrate(grid, u); }

/// u - log int h e^u dv_g, so that the result lies on int h e^u = 1.
inline ScalarField normalize_H1(const GridPtr& grid, const ScalarField& h, const ScalarField& u) {
  detail::require_compatible(grid, h);
  detail::require_compatible(grid, u);
  return u - detail::weighted_exp(grid, &h, u).log_mass;
}

inline TMReport tm_ratio(const GridPtr& grid, const ScalarField& u) {
  detail::require_compatible(grid, u);
  const double mean = integrate(grid, u);
  const double log_mass = detail::weighted_exp(grid, nullptr, u).log_mass - mean;
  TMReport r;
  r.dirichlet = dirichlet_energy(grid, u);
  r.log_mass = log_mass;
  r.mass = std::exp(log_mass);
  r.tm_ratio = std::exp(log_mass - r.dirichlet / (16.0 * pi));
  return r;
}

/// log int e^v dv_g - int v dv_g; nonnegative by Jensen on a unit-area surface.
inline double jensen_gap(const GridPtr& grid, const ScalarField& v) {
  detail::require_compatible(grid, v);
  return detail::weighted_exp(grid, nullptr, v).log_mass - integrate(grid, v);
}

/// || Delta_g u' - rho + rho h e^{u'} ||_{L^2(dv_g)} with u' = u - log int h e^u.
inline double el_residual(const GridPtr& grid, const ScalarField& h, const ScalarField& u, double epsilon) {
  detail::require_epsilon(epsilon);
  detail::require_weight(grid, h);
  const double rho = critical_parameter - epsilon;
  const auto normalized = normalize_H1(grid, h, u);
  const auto lap = laplacian(grid, normalized);
  std::vector<double> res(u.size());
  for (std::size_t k = 0; k < res.size(); ++k) {
    res[k] = lap[k] - rho + rho * h[k] * std::exp(normalized[k]);
  }
  return detail::l2_norm(grid, res);
}

/// J_eps(u + step * d) - J_eps(u), evaluated term by term so that the result
/// keeps its relative accuracy when it is many orders below |J_eps(u)|.
inline double functional_increment(const GridPtr& grid, const ScalarField& h, const ScalarField& u,
                                   const ScalarField& d, double step, double epsilon) {
  detail::require_epsilon(epsilon);
  detail::require_weight(grid, h);
  detail::require_compatible(grid, u);
  detail::require_compatible(grid, d);
  const double rho = critical_parameter - epsilon;
  const double cell = grid->spacing() * grid->spacing();
  const auto lap_u = detail::flat_laplacian(*grid, u.values());
  const auto lap_d = detail::flat_laplacian(*grid, d.values());
  double cross = 0.0;
  double self = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cross -= d[k] * lap_u[k];
    self -= d[k] * lap_d[k];
  }
  cross *= cell;
  self *= cell;
  const auto we = detail::weighted_exp(grid, &h, u);
  std::vector<double> q(u.size());
  std::vector<double> t(u.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    q[k] = we.density[k] * grid->weight(k);
    t[k] = step * d[k];
  }
  return step * cross + 0.5 * step * step * self + rho * step * integrate(grid, d) -
         rho * detail::log_expectation(q, t);
}

}  // namespace mfe
