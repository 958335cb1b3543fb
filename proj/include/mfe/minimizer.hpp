#pragma once
// Descent on J_eps over the mean-zero gauge and warm-started continuation in eps.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mfe/functional.hpp"

namespace mfe {

enum class Descent {
  plain,           ///< d = -grad
  preconditioned,  ///< d = -(-Delta_g)^{-1} grad on mean-zero functions
};

struct MinimizeOptions {
  double grad_tol = 1e-8;
  int max_iters = 50000;
  double step_init = 1.0;
  double armijo_c = 1e-4;
  double armijo_backtrack = 0.5;
  Descent descent = Descent::preconditioned;
  /// Start each line search from the Barzilai-Borwein step of the previous
  /// iteration instead of step_init. Acceptance is still plain Armijo.
  bool barzilai_borwein = true;

  void validate() const {
    if (!(grad_tol > 0.0)) throw Error(ErrorKind::invalid_parameter, "grad_tol must be positive");
    if (max_iters < 1) throw Error(ErrorKind::invalid_parameter, "max_iters must be at least 1");
    if (!(step_init > 0.0)) throw Error(ErrorKind::invalid_parameter, "step_init must be positive");
    if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw Error(ErrorKind::invalid_parameter, "armijo_c must lie in (0,1)");
    if (!(armijo_backtrack > 0.0 && armijo_backtrack < 1.0)) {
      throw Error(ErrorKind::invalid_parameter, "armijo_backtrack must lie in (0,1)");
    }
  }
};

struct MinimizeResult {
  ScalarField u;  ///< normalized to int h e^u dv_g = 1
  FunctionalReport report;
  double grad_norm = 0.0;
  int iters = 0;
  bool converged = false;
  double gauge_mean = 0.0;  ///< int u dv_g of the last mean-zero iterate
  std::string stop_reason;
  /// J_eps along the accepted iterates, accumulated from the exact increments.
  std::vector<double> energy_trace;
};

/// Minimizes J_eps by descent with Armijo backtracking; returns converged=false
/// instead of throwing when the budget runs out.
inline MinimizeResult minimize_subcritical(const GridPtr& grid, const ScalarField& h, double epsilon,
                                           const MinimizeOptions& opts,
                                           const std::optional<ScalarField>& u_init = std::nullopt) {
  opts.validate();
  if (!(epsilon > 0.0 && epsilon < critical_parameter)) {
    throw Error(ErrorKind::invalid_parameter, "epsilon must lie in (0, 8 pi)");
  }
  detail::require_weight(grid, h);
  const double rho = critical_parameter - epsilon;
  const std::size_t size = grid->size();
  const double cell = grid->spacing() * grid->spacing();
  const auto area = grid->area_element();

  auto mean = [&](const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t k = 0; k < size; ++k) s += f[k] * area[k];
    return s * cell;
  };

  std::vector<double> u(size, 0.0);
  if (u_init) {
    detail::require_compatible(grid, *u_init);
    u.assign(u_init->values().begin(), u_init->values().end());
  }
  {
    const double m = mean(u);
    for (double& v : u) v -= m;
  }
  auto lap_u = detail::flat_laplacian(*grid, u);
  bool lap_fresh = true;

  MinimizeResult result{ScalarField(grid, u), {}, 0.0, 0, false, 0.0, "", {}};
  result.energy_trace.push_back(eval_functional(grid, h, ScalarField(grid, u), epsilon).value);

  std::vector<double> g(size), g_prev, step_prev, q(size), trial(size);
  double dirichlet_prev_step = 0.0;
  int since_refresh = 0;

  auto compute_gradient = [&](const detail::WeightedExp& we) {
    for (std::size_t k = 0; k < size; ++k) g[k] = -lap_u[k] / area[k] + rho * (1.0 - we.density[k]);
    return detail::l2_norm(grid, g);
  };

  int iter = 0;
  for (;; ++iter) {
    auto we = detail::weighted_exp(grid, &h, ScalarField(grid, u));
    double gnorm = compute_gradient(we);
    if (gnorm <= opts.grad_tol && !lap_fresh) {
      lap_u = detail::flat_laplacian(*grid, u);
      lap_fresh = true;
      since_refresh = 0;
      gnorm = compute_gradient(we);
    }
    result.grad_norm = gnorm;
    if (gnorm <= opts.grad_tol) {
      result.converged = true;
      result.stop_reason = "gradient-tolerance";
      break;
    }
    if (iter >= opts.max_iters) {
      result.stop_reason = "max-iterations";
      break;
    }

    std::vector<double> d;
    if (opts.descent == Descent::preconditioned) {
      auto sol = solve_poisson(grid, ScalarField(grid, g));
      d.assign(sol.values().begin(), sol.values().end());
    } else {
      d.resize(size);
      for (std::size_t k = 0; k < size; ++k) d[k] = -g[k];
    }
    const double slope = detail::inner(grid, g, d);
    if (!(slope < 0.0)) {
      result.stop_reason = "not-a-descent-direction";
      break;
    }
    const auto lap_d = detail::flat_laplacian(*grid, d);
    double cross = 0.0;
    double self = 0.0;
    for (std::size_t k = 0; k < size; ++k) {
      cross -= d[k] * lap_u[k];
      self -= d[k] * lap_d[k];
    }
    cross *= cell;
    self *= cell;
    const double mean_d = mean(d);
    for (std::size_t k = 0; k < size; ++k) q[k] = we.density[k] * area[k] * cell;

    double alpha = opts.step_init;
    if (opts.barzilai_borwein && !g_prev.empty()) {
      double sy = 0.0;
      std::vector<double> y(size);
      for (std::size_t k = 0; k < size; ++k) y[k] = g[k] - g_prev[k];
      sy = detail::inner(grid, step_prev, y);
      const double ss = opts.descent == Descent::preconditioned ? dirichlet_prev_step
                                                                : detail::inner(grid, step_prev, step_prev);
      if (sy > 0.0 && std::isfinite(ss / sy) && ss > 0.0) alpha = std::clamp(ss / sy, 1e-10, 1e10);
    }

    double delta_j = 0.0;
    bool accepted = false;
    for (int tries = 0; tries < 200; ++tries) {
      for (std::size_t k = 0; k < size; ++k) trial[k] = alpha * d[k];
      delta_j = alpha * cross + 0.5 * alpha * alpha * self + rho * alpha * mean_d -
                rho * detail::log_expectation(q, trial);
      if (std::isfinite(delta_j) && delta_j < 0.0 && delta_j <= opts.armijo_c * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= opts.armijo_backtrack;
    }
    if (!accepted) {
      result.stop_reason = "line-search-failed";
      break;
    }

    g_prev = g;
    step_prev.resize(size);
    for (std::size_t k = 0; k < size; ++k) {
      step_prev[k] = alpha * d[k];
      u[k] += step_prev[k];
      lap_u[k] += alpha * lap_d[k];
    }
    dirichlet_prev_step = alpha * alpha * self;
    const double m = mean(u);
    for (double& v : u) v -= m;
    lap_fresh = false;
    if (++since_refresh >= 50) {
      lap_u = detail::flat_laplacian(*grid, u);
      lap_fresh = true;
      since_refresh = 0;
    }
    result.energy_trace.push_back(result.energy_trace.back() + delta_j);
  }

  result.iters = iter;
  result.gauge_mean = mean(u);
  const ScalarField iterate(grid, std::move(u));
  result.u = normalize_H1(grid, h, iterate);
  result.report = eval_functional(grid, h, result.u, epsilon);
  return result;
}

enum class Classification { converged_family, blowup_suspected, stalled };

inline std::string_view to_string(Classification c) {
  switch (c) {
    case Classification::converged_family: return "converged-family";
    case Classification::blowup_suspected: return "blowup-suspected";
    case Classification::stalled: return "stalled";
  }
  return "unknown";
}

struct ContinuationStep {
  double epsilon = 0.0;
  double lambda_eps = 0.0;  ///< max of the normalized solution
  GridPoint x_eps;          ///< its argmax, lowest (i, j) on ties
  double h_at_xeps = 0.0;
  double J_value = 0.0;
  double grad_norm = 0.0;
  double dirichlet = 0.0;  ///< int |grad u|^2
  int iters = 0;
  bool converged = false;
};

struct ContinuationOptions {
  /// Growth of lambda between consecutive steps that counts as "still rising";
  /// a convergent family has geometrically shrinking increments.
  double growth_tol = 0.1;
  /// A final-step bubble whose half-mass radius e^{-lambda/2} / sqrt(pi h(x_eps))
  /// is below this many grid spacings has collapsed to the grid scale, which is
  /// what blow-up looks like on a fixed mesh.
  double resolution_nodes = 2.0;
  bool warm_start = true;
};

struct ContinuationResult {
  std::vector<ContinuationStep> steps;
  std::vector<ScalarField> solutions;  ///< one per step, H_1-normalized
  Classification classification = Classification::stalled;
  double blowup_lambda = 0.0;
  double growth_tol = 0.0;
  double resolution_nodes = 0.0;
};

/// 8 pi 2^{-k}, k = 1..count.
inline std::vector<double> default_schedule(int count = 12) {
  std::vector<double> eps;
  for (int k = 1; k <= count; ++k) eps.push_back(critical_parameter * std::ldexp(1.0, -k));
  return eps;
}

/// Half-mass radius of the bubble matching height lambda at a point where h = h_p.
inline double bubble_core_radius(double lambda, double h_p) {
  return h_p > 0.0 ? std::exp(-0.5 * lambda) / std::sqrt(pi * h_p) : std::numeric_limits<double>::infinity();
}

/// Blow-up is suspected when lambda exceeds blowup_lambda, when over the last
/// three steps lambda rises by at least growth_tol each time while the
/// Dirichlet energy increases, or when the final bubble core is narrower than
/// resolution_nodes grid spacings.
inline Classification classify(const std::vector<ContinuationStep>& steps, double blowup_lambda, double growth_tol,
                               double resolution_nodes = 0.0, double spacing = 0.0) {
  if (steps.empty()) return Classification::stalled;
  for (const auto& s : steps) {
    if (!s.converged) return Classification::stalled;
  }
  for (const auto& s : steps) {
    if (s.lambda_eps > blowup_lambda) return Classification::blowup_suspected;
  }
  const std::size_t m = steps.size();
  if (m >= 3) {
    bool rising = true;
    for (std::size_t k = m - 2; k < m; ++k) {
      rising = rising && steps[k].lambda_eps - steps[k - 1].lambda_eps >= growth_tol &&
               steps[k].dirichlet > steps[k - 1].dirichlet;
    }
    if (rising) return Classification::blowup_suspected;
  }
  const auto& last = steps.back();
  if (bubble_core_radius(last.lambda_eps, last.h_at_xeps) < resolution_nodes * spacing) {
    return Classification::blowup_suspected;
  }
  return Classification::converged_family;
}

inline ContinuationResult continuation(const GridPtr& grid, const ScalarField& h, const std::vector<double>& schedule,
                                       const MinimizeOptions& opts, double blowup_lambda,
                                       const ContinuationOptions& copts = {}) {
  opts.validate();
  if (schedule.empty()) throw Error(ErrorKind::invalid_parameter, "empty epsilon schedule");
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    if (!(schedule[k] > 0.0 && schedule[k] < critical_parameter)) {
      throw Error(ErrorKind::invalid_parameter, "schedule entries must lie in (0, 8 pi)");
    }
    if (k > 0 && !(schedule[k] < schedule[k - 1])) {
      throw Error(ErrorKind::invalid_parameter, "schedule must be strictly decreasing");
    }
  }
  if (!(blowup_lambda > 0.0)) throw Error(ErrorKind::invalid_parameter, "blowup_lambda must be positive");
  detail::require_weight(grid, h);

  ContinuationResult out;
  out.blowup_lambda = blowup_lambda;
  out.growth_tol = copts.growth_tol;
  out.resolution_nodes = copts.resolution_nodes;
  std::optional<ScalarField> start;
  for (double eps : schedule) {
    auto res = minimize_subcritical(grid, h, eps, opts, copts.warm_start ? start : std::nullopt);
    ContinuationStep step;
    step.epsilon = eps;
    step.x_eps = argmax(res.u);
    step.lambda_eps = res.u.at(step.x_eps);
    step.h_at_xeps = h.at(step.x_eps);
    step.J_value = res.report.value;
    step.grad_norm = res.grad_norm;
    step.dirichlet = 2.0 * res.report.dirichlet_term;
    step.iters = res.iters;
    step.converged = res.converged;
    out.steps.push_back(step);
    out.solutions.push_back(res.u);
    if (!res.converged) break;
    start = res.u;
  }
  out.classification =
      classify(out.steps, blowup_lambda, copts.growth_tol, copts.resolution_nodes, grid->spacing());
  return out;
}

struct Fact3Report {
  double mass = 0.0;  ///< int_Omega h e^u dv_g
  double osc = 0.0;   ///< sup - inf of u - ubar over the shrunken domain
  std::size_t domain_nodes = 0;
  std::size_t interior_nodes = 0;
  bool below_half_minus_delta = false;
};

using NodePredicate = std::function<bool(const GridPoint&)>;

/// Local boundedness diagnostic. The interior set keeps the nodes of the
/// domain whose flat distance to every node outside it is at least `shrink`
/// (four grid spacings when not given). Nothing is enforced.
inline Fact3Report fact3_monitor(const GridPtr& grid, const ScalarField& h, const ScalarField& u,
                                 const NodePredicate& domain_mask, double delta,
                                 std::optional<double> shrink = std::nullopt) {
  detail::require_compatible(grid, h);
  detail::require_compatible(grid, u);
  if (!(delta > 0.0 && delta < 0.5)) throw Error(ErrorKind::invalid_parameter, "delta must lie in (0, 1/2)");
  const double total = std::exp(detail::weighted_exp(grid, &h, u).log_mass);
  if (!(std::abs(total - 1.0) <= 1e-8)) {
    throw Error(ErrorKind::invalid_parameter, "u must satisfy int h e^u dv_g = 1");
  }
  const int n = grid->n();
  std::vector<char> inside(grid->size());
  std::size_t count = 0;
  for (std::size_t k = 0; k < inside.size(); ++k) {
    inside[k] = domain_mask(grid->point(k)) ? 1 : 0;
    count += inside[k];
  }
  if (count == 0) throw Error(ErrorKind::invalid_domain, "domain mask selects no node");

  Fact3Report r;
  r.domain_nodes = count;
  const double margin = shrink.value_or(4.0 * grid->spacing());
  const int reach = static_cast<int>(std::ceil(margin / grid->spacing()));
  const double ubar = integrate(grid, u);
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const std::size_t k = grid->index(i, j);
      if (!inside[k]) continue;
      r.mass += h[k] * std::exp(u[k]) * grid->weight(k);
      bool interior = true;
      for (int a = -reach; a <= reach && interior; ++a) {
        for (int b = -reach; b <= reach && interior; ++b) {
          if (std::hypot(a, b) * grid->spacing() >= margin) continue;
          interior = inside[grid->index((i + a + n) % n, (j + b + n) % n)] != 0;
        }
      }
      if (!interior) continue;
      ++r.interior_nodes;
      hi = std::max(hi, u[k] - ubar);
      lo = std::min(lo, u[k] - ubar);
    }
  }
  r.osc = r.interior_nodes > 0 ? hi - lo : 0.0;
  r.below_half_minus_delta = r.mass <= 0.5 - delta;
  return r;
}

}  // namespace mfe
