#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <random>

#include "mfe/analysis.hpp"
#include "mfe/experiment.hpp"
#include "mfe/random_fields.hpp"

using namespace mfe;

namespace {

ScalarField cosine_weight(const GridPtr& grid, double amplitude) {
  return ScalarField::from_function(grid, [amplitude](double x1, double) {
    return 1.0 + amplitude * std::cos(2 * pi * x1);
  });
}

// 2 pi int_0^R h_p r e^{phi(r)} dr, split at the core so the adaptive rule sees the peak
double quadrature_mass(double h_p, double R) {
  auto f = [h_p](double r) {
    const double q = 1.0 + pi * h_p * r * r;
    return 2.0 * pi * h_p * r / (q * q);
  };
  using boost::math::quadrature::gauss_kronrod;
  double total = 0.0;
  double a = 0.0;
  for (double b = 0.5; a < R; b *= 4.0) {
    const double hi = std::min(b, R);
    total += gauss_kronrod<double, 61>::integrate(f, a, hi, 15, 1e-14);
    a = hi;
  }
  return total;
}

ContinuationResult fake_continuation(const GridPtr& grid, const ScalarField& h,
                                     const std::vector<std::pair<int, int>>& nodes) {
  ContinuationResult c;
  for (const auto& [i, j] : nodes) {
    ContinuationStep s;
    s.x_eps = grid->point(i, j);
    s.h_at_xeps = h(i, j);
    s.converged = true;
    c.steps.push_back(s);
  }
  return c;
}

}  // namespace

TEST(C0, ConstantWeight) {
  auto grid = build_torus(32);
  const double A = -5.25;
  const auto r = compute_C0(grid, ScalarField::constant(grid, 1.0), A, 1e-8);
  EXPECT_NEAR(r.c0, -8 * pi - 8 * pi * std::log(pi) - 4 * pi * A, 1e-12);
  EXPECT_EQ(r.argmax_point.i, 0);
  EXPECT_EQ(r.argmax_point.j, 0);
  EXPECT_EQ(r.runner_ups.size(), 3u);
  EXPECT_EQ(r.runner_ups[0].j, 1);
}

TEST(C0, ScalingCovariance) {
  auto grid = build_torus(64);
  std::mt19937_64 rng(31);
  const auto h = random_positive_weight(grid, rng);
  const double A = robin_oracle(1000);
  const auto base = compute_C0(grid, h, A, 1e-8);
  for (double t : {0.25, 2.0, 10.0}) {
    const auto scaled = compute_C0(grid, t * h, A, 1e-8 * t);
    EXPECT_NEAR(scaled.c0 - base.c0, -8 * pi * std::log(t), 1e-10);
    EXPECT_EQ(scaled.argmax_point, base.argmax_point);
  }
  EXPECT_EQ(compute_C0(grid, h, A + 3.0, 1e-8).argmax_point, base.argmax_point);
}

TEST(C0, WeightWithZeroLine) {
  auto grid = build_torus(64);
  const auto r = compute_C0(grid, cosine_weight(grid, 1.0), -5.0, 1e-8 * 2.0);
  EXPECT_EQ(r.argmax_point.i, 0);
  EXPECT_TRUE(std::isfinite(r.c0));
  EXPECT_NEAR(r.max_functional, -5.0 + 2 * std::log(2.0), 1e-12);
}

TEST(C0, Errors) {
  auto grid = build_torus(16);
  auto kind_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::invalid_config;
  };
  EXPECT_EQ(kind_of([&] { compute_C0(grid, ScalarField::constant(grid, 0.0), -5.0, 1e-8); }),
            ErrorKind::empty_admissible_set);
  EXPECT_EQ(kind_of([&] { compute_C0(grid, ScalarField::constant(grid, 1.0), -5.0, 0.0); }),
            ErrorKind::invalid_parameter);
  auto curved = build_torus(16, ConformalSpec::cosine(0.1, 1, 0));
  EXPECT_EQ(kind_of([&] { compute_C0(curved, ScalarField::constant(curved, 1.0), -5.0, 1e-8); }),
            ErrorKind::unsupported_metric);
}

TEST(Condition, ConstantWeight) {
  auto grid = build_torus(32);
  for (double c : {1.0, 0.5, 3.0}) {
    const auto r = check_condition(grid, ScalarField::constant(grid, c), grid->point(3, 7), 0.0, 0.0);
    EXPECT_NEAR(r.lhs, 0.0, 1e-10);
    EXPECT_NEAR(r.rhs, -8 * pi * c, 1e-12);
    EXPECT_NEAR(r.margin, 8 * pi * c, 1e-10);
    EXPECT_TRUE(r.holds);
  }
}

TEST(Condition, CosineWeight) {
  auto grid = build_torus(64);
  const auto r = check_condition(grid, cosine_weight(grid, 0.5), grid->point(0, 0), 0.0, 0.0);
  EXPECT_NEAR(r.laplacian_h, -2 * pi * pi, 1e-9);
  EXPECT_NEAR(r.rhs, -12 * pi, 1e-12);
  EXPECT_NEAR(r.margin, 12 * pi - 2 * pi * pi, 1e-6);
  EXPECT_TRUE(r.holds);
  EXPECT_NEAR(r.k1, 0.0, 1e-10);
  EXPECT_NEAR(r.K_at_p, 0.0, 1e-14);
}

TEST(Condition, GradientTermsUseCallerCoefficients) {
  auto grid = build_torus(64);
  const auto h = ScalarField::from_function(grid, [](double x1, double x2) {
    return 2.0 + std::sin(2 * pi * x1) + 0.5 * std::sin(2 * pi * x2);
  });
  const auto p = grid->point(0, 0);
  const double b1 = 0.3;
  const double b2 = -1.1;
  const auto r = check_condition(grid, h, p, b1, b2);
  EXPECT_NEAR(r.k1, 2 * pi, 1e-9);
  EXPECT_NEAR(r.k2, pi, 1e-9);
  EXPECT_NEAR(r.lhs, 0.0 + 2 * (b1 * 2 * pi + b2 * pi), 1e-8);
  EXPECT_NEAR(r.rhs, -(8 * pi + b1 * b1 + b2 * b2) * 2.0, 1e-12);
}

TEST(Condition, SignNearTheRootAgreesAcrossResolutions) {
  // margin(a) = 8 pi + a (8 pi - 4 pi^2) for h = 1 + a cos(2 pi x1) at x1 = 0
  const double root = 8 * pi / (4 * pi * pi - 8 * pi);
  auto coarse = build_torus(32);
  auto fine = build_torus(320);
  for (double a : {root * (1 - 1e-4), root * (1 + 1e-4)}) {
    const double closed = 8 * pi + a * (8 * pi - 4 * pi * pi);
    const auto rc = check_condition(coarse, cosine_weight(coarse, a), coarse->point(0, 0), 0, 0);
    const auto rf = check_condition(fine, cosine_weight(fine, a), fine->point(0, 0), 0, 0);
    EXPECT_EQ(rc.margin > 0, closed > 0);
    EXPECT_EQ(rf.margin > 0, closed > 0);
    EXPECT_EQ(rc.holds, rf.holds);
  }
}

TEST(Condition, CurvedMetricUsesNormalCoordinates) {
  auto grid = build_torus(64, ConformalSpec::cosine(0.2, 1, 0));
  const auto h = ScalarField::from_function(grid, [](double, double x2) { return 2.0 + std::sin(2 * pi * x2); });
  const auto p = grid->point(0, 0);
  const auto r = check_condition(grid, h, p, 0.0, 1.0);
  const double phi = grid->conformal_factor()[0];
  EXPECT_NEAR(r.k2, std::exp(-phi) * 2 * pi, 1e-9);
  EXPECT_NEAR(r.K_at_p, gauss_curvature(grid).at(p), 0.0);
  EXPECT_GT(r.K_at_p, 0.0);
}

TEST(Bubble, Profile) {
  const BubbleParams params{1.5};
  const std::vector<std::array<double, 2>> points{{0, 0}, {0.1, 0}, {1, 1}, {-3, 2}};
  const auto v = bubble_profile(params, points);
  EXPECT_EQ(v[0], 0.0);
  for (double x : v) EXPECT_LE(x, 0.0);
  EXPECT_NEAR(v[2], -2 * std::log(1 + pi * 1.5 * 2), 1e-15);
  try {
    bubble_profile({0.0}, points);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_bubble);
  }
  EXPECT_THROW(bubble_mass({-1.0}, 1.0), Error);
}

TEST(Bubble, MassMatchesQuadrature) {
  for (double h_p : {0.5, 1.0, 2.0}) {
    for (double R : {1.0, 10.0, 100.0}) {
      EXPECT_NEAR(bubble_mass({h_p}, R), quadrature_mass(h_p, R), 1e-8) << h_p << " " << R;
    }
  }
  EXPECT_NEAR(bubble_mass({1.0}, 10.0), 1.0 - 1.0 / (1.0 + 100 * pi), 1e-15);
}

TEST(Bubble, FivePointResidualIsSecondOrder) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  const BubbleParams params{1.3};
  auto phi = [&](double x, double y) { return bubble_value(params, x, y); };
  std::vector<std::array<double, 2>> points(20);
  for (auto& p : points) p = {coord(rng), coord(rng)};
  std::vector<double> worst;
  for (double s : {0.02, 0.01, 0.005}) {
    double w = 0.0;
    for (const auto& [x, y] : points) {
      const double lap =
          (phi(x + s, y) + phi(x - s, y) + phi(x, y + s) + phi(x, y - s) - 4 * phi(x, y)) / (s * s);
      w = std::max(w, std::abs(lap + 8 * pi * params.h_p * std::exp(phi(x, y))));
    }
    worst.push_back(w);
  }
  EXPECT_NEAR(worst[0] / worst[1], 4.0, 0.2);
  EXPECT_NEAR(worst[1] / worst[2], 4.0, 0.2);
}

TEST(CompareToBubble, SelfComparisonAndWrongHeight) {
  auto grid = build_torus(512);
  const auto center = grid->point(200, 311);
  const double lambda = 6.0;
  const auto u = synthetic_bubble(grid, center, lambda, 1.0);
  const double window = 3 * grid->spacing();
  const auto one = ScalarField::constant(grid, 1.0);
  const auto self = compare_to_bubble_detailed(grid, one, u, lambda, center, window);
  EXPECT_LT(self.sup_deviation, 1e-2);
  EXPECT_GT(self.samples, self.window_nodes);
  const double doubled = compare_to_bubble(grid, ScalarField::constant(grid, 2.0), u, lambda, center, window);
  EXPECT_GT(doubled, self.sup_deviation);
}

TEST(CompareToBubble, DeviationShrinksAlongPositiveBlowup) {
  auto grid = build_torus(256);
  HSpec spec;
  spec.kind = "positive-peak";
  const auto h = build_h(grid, spec);
  const auto cont = continuation(grid, h, default_schedule(6), {}, 30.0);
  ASSERT_EQ(cont.classification, Classification::blowup_suspected);
  ASSERT_EQ(cont.steps.size(), 6u);
  std::vector<double> dev;
  for (std::size_t k = 3; k < 6; ++k) {
    const auto& s = cont.steps[k];
    dev.push_back(compare_to_bubble(grid, h, cont.solutions[k], s.lambda_eps, s.x_eps, 3 * grid->spacing()));
  }
  EXPECT_GT(dev[0], dev[1]);
  EXPECT_GT(dev[1], dev[2]);
  RecordProperty("final_deviation", std::to_string(dev[2]));
}

TEST(CompareToBubble, Errors) {
  auto grid = build_torus(64);
  const auto u = synthetic_bubble(grid, grid->point(0, 0), 4.0, 1.0);
  auto kind_of = [&](const ScalarField& h, double window) {
    try {
      compare_to_bubble(grid, h, u, 4.0, grid->point(0, 0), window);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::invalid_config;
  };
  EXPECT_EQ(kind_of(ScalarField::constant(grid, 0.0), 0.1), ErrorKind::invalid_bubble);
  EXPECT_EQ(kind_of(ScalarField::constant(grid, 1.0), grid->spacing()), ErrorKind::insufficient_samples);
}

TEST(ConcentrationMasses, UniformDensity) {
  auto grid = build_torus(128);
  const auto u = ScalarField::constant(grid, 2.0);
  const std::vector<double> radii{0.05, 0.1, 0.2, 0.3, 0.5, torus_diameter};
  const auto d = concentration_masses(grid, u, u, radii);
  ASSERT_EQ(d.masses.size(), radii.size());
  for (const auto& m : d.masses) {
    if (m.r <= 0.5) EXPECT_NEAR(m.mass, pi * m.r * m.r, 4 * grid->spacing() * m.r) << m.r;
  }
  EXPECT_NEAR(d.masses.back().mass, 1.0, 1e-12);
  EXPECT_NEAR(d.total_mass, 1.0, 1e-12);
}

TEST(ConcentrationMasses, MonotoneAndSorted) {
  auto grid = build_torus(64);
  std::mt19937_64 rng(12);
  const auto u = random_smooth_field(grid, rng, 3, 3.0);
  const auto d = concentration_masses(grid, ScalarField::constant(grid, 1.0), u, {0.4, 0.01, 0.2, 0.05});
  for (std::size_t k = 1; k < d.masses.size(); ++k) {
    EXPECT_GT(d.masses[k].r, d.masses[k - 1].r);
    EXPECT_GE(d.masses[k].mass, d.masses[k - 1].mass);
    EXPECT_LE(d.masses[k].mass, 1.0 + 1e-8);
  }
  EXPECT_EQ(d.x_eps, argmax(u));
  EXPECT_THROW(concentration_masses(grid, u, u, {0.0}), Error);
  EXPECT_THROW(concentration_masses(grid, u, u, {0.8}), Error);
}

TEST(ConcentrationMasses, SharpBubble) {
  auto grid = build_torus(128);
  const auto v = synthetic_bubble(grid, grid->point(40, 90), 12.0, 1.0);
  const auto d = concentration_masses(grid, ScalarField::constant(grid, 1.0), v, {0.1});
  // continuum fraction inside 0.1 exceeds 1 - 1/(pi e^{12} 0.01)
  EXPECT_GT(d.masses.front().mass, 0.99);
  EXPECT_EQ(d.x_eps, grid->point(40, 90));
}

TEST(ZeroAvoidance, ConstantWeight) {
  auto grid = build_torus(32);
  const auto h = ScalarField::constant(grid, 1.0);
  const auto cont = fake_continuation(grid, h, {{0, 0}, {3, 4}});
  for (double frac : {0.01, 0.5, 1.0}) {
    const auto r = zero_avoidance_report(cont, h, frac);
    EXPECT_EQ(r.min_h_at_xeps, 1.0);
    EXPECT_TRUE(r.passes);
    EXPECT_FALSE(r.min_nodes_to_zero_set.has_value());
  }
}

TEST(ZeroAvoidance, DistanceToZeroLine) {
  auto grid = build_torus(32);
  const auto h = cosine_weight(grid, 1.0);
  const auto good = zero_avoidance_report(fake_continuation(grid, h, {{0, 5}, {2, 9}}), h, 0.01);
  EXPECT_TRUE(good.passes);
  ASSERT_TRUE(good.min_nodes_to_zero_set.has_value());
  EXPECT_NEAR(*good.min_nodes_to_zero_set, 14.0, 1e-12);
  const auto bad = zero_avoidance_report(fake_continuation(grid, h, {{0, 5}, {16, 0}}), h, 0.01);
  EXPECT_FALSE(bad.passes);
  EXPECT_NEAR(*bad.min_nodes_to_zero_set, 0.0, 1e-12);
  EXPECT_THROW(zero_avoidance_report(ContinuationResult{}, h, 0.01), Error);
}

TEST(ZeroAvoidance, IsolatedPeakWeightAlongAContinuation) {
  auto grid = build_torus(64);
  const auto h = ScalarField::from_function(grid, [](double x1, double x2) {
    const double r2 = std::pow(minimal_image(x1 - 0.5), 2) + std::pow(minimal_image(x2 - 0.5), 2);
    return std::max(0.0, std::exp(-r2 / (2 * 0.08 * 0.08)) - 0.01) / 0.99;
  });
  const auto cont = continuation(grid, h, default_schedule(6), {}, 30.0);
  const auto r = zero_avoidance_report(cont, h, 0.01);
  EXPECT_TRUE(r.passes);
  for (const auto& s : cont.steps) EXPECT_GT(s.h_at_xeps, 0.0);
  ASSERT_TRUE(r.min_nodes_to_zero_set.has_value());
  EXPECT_GE(*r.min_nodes_to_zero_set, 2.0);
}

TEST(EnergyIdentity, TrivialCase) {
  auto grid = build_torus(32);
  const auto one = ScalarField::constant(grid, 1.0);
  const auto zero = ScalarField::constant(grid, 0.0);
  const auto r = energy_identity_check(grid, one, zero, 1.0, 1.0);
  EXPECT_NEAR(r.lhs, 0.0, 1e-14);
  EXPECT_NEAR(r.rhs, 0.0, 1e-14);
  EXPECT_TRUE(r.holds);
  EXPECT_THROW(energy_identity_check(grid, one, zero, 1.0, 0.0), Error);
}

TEST(EnergyIdentity, GapEqualsLogOfConstantOverRatio) {
  auto grid = build_torus(64);
  std::mt19937_64 rng(8);
  const auto u = random_smooth_field(grid, rng, 3, 2.0);
  const auto h = random_positive_weight(grid, rng);
  const double ratio = tm_ratio(grid, u).tm_ratio;
  for (double eps : {0.5, 4.0, 20.0}) {
    const auto at = energy_identity_check(grid, h, u, eps, ratio);
    EXPECT_NEAR(at.rhs - at.lhs, 0.0, 1e-9 * (1 + std::abs(at.rhs)));
    const auto loose = energy_identity_check(grid, h, u, eps, 2 * ratio);
    EXPECT_NEAR(loose.rhs - loose.lhs, (8 * pi - eps) * std::log(2.0), 1e-9);
    EXPECT_TRUE(loose.holds);
    EXPECT_FALSE(energy_identity_check(grid, h, u, eps, 0.5 * ratio).holds);
  }
}

TEST(EnergyIdentity, LhsIsLinearInEpsilon) {
  auto grid = build_torus(32);
  std::mt19937_64 rng(9);
  const auto u = random_smooth_field(grid, rng);
  const auto one = ScalarField::constant(grid, 1.0);
  const double l0 = energy_identity_check(grid, one, u, 1.0, 10.0).lhs;
  const double l1 = energy_identity_check(grid, one, u, 2.0, 10.0).lhs;
  const double l2 = energy_identity_check(grid, one, u, 3.0, 10.0).lhs;
  EXPECT_NEAR(l2 - l1, l1 - l0, 1e-10);
}

TEST(EnergyIdentity, HoldsForMinimizersWithEmpiricalConstant) {
  auto grid = build_torus(64);
  const auto h = cosine_weight(grid, 1.0);
  const auto cont = continuation(grid, h, default_schedule(), {}, 30.0);
  double c_emp = tm_sweep(grid).max_ratio;
  for (const auto& u : cont.solutions) c_emp = std::max(c_emp, tm_ratio(grid, u).tm_ratio);
  for (std::size_t k = 0; k < cont.steps.size(); ++k) {
    EXPECT_TRUE(energy_identity_check(grid, h, cont.solutions[k], cont.steps[k].epsilon, c_emp).holds) << k;
  }
}

TEST(Inequalities, TrudingerMoserSweep) {
  auto grid = build_torus(256);
  const auto sweep = tm_sweep(grid);
  EXPECT_TRUE(sweep.all_finite);
  EXPECT_EQ(sweep.samples.size(), 3u + 11u + 4u);
  double running = 0.0;
  for (const auto& s : sweep.samples) {
    ASSERT_TRUE(std::isfinite(s.report.tm_ratio));
    if (s.family == "bubble" && s.parameter > 6.0) EXPECT_LE(s.report.tm_ratio, 10.0 * running);
    running = std::max(running, s.report.tm_ratio);
  }
  EXPECT_EQ(running, sweep.max_ratio);
  RecordProperty("max_ratio", std::to_string(sweep.max_ratio));
}

TEST(Inequalities, JensenOnNormalizedFields) {
  auto grid = build_torus(64);
  const auto s = jensen_suite(grid, 77, 30);
  EXPECT_EQ(s.count, 30u);
  EXPECT_EQ(s.violations, 0u);
  EXPECT_GE(s.min_gap, 0.0);
  // v = u - log int e^u has int v <= 0
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    const auto u = random_smooth_field(grid, rng, 3, 2.0);
    const double log_mass = std::log(integrate(grid, u.map([](double x) { return std::exp(x); })));
    EXPECT_LE(integrate(grid, u) - log_mass, 1e-12);
  }
}
