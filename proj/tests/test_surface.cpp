#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mfe/random_fields.hpp"
#include "mfe/surface.hpp"

using namespace mfe;

namespace {

// I0(x) by its power series; exp(a cos t) averages to I0(a) over a period.
double bessel_i0(double x) {
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    term *= (x * x / 4.0) / (double(k) * k);
    sum += term;
  }
  return sum;
}

double sup_diff(const ScalarField& a, const ScalarField& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

}  // namespace

TEST(BuildTorus, FlatGridHasUnitAreaAndZeroFactor) {
  auto grid = build_torus(64);
  EXPECT_TRUE(grid->flat());
  EXPECT_EQ(grid->n(), 64);
  EXPECT_DOUBLE_EQ(grid->spacing() * grid->n(), 1.0);
  EXPECT_NEAR(integrate(grid, ScalarField::constant(grid, 1.0)), 1.0, 1e-12);
  for (double phi : grid->conformal_factor()) EXPECT_EQ(phi, 0.0);
}

TEST(BuildTorus, ConstantConformalShiftIsAbsorbed) {
  auto grid = build_torus(64, ConformalSpec::constant(0.3));
  for (double phi : grid->conformal_factor()) EXPECT_NEAR(phi, 0.0, 1e-14);
  EXPECT_NEAR(integrate(grid, ScalarField::constant(grid, 1.0)), 1.0, 1e-12);
}

TEST(BuildTorus, NormalizationConstantMatchesBesselOracle) {
  auto grid = build_torus(128, ConformalSpec::cosine(0.2, 1, 0));
  EXPECT_FALSE(grid->flat());
  EXPECT_NEAR(integrate(grid, ScalarField::constant(grid, 1.0)), 1.0, 1e-12);
  // phi_c = 0.2 cos(2 pi x1) + c with c = -1/2 log int e^{0.4 cos}
  const double expected = -0.5 * std::log(bessel_i0(0.4));
  const auto phi = grid->conformal_factor();
  const double shift = phi[grid->index(0, 0)] - 0.2;
  EXPECT_NEAR(shift, expected, 1e-13);
  for (double a : grid->area_element()) EXPECT_GT(a, 0.0);
}

TEST(BuildTorus, RejectsBadResolutionAndMetric) {
  for (int n : {15, 17, 8, 0, -4}) {
    try {
      build_torus(n);
      FAIL() << "n = " << n;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::invalid_resolution);
    }
  }
  ConformalSpec nan_spec{"nan", [](double, double) { return std::nan(""); }};
  ConformalSpec aperiodic{"x1", [](double x1, double) { return x1; }};
  for (const auto& spec : {nan_spec, aperiodic}) {
    try {
      build_torus(32, spec);
      FAIL() << spec.description;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::invalid_metric);
    }
  }
}

TEST(ScalarField, RejectsNonFiniteAndWrongShape) {
  auto grid = build_torus(16);
  std::vector<double> v(grid->size(), 0.0);
  v[3] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(ScalarField(grid, v), Error);
  EXPECT_THROW(ScalarField(grid, std::vector<double>(10, 0.0)), Error);
  auto other = build_torus(32);
  EXPECT_THROW(laplacian(other, ScalarField::constant(grid, 1.0)), Error);
}

TEST(Laplacian, ConstantsAndEigenfunctions) {
  auto grid = build_torus(64);
  const auto zero = laplacian(grid, ScalarField::constant(grid, 3.0));
  EXPECT_LT(sup_diff(zero, ScalarField::constant(grid, 0.0)), 1e-12);
  const auto f = ScalarField::from_function(grid, [](double x1, double) { return std::cos(2 * pi * x1); });
  EXPECT_LT(sup_diff(laplacian(grid, f), -4 * pi * pi * f), 1e-9);
}

TEST(Laplacian, ConformalRuleMatchesAnalyticFormula) {
  auto grid = build_torus(64, ConformalSpec::cosine(0.2, 0, 1));
  const auto f = ScalarField::from_function(grid, [](double x1, double) { return std::cos(2 * pi * x1); });
  const double c = grid->conformal_factor()[0] - 0.2;
  const auto expected = ScalarField::from_function(grid, [c](double x1, double x2) {
    return -4 * pi * pi * std::exp(-2.0 * (0.2 * std::cos(2 * pi * x2) + c)) * std::cos(2 * pi * x1);
  });
  EXPECT_LT(sup_diff(laplacian(grid, f), expected), 1e-9);
}

TEST(Laplacian, LinearAndIntegratesToZero) {
  auto grid = build_torus(32, ConformalSpec::cosine(0.3, 1, 1));
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto f = random_smooth_field(grid, rng);
    const auto g = random_smooth_field(grid, rng);
    const double a = 1.7;
    const double b = -0.4;
    const auto lhs = laplacian(grid, a * f + b * g);
    const auto rhs = a * laplacian(grid, f) + b * laplacian(grid, g);
    EXPECT_LT(sup_diff(lhs, rhs), 1e-10);
    EXPECT_NEAR(integrate(grid, laplacian(grid, f)), 0.0, 1e-10);
  }
}

TEST(Integrate, TrigonometricExamples) {
  auto grid = build_torus(64);
  EXPECT_NEAR(integrate(grid, ScalarField::constant(grid, 1.0)), 1.0, 1e-14);
  const auto c = ScalarField::from_function(grid, [](double x1, double) { return std::cos(2 * pi * x1); });
  EXPECT_NEAR(integrate(grid, c), 0.0, 1e-14);
  EXPECT_NEAR(integrate(grid, c * c), 0.5, 1e-14);
}

TEST(Dirichlet, ExamplesAndConformalInvariance) {
  auto flat = build_torus(64);
  EXPECT_NEAR(dirichlet_energy(flat, ScalarField::constant(flat, 2.0)), 0.0, 1e-14);
  auto cosine = [](double x1, double) { return std::cos(2 * pi * x1); };
  EXPECT_NEAR(dirichlet_energy(flat, ScalarField::from_function(flat, cosine)), 2 * pi * pi, 1e-11);
  auto curved = build_torus(64, ConformalSpec::cosine(0.2, 0, 1));
  EXPECT_NEAR(dirichlet_energy(curved, ScalarField::from_function(curved, cosine)), 2 * pi * pi, 1e-11);
}

TEST(Dirichlet, AgreesWithGradientQuadrature) {
  auto grid = build_torus(32);
  std::mt19937_64 rng(5);
  const auto f = random_smooth_field(grid, rng);
  const auto [d1, d2] = gradient(grid, f);
  EXPECT_NEAR(dirichlet_energy(grid, f), integrate(grid, d1 * d1 + d2 * d2), 1e-10);
}

TEST(Curvature, FlatAndCosineFactor) {
  auto flat = build_torus(32);
  const auto k_flat = gauss_curvature(flat);
  for (double k : k_flat.values()) EXPECT_EQ(k, 0.0);

  const double a = 0.25;
  auto grid = build_torus(64, ConformalSpec::cosine(a, 1, 0));
  const double c = grid->conformal_factor()[0] - a;
  const auto expected = ScalarField::from_function(grid, [&](double x1, double) {
    return 4 * pi * pi * a * std::exp(-2.0 * (a * std::cos(2 * pi * x1) + c)) * std::cos(2 * pi * x1);
  });
  EXPECT_LT(sup_diff(gauss_curvature(grid), expected), 1e-9);
}

TEST(Curvature, GaussBonnet) {
  for (const auto& spec : {ConformalSpec::cosine(0.2, 1, 0), ConformalSpec::cosine(0.4, 2, 1),
                           ConformalSpec::fourier(0.1, {{0.3, 1, 1, 0.5}, {0.1, 0, 3, 1.0}})}) {
    auto grid = build_torus(64, spec);
    EXPECT_NEAR(integrate(grid, gauss_curvature(grid)), 0.0, 1e-10) << spec.description;
  }
}

TEST(Operators, ShiftEquivarianceOnFlatGrid) {
  auto grid = build_torus(32);
  std::mt19937_64 rng(3);
  const auto f = random_smooth_field(grid, rng);
  const int s1 = 5;
  const int s2 = 11;
  const int n = grid->n();
  auto shift = [&](const ScalarField& g) {
    std::vector<double> out(g.size());
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) out[grid->index((i + s1) % n, (j + s2) % n)] = g(i, j);
    }
    return ScalarField(grid, std::move(out));
  };
  EXPECT_LT(sup_diff(laplacian(grid, shift(f)), shift(laplacian(grid, f))), 1e-11);
  EXPECT_LT(sup_diff(solve_poisson(grid, shift(f)), shift(solve_poisson(grid, f))), 1e-12);
}

TEST(Poisson, InvertsLaplacianOnMeanZeroData) {
  auto grid = build_torus(32, ConformalSpec::cosine(0.2, 1, 1));
  std::mt19937_64 rng(8);
  const auto f = random_smooth_field(grid, rng);
  const auto rhs = f - integrate(grid, f);
  const auto w = solve_poisson(grid, rhs);
  EXPECT_NEAR(integrate(grid, w), 0.0, 1e-12);
  EXPECT_LT(sup_diff(laplacian(grid, w), rhs), 1e-9);
}

TEST(Geometry, MinimalImageAndArgmax) {
  EXPECT_DOUBLE_EQ(minimal_image(0.75), -0.25);
  EXPECT_DOUBLE_EQ(minimal_image(-0.5), 0.5);
  EXPECT_DOUBLE_EQ(minimal_image(0.5), 0.5);
  EXPECT_NEAR(torus_distance(0.05, 0.0, 0.95, 0.0), 0.1, 1e-15);
  auto grid = build_torus(16);
  const auto f = ScalarField::from_function(grid, [](double x1, double) { return std::cos(2 * pi * x1); });
  const auto p = argmax(f);
  EXPECT_EQ(p.i, 0);
  EXPECT_EQ(p.j, 0);
}
