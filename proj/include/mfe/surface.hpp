#pragma once
// Periodic N x N discretization of a unit-area torus [0,1)^2 with an optional
// conformal factor g = e^{2 phi} (dx1^2 + dx2^2), pseudospectral differential
// operators and node quadrature.
//
// Sign convention: the Laplacian is div(grad), so a Fourier mode
// e^{2 pi i k.x} is an eigenfunction with eigenvalue -4 pi^2 |k|^2 and the
// torus Green function behaves like -4 log r near its source when
// Delta G = 8 pi - 8 pi delta_p.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfe/error.hpp"

namespace mfe {

inline constexpr double pi = std::numbers::pi;

namespace detail {

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

/// Real-to-complex plans for one resolution. Plans are created unaligned and
/// executed through the new-array interface, so one instance can be shared by
/// concurrent callers. FFTW_ESTIMATE keeps the algorithm choice (and so the
/// rounding) identical from run to run.
class FftPlans {
 public:
  explicit FftPlans(int n) : n_(n) {
    std::vector<double> real(static_cast<std::size_t>(n) * n);
    std::vector<std::complex<double>> spec(spectrum_size());
    std::lock_guard lock(planner_mutex());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_ = fftw_plan_dft_r2c_2d(n, n, real.data(), as_fftw(spec.data()), flags);
    backward_ = fftw_plan_dft_c2r_2d(n, n, as_fftw(spec.data()), real.data(), flags);
  }
  ~FftPlans() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;

  int n() const noexcept { return n_; }
  int half() const noexcept { return n_ / 2 + 1; }
  std::size_t spectrum_size() const noexcept { return static_cast<std::size_t>(n_) * half(); }

  /// Unnormalized forward transform; index (a, b) -> a * half() + b.
  std::vector<std::complex<double>> forward(std::span<const double> values) const {
    std::vector<double> in(values.begin(), values.end());
    std::vector<std::complex<double>> out(spectrum_size());
    fftw_execute_dft_r2c(forward_, in.data(), as_fftw(out.data()));
    return out;
  }

  /// Inverse transform including the 1/n^2 normalization.
  std::vector<double> inverse(std::vector<std::complex<double>> spectrum) const {
    std::vector<double> out(static_cast<std::size_t>(n_) * n_);
    fftw_execute_dft_c2r(backward_, as_fftw(spectrum.data()), out.data());
    const double scale = 1.0 / (static_cast<double>(n_) * n_);
    for (double& v : out) v *= scale;
    return out;
  }

  /// Signed wavenumber along the first (full-length) axis.
  int wavenumber1(int a) const noexcept { return a <= n_ / 2 ? a : a - n_; }

 private:
  static fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

  int n_;
  fftw_plan forward_{};
  fftw_plan backward_{};
};

}  // namespace detail

class TorusGrid;
using GridPtr = std::shared_ptr<const TorusGrid>;

struct GridPoint {
  int i = 0;
  int j = 0;
  double x1 = 0.0;
  double x2 = 0.0;

  friend bool operator==(const GridPoint& a, const GridPoint& b) { return a.i == b.i && a.j == b.j; }
};

/// Descriptor of a smooth periodic conformal factor phi(x1, x2).
struct ConformalSpec {
  struct Mode {
    double amplitude = 0.0;
    int k1 = 0;
    int k2 = 0;
    double phase = 0.0;  ///< amplitude * cos(2 pi (k1 x1 + k2 x2) + phase)
  };

  std::string description;
  std::function<double(double, double)> phi;

  static ConformalSpec constant(double c) {
    return {"constant " + std::to_string(c), [c](double, double) { return c; }};
  }

  static ConformalSpec fourier(double constant_term, std::vector<Mode> modes) {
    std::string text = "fourier c=" + std::to_string(constant_term);
    for (const auto& m : modes) {
      text += " + " + std::to_string(m.amplitude) + "cos(2pi(" + std::to_string(m.k1) + "x1+" +
              std::to_string(m.k2) + "x2)+" + std::to_string(m.phase) + ")";
    }
    return {text, [constant_term, modes = std::move(modes)](double x1, double x2) {
              double v = constant_term;
              for (const auto& m : modes) v += m.amplitude * std::cos(2.0 * pi * (m.k1 * x1 + m.k2 * x2) + m.phase);
              return v;
            }};
  }

  static ConformalSpec cosine(double amplitude, int k1, int k2) { return fourier(0.0, {{amplitude, k1, k2, 0.0}}); }
};

class TorusGrid {
  struct Key {
    explicit Key() = default;
  };

 public:
  TorusGrid(Key, int n, std::vector<double> conformal, bool flat, std::string description)
      : n_(n),
        spacing_(1.0 / n),
        conformal_(std::move(conformal)),
        area_element_(conformal_.size()),
        flat_(flat),
        description_(std::move(description)),
        fft_(std::make_shared<detail::FftPlans>(n)) {
    std::transform(conformal_.begin(), conformal_.end(), area_element_.begin(),
                   [](double p) { return std::exp(2.0 * p); });
  }

  int n() const noexcept { return n_; }
  double spacing() const noexcept { return spacing_; }
  bool flat() const noexcept { return flat_; }
  const std::string& description() const noexcept { return description_; }
  std::size_t size() const noexcept { return conformal_.size(); }
  std::size_t index(int i, int j) const noexcept { return static_cast<std::size_t>(i) * n_ + j; }
  double coordinate(int i) const noexcept { return i * spacing_; }
  GridPoint point(int i, int j) const noexcept { return {i, j, coordinate(i), coordinate(j)}; }
  GridPoint point(std::size_t idx) const noexcept {
    return point(static_cast<int>(idx / n_), static_cast<int>(idx % n_));
  }

  /// log of the metric scale, already shifted so the total area is one.
  std::span<const double> conformal_factor() const noexcept { return conformal_; }
  /// e^{2 phi} per node.
  std::span<const double> area_element() const noexcept { return area_element_; }
  /// Quadrature weight of node idx under dv_g.
  double weight(std::size_t idx) const noexcept { return area_element_[idx] * spacing_ * spacing_; }

  const detail::FftPlans& fft() const noexcept { return *fft_; }

  bool compatible(const TorusGrid& other) const noexcept {
    return this == &other || (n_ == other.n_ && conformal_ == other.conformal_);
  }

  friend GridPtr build_torus(int n, const std::optional<ConformalSpec>& conformal);

 private:
  int n_;
  double spacing_;
  std::vector<double> conformal_;
  std::vector<double> area_element_;
  bool flat_;
  std::string description_;
  std::shared_ptr<const detail::FftPlans> fft_;
};

/// Real values on the nodes of a grid, stored row-major with i (the x1 index)
/// as the slow index. Values are checked finite on construction.
class ScalarField {
 public:
  ScalarField(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw Error(ErrorKind::incompatible_field, "field without grid");
    if (values_.size() != grid_->size()) {
      throw Error(ErrorKind::incompatible_field,
                  "field has " + std::to_string(values_.size()) + " values, grid needs " + std::to_string(grid_->size()));
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw Error(ErrorKind::non_finite_field, "field value is not finite");
    }
  }

  static ScalarField constant(const GridPtr& grid, double c) { return {grid, std::vector<double>(grid->size(), c)}; }

  template <class F>
  static ScalarField from_function(const GridPtr& grid, F&& f) {
    std::vector<double> v(grid->size());
    for (int i = 0; i < grid->n(); ++i) {
      for (int j = 0; j < grid->n(); ++j) v[grid->index(i, j)] = f(grid->coordinate(i), grid->coordinate(j));
    }
    return {grid, std::move(v)};
  }

  const GridPtr& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t idx) const noexcept { return values_[idx]; }
  double operator()(int i, int j) const noexcept { return values_[grid_->index(i, j)]; }
  double at(const GridPoint& p) const noexcept { return (*this)(p.i, p.j); }

  double max() const { return *std::max_element(values_.begin(), values_.end()); }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }

  template <class F>
  ScalarField map(F&& f) const {
    std::vector<double> v(values_.size());
    std::transform(values_.begin(), values_.end(), v.begin(), f);
    return {grid_, std::move(v)};
  }

  friend ScalarField operator+(const ScalarField& a, const ScalarField& b) { return zip(a, b, std::plus<>{}); }
  friend ScalarField operator-(const ScalarField& a, const ScalarField& b) { return zip(a, b, std::minus<>{}); }
  friend ScalarField operator*(const ScalarField& a, const ScalarField& b) { return zip(a, b, std::multiplies<>{}); }
  friend ScalarField operator+(const ScalarField& a, double c) { return a.map([c](double v) { return v + c; }); }
  friend ScalarField operator-(const ScalarField& a, double c) { return a.map([c](double v) { return v - c; }); }
  friend ScalarField operator*(double c, const ScalarField& a) { return a.map([c](double v) { return c * v; }); }

 private:
  template <class Op>
  static ScalarField zip(const ScalarField& a, const ScalarField& b, Op op) {
    if (!a.grid_->compatible(*b.grid_)) throw Error(ErrorKind::incompatible_field, "fields live on different grids");
    std::vector<double> v(a.values_.size());
    std::transform(a.values_.begin(), a.values_.end(), b.values_.begin(), v.begin(), op);
    return {a.grid_, std::move(v)};
  }

  GridPtr grid_;
  std::vector<double> values_;
};

/// Builds the grid and shifts phi by the constant that makes the discrete
/// area exactly one. `conformal == nullopt` gives the flat torus.
inline GridPtr build_torus(int n, const std::optional<ConformalSpec>& conformal = std::nullopt) {
  if (n < 16 || n % 2 != 0) {
    throw Error(ErrorKind::invalid_resolution, "n must be even and at least 16, got " + std::to_string(n));
  }
  const auto size = static_cast<std::size_t>(n) * n;
  std::vector<double> phi(size, 0.0);
  std::string description = "flat";
  if (conformal) {
    if (!conformal->phi) throw Error(ErrorKind::invalid_metric, "conformal descriptor has no function");
    description = conformal->description;
    const double h = 1.0 / n;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) phi[static_cast<std::size_t>(i) * n + j] = conformal->phi(i * h, j * h);
    }
    for (int s = 0; s < n; ++s) {
      const double t = s * h;
      const double gap = std::max(std::abs(conformal->phi(0.0, t) - conformal->phi(1.0, t)),
                                  std::abs(conformal->phi(t, 0.0) - conformal->phi(t, 1.0)));
      if (!(gap < 1e-9)) throw Error(ErrorKind::invalid_metric, "conformal factor is not periodic");
    }
    if (!std::all_of(phi.begin(), phi.end(), [](double v) { return std::isfinite(v); })) {
      throw Error(ErrorKind::invalid_metric, "conformal factor is not finite");
    }
    // log of the discrete area, evaluated with max-subtraction
    const double top = *std::max_element(phi.begin(), phi.end());
    double sum = 0.0;
    for (double p : phi) sum += std::exp(2.0 * (p - top));
    const double log_area = 2.0 * top + std::log(sum * h * h);
    if (!std::isfinite(log_area)) throw Error(ErrorKind::invalid_metric, "conformal area is not finite");
    for (double& p : phi) p -= 0.5 * log_area;
  }
  return std::make_shared<const TorusGrid>(TorusGrid::Key{}, n, std::move(phi), !conformal, std::move(description));
}

namespace detail {

inline void require_compatible(const GridPtr& grid, const ScalarField& f) {
  if (!grid || !grid->compatible(*f.grid())) {
    throw Error(ErrorKind::incompatible_field, "field does not belong to the grid");
  }
}

/// Applies a Fourier multiplier m(k1, k2, nyquist1, nyquist2) to real data.
template <class Multiplier>
std::vector<double> apply_multiplier(const TorusGrid& grid, std::span<const double> values, Multiplier&& m) {
  const auto& fft = grid.fft();
  auto spec = fft.forward(values);
  const int n = fft.n();
  const int half = fft.half();
  for (int a = 0; a < n; ++a) {
    const int k1 = fft.wavenumber1(a);
    for (int b = 0; b < half; ++b) {
      spec[static_cast<std::size_t>(a) * half + b] *= m(k1, b, a == n / 2, b == n / 2);
    }
  }
  return fft.inverse(std::move(spec));
}

inline double laplace_symbol(int k1, int k2) { return -4.0 * pi * pi * (double(k1) * k1 + double(k2) * k2); }

inline std::vector<double> flat_laplacian(const TorusGrid& grid, std::span<const double> values) {
  return apply_multiplier(grid, values,
                          [](int k1, int k2, bool, bool) { return std::complex<double>(laplace_symbol(k1, k2)); });
}

}  // namespace detail

/// Laplace-Beltrami operator e^{-2 phi} Delta_flat, spectrally.
inline ScalarField laplacian(const GridPtr& grid, const ScalarField& f) {
  detail::require_compatible(grid, f);
  auto v = detail::flat_laplacian(*grid, f.values());
  if (!grid->flat()) {
    const auto area = grid->area_element();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] /= area[k];
  }
  return {f.grid(), std::move(v)};
}

/// Node quadrature of f dv_g; exact for trigonometric polynomials below Nyquist.
inline double integrate(const GridPtr& grid, const ScalarField& f) {
  detail::require_compatible(grid, f);
  const auto area = grid->area_element();
  const auto v = f.values();
  double sum = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) sum += v[k] * area[k];
  return sum * grid->spacing() * grid->spacing();
}

inline double integrate(const ScalarField& f) { return integrate(f.grid(), f); }

/// Integral of |grad f|^2 dv_g (no 1/2), as sum over modes of 4 pi^2 |k|^2 |f_k|^2.
/// The value does not depend on the conformal factor.
inline double dirichlet_energy(const GridPtr& grid, const ScalarField& f) {
  detail::require_compatible(grid, f);
  const auto& fft = grid->fft();
  const auto spec = fft.forward(f.values());
  const int n = fft.n();
  const int half = fft.half();
  double sum = 0.0;
  for (int a = 0; a < n; ++a) {
    const int k1 = fft.wavenumber1(a);
    for (int b = 0; b < half; ++b) {
      const double mult = (b == 0 || b == n / 2) ? 1.0 : 2.0;
      sum += mult * -detail::laplace_symbol(k1, b) * std::norm(spec[static_cast<std::size_t>(a) * half + b]);
    }
  }
  const double nn = static_cast<double>(n) * n;
  return sum / (nn * nn);
}

/// K = -e^{-2 phi} Delta_flat phi.
inline ScalarField gauss_curvature(const GridPtr& grid) {
  if (grid->flat()) return ScalarField::constant(grid, 0.0);
  auto v = detail::flat_laplacian(*grid, grid->conformal_factor());
  const auto area = grid->area_element();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = -v[k] / area[k];
  return {grid, std::move(v)};
}

/// Flat-coordinate partial derivatives (d/dx1, d/dx2); the Nyquist mode of a
/// first derivative is dropped.
inline std::pair<ScalarField, ScalarField> gradient(const GridPtr& grid, const ScalarField& f) {
  detail::require_compatible(grid, f);
  using C = std::complex<double>;
  auto d1 = detail::apply_multiplier(*grid, f.values(), [](int k1, int, bool ny1, bool) {
    return ny1 ? C(0.0) : C(0.0, 2.0 * pi * k1);
  });
  auto d2 = detail::apply_multiplier(*grid, f.values(), [](int, int k2, bool, bool ny2) {
    return ny2 ? C(0.0) : C(0.0, 2.0 * pi * k2);
  });
  return {ScalarField(f.grid(), std::move(d1)), ScalarField(f.grid(), std::move(d2))};
}

/// Solves Delta_g w = f for f with zero dv_g-mean (the mean of f is dropped);
/// w has zero dv_g-mean.
inline ScalarField solve_poisson(const GridPtr& grid, const ScalarField& f) {
  detail::require_compatible(grid, f);
  std::vector<double> rhs(f.values().begin(), f.values().end());
  const auto area = grid->area_element();
  for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] *= area[k];
  auto w = detail::apply_multiplier(*grid, rhs, [](int k1, int k2, bool, bool) {
    return (k1 == 0 && k2 == 0) ? std::complex<double>(0.0) : std::complex<double>(1.0 / detail::laplace_symbol(k1, k2));
  });
  ScalarField field(f.grid(), std::move(w));
  if (grid->flat()) return field;
  const double m = integrate(grid, field);
  return field - m;
}

/// Maps a coordinate difference onto (-1/2, 1/2].
inline double minimal_image(double d) {
  d -= std::floor(d);
  return d > 0.5 ? d - 1.0 : d;
}

/// Flat distance on the unit torus between (x1, x2) and (y1, y2).
inline double torus_distance(double x1, double x2, double y1, double y2) {
  return std::hypot(minimal_image(x1 - y1), minimal_image(x2 - y2));
}

/// Lowest (i, j) in lexicographic order among the maximal nodes.
inline GridPoint argmax(const ScalarField& f) {
  const auto v = f.values();
  const auto it = std::max_element(v.begin(), v.end());  // first occurrence == lowest (i, j)
  return f.grid()->point(static_cast<std::size_t>(it - v.begin()));
}

/// Node nearest to (x1, x2), wrapping periodically.
inline GridPoint nearest_node(const TorusGrid& grid, double x1, double x2) {
  const int n = grid.n();
  auto wrap = [n](double x) { return ((static_cast<int>(std::lround(x * n)) % n) + n) % n; };
  return grid.point(wrap(x1), wrap(x2));
}

}  // namespace mfe
