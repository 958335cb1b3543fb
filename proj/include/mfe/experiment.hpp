#pragma once
// Experiment configuration: a versioned JSON document naming the geometry,
// the weight h, the eps schedule, solver settings and output location.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mfe/io.hpp"

namespace mfe {

inline constexpr const char* config_schema = "meanfield-experiment/1";

/// Builtin weights. Every kind is multiplied by `scale`.
///   constant          h = value
///   cosine-line-zero  h = 1 + cos(2 pi x1), vanishing on the line x1 = 1/2
///   cosine            h = 1 + amplitude cos(2 pi k x1), amplitude in [0, 1]
///   single-peak       h = max(0, exp(-r^2 / 2 sigma^2) - floor) / (1 - floor),
///                     r the torus distance to `center`; zero on a large plateau
///   positive-peak     h = base + (1 - base) exp(-r^2 / 2 sigma^2), base > 0
///   file              h read from a field file
struct HSpec {
  std::string kind = "constant";
  double value = 1.0;
  double amplitude = 0.5;
  int wavenumber = 1;
  double sigma = 0.08;
  double floor = 0.01;
  double base = 0.05;
  std::array<double, 2> center{0.5, 0.5};
  std::filesystem::path path;
  double scale = 1.0;
};

inline ScalarField build_h(const GridPtr& grid, const HSpec& spec) {
  ScalarField h = ScalarField::constant(grid, spec.value);
  if (spec.kind == "constant") {
    // already built
  } else if (spec.kind == "cosine-line-zero") {
    h = ScalarField::from_function(grid, [](double x1, double) { return 1.0 + std::cos(2.0 * pi * x1); });
  } else if (spec.kind == "cosine") {
    if (!(spec.amplitude >= 0.0 && spec.amplitude <= 1.0)) {
      throw Error(ErrorKind::invalid_config, "cosine amplitude must lie in [0, 1]");
    }
    h = ScalarField::from_function(grid, [&](double x1, double) {
      return 1.0 + spec.amplitude * std::cos(2.0 * pi * spec.wavenumber * x1);
    });
  } else if (spec.kind == "single-peak" || spec.kind == "positive-peak") {
    if (!(spec.sigma > 0.0)) throw Error(ErrorKind::invalid_config, "sigma must be positive");
    const bool clamped = spec.kind == "single-peak";
    if (clamped && !(spec.floor >= 0.0 && spec.floor < 1.0)) {
      throw Error(ErrorKind::invalid_config, "floor must lie in [0, 1)");
    }
    if (!clamped && !(spec.base > 0.0 && spec.base <= 1.0)) {
      throw Error(ErrorKind::invalid_config, "base must lie in (0, 1]");
    }
    h = ScalarField::from_function(grid, [&](double x1, double x2) {
      const double r = torus_distance(x1, x2, spec.center[0], spec.center[1]);
      const double bump = std::exp(-r * r / (2.0 * spec.sigma * spec.sigma));
      return clamped ? std::max(0.0, bump - spec.floor) / (1.0 - spec.floor) : spec.base + (1.0 - spec.base) * bump;
    });
  } else if (spec.kind == "file") {
    h = io::field_on_grid(io::read_field(spec.path), grid);
  } else {
    throw Error(ErrorKind::invalid_config, "unknown h kind '" + spec.kind + "'");
  }
  if (spec.scale != 1.0) h = spec.scale * h;
  return h;
}

struct GreenSettings {
  std::array<double, 2> source{0.0, 0.0};
  std::optional<double> r_min;  ///< default 8 grid spacings
  double r_max = 0.125;
  int oracle_terms = 10000;
};

struct AnalysisSettings {
  std::vector<double> radii{0.01, 0.02, 0.05, 0.1, 0.2, 0.5, torus_diameter};
  double threshold_frac = 0.01;
  std::optional<double> window_radius;  ///< default 3 grid spacings
  double b1 = 0.0;
  double b2 = 0.0;
  double h_threshold_rel = 1e-8;
  std::string green_A = "oracle";  ///< "oracle" or "fit"
};

struct ExperimentConfig {
  std::string name = "experiment";
  int n = 64;
  std::optional<ConformalSpec> conformal;
  io::Json conformal_json = nullptr;
  HSpec h;
  std::vector<double> schedule = default_schedule();
  std::optional<double> epsilon;
  MinimizeOptions solver;
  double blowup_lambda = 30.0;
  ContinuationOptions continuation;
  GreenSettings green;
  AnalysisSettings analysis;
  std::filesystem::path outputs = "runs";
  std::uint64_t seed = 20240101;
  io::Json source;  ///< the document as read, echoed into manifests
};

namespace detail {

template <class T>
void read_if(const io::Json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

inline ConformalSpec parse_conformal(const io::Json& j) {
  double constant = 0.0;
  read_if(j, "constant", constant);
  std::vector<ConformalSpec::Mode> modes;
  if (j.contains("modes")) {
    for (const auto& m : j.at("modes")) {
      ConformalSpec::Mode mode;
      read_if(m, "amplitude", mode.amplitude);
      read_if(m, "k1", mode.k1);
      read_if(m, "k2", mode.k2);
      read_if(m, "phase", mode.phase);
      modes.push_back(mode);
    }
  }
  return ConformalSpec::fourier(constant, std::move(modes));
}

inline HSpec parse_h(const io::Json& j, const std::filesystem::path& base_dir) {
  HSpec h;
  if (j.is_string()) {
    h.kind = j.get<std::string>();
    return h;
  }
  read_if(j, "kind", h.kind);
  read_if(j, "value", h.value);
  read_if(j, "amplitude", h.amplitude);
  read_if(j, "wavenumber", h.wavenumber);
  read_if(j, "sigma", h.sigma);
  read_if(j, "floor", h.floor);
  read_if(j, "base", h.base);
  read_if(j, "scale", h.scale);
  if (j.contains("center")) h.center = j.at("center").get<std::array<double, 2>>();
  if (j.contains("path")) {
    h.path = j.at("path").get<std::string>();
    if (h.path.is_relative()) h.path = base_dir / h.path;
  }
  return h;
}

inline std::vector<double> parse_schedule(const io::Json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() != "default") throw Error(ErrorKind::invalid_config, "unknown schedule name");
    return default_schedule();
  }
  if (j.is_object()) {
    int count = 12;
    read_if(j, "count", count);
    if (count < 1) throw Error(ErrorKind::invalid_config, "schedule count must be positive");
    return default_schedule(count);
  }
  return j.get<std::vector<double>>();
}

}  // namespace detail

/// Checks everything that can be checked without running the pipeline.
inline void validate(const ExperimentConfig& c) {
  if (c.n < 16 || c.n % 2 != 0) throw Error(ErrorKind::invalid_config, "geometry.n must be even and at least 16");
  for (std::size_t k = 0; k < c.schedule.size(); ++k) {
    if (!(c.schedule[k] > 0.0 && c.schedule[k] < critical_parameter)) {
      throw Error(ErrorKind::invalid_config, "schedule entries must lie in (0, 8 pi)");
    }
    if (k > 0 && !(c.schedule[k] < c.schedule[k - 1])) {
      throw Error(ErrorKind::invalid_config, "schedule must be strictly decreasing");
    }
  }
  if (c.epsilon && !(*c.epsilon > 0.0 && *c.epsilon < critical_parameter)) {
    throw Error(ErrorKind::invalid_config, "epsilon must lie in (0, 8 pi)");
  }
  try {
    c.solver.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::invalid_config, e.what());
  }
  if (c.h.kind == "file" && !std::filesystem::exists(io::field_header_path(c.h.path))) {
    throw Error(ErrorKind::invalid_field_file, "h file " + c.h.path.string() + " does not exist");
  }
  if (!(c.blowup_lambda > 0.0)) throw Error(ErrorKind::invalid_config, "blowup_lambda must be positive");
}

inline ExperimentConfig parse_config(const io::Json& j, const std::filesystem::path& base_dir = ".") {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw Error(ErrorKind::invalid_config, "config must be a JSON object");
    const auto schema = j.value("schema", std::string());
    if (schema != config_schema) {
      throw Error(ErrorKind::invalid_config, "schema must be \"" + std::string(config_schema) + "\"");
    }
    c.source = j;
    detail::read_if(j, "name", c.name);
    if (j.contains("geometry")) {
      const auto& g = j.at("geometry");
      detail::read_if(g, "n", c.n);
      if (g.contains("conformal") && !g.at("conformal").is_null()) {
        c.conformal_json = g.at("conformal");
        c.conformal = detail::parse_conformal(g.at("conformal"));
      }
    }
    if (j.contains("h")) c.h = detail::parse_h(j.at("h"), base_dir);
    if (j.contains("schedule")) c.schedule = detail::parse_schedule(j.at("schedule"));
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      detail::read_if(s, "grad_tol", c.solver.grad_tol);
      detail::read_if(s, "max_iters", c.solver.max_iters);
      detail::read_if(s, "step_init", c.solver.step_init);
      detail::read_if(s, "armijo_c", c.solver.armijo_c);
      detail::read_if(s, "armijo_backtrack", c.solver.armijo_backtrack);
      detail::read_if(s, "barzilai_borwein", c.solver.barzilai_borwein);
      if (s.contains("descent")) {
        const auto d = s.at("descent").get<std::string>();
        if (d == "plain") {
          c.solver.descent = Descent::plain;
        } else if (d == "preconditioned") {
          c.solver.descent = Descent::preconditioned;
        } else {
          throw Error(ErrorKind::invalid_config, "solver.descent must be plain or preconditioned");
        }
      }
    }
    if (j.contains("continuation")) {
      const auto& s = j.at("continuation");
      detail::read_if(s, "blowup_lambda", c.blowup_lambda);
      detail::read_if(s, "growth_tol", c.continuation.growth_tol);
      detail::read_if(s, "resolution_nodes", c.continuation.resolution_nodes);
      detail::read_if(s, "warm_start", c.continuation.warm_start);
    }
    if (j.contains("green")) {
      const auto& s = j.at("green");
      if (s.contains("source")) c.green.source = s.at("source").get<std::array<double, 2>>();
      if (s.contains("r_min") && !s.at("r_min").is_null()) c.green.r_min = s.at("r_min").get<double>();
      detail::read_if(s, "r_max", c.green.r_max);
      detail::read_if(s, "oracle_terms", c.green.oracle_terms);
    }
    if (j.contains("analysis")) {
      const auto& s = j.at("analysis");
      detail::read_if(s, "radii", c.analysis.radii);
      detail::read_if(s, "threshold_frac", c.analysis.threshold_frac);
      if (s.contains("window_radius") && !s.at("window_radius").is_null()) {
        c.analysis.window_radius = s.at("window_radius").get<double>();
      }
      detail::read_if(s, "b1", c.analysis.b1);
      detail::read_if(s, "b2", c.analysis.b2);
      detail::read_if(s, "h_threshold_rel", c.analysis.h_threshold_rel);
      detail::read_if(s, "green_A", c.analysis.green_A);
    }
    if (j.contains("outputs")) c.outputs = j.at("outputs").get<std::string>();
    detail::read_if(j, "seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_config, e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  const auto text = io::read_text(path, ErrorKind::invalid_config);
  io::Json j;
  try {
    j = io::Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_config, path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

/// Effective configuration in the same schema parse_config reads.
inline io::Json config_to_json(const ExperimentConfig& c) {
  io::Json h{{"kind", c.h.kind}, {"scale", c.h.scale}};
  if (c.h.kind == "constant") h["value"] = c.h.value;
  if (c.h.kind == "cosine") {
    h["amplitude"] = c.h.amplitude;
    h["wavenumber"] = c.h.wavenumber;
  }
  if (c.h.kind == "single-peak" || c.h.kind == "positive-peak") {
    h["sigma"] = c.h.sigma;
    h["center"] = c.h.center;
    if (c.h.kind == "single-peak") {
      h["floor"] = c.h.floor;
    } else {
      h["base"] = c.h.base;
    }
  }
  if (c.h.kind == "file") h["path"] = c.h.path.string();
  io::Json j;
  j["schema"] = config_schema;
  j["name"] = c.name;
  j["geometry"] = {{"n", c.n}, {"conformal", c.conformal_json}};
  j["h"] = h;
  j["schedule"] = c.schedule;
  j["epsilon"] = c.epsilon ? io::Json(*c.epsilon) : io::Json(nullptr);
  j["solver"] = io::to_json(c.solver);
  j["continuation"] = {{"blowup_lambda", c.blowup_lambda},
                       {"growth_tol", c.continuation.growth_tol},
                       {"resolution_nodes", c.continuation.resolution_nodes},
                       {"warm_start", c.continuation.warm_start}};
  j["green"] = {{"source", c.green.source},
                {"r_min", c.green.r_min ? io::Json(*c.green.r_min) : io::Json(nullptr)},
                {"r_max", c.green.r_max},
                {"oracle_terms", c.green.oracle_terms}};
  j["analysis"] = {{"radii", c.analysis.radii},
                   {"threshold_frac", c.analysis.threshold_frac},
                   {"window_radius", c.analysis.window_radius ? io::Json(*c.analysis.window_radius) : io::Json(nullptr)},
                   {"b1", c.analysis.b1},
                   {"b2", c.analysis.b2},
                   {"h_threshold_rel", c.analysis.h_threshold_rel},
                   {"green_A", c.analysis.green_A}};
  j["outputs"] = c.outputs.string();
  j["seed"] = c.seed;
  return j;
}

}  // namespace mfe
