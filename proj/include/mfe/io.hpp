#pragma once
// Serialization: JSON reports with 17 significant digits, the two-part field
// format (JSON header + row-major CSV), and CSV exports for plotting.
//
// Field format: <stem>.json holds {n, flat, description, min, max}; <stem>.csv
// holds n lines of n comma-separated values printed with %.17g, line i being
// the nodes with x1 = i / n. Values read back are bit-identical.

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mfe/analysis.hpp"

namespace mfe::io {

using Json = nlohmann::ordered_json;

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  if (v == 0.0) return "0";  // no negative zero
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void dump(const Json& j, std::string& out, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(indent * depth), ' ');
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad + Json(key).dump() + (indent > 0 ? ": " : ":");
        dump(value, out, indent, depth + 1);
      }
      out += nl + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[";
      out += nl;
      bool first = true;
      for (const auto& value : j) {
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad;
        dump(value, out, indent, depth + 1);
      }
      out += nl + close + "]";
      return;
    }
    case Json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

}  // namespace detail

/// Like Json::dump, but floating-point numbers always carry 17 significant
/// digits and non-finite values become null.
inline std::string dump_json(const Json& j, int indent = 2) {
  std::string out;
  detail::dump(j, out, indent, 0);
  out += "\n";
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::invalid_config, "cannot write " + path.string());
  os << text;
}

inline std::string read_text(const std::filesystem::path& path, ErrorKind kind) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(kind, "cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Report conversions

inline Json to_json(const GridPoint& p) { return Json{{"i", p.i}, {"j", p.j}, {"x1", p.x1}, {"x2", p.x2}}; }

inline Json to_json(const FunctionalReport& r) {
  return Json{{"dirichlet_term", r.dirichlet_term},
              {"mean_term", r.mean_term},
              {"logmass_term", r.logmass_term},
              {"value", r.value},
              {"epsilon", r.epsilon}};
}

inline Json to_json(const TMReport& r) {
  return Json{{"tm_ratio", r.tm_ratio}, {"dirichlet", r.dirichlet}, {"mass", r.mass}, {"log_mass", r.log_mass}};
}

inline Json to_json(const MinimizeOptions& o) {
  return Json{{"grad_tol", o.grad_tol},
              {"max_iters", o.max_iters},
              {"step_init", o.step_init},
              {"armijo_c", o.armijo_c},
              {"armijo_backtrack", o.armijo_backtrack},
              {"descent", o.descent == Descent::plain ? "plain" : "preconditioned"},
              {"barzilai_borwein", o.barzilai_borwein}};
}

inline Json to_json(const MinimizeResult& r) {
  return Json{{"report", to_json(r.report)},
              {"grad_norm", r.grad_norm},
              {"iters", r.iters},
              {"converged", r.converged},
              {"gauge_mean", r.gauge_mean},
              {"stop_reason", r.stop_reason},
              {"lambda", r.u.max()},
              {"x_max", to_json(argmax(r.u))}};
}

inline Json to_json(const ContinuationStep& s) {
  return Json{{"epsilon", s.epsilon},   {"lambda_eps", s.lambda_eps}, {"x_eps", to_json(s.x_eps)},
              {"h_at_xeps", s.h_at_xeps}, {"J_value", s.J_value},     {"grad_norm", s.grad_norm},
              {"dirichlet", s.dirichlet}, {"iters", s.iters},         {"converged", s.converged}};
}

inline Json to_json(const ContinuationResult& c) {
  Json steps = Json::array();
  for (const auto& s : c.steps) steps.push_back(to_json(s));
  return Json{{"steps", steps},
              {"classification", std::string(to_string(c.classification))},
              {"blowup_lambda", c.blowup_lambda},
              {"growth_tol", c.growth_tol},
              {"resolution_nodes", c.resolution_nodes}};
}

inline Json to_json(const GreenExpansion& e) {
  return Json{{"p", to_json(e.p)},
              {"A", e.A},
              {"b1", e.b1},
              {"b2", e.b2},
              {"c1", e.c1},
              {"c2", e.c2},
              {"c3", e.c3},
              {"fit_residual", e.fit_residual},
              {"annulus", Json{{"r_min", e.annulus.r_min}, {"r_max", e.annulus.r_max}}},
              {"samples", e.samples}};
}

inline Json to_json(const C0Report& r) {
  Json runners = Json::array();
  for (const auto& p : r.runner_ups) runners.push_back(to_json(p));
  return Json{{"c0", r.c0},
              {"argmax_point", to_json(r.argmax_point)},
              {"A_used", r.A_used},
              {"max_functional", r.max_functional},
              {"h_min_threshold", r.h_min_threshold},
              {"runner_ups", runners}};
}

inline Json to_json(const ConditionReport& r) {
  return Json{{"p_star", to_json(r.p_star)},
              {"lhs", r.lhs},
              {"rhs", r.rhs},
              {"margin", r.margin},
              {"holds", r.holds},
              {"k1", r.k1},
              {"k2", r.k2},
              {"K_at_p", r.K_at_p},
              {"laplacian_h", r.laplacian_h},
              {"h_at_p", r.h_at_p},
              {"b1", r.b1},
              {"b2", r.b2}};
}

inline Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json to_json(const BlowupDiagnostics& d) {
  Json masses = Json::array();
  for (const auto& m : d.masses) masses.push_back(Json{{"r", m.r}, {"mass", m.mass}});
  return Json{{"epsilon", optional_number(d.epsilon)},
              {"lambda_eps", d.lambda_eps},
              {"x_eps", to_json(d.x_eps)},
              {"h_at_xeps", d.h_at_xeps},
              {"masses", masses},
              {"total_mass", d.total_mass},
              {"bubble_dev", optional_number(d.bubble_dev)}};
}

inline Json to_json(const ZeroAvoidance& z) {
  return Json{{"min_h_at_xeps", z.min_h_at_xeps},
              {"max_h", z.max_h},
              {"threshold_frac", z.threshold_frac},
              {"passes", z.passes},
              {"min_nodes_to_zero_set", optional_number(z.min_nodes_to_zero_set)}};
}

inline Json to_json(const Fact3Report& r) {
  return Json{{"mass", r.mass},
              {"osc", r.osc},
              {"domain_nodes", r.domain_nodes},
              {"interior_nodes", r.interior_nodes},
              {"below_half_minus_delta", r.below_half_minus_delta}};
}

inline Json to_json(const TmSweep& s) {
  Json samples = Json::array();
  for (const auto& t : s.samples) {
    Json row = to_json(t.report);
    row["family"] = t.family;
    row["parameter"] = t.parameter;
    samples.push_back(row);
  }
  return Json{{"samples", samples}, {"max_ratio", s.max_ratio}, {"all_finite", s.all_finite}};
}

inline Json to_json(const JensenSummary& s) {
  return Json{{"count", s.count}, {"min_gap", s.min_gap}, {"max_gap", s.max_gap}, {"violations", s.violations}};
}

inline Json to_json(const EnergyIdentity& e) { return Json{{"lhs", e.lhs}, {"rhs", e.rhs}, {"holds", e.holds}}; }

// ---------------------------------------------------------------------------
// CSV

inline std::string steps_csv(const ContinuationResult& c) {
  std::string out = "epsilon,lambda_eps,x_i,x_j,x1,x2,h_at_xeps,J_value,grad_norm,dirichlet,iters,converged\n";
  for (const auto& s : c.steps) {
    out += format_double(s.epsilon) + "," + format_double(s.lambda_eps) + "," + std::to_string(s.x_eps.i) + "," +
           std::to_string(s.x_eps.j) + "," + format_double(s.x_eps.x1) + "," + format_double(s.x_eps.x2) + "," +
           format_double(s.h_at_xeps) + "," + format_double(s.J_value) + "," + format_double(s.grad_norm) + "," +
           format_double(s.dirichlet) + "," + std::to_string(s.iters) + "," + (s.converged ? "1" : "0") + "\n";
  }
  return out;
}

inline std::string masses_csv(const BlowupDiagnostics& d) {
  std::string out = "r,mass\n";
  for (const auto& m : d.masses) out += format_double(m.r) + "," + format_double(m.mass) + "\n";
  return out;
}

inline std::string tm_sweep_csv(const TmSweep& s) {
  std::string out = "family,parameter,tm_ratio,dirichlet,mass\n";
  for (const auto& t : s.samples) {
    out += t.family + "," + format_double(t.parameter) + "," + format_double(t.report.tm_ratio) + "," +
           format_double(t.report.dirichlet) + "," + format_double(t.report.mass) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Field files

struct FieldFile {
  int n = 0;
  bool flat = true;
  std::string description;
  double min = 0.0;
  double max = 0.0;
  std::vector<double> values;
};

inline std::filesystem::path field_header_path(std::filesystem::path stem) { return stem.replace_extension(".json"); }
inline std::filesystem::path field_values_path(std::filesystem::path stem) { return stem.replace_extension(".csv"); }

inline std::string field_values_csv(const ScalarField& f) {
  const int n = f.grid()->n();
  std::string out;
  out.reserve(f.size() * 25);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j > 0) out += ",";
      out += format_double(f(i, j));
    }
    out += "\n";
  }
  return out;
}

inline Json field_header(const ScalarField& f, const std::string& description) {
  return Json{{"n", f.grid()->n()},
              {"flat", f.grid()->flat()},
              {"description", description},
              {"min", f.min()},
              {"max", f.max()}};
}

/// Writes <stem>.json and <stem>.csv; returns both paths.
inline std::pair<std::filesystem::path, std::filesystem::path> write_field(const std::filesystem::path& stem,
                                                                           const ScalarField& f,
                                                                           const std::string& description) {
  const auto header = field_header_path(stem);
  const auto values = field_values_path(stem);
  write_text(header, dump_json(field_header(f, description)));
  write_text(values, field_values_csv(f));
  return {header, values};
}

/// Reads a field from either part's path (or the common stem).
inline FieldFile read_field(const std::filesystem::path& path) {
  const auto bad = [&](const std::string& why) {
    return Error(ErrorKind::invalid_field_file, path.string() + ": " + why);
  };
  FieldFile out;
  try {
    const auto header = Json::parse(read_text(field_header_path(path), ErrorKind::invalid_field_file));
    out.n = header.at("n").get<int>();
    out.flat = header.at("flat").get<bool>();
    out.description = header.at("description").get<std::string>();
    out.min = header.at("min").get<double>();
    out.max = header.at("max").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw bad(std::string("bad header: ") + e.what());
  }
  if (out.n <= 0) throw bad("bad n");
  const auto text = read_text(field_values_path(path), ErrorKind::invalid_field_file);
  out.values.reserve(static_cast<std::size_t>(out.n) * out.n);
  std::istringstream lines(text);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    ++rows;
    const char* p = line.c_str();
    int cols = 0;
    while (true) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);  // subnormals set ERANGE but are kept
      if (end == p || !std::isfinite(v)) throw bad("unparsable value on row " + std::to_string(rows));
      out.values.push_back(v);
      ++cols;
      p = end;
      if (*p == ',') {
        ++p;
        continue;
      }
      if (*p == '\0' || *p == '\r') break;
      throw bad("unexpected character on row " + std::to_string(rows));
    }
    if (cols != out.n) throw bad("row " + std::to_string(rows) + " has " + std::to_string(cols) + " values");
  }
  if (rows != out.n) throw bad("expected " + std::to_string(out.n) + " rows, found " + std::to_string(rows));
  return out;
}

inline ScalarField field_on_grid(const FieldFile& file, const GridPtr& grid) {
  if (file.n != grid->n()) {
    throw Error(ErrorKind::invalid_field_file,
                "field has n = " + std::to_string(file.n) + ", grid has n = " + std::to_string(grid->n()));
  }
  return {grid, file.values};
}

}  // namespace mfe::io
