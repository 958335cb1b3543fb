#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mfe {

enum class ErrorKind {
  invalid_resolution,
  invalid_metric,
  incompatible_field,
  non_finite_field,
  degenerate_mass,
  invalid_parameter,
  invalid_domain,
  unsupported_metric,
  insufficient_samples,
  empty_admissible_set,
  invalid_bubble,
  invalid_field_file,
  invalid_config,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_resolution: return "invalid-resolution";
    case ErrorKind::invalid_metric: return "invalid-metric";
    case ErrorKind::incompatible_field: return "incompatible-field";
    case ErrorKind::non_finite_field: return "non-finite-field";
    case ErrorKind::degenerate_mass: return "degenerate-mass";
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::invalid_domain: return "invalid-domain";
    case ErrorKind::unsupported_metric: return "unsupported-metric";
    case ErrorKind::insufficient_samples: return "insufficient-samples";
    case ErrorKind::empty_admissible_set: return "empty-admissible-set";
    case ErrorKind::invalid_bubble: return "invalid-bubble";
    case ErrorKind::invalid_field_file: return "invalid-field-file";
    case ErrorKind::invalid_config: return "invalid-config";
  }
  return "unknown";
}

/// Every recoverable failure in the library is reported through this type;
/// `kind()` is the machine-readable tag the CLI forwards on stderr.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mfe
