#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hgf {

/// Failure categories surfaced by the library. Each maps to a stable
/// kebab-case name used in CLI diagnostics and reports.
enum class ErrorKind {
  dimension_mismatch,
  too_few_points,
  non_positive_length,
  unsupported_dimension,
  symmetry_violation,
  axis_out_of_range,
  io_failure,
  bad_magic,
  version_mismatch,
  shape_mismatch,
  grid_mismatch,
  singular_metric,
  zero_covector,
  zero_alpha_component,
  past_degenerate_time,
  unsupported_variant,
  cfl_violation,
  spd_lost,
  history_too_short,
  consistency_drift,
  unsupported_valence,
  wrap_around_exceeded,
  insufficient_levels,
  non_finite,
  invalid_argument,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hgf
