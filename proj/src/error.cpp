#include "hgf/error.hpp"

namespace hgf {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension_mismatch: return "dimension-mismatch";
    case ErrorKind::too_few_points: return "too-few-points";
    case ErrorKind::non_positive_length: return "non-positive-length";
    case ErrorKind::unsupported_dimension: return "unsupported-dimension";
    case ErrorKind::symmetry_violation: return "symmetry-violation";
    case ErrorKind::axis_out_of_range: return "axis-out-of-range";
    case ErrorKind::io_failure: return "io-failure";
    case ErrorKind::bad_magic: return "bad-magic";
    case ErrorKind::version_mismatch: return "version-mismatch";
    case ErrorKind::shape_mismatch: return "shape-mismatch";
    case ErrorKind::grid_mismatch: return "grid-mismatch";
    case ErrorKind::singular_metric: return "singular-metric";
    case ErrorKind::zero_covector: return "zero-covector";
    case ErrorKind::zero_alpha_component: return "zero-alpha-component";
    case ErrorKind::past_degenerate_time: return "past-degenerate-time";
    case ErrorKind::unsupported_variant: return "unsupported-variant";
    case ErrorKind::cfl_violation: return "cfl-violation";
    case ErrorKind::spd_lost: return "spd-lost";
    case ErrorKind::history_too_short: return "history-too-short";
    case ErrorKind::consistency_drift: return "consistency-drift";
    case ErrorKind::unsupported_valence: return "unsupported-valence";
    case ErrorKind::wrap_around_exceeded: return "wrap-around-exceeded";
    case ErrorKind::insufficient_levels: return "insufficient-levels";
    case ErrorKind::non_finite: return "non-finite";
    case ErrorKind::invalid_argument: return "invalid-argument";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

}  // namespace hgf
