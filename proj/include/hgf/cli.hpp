#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hgf/flow_dynamics.hpp"
#include "hgf/verification.hpp"

namespace hgf::cli {

enum class Command { run, verify_exact, verify_curvature, verify_symmetric_system, stability, convergence };

std::string_view to_string(Command c);
std::optional<Command> parse_command(std::string_view text);

enum class Profile { flat, conformal, bump, mms };
enum class ExactMode { grid, ode };
enum class Forcing { none, mms };
enum class SourceModel { none, einstein_quadratic };

struct RunConfig {
  Command command = Command::run;

  int grid_dim = 2;
  std::vector<std::size_t> grid_points{64};
  std::vector<double> grid_length{6.283185307179586};

  Variant variant = Variant::pure_hgf;
  double flow_alpha = 1.0;
  double flow_stress = 0.0;
  SourceModel flow_source = SourceModel::none;
  Forcing flow_forcing = Forcing::none;

  Profile initial_profile = Profile::flat;
  double initial_amplitude = 0.0;
  double initial_velocity = 0.0;

  double exact_lambda = 0.0;
  double exact_a = 0.5;
  ExactMode exact_mode = ExactMode::grid;
  double exact_dt = 1e-3;

  double t_end = 1.0;
  double cfl = 0.4;
  std::size_t output_every = 1;
  std::optional<double> dt;
  std::uint64_t seed = 42;

  bool emit_csv = true;
  bool emit_snapshots = false;
  bool emit_report = true;
  std::string out_dir = "hgf_out";

  int stability_dim = 5;
  std::size_t stability_points = 8;
  double stability_length = 6.283185307179586;
  double stability_epsilon = 1e-3;
  double stability_horizon = 2.5;
  double stability_radius = 0.4;

  Scenario scenario = Scenario::mms_pure;
  std::vector<std::size_t> levels{32, 64, 128};

  std::size_t check_samples = 200;
  std::vector<int> check_dims{2, 3, 5};

  bool operator==(const RunConfig&) const = default;
};

struct ConfigIssue {
  std::size_t line = 0;  ///< 0 for command-line overrides
  std::string kind;      ///< unknown-key, type-error or constraint-violation
  std::string message;
};

struct ParseResult {
  std::optional<RunConfig> config;
  std::vector<ConfigIssue> issues;
};

/// Parses `section.key = value` lines (# starts a comment), then applies the
/// `section.key=value` overrides. Collects every issue instead of stopping
/// at the first one.
ParseResult parse_config(std::string_view text, std::span<const std::string> overrides = {});

/// Every key with its value, one per line, in a fixed order.
std::string canonical_text(const RunConfig& config);

/// Named columns of equal length; the first column is the abscissa.
using Series = std::vector<std::pair<std::string, std::vector<double>>>;

/// CSV text with a header row, 17 significant digits and LF line endings.
std::string format_csv(const Series& series);
void emit_csv(const Series& series, const std::filesystem::path& path);

/// Writes through a temporary sibling file and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view content);

struct Check {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
};

std::string format_check(const Check& c);

/// Runs the configured command, writes its artifacts under config.out_dir
/// and returns 0 (all checks pass), 1 (a check failed) or 2 (runtime error).
int dispatch(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace hgf::cli
