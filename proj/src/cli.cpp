#include "hgf/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "hgf/curvature.hpp"
#include "hgf/hyperbolic_reduction.hpp"

namespace hgf::cli {

std::string_view to_string(Command c) {
  switch (c) {
    case Command::run: return "run";
    case Command::verify_exact: return "verify-exact";
    case Command::verify_curvature: return "verify-curvature";
    case Command::verify_symmetric_system: return "verify-symmetric-system";
    case Command::stability: return "stability";
    case Command::convergence: return "convergence";
  }
  return "unknown";
}

std::optional<Command> parse_command(std::string_view text) {
  for (Command c : {Command::run, Command::verify_exact, Command::verify_curvature, Command::verify_symmetric_system,
                    Command::stability, Command::convergence})
    if (text == to_string(c)) return c;
  return std::nullopt;
}

namespace {

// ---------------------------------------------------------------------------
// value codecs

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::optional<double> read_real(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

template <class Int>
std::optional<Int> read_int(std::string_view s) {
  s = trim(s);
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<bool> read_bool(std::string_view s) {
  s = trim(s);
  if (s == "true") return true;
  if (s == "false") return false;
  return std::nullopt;
}

template <class T, class F>
std::optional<std::vector<T>> read_list(std::string_view s, F&& one) {
  std::vector<T> out;
  while (true) {
    const auto comma = s.find(',');
    const auto v = one(s.substr(0, comma));
    if (!v) return std::nullopt;
    out.push_back(*v);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F&& fmt) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += fmt(v[i]);
  }
  return s;
}

template <class E>
struct EnumTable {
  std::vector<std::pair<E, std::string_view>> entries;
  std::optional<E> parse(std::string_view s) const {
    s = trim(s);
    for (const auto& [e, name] : entries)
      if (s == name) return e;
    return std::nullopt;
  }
  std::string name(E e) const {
    for (const auto& [v, n] : entries)
      if (v == e) return std::string(n);
    return "unknown";
  }
  std::string choices() const {
    std::string s;
    for (const auto& [v, n] : entries) s += (s.empty() ? "" : "|") + std::string(n);
    return s;
  }
};

const EnumTable<Profile> kProfiles{
    {{Profile::flat, "flat"}, {Profile::conformal, "conformal"}, {Profile::bump, "bump"}, {Profile::mms, "mms"}}};
const EnumTable<ExactMode> kModes{{{ExactMode::grid, "grid"}, {ExactMode::ode, "ode"}}};
const EnumTable<Forcing> kForcings{{{Forcing::none, "none"}, {Forcing::mms, "mms"}}};
const EnumTable<SourceModel> kSources{
    {{SourceModel::none, "none"}, {SourceModel::einstein_quadratic, "einstein_quadratic"}}};

// ---------------------------------------------------------------------------
// key table

struct KeyIssue {
  std::string kind;
  std::string message;
};

struct Key {
  std::string_view name;
  // returns an issue when the value cannot be stored
  std::function<std::optional<KeyIssue>(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::optional<KeyIssue> type_error(std::string_view expected) {
  return KeyIssue{"type-error", "expected " + std::string(expected)};
}

template <class T>
Key real_key(std::string_view name, T RunConfig::*field) {
  return {name,
          [field](RunConfig& c, std::string_view v) -> std::optional<KeyIssue> {
            const auto r = read_real(v);
            if (!r) return type_error("a finite real number");
            c.*field = *r;
            return std::nullopt;
          },
          [field](const RunConfig& c) { return format_real(c.*field); }};
}

template <class T>
Key int_key(std::string_view name, T RunConfig::*field) {
  return {name,
          [field](RunConfig& c, std::string_view v) -> std::optional<KeyIssue> {
            const auto r = read_int<T>(v);
            if (!r) return type_error("an integer");
            c.*field = *r;
            return std::nullopt;
          },
          [field](const RunConfig& c) { return std::to_string(c.*field); }};
}

Key bool_key(std::string_view name, bool RunConfig::*field) {
  return {name,
          [field](RunConfig& c, std::string_view v) -> std::optional<KeyIssue> {
            const auto r = read_bool(v);
            if (!r) return type_error("true or false");
            c.*field = *r;
            return std::nullopt;
          },
          [field](const RunConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

template <class E>
Key enum_key(std::string_view name, E RunConfig::*field, const EnumTable<E>& table) {
  return {name,
          [field, &table](RunConfig& c, std::string_view v) -> std::optional<KeyIssue> {
            const auto r = table.parse(v);
            if (!r) return KeyIssue{"constraint-violation", "expected one of " + table.choices()};
            c.*field = *r;
            return std::nullopt;
          },
          [field, &table](const RunConfig& c) { return table.name(c.*field); }};
}

template <class T>
Key int_list_key(std::string_view name, std::vector<T> RunConfig::*field) {
  return {name,
          [field](RunConfig& c, std::string_view v) -> std::optional<KeyIssue> {
            const auto r = read_list<T>(v, [](std::string_view s) { return read_int<T>(s); });
            if (!r) return type_error("a comma-separated list of integers");
            c.*field = *r;
            return std::nullopt;
          },
          [field](const RunConfig& c) { return join(c.*field, [](T x) { return std::to_string(x); }); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back(int_key("grid.dim", &RunConfig::grid_dim));
    k.push_back(int_list_key("grid.points", &RunConfig::grid_points));
    k.push_back({"grid.length",
                 [](RunConfig& c, std::string_view v) -> std::optional<KeyIssue> {
                   const auto r = read_list<double>(v, read_real);
                   if (!r) return type_error("a comma-separated list of reals");
                   c.grid_length = *r;
                   return std::nullopt;
                 },
                 [](const RunConfig& c) { return join(c.grid_length, format_real); }});
    k.push_back({"flow.variant",
                 [](RunConfig& c, std::string_view v) -> std::optional<KeyIssue> {
                   const auto r = parse_variant(trim(v));
                   if (!r)
                     return KeyIssue{"constraint-violation",
                                     "expected one of pure_hgf|gauge_fixed|einstein_like|generalized"};
                   c.variant = *r;
                   return std::nullopt;
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.variant)); }});
    k.push_back(real_key("flow.alpha", &RunConfig::flow_alpha));
    k.push_back(real_key("flow.stress", &RunConfig::flow_stress));
    k.push_back(enum_key("flow.source", &RunConfig::flow_source, kSources));
    k.push_back(enum_key("flow.forcing", &RunConfig::flow_forcing, kForcings));
    k.push_back(enum_key("initial.profile", &RunConfig::initial_profile, kProfiles));
    k.push_back(real_key("initial.amplitude", &RunConfig::initial_amplitude));
    k.push_back(real_key("initial.velocity", &RunConfig::initial_velocity));
    k.push_back(real_key("exact.lambda", &RunConfig::exact_lambda));
    k.push_back(real_key("exact.a", &RunConfig::exact_a));
    k.push_back(enum_key("exact.mode", &RunConfig::exact_mode, kModes));
    k.push_back(real_key("exact.dt", &RunConfig::exact_dt));
    k.push_back(real_key("run.t_end", &RunConfig::t_end));
    k.push_back(real_key("run.cfl", &RunConfig::cfl));
    k.push_back(int_key("run.output_every", &RunConfig::output_every));
    k.push_back({"run.dt",
                 [](RunConfig& c, std::string_view v) -> std::optional<KeyIssue> {
                   if (trim(v) == "none") {
                     c.dt.reset();
                     return std::nullopt;
                   }
                   const auto r = read_real(v);
                   if (!r) return type_error("a finite real number or none");
                   c.dt = *r;
                   return std::nullopt;
                 },
                 [](const RunConfig& c) { return c.dt ? format_real(*c.dt) : std::string("none"); }});
    k.push_back(int_key("run.seed", &RunConfig::seed));
    k.push_back(bool_key("output.csv", &RunConfig::emit_csv));
    k.push_back(bool_key("output.snapshots", &RunConfig::emit_snapshots));
    k.push_back(bool_key("output.report", &RunConfig::emit_report));
    k.push_back({"output.dir",
                 [](RunConfig& c, std::string_view v) -> std::optional<KeyIssue> {
                   const auto s = trim(v);
                   if (s.empty()) return type_error("a directory path");
                   c.out_dir = std::string(s);
                   return std::nullopt;
                 },
                 [](const RunConfig& c) { return c.out_dir; }});
    k.push_back(int_key("stability.dim", &RunConfig::stability_dim));
    k.push_back(int_key("stability.points", &RunConfig::stability_points));
    k.push_back(real_key("stability.length", &RunConfig::stability_length));
    k.push_back(real_key("stability.epsilon", &RunConfig::stability_epsilon));
    k.push_back(real_key("stability.horizon", &RunConfig::stability_horizon));
    k.push_back(real_key("stability.radius", &RunConfig::stability_radius));
    k.push_back({"convergence.scenario",
                 [](RunConfig& c, std::string_view v) -> std::optional<KeyIssue> {
                   const auto r = parse_scenario(trim(v));
                   if (!r) return KeyIssue{"constraint-violation", "unknown scenario"};
                   c.scenario = *r;
                   return std::nullopt;
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.scenario)); }});
    k.push_back(int_list_key("convergence.levels", &RunConfig::levels));
    k.push_back(int_key("check.samples", &RunConfig::check_samples));
    k.push_back(int_list_key("check.dims", &RunConfig::check_dims));
    return k;
  }();
  return table;
}

const Key* find_key(std::string_view name) {
  for (const Key& k : keys())
    if (k.name == name) return &k;
  return nullptr;
}

// Cross-field constraints; also expands single-entry grid lists to dim.
void normalise(RunConfig& c, const std::map<std::string, std::size_t, std::less<>>& lines,
               std::vector<ConfigIssue>& issues) {
  auto line_of = [&](std::string_view key) {
    const auto it = lines.find(key);
    return it == lines.end() ? std::size_t{0} : it->second;
  };
  auto fail = [&](std::string_view key, std::string msg) {
    issues.push_back({line_of(key), "constraint-violation", std::string(key) + ": " + std::move(msg)});
  };
  if (c.grid_dim < 1 || c.grid_dim > kMaxDim) fail("grid.dim", "must lie in [1, 5]");
  const auto dim = static_cast<std::size_t>(std::clamp(c.grid_dim, 1, kMaxDim));
  if (c.grid_points.size() == 1) c.grid_points.assign(dim, c.grid_points.front());
  if (c.grid_length.size() == 1) c.grid_length.assign(dim, c.grid_length.front());
  if (c.grid_points.size() != dim) fail("grid.points", "needs one entry or one per axis");
  if (c.grid_length.size() != dim) fail("grid.length", "needs one entry or one per axis");
  for (std::size_t p : c.grid_points)
    if (p < kMinPointsPerAxis) fail("grid.points", "every axis needs at least 8 points");
  for (double l : c.grid_length)
    if (!(l > 0.0)) fail("grid.length", "lengths must be positive");
  if (c.flow_alpha == 0.0) fail("flow.alpha", "must be nonzero");
  if (c.flow_forcing == Forcing::mms && c.initial_profile != Profile::mms)
    fail("flow.forcing", "mms forcing needs initial.profile = mms");
  if (c.flow_forcing == Forcing::mms && c.variant == Variant::generalized)
    fail("flow.forcing", "mms forcing is not available for the generalized variant");
  if ((c.initial_profile == Profile::conformal || c.initial_profile == Profile::mms) && c.grid_dim < 2)
    fail("initial.profile", "conformal profiles need grid.dim >= 2");
  if (c.initial_profile == Profile::bump) {
    const bool uniform = std::all_of(c.grid_points.begin(), c.grid_points.end(),
                                     [&](std::size_t p) { return p == c.grid_points.front(); }) &&
                         std::all_of(c.grid_length.begin(), c.grid_length.end(),
                                     [&](double l) { return l == c.grid_length.front(); });
    if (!uniform) fail("initial.profile", "the bump profile needs a uniform grid");
    if (c.grid_dim < 2) fail("initial.profile", "the bump profile needs grid.dim >= 2");
  }
  if (c.exact_mode == ExactMode::grid && c.exact_lambda != 0.0)
    fail("exact.lambda", "grid mode runs on a flat torus chart, so lambda must be 0 (use exact.mode = ode)");
  if (!(c.exact_dt > 0.0)) fail("exact.dt", "must be positive");
  if (!(c.t_end > 0.0)) fail("run.t_end", "must be positive");
  if (!(c.cfl > 0.0 && c.cfl <= 1.0)) fail("run.cfl", "must lie in (0, 1]");
  if (c.output_every < 1) fail("run.output_every", "must be at least 1");
  if (c.dt && !(*c.dt > 0.0)) fail("run.dt", "must be positive");
  if (c.stability_dim < 2 || c.stability_dim > kMaxDim) fail("stability.dim", "must lie in [2, 5]");
  if (c.stability_points < kMinPointsPerAxis) fail("stability.points", "must be at least 8");
  if (!(c.stability_length > 0.0)) fail("stability.length", "must be positive");
  if (!(c.stability_epsilon >= 0.0)) fail("stability.epsilon", "must be non-negative");
  if (!(c.stability_horizon > 0.0)) fail("stability.horizon", "must be positive");
  if (!(c.stability_radius > 0.0 && c.stability_radius < 0.5))
    fail("stability.radius", "must lie in (0, 0.5) so the bump stays inside the box");
  if (c.levels.size() < 3) fail("convergence.levels", "needs at least three levels");
  for (std::size_t i = 0; i < c.levels.size(); ++i) {
    if (c.levels[i] < 16 || c.levels[i] % 8 != 0) fail("convergence.levels", "levels must be multiples of 8, >= 16");
    if (i > 0 && c.levels[i] <= c.levels[i - 1]) fail("convergence.levels", "levels must increase");
  }
  if (c.check_samples < 1) fail("check.samples", "must be at least 1");
  if (c.check_dims.empty()) fail("check.dims", "needs at least one dimension");
  for (int d : c.check_dims)
    if (d < 1 || d > kMaxDim) fail("check.dims", "dimensions must lie in [1, 5]");
}

struct RawParse {
  RunConfig config;
  std::map<std::string, std::size_t, std::less<>> lines;
  std::vector<ConfigIssue> issues;
};

void apply(RawParse& raw, std::string_view line, std::size_t number) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) {
    raw.issues.push_back({number, "type-error", "expected section.key = value"});
    return;
  }
  const auto name = trim(line.substr(0, eq));
  const auto value = trim(line.substr(eq + 1));
  const Key* key = find_key(name);
  if (!key) {
    raw.issues.push_back({number, "unknown-key", std::string(name)});
    return;
  }
  raw.lines[std::string(name)] = number;
  if (auto issue = key->set(raw.config, value))
    raw.issues.push_back({number, issue->kind, std::string(name) + ": " + issue->message});
}

RawParse parse_raw(std::string_view text, std::span<const std::string> overrides) {
  RawParse raw;
  std::size_t number = 0;
  while (!text.empty()) {
    ++number;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) apply(raw, line, number);
  }
  for (const std::string& o : overrides) apply(raw, o, 0);
  normalise(raw.config, raw.lines, raw.issues);
  return raw;
}

}  // namespace

std::string canonical_text(const RunConfig& config) {
  std::string s;
  for (const Key& k : keys()) s += std::string(k.name) + " = " + k.get(config) + "\n";
  return s;
}

ParseResult parse_config(std::string_view text, std::span<const std::string> overrides) {
  RawParse raw = parse_raw(text, overrides);
  ParseResult result;
  result.issues = std::move(raw.issues);
  if (!result.issues.empty()) return result;
  const RawParse again = parse_raw(canonical_text(raw.config), {});
  if (!again.issues.empty() || !(again.config == raw.config)) {
    result.issues.push_back({0, "constraint-violation", "configuration does not round-trip through its canonical form"});
    return result;
  }
  result.config = std::move(raw.config);
  return result;
}

// ---------------------------------------------------------------------------
// output

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorKind::io_failure, "cannot create " + path.parent_path().string());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::io_failure, "cannot open " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw Error(ErrorKind::io_failure, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::io_failure, "cannot rename into " + path.string());
}

std::string format_csv(const Series& series) {
  for (const auto& [name, col] : series)
    if (col.size() != series.front().second.size())
      throw Error(ErrorKind::invalid_argument, "column " + name + " has a different length");
  std::string s;
  for (std::size_t c = 0; c < series.size(); ++c) {
    if (c) s += ',';
    const std::string& name = series[c].first;
    if (name.find_first_of(",\"\n") != std::string::npos) {
      s += '"';
      for (char ch : name) s += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      s += '"';
    } else {
      s += name;
    }
  }
  s += '\n';
  const std::size_t rows = series.empty() ? 0 : series.front().second.size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < series.size(); ++c) {
      if (c) s += ',';
      s += format_real(series[c].second[r]);
    }
    s += '\n';
  }
  return s;
}

void emit_csv(const Series& series, const std::filesystem::path& path) { write_atomic(path, format_csv(series)); }

std::string format_check(const Check& c) {
  return "CHECK " + c.name + (c.pass ? " PASS " : " FAIL ") + format_real(c.measured) + " " + format_real(c.threshold);
}

namespace {

// ---------------------------------------------------------------------------
// command helpers

Grid config_grid(const RunConfig& c) { return make_grid(c.grid_dim, c.grid_points, c.grid_length); }

TensorField identity_field(const Grid& grid, double diagonal) {
  TensorField f = TensorField::covariant_symmetric(grid);
  const int n = grid.dim();
  for (int i = 0; i < n; ++i) {
    auto comp = f.component(packed_index(i, i, n));
    std::fill(comp.begin(), comp.end(), diagonal);
  }
  return f;
}

MetricTarget config_target(const RunConfig& c) { return conformal_wave_target(c.grid_dim, c.initial_amplitude); }

FlowState initial_state(const RunConfig& c) {
  const Grid grid = config_grid(c);
  const TensorField velocity = identity_field(grid, c.initial_velocity);
  switch (c.initial_profile) {
    case Profile::flat: return make_flow_state(0.0, identity_field(grid, 1.0), velocity);
    case Profile::conformal: {
      TensorField g = TensorField::covariant_symmetric(grid);
      std::vector<double> x(c.grid_dim);
      for (std::size_t p = 0; p < grid.node_count(); ++p) {
        grid.coordinates(p, x);
        const double f = std::exp(2.0 * c.initial_amplitude * std::sin(x[0]) * std::sin(x[1]));
        for (int i = 0; i < c.grid_dim; ++i) g(packed_index(i, i, c.grid_dim), p) = f;
      }
      return make_flow_state(0.0, std::move(g), velocity);
    }
    case Profile::bump: {
      StabilityConfig s;
      s.dim = c.grid_dim;
      s.points = c.grid_points.front();
      s.length = c.grid_length.front();
      s.epsilon = c.initial_amplitude;
      s.bump.seed = c.seed;
      FlowState st = stability_initial_state(s);
      st.velocity = velocity;
      return st;
    }
    case Profile::mms: return sample_target(config_target(c), grid, 0.0);
  }
  throw Error(ErrorKind::invalid_argument, "unknown profile");
}

RhsVariant config_variant(const RunConfig& c, const Grid& grid) {
  RhsVariant v = make_variant(c.variant);
  if (c.variant != Variant::generalized) return v;
  TensorField alpha = TensorField::covariant_symmetric(grid);
  std::fill(alpha.data().begin(), alpha.data().end(), c.flow_alpha);
  v.alpha = std::move(alpha);
  const double stress = c.flow_stress;
  v.stress = [stress](const Grid& g, double) { return identity_field(g, stress); };
  if (c.flow_source == SourceModel::einstein_quadratic) {
    v.source = [](const FlowState& s) {
      TensorField f = velocity_quadratic(metric_inverse(s.metric), s.velocity);
      for (double& x : f.data()) x = -x;
      return f;
    };
  } else {
    v.source = [](const FlowState& s) { return TensorField::covariant_symmetric(s.metric.grid()); };
  }
  return v;
}

double deviation_from_identity(const TensorField& g) {
  const int n = g.dim();
  double s = 0.0;
  for (std::size_t c = 0; c < g.component_count(); ++c) {
    const auto [i, j] = packed_pair(c, n);
    for (double v : g.component(c)) s = std::max(s, std::abs(v - (i == j ? 1.0 : 0.0)));
  }
  return s;
}

class Session {
 public:
  Session(const RunConfig& c, std::ostream& out) : config_(c), out_(out), dir_(c.out_dir) {}

  void check(std::string name, bool pass, double measured, double threshold) {
    checks_.push_back({std::move(name), pass, measured, threshold});
    out_ << format_check(checks_.back()) << '\n';
  }
  void csv(const std::string& file, const Series& s) {
    if (config_.emit_csv) emit_csv(s, dir_ / file);
  }
  void snapshot(const FlowState& s, std::size_t step) {
    if (!config_.emit_snapshots) return;
    char name[40];
    std::snprintf(name, sizeof name, "step_%06zu.hgf", step);
    std::filesystem::create_directories(dir_ / "snapshots");
    write_snapshot(s, dir_ / "snapshots" / name);
  }
  int finish() {
    const bool ok = std::all_of(checks_.begin(), checks_.end(), [](const Check& c) { return c.pass; });
    if (config_.emit_report) {
      std::string text = "# hgf " + std::string(to_string(config_.command)) + " seed=" + std::to_string(config_.seed) + "\n";
      for (const Check& c : checks_) text += format_check(c) + "\n";
      write_atomic(dir_ / "report.txt", text);
    }
    return ok ? 0 : 1;
  }
  const RunConfig& config() const { return config_; }

 private:
  const RunConfig& config_;
  std::ostream& out_;
  std::filesystem::path dir_;
  std::vector<Check> checks_;
};

void command_run(Session& s) {
  const RunConfig& c = s.config();
  const FlowState init = initial_state(c);
  IntegratorConfig ic;
  ic.variant = config_variant(c, init.metric.grid());
  ic.cfl_factor = c.cfl;
  ic.t_end = c.t_end;
  ic.output_every = c.output_every;
  ic.fixed_dt = c.dt;
  if (c.flow_forcing == Forcing::mms) ic.forcing = config_target(c);
  Series rows{{"t", {}}, {"sup_deviation", {}}, {"min_eigenvalue", {}}, {"gamma_trace_sup", {}}, {"drift", {}}};
  double worst_eig = std::numeric_limits<double>::infinity();
  auto observer = [&](const StateVector& sv, std::size_t step) {
    const TensorField g = sv.metric();
    const TensorField inv = metric_inverse(g);
    const double eig = min_metric_eigenvalue(g);
    worst_eig = std::min(worst_eig, eig);
    rows[0].second.push_back(sv.time());
    rows[1].second.push_back(deviation_from_identity(g));
    rows[2].second.push_back(eig);
    rows[3].second.push_back(gamma_trace(christoffel(g, inv), inv).sup_norm());
    rows[4].second.push_back(consistency_drift(sv));
    s.snapshot(unpack_state(sv), step);
  };
  IntegrationSummary summary;
  const StateVector final_state = integrate(pack_state(init), ic, observer, &summary);
  s.csv("run.csv", rows);
  s.check("spd_preserved", worst_eig > kSpdTolerance, worst_eig, kSpdTolerance);
  s.check("derivative_drift", summary.max_drift <= kDefaultDriftTolerance, summary.max_drift, kDefaultDriftTolerance);
  if (c.flow_forcing == Forcing::mms) {
    const TensorField exact = sample_target(*ic.forcing, init.metric.grid(), final_state.time()).metric;
    const TensorField g = final_state.metric();
    double err = 0.0;
    for (std::size_t i = 0; i < g.data().size(); ++i) err = std::max(err, std::abs(g.data()[i] - exact.data()[i]));
    s.check("mms_max_error", err <= 1e-6, err, 1e-6);
  }
}

void command_verify_exact(Session& s) {
  const RunConfig& c = s.config();
  const HomotheticParams params{c.exact_lambda, c.exact_a};
  Series rows{{"t", {}}, {"f_numeric", {}}, {"f_analytic", {}}, {"abs_error", {}}};
  auto add_row = [&](double t, double f_num, double f_exact) {
    rows[0].second.push_back(t);
    rows[1].second.push_back(f_num);
    rows[2].second.push_back(f_exact);
    rows[3].second.push_back(std::abs(f_num - f_exact));
  };
  if (c.exact_mode == ExactMode::grid) {
    const Grid grid = config_grid(c);
    IntegratorConfig ic;
    ic.variant = make_variant(Variant::pure_hgf);
    ic.cfl_factor = c.cfl;
    ic.t_end = c.t_end;
    ic.output_every = c.output_every;
    ic.fixed_dt = c.dt;
    double worst = 0.0;
    auto observer = [&](const StateVector& sv, std::size_t) {
      const double f = homothetic_factor(params, sv.time());
      const TensorField g = sv.metric();
      double err = 0.0;
      for (std::size_t comp = 0; comp < g.component_count(); ++comp) {
        const auto [i, j] = packed_pair(comp, grid.dim());
        for (double v : g.component(comp)) err = std::max(err, std::abs(v - (i == j ? f : 0.0)));
      }
      worst = std::max(worst, err);
      add_row(sv.time(), g(0, 0), f);
      rows[3].second.back() = err;
    };
    integrate(pack_state(make_flow_state(0.0, identity_field(grid, 1.0), identity_field(grid, c.exact_a))), ic,
              observer);
    s.csv("exact.csv", rows);
    s.check("homothetic_max_error", worst <= 1e-10, worst, 1e-10);
    return;
  }
  const double degenerate = params.degenerate_time();
  const double track_end = std::isfinite(degenerate) ? std::min(c.t_end, 0.9 * degenerate) : c.t_end;
  const HomotheticTrace tracked = trace_homothetic(params, c.exact_dt, track_end);
  double worst = 0.0;
  for (std::size_t k = 0; k < tracked.time.size(); ++k) {
    const double f = homothetic_factor(params, tracked.time[k]);
    add_row(tracked.time[k], tracked.factor[k], f);
    worst = std::max(worst, std::abs(tracked.factor[k] - f) / std::abs(f));
  }
  s.csv("exact.csv", rows);
  s.check("homothetic_relative_error", worst <= 1e-8 && !tracked.collapse_time, worst, 1e-8);
  if (std::isfinite(degenerate) && c.t_end >= degenerate) {
    const HomotheticTrace full = trace_homothetic(params, c.exact_dt, c.t_end);
    const double when = full.collapse_time.value_or(std::numeric_limits<double>::infinity());
    s.check("collapse_detected", when <= degenerate + c.exact_dt, when, degenerate + c.exact_dt);
  }
}

void command_verify_curvature(Session& s) {
  const RunConfig& c = s.config();
  const IdentityStudy id = einstein_identity_study(c.seed, c.levels);
  s.check("einstein_identity_order", id.order >= 3.5, id.order, 3.5);

  for (WaveQuantity q : {WaveQuantity::riemann, WaveQuantity::ricci, WaveQuantity::scalar}) {
    const std::string name(to_string(q));
    const double flat = wave_residual(homothetic_flat_window(c.levels.front(), 0.0, 0.25), q).sup_norm;
    s.check(name + "_wave_flat", flat <= 1e-12, flat, 1e-12);
    const double homothetic = wave_residual(homothetic_flat_window(c.levels.front(), 0.5, 0.25), q).sup_norm;
    s.check(name + "_wave_homothetic", homothetic <= 1e-12, homothetic, 1e-12);
  }
  Series rows{{"spacing", {}}, {"riemann", {}}, {"ricci", {}}, {"scalar", {}}};
  for (Scenario sc : {Scenario::residual_thm51, Scenario::residual_thm52, Scenario::residual_thm53}) {
    const ConvergenceReport r = convergence_study(sc, c.levels);
    const std::size_t col = sc == Scenario::residual_thm51 ? 1 : sc == Scenario::residual_thm52 ? 2 : 3;
    for (const auto& lvl : r.levels) {
      if (col == 1) rows[0].second.push_back(lvl.spacing);
      rows[col].second.push_back(lvl.error);
    }
    s.check(std::string(to_string(sc)) + "_order", r.min_order >= 2.0, r.min_order, 2.0);
  }
  s.csv("curvature.csv", rows);
}

void command_verify_symmetric_system(Session& s) {
  const RunConfig& c = s.config();
  SeededUniform rng(c.seed);
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_a0_asym = 0.0, worst_aj_asym = 0.0, worst_certificate = std::numeric_limits<double>::infinity();
  for (int n : c.check_dims) {
    for (std::size_t k = 0; k < c.check_samples; ++k) {
      const SmallMatrix g = random_spd(n, rng);
      const SmallMatrix inv = g.llt().solve(SmallMatrix::Identity(n, n));
      const SmallMatrix inv_sym = 0.5 * (inv + inv.transpose());
      const Eigen::MatrixXd a0 = assemble_a0(inv_sym);
      worst_a0_asym = std::max(worst_a0_asym, (a0 - a0.transpose()).cwiseAbs().maxCoeff());
      const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a0, Eigen::EigenvaluesOnly).eigenvalues()(0);
      const double inv_lo = Eigen::SelfAdjointEigenSolver<SmallMatrix>(inv_sym, Eigen::EigenvaluesOnly).eigenvalues()(0);
      worst_margin = std::min(worst_margin, lo - (std::min(1.0, inv_lo) - 1e-12));
      for (int j = 0; j < n; ++j) {
        const Eigen::MatrixXd aj = assemble_aj(inv_sym, j);
        worst_aj_asym = std::max(worst_aj_asym, (aj - aj.transpose()).cwiseAbs().maxCoeff());
      }
      for (const auto& xi : hyperbolicity_covectors(n)) {
        const Eigen::Map<const Eigen::VectorXd> v(xi.data(), n);
        worst_certificate = std::min(worst_certificate, v.dot(inv_sym * v));
      }
    }
  }
  s.check("a0_symmetric", worst_a0_asym == 0.0, worst_a0_asym, 0.0);
  s.check("a0_min_eigenvalue_margin", worst_margin >= 0.0, worst_margin, 0.0);
  s.check("aj_symmetric", worst_aj_asym == 0.0, worst_aj_asym, 0.0);
  s.check("principal_symbol_positive", worst_certificate > 0.0, worst_certificate, 0.0);
}

StabilityConfig stability_config(const RunConfig& c, double epsilon) {
  StabilityConfig s;
  s.dim = c.stability_dim;
  s.points = c.stability_points;
  s.length = c.stability_length;
  s.epsilon = epsilon;
  s.horizon = c.stability_horizon;
  s.cfl_factor = c.cfl;
  s.bump.radius_fraction = c.stability_radius;
  s.bump.seed = c.seed;
  s.reference_epsilon = c.stability_epsilon;
  return s;
}

void command_stability(Session& s) {
  const RunConfig& c = s.config();
  const double eps = c.stability_epsilon;
  const StabilityRunReport full = stability_experiment(stability_config(c, eps));
  s.csv("stability.csv", {{"t", full.time},
                          {"sup_norm", full.sup_history},
                          {"l2_energy", full.energy_history},
                          {"gamma_trace_sup", full.gamma_trace_history}});
  if (c.emit_snapshots) s.snapshot(full.final_state, full.time.size() - 1);
  const double peak = *std::max_element(full.sup_history.begin(), full.sup_history.end());
  s.check("no_blow_up", !full.blow_up, full.blow_up ? 1.0 : 0.0, 0.0);
  s.check("sup_within_10_epsilon", !full.blow_up && peak <= 10.0 * eps, peak, 10.0 * eps);
  const StabilityRunReport half = stability_experiment(stability_config(c, 0.5 * eps));
  const double ratio = halving_ratio(full, half);
  s.check("halving_ratio", !half.blow_up && ratio <= 0.75, ratio, 0.75);
}

void command_convergence(Session& s) {
  const RunConfig& c = s.config();
  const ConvergenceReport r = convergence_study(c.scenario, c.levels);
  Series rows{{"spacing", {}}, {"dt", {}}, {"error", {}}, {"order", {}}};
  for (const auto& lvl : r.levels) {
    rows[0].second.push_back(lvl.spacing);
    rows[1].second.push_back(lvl.dt);
    rows[2].second.push_back(lvl.error);
    rows[3].second.push_back(lvl.order.value_or(std::numeric_limits<double>::quiet_NaN()));
  }
  s.csv("convergence.csv", rows);
  const std::string name = std::string(to_string(c.scenario));
  if (r.exact) {
    const double worst = std::max_element(r.levels.begin(), r.levels.end(), [](const auto& a, const auto& b) {
                           return a.error < b.error;
                         })->error;
    s.check(name + "_exact", true, worst, kExactThreshold);
  } else {
    s.check(name + "_order", r.min_order >= 2.0, r.min_order, 2.0);
  }
}

}  // namespace

int dispatch(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    Session session(config, out);
    switch (config.command) {
      case Command::run: command_run(session); break;
      case Command::verify_exact: command_verify_exact(session); break;
      case Command::verify_curvature: command_verify_curvature(session); break;
      case Command::verify_symmetric_system: command_verify_symmetric_system(session); break;
      case Command::stability: command_stability(session); break;
      case Command::convergence: command_convergence(session); break;
    }
    return session.finish();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return 2;
}

}  // namespace hgf::cli
