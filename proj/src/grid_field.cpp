#include "hgf/grid_field.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace hgf {

namespace {

std::size_t ipow(std::size_t base, int exponent) {
  std::size_t r = 1;
  for (int e = 0; e < exponent; ++e) r *= base;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid

Grid make_grid(int dim, std::vector<std::size_t> points_per_axis, std::vector<double> axis_length) {
  if (dim < 1) throw Error(ErrorKind::dimension_mismatch, "dim must be >= 1");
  if (dim > kMaxDim)
    throw Error(ErrorKind::unsupported_dimension,
                "dim " + std::to_string(dim) + " exceeds " + std::to_string(kMaxDim));
  if (points_per_axis.size() != static_cast<std::size_t>(dim) ||
      axis_length.size() != static_cast<std::size_t>(dim))
    throw Error(ErrorKind::dimension_mismatch, "axis lists must have length dim");
  for (std::size_t p : points_per_axis)
    if (p < kMinPointsPerAxis)
      throw Error(ErrorKind::too_few_points,
                  "need at least " + std::to_string(kMinPointsPerAxis) + " points per axis");
  for (double l : axis_length)
    if (!(l > 0.0) || !std::isfinite(l))
      throw Error(ErrorKind::non_positive_length, "axis lengths must be positive and finite");

  Grid g;
  g.dim_ = dim;
  g.points_ = std::move(points_per_axis);
  g.lengths_ = std::move(axis_length);
  g.strides_.assign(dim, 1);
  for (int a = dim - 2; a >= 0; --a) g.strides_[a] = g.strides_[a + 1] * g.points_[a + 1];
  g.node_count_ = g.strides_[0] * g.points_[0];
  return g;
}

std::size_t Grid::shifted(std::size_t node, int axis, long offset) const {
  const long n = static_cast<long>(points_[axis]);
  const long i = static_cast<long>(axis_index(node, axis));
  long j = (i + offset) % n;
  if (j < 0) j += n;
  return node + static_cast<std::size_t>(j - i) * strides_[axis];
}

void Grid::coordinates(std::size_t node, std::span<double> x) const {
  for (int a = 0; a < dim_; ++a) x[a] = static_cast<double>(axis_index(node, a)) * spacing(a);
}

double Grid::smallest_spacing() const {
  double h = std::numeric_limits<double>::infinity();
  for (int a = 0; a < dim_; ++a) h = std::min(h, spacing(a));
  return h;
}

// ---------------------------------------------------------------------------
// Index helpers

std::pair<int, int> packed_pair(std::size_t c, int n) {
  std::size_t k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j, ++k)
      if (k == c) return {i, j};
  throw Error(ErrorKind::invalid_argument, "packed component out of range");
}

// ---------------------------------------------------------------------------
// TensorField

TensorField::TensorField(Grid grid, Valence valence, Symmetry symmetry)
    : grid_(std::move(grid)), valence_(valence), symmetry_(symmetry) {
  const int n = grid_.dim();
  if (symmetry_ == Symmetry::symmetric_pair && rank() < 2)
    throw Error(ErrorKind::invalid_argument, "symmetric-pair needs rank >= 2");
  if (symmetry_ == Symmetry::riemann && rank() != 4)
    throw Error(ErrorKind::invalid_argument, "riemann symmetry needs rank 4");
  components_ = packed() ? packed_count(n) : ipow(static_cast<std::size_t>(n), rank());
  data_.assign(components_ * grid_.node_count(), 0.0);
}

std::size_t TensorField::index(std::span<const int> multi) const {
  const int n = grid_.dim();
  if (static_cast<int>(multi.size()) != rank())
    throw Error(ErrorKind::invalid_argument, "multi-index length does not match rank");
  if (packed()) return packed_index(multi[0], multi[1], n);
  std::size_t flat = 0;
  for (int idx : multi) flat = flat * static_cast<std::size_t>(n) + static_cast<std::size_t>(idx);
  return flat;
}

void TensorField::check_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) throw Error(ErrorKind::non_finite, "field contains NaN or Inf");
}

double TensorField::sup_norm() const {
  double s = 0.0;
  for (double v : data_) s = std::max(s, std::abs(v));
  return s;
}

double TensorField::symmetry_residual() const {
  if (symmetry_ == Symmetry::none || packed()) return 0.0;
  const int n = grid_.dim();
  const std::size_t nodes = grid_.node_count();
  double worst = 0.0;
  if (symmetry_ == Symmetry::symmetric_pair) {
    const std::size_t n2 = static_cast<std::size_t>(n) * n;
    const std::size_t lead = components_ / n2;
    for (std::size_t a = 0; a < lead; ++a)
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          const auto c1 = component(a * n2 + i * n + j);
          const auto c2 = component(a * n2 + j * n + i);
          for (std::size_t p = 0; p < nodes; ++p) worst = std::max(worst, std::abs(c1[p] - c2[p]));
        }
    return worst;
  }
  // riemann
  auto flat = [n](int i, int j, int k, int l) {
    return ((static_cast<std::size_t>(i) * n + j) * n + k) * n + l;
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const auto base = component(flat(i, j, k, l));
          const auto anti_ij = component(flat(j, i, k, l));
          const auto anti_kl = component(flat(i, j, l, k));
          const auto pair = component(flat(k, l, i, j));
          for (std::size_t p = 0; p < nodes; ++p) {
            worst = std::max(worst, std::abs(base[p] + anti_ij[p]));
            worst = std::max(worst, std::abs(base[p] + anti_kl[p]));
            worst = std::max(worst, std::abs(base[p] - pair[p]));
          }
        }
  return worst;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

void unflatten(std::size_t flat, int n, std::span<int> out) {
  for (int r = static_cast<int>(out.size()) - 1; r >= 0; --r) {
    out[r] = static_cast<int>(flat % static_cast<std::size_t>(n));
    flat /= static_cast<std::size_t>(n);
  }
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * (1.0 + std::abs(a) + std::abs(b)); }

void spot_check_symmetry(const ComponentFunction& f, const Grid& grid, int rank, Symmetry symmetry) {
  if (symmetry == Symmetry::none) return;
  const int n = grid.dim();
  const std::size_t nodes = grid.node_count();
  const std::array<std::size_t, 4> sample_nodes{0, nodes / 3, nodes / 2, nodes - 1};
  std::vector<double> x(n);
  std::vector<int> idx(rank), other(rank);
  const std::size_t total = ipow(static_cast<std::size_t>(n), rank);
  for (std::size_t node : sample_nodes) {
    grid.coordinates(node, x);
    for (std::size_t flat = 0; flat < total; ++flat) {
      unflatten(flat, n, idx);
      const double v = f(x, idx);
      auto compare = [&](double sign) {
        if (!close(v, sign * f(x, other)))
          throw Error(ErrorKind::symmetry_violation, "component function violates declared symmetry");
      };
      if (symmetry == Symmetry::symmetric_pair) {
        other = idx;
        std::swap(other[rank - 1], other[rank - 2]);
        compare(1.0);
      } else {
        other = {idx[1], idx[0], idx[2], idx[3]};
        compare(-1.0);
        other = {idx[0], idx[1], idx[3], idx[2]};
        compare(-1.0);
        other = {idx[2], idx[3], idx[0], idx[1]};
        compare(1.0);
      }
    }
  }
}

}  // namespace

TensorField sample_field(const ComponentFunction& f, const Grid& grid, Valence valence,
                         Symmetry symmetry) {
  TensorField field(grid, valence, symmetry);
  spot_check_symmetry(f, grid, valence.rank(), symmetry);
  const int n = grid.dim();
  std::vector<double> x(n);
  std::vector<int> idx(valence.rank());
  for (std::size_t c = 0; c < field.component_count(); ++c) {
    if (field.packed()) {
      auto [i, j] = packed_pair(c, n);
      idx[0] = i;
      idx[1] = j;
    } else {
      unflatten(c, n, idx);
    }
    auto out = field.component(c);
    for (std::size_t p = 0; p < grid.node_count(); ++p) {
      grid.coordinates(p, x);
      out[p] = f(x, idx);
    }
  }
  field.check_finite();
  return field;
}

// ---------------------------------------------------------------------------
// Derivatives

TensorField partial_derivative(const TensorField& field, int axis, int order) {
  const Grid& grid = field.grid();
  if (axis < 0 || axis >= grid.dim())
    throw Error(ErrorKind::axis_out_of_range, "axis " + std::to_string(axis));
  if (order != 1 && order != 2) throw Error(ErrorKind::invalid_argument, "order must be 1 or 2");

  TensorField out(grid, field.valence(), field.symmetry());
  const std::size_t nodes = grid.node_count();
  const std::size_t npts = grid.points(axis);
  const std::size_t stride = grid.stride(axis);
  const double h = grid.spacing(axis);
  const double scale = order == 1 ? 1.0 / (12.0 * h) : 1.0 / (12.0 * h * h);

  const std::size_t line = npts * stride;
  for (std::size_t c = 0; c < field.component_count(); ++c) {
    const double* in = field.component(c).data();
    double* res = out.component(c).data();
    for (std::size_t block = 0; block < nodes; block += line) {
      for (std::size_t i = 0; i < npts; ++i) {
        const double* m2 = in + block + ((i + npts - 2) % npts) * stride;
        const double* m1 = in + block + ((i + npts - 1) % npts) * stride;
        const double* c0 = in + block + i * stride;
        const double* p1 = in + block + ((i + 1) % npts) * stride;
        const double* p2 = in + block + ((i + 2) % npts) * stride;
        double* r = res + block + i * stride;
        if (order == 1) {
          for (std::size_t s = 0; s < stride; ++s) r[s] = (8.0 * (p1[s] - m1[s]) - (p2[s] - m2[s])) * scale;
        } else {
          for (std::size_t s = 0; s < stride; ++s)
            r[s] = (16.0 * (p1[s] + m1[s]) - (p2[s] + m2[s]) - 30.0 * c0[s]) * scale;
        }
      }
    }
  }
  return out;
}

SmallMatrix load_symmetric(const TensorField& field, std::size_t node) {
  const int n = field.dim();
  SmallMatrix m(n, n);
  std::size_t c = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j, ++c) {
      const double v = field(c, node);
      m(i, j) = v;
      m(j, i) = v;
    }
  return m;
}

// ---------------------------------------------------------------------------
// FlowState

FlowState make_flow_state(double time, TensorField metric, TensorField velocity) {
  FlowState s{time, std::move(metric), std::move(velocity)};
  validate_flow_state(s);
  return s;
}

double min_metric_eigenvalue(const TensorField& metric) {
  double lo = std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<SmallMatrix> solver;
  for (std::size_t p = 0; p < metric.node_count(); ++p) {
    solver.compute(load_symmetric(metric, p), Eigen::EigenvaluesOnly);
    lo = std::min(lo, solver.eigenvalues()(0));
  }
  return lo;
}

void validate_flow_state(const FlowState& state) {
  if (!state.metric.packed() || state.metric.valence() != Valence{2, 0})
    throw Error(ErrorKind::shape_mismatch, "metric must be a packed (0,2)-symmetric field");
  if (!(state.velocity.grid() == state.metric.grid()))
    throw Error(ErrorKind::grid_mismatch, "metric and velocity must share a grid");
  if (!state.velocity.same_shape(state.metric))
    throw Error(ErrorKind::shape_mismatch, "velocity must be a packed (0,2)-symmetric field");
  state.metric.check_finite();
  state.velocity.check_finite();
  const double lo = min_metric_eigenvalue(state.metric);
  if (!(lo > kSpdTolerance))
    throw Error(ErrorKind::singular_metric, "smallest metric eigenvalue " + std::to_string(lo));
}

// ---------------------------------------------------------------------------
// Snapshot I/O

namespace {

constexpr std::array<char, 4> kMagic{'H', 'G', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& buf, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  buf.append(bytes.data(), bytes.size());
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size())
      throw Error(ErrorKind::shape_mismatch, "snapshot truncated");
    std::array<char, sizeof(T)> raw;
    std::memcpy(raw.data(), bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw.data(), sizeof(T));
    return value;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_snapshot(const FlowState& state, const std::filesystem::path& path) {
  const Grid& grid = state.metric.grid();
  std::string buf;
  buf.append(kMagic.data(), kMagic.size());
  put<std::uint32_t>(buf, kVersion);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(grid.dim()));
  for (std::size_t p : grid.points_per_axis()) put<std::uint64_t>(buf, p);
  for (double l : grid.axis_lengths()) put<double>(buf, l);
  put<double>(buf, state.time);
  for (const TensorField* f : {&state.metric, &state.velocity})
    for (std::size_t p = 0; p < f->node_count(); ++p)
      for (std::size_t c = 0; c < f->component_count(); ++c) put<double>(buf, (*f)(c, p));

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io_failure, "cannot open " + tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error(ErrorKind::io_failure, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::io_failure, "rename to " + path.string() + ": " + ec.message());
}

FlowState read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_failure, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw Error(ErrorKind::bad_magic, path.string());
  Reader r(bytes.substr(kMagic.size()));
  if (r.get<std::uint32_t>() != kVersion) throw Error(ErrorKind::version_mismatch, path.string());
  const std::uint32_t dim = r.get<std::uint32_t>();
  if (dim < 1 || dim > static_cast<std::uint32_t>(kMaxDim))
    throw Error(ErrorKind::shape_mismatch, "bad dimension in snapshot");
  std::vector<std::size_t> points(dim);
  std::vector<double> lengths(dim);
  for (auto& p : points) p = static_cast<std::size_t>(r.get<std::uint64_t>());
  for (auto& l : lengths) l = r.get<double>();
  const double time = r.get<double>();

  Grid grid;
  try {
    grid = make_grid(static_cast<int>(dim), points, lengths);
  } catch (const Error& e) {
    throw Error(ErrorKind::shape_mismatch, std::string("bad grid descriptor: ") + e.what());
  }
  TensorField metric = TensorField::covariant_symmetric(grid);
  TensorField velocity = TensorField::covariant_symmetric(grid);
  const std::size_t expected = 2 * metric.component_count() * grid.node_count() * sizeof(double);
  if (r.remaining() != expected)
    throw Error(ErrorKind::shape_mismatch, "payload size does not match grid descriptor");
  for (TensorField* f : {&metric, &velocity})
    for (std::size_t p = 0; p < f->node_count(); ++p)
      for (std::size_t c = 0; c < f->component_count(); ++c) (*f)(c, p) = r.get<double>();
  return FlowState{time, std::move(metric), std::move(velocity)};
}

}  // namespace hgf
