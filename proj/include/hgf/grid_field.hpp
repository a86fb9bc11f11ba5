#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hgf/error.hpp"

namespace hgf {

inline constexpr int kMaxDim = 5;
inline constexpr std::size_t kMinPointsPerAxis = 8;
/// Smallest admissible metric eigenvalue.
inline constexpr double kSpdTolerance = 1e-10;

/// Per-node dense matrix with a compile-time capacity of kMaxDim, so node
/// loops never touch the heap.
using SmallMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Periodic structured grid chart. Node indices are row-major: the last axis
/// varies fastest.
class Grid {
 public:
  Grid() = default;

  int dim() const noexcept { return dim_; }
  std::size_t points(int axis) const { return points_[axis]; }
  double length(int axis) const { return lengths_[axis]; }
  double spacing(int axis) const { return lengths_[axis] / static_cast<double>(points_[axis]); }
  const std::vector<std::size_t>& points_per_axis() const noexcept { return points_; }
  const std::vector<double>& axis_lengths() const noexcept { return lengths_; }

  std::size_t node_count() const noexcept { return node_count_; }
  std::size_t stride(int axis) const { return strides_[axis]; }
  std::size_t axis_index(std::size_t node, int axis) const {
    return (node / strides_[axis]) % points_[axis];
  }
  /// Node index reached by moving `offset` points along `axis`, with wrap.
  std::size_t shifted(std::size_t node, int axis, long offset) const;
  void coordinates(std::size_t node, std::span<double> x) const;
  double smallest_spacing() const;

  bool operator==(const Grid& other) const {
    return dim_ == other.dim_ && points_ == other.points_ && lengths_ == other.lengths_;
  }

 private:
  friend Grid make_grid(int, std::vector<std::size_t>, std::vector<double>);

  int dim_ = 0;
  std::vector<std::size_t> points_;
  std::vector<double> lengths_;
  std::vector<std::size_t> strides_;
  std::size_t node_count_ = 0;
};

Grid make_grid(int dim, std::vector<std::size_t> points_per_axis, std::vector<double> axis_length);

/// Tensor valence as (covariant rank, contravariant rank).
struct Valence {
  int covariant = 0;
  int contravariant = 0;

  int rank() const noexcept { return covariant + contravariant; }
  bool operator==(const Valence&) const = default;
};

/// symmetric_pair: the last two indices commute. For rank-2 fields this is
/// stored packed (i <= j lexicographic); higher ranks are stored densely.
/// riemann: antisymmetric in (1,2) and (3,4), symmetric under (12)<->(34);
/// stored densely and checked, never enforced.
enum class Symmetry { none, symmetric_pair, riemann };

inline std::size_t packed_count(int n) { return static_cast<std::size_t>(n * (n + 1) / 2); }
inline std::size_t packed_index(int i, int j, int n) {
  if (i > j) std::swap(i, j);
  return static_cast<std::size_t>(i * n - i * (i - 1) / 2 + (j - i));
}
std::pair<int, int> packed_pair(std::size_t c, int n);

/// Grid-sampled tensor components, stored component-major: all nodes of
/// component 0, then all nodes of component 1, and so on.
class TensorField {
 public:
  TensorField() = default;
  TensorField(Grid grid, Valence valence, Symmetry symmetry = Symmetry::none);

  static TensorField scalar(const Grid& grid) { return TensorField(grid, {0, 0}); }
  static TensorField covariant_symmetric(const Grid& grid) {
    return TensorField(grid, {2, 0}, Symmetry::symmetric_pair);
  }
  static TensorField contravariant_symmetric(const Grid& grid) {
    return TensorField(grid, {0, 2}, Symmetry::symmetric_pair);
  }

  const Grid& grid() const noexcept { return grid_; }
  Valence valence() const noexcept { return valence_; }
  Symmetry symmetry() const noexcept { return symmetry_; }
  int rank() const noexcept { return valence_.rank(); }
  int dim() const noexcept { return grid_.dim(); }
  bool packed() const noexcept { return symmetry_ == Symmetry::symmetric_pair && rank() == 2; }

  /// Number of stored components per node.
  std::size_t component_count() const noexcept { return components_; }
  std::size_t node_count() const noexcept { return grid_.node_count(); }

  /// Stored component for a full multi-index (packed fields accept either order).
  std::size_t index(std::span<const int> multi) const;
  std::size_t index(std::initializer_list<int> multi) const {
    return index(std::span<const int>(multi.begin(), multi.size()));
  }

  double operator()(std::size_t component, std::size_t node) const {
    return data_[component * grid_.node_count() + node];
  }
  double& operator()(std::size_t component, std::size_t node) {
    return data_[component * grid_.node_count() + node];
  }
  double at(std::size_t node, std::initializer_list<int> multi) const {
    return (*this)(index(multi), node);
  }

  std::span<double> component(std::size_t c) {
    return {data_.data() + c * grid_.node_count(), grid_.node_count()};
  }
  std::span<const double> component(std::size_t c) const {
    return {data_.data() + c * grid_.node_count(), grid_.node_count()};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const TensorField& other) const {
    return grid_ == other.grid_ && valence_ == other.valence_ && symmetry_ == other.symmetry_;
  }

  /// Throws non_finite if any entry is NaN or Inf.
  void check_finite() const;
  double sup_norm() const;
  /// Largest violation of the declared symmetry (0 for packed or none).
  double symmetry_residual() const;

 private:
  Grid grid_;
  Valence valence_;
  Symmetry symmetry_ = Symmetry::none;
  std::size_t components_ = 0;
  std::vector<double> data_;
};

/// Component function: coordinates of a node plus a full multi-index.
using ComponentFunction = std::function<double(std::span<const double>, std::span<const int>)>;

TensorField sample_field(const ComponentFunction& f, const Grid& grid, Valence valence,
                         Symmetry symmetry);

/// 4th-order central periodic difference along `axis`; `order` is 1 or 2.
TensorField partial_derivative(const TensorField& field, int axis, int order);

/// Expands a packed symmetric component set at one node into a matrix.
SmallMatrix load_symmetric(const TensorField& field, std::size_t node);

/// (g, dg/dt) at one instant.
struct FlowState {
  double time = 0.0;
  TensorField metric;
  TensorField velocity;
};

FlowState make_flow_state(double time, TensorField metric, TensorField velocity);

/// Smallest eigenvalue of the metric over all nodes.
double min_metric_eigenvalue(const TensorField& metric);

/// Throws singular_metric if any node has eigenvalue <= kSpdTolerance, and
/// grid_mismatch/shape_mismatch if metric and velocity disagree.
void validate_flow_state(const FlowState& state);

void write_snapshot(const FlowState& state, const std::filesystem::path& path);
FlowState read_snapshot(const std::filesystem::path& path);

}  // namespace hgf
