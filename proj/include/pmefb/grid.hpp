#pragma once

// Uniform Cartesian grids in one or two dimensions, cell-centred scalar fields,
// face-centred fluxes, boolean cell masks and the conservative difference
// operators shared by the solvers and the diagnostics.
//
// Layout: cell (i, j) lives at flat index j * n + i, i runs along x1. Values
// outside the grid are zero (ghost cells), which makes every operator below
// see compactly supported data.

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "pmefb/errors.hpp"

namespace pmefb {

using Index = Eigen::Index;

/// Point or vector in R^d, d <= 2, stored inline.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 2, 1>;

inline Vec make_vec(double x) {
  Vec v(1);
  v << x;
  return v;
}
inline Vec make_vec(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

/// Axis-aligned box [lower, upper].
struct Box {
  Vec lower;
  Vec upper;

  int dim() const { return static_cast<int>(lower.size()); }
  double extent(int axis) const { return upper[axis] - lower[axis]; }
  double volume() const { return (upper - lower).prod(); }
  bool operator==(const Box&) const = default;
};

class Grid {
public:
  Grid() = default;
  Grid(int dim, int cells_per_axis, double dx, Vec origin);

  /// Grid covering `box` with `cells_per_axis` cells per axis. The box must be a cube.
  static Grid over(const Box& box, int cells_per_axis);

  int dim() const { return dim_; }
  int cells_per_axis() const { return n_; }
  double dx() const { return dx_; }
  const Vec& origin() const { return origin_; }
  Index size() const { return dim_ == 1 ? n_ : Index(n_) * n_; }
  double cell_volume() const { return dim_ == 1 ? dx_ : dx_ * dx_; }
  Box box() const;

  Index index(int i, int j = 0) const { return Index(j) * n_ + i; }
  std::array<int, 2> coords(Index idx) const {
    return {static_cast<int>(idx % n_), static_cast<int>(idx / n_)};
  }
  bool contains(int i, int j = 0) const {
    return i >= 0 && i < n_ && j >= 0 && j < (dim_ == 1 ? 1 : n_);
  }
  int rows() const { return dim_ == 1 ? 1 : n_; }

  Vec center(Index idx) const;
  Vec center(int i, int j) const;
  /// Cell containing x, or nothing when x lies outside the grid.
  std::optional<Index> locate(const Vec& x) const;

  bool operator==(const Grid& other) const;
  bool operator!=(const Grid& other) const { return !(*this == other); }

private:
  int dim_ = 1;
  int n_ = 0;
  double dx_ = 0.0;
  Vec origin_ = Vec::Zero(1);
};

void require_same_grid(const Grid& a, const Grid& b, const char* where);

template <typename Scalar>
struct FieldT {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Grid grid;
  Array values;
  double time_stamp = 0.0;

  FieldT() = default;
  explicit FieldT(const Grid& g, Scalar fill = Scalar(0), double t = 0.0)
      : grid(g), values(Array::Constant(g.size(), fill)), time_stamp(t) {}
  FieldT(const Grid& g, Array v, double t = 0.0) : grid(g), values(std::move(v)), time_stamp(t) {
    if (values.size() != grid.size()) throw InvalidArgument("field length does not match grid");
  }

  Index size() const { return values.size(); }
  Scalar& operator[](Index k) { return values[k]; }
  const Scalar& operator[](Index k) const { return values[k]; }
  /// Value with zero ghost cells outside the grid.
  Scalar at(int i, int j = 0) const {
    return grid.contains(i, j) ? values[grid.index(i, j)] : Scalar(0);
  }
};

using Field = FieldT<double>;

/// Face-centred values. Axis-0 faces sit at x1 = origin + i dx for i = 0..n and are
/// stored at j * (n + 1) + i; axis-1 faces sit at x2 = origin + j dx and are stored
/// at j * n + i with j = 0..n.
template <typename Scalar>
struct FaceFieldT {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Grid grid;
  std::array<Array, 2> axis;

  FaceFieldT() = default;
  explicit FaceFieldT(const Grid& g) : grid(g) {
    const Index n = g.cells_per_axis();
    axis[0] = Array::Zero(g.dim() == 1 ? n + 1 : (n + 1) * n);
    axis[1] = g.dim() == 1 ? Array() : Array::Zero(n * (n + 1));
  }

  Index face_index(int a, int i, int j) const {
    const Index n = grid.cells_per_axis();
    return a == 0 ? Index(j) * (n + 1) + i : Index(j) * n + i;
  }
  /// Low face of cell (i, j) along axis a.
  Scalar low(int a, int i, int j) const { return axis[a][face_index(a, i, j)]; }
  Scalar high(int a, int i, int j) const {
    return a == 0 ? axis[0][face_index(0, i + 1, j)] : axis[1][face_index(1, i, j + 1)];
  }
};

using FaceField = FaceFieldT<double>;

/// Face centre position for face (i, j) of axis a.
Vec face_center(const Grid& g, int a, int i, int j);

/// Boolean cell set, e.g. the positivity set of a pressure.
struct Mask {
  using Bits = Eigen::Array<bool, Eigen::Dynamic, 1>;

  Grid grid;
  Bits bits;

  Mask() = default;
  explicit Mask(const Grid& g, bool fill = false) : grid(g), bits(Bits::Constant(g.size(), fill)) {}
  Mask(const Grid& g, Bits b) : grid(g), bits(std::move(b)) {
    if (bits.size() != grid.size()) throw InvalidArgument("mask length does not match grid");
  }

  Index size() const { return bits.size(); }
  Index count() const { return bits.count(); }
  bool empty() const { return !bits.any(); }
  bool operator[](Index k) const { return bits[k]; }
  bool at(int i, int j = 0) const { return grid.contains(i, j) && bits[grid.index(i, j)]; }
  /// True when every cell of *this is also in `other`.
  bool subset_of(const Mask& other) const {
    require_same_grid(grid, other.grid, "Mask::subset_of");
    return !(bits && !other.bits).any();
  }
  Mask complement() const { return Mask(grid, Bits(!bits)); }
  bool operator==(const Mask& other) const {
    return grid == other.grid && (bits == other.bits).all();
  }
};

// ---------------------------------------------------------------------------
// Sampling helpers.

template <typename Fn>
Field sample(const Grid& g, Fn&& fn, double t = 0.0) {
  Field out(g, 0.0, t);
  for (Index k = 0; k < g.size(); ++k) out[k] = fn(g.center(k));
  return out;
}

/// Face field from fn(axis, position) -> double.
template <typename Fn>
FaceField sample_faces(const Grid& g, Fn&& fn) {
  FaceField out(g);
  const int n = g.cells_per_axis();
  if (g.dim() == 1) {
    for (int i = 0; i <= n; ++i) out.axis[0][i] = fn(0, face_center(g, 0, i, 0));
    return out;
  }
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= n; ++i) out.axis[0][out.face_index(0, i, j)] = fn(0, face_center(g, 0, i, j));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i < n; ++i) out.axis[1][out.face_index(1, i, j)] = fn(1, face_center(g, 1, i, j));
  return out;
}

// ---------------------------------------------------------------------------
// Difference operators. All are linear and use zero ghost values.

/// 2d+1 point Laplacian.
template <typename Scalar>
FieldT<Scalar> laplacian(const FieldT<Scalar>& u) {
  const Grid& g = u.grid;
  const int n = g.cells_per_axis();
  const Scalar inv = Scalar(1) / (g.dx() * g.dx());
  FieldT<Scalar> out(g, Scalar(0), u.time_stamp);
  for (int j = 0; j < g.rows(); ++j) {
    for (int i = 0; i < n; ++i) {
      const Scalar c = u.values[g.index(i, j)];
      Scalar acc = u.at(i - 1, j) + u.at(i + 1, j) - 2 * c;
      if (g.dim() == 2) acc += u.at(i, j - 1) + u.at(i, j + 1) - 2 * c;
      out.values[g.index(i, j)] = acc * inv;
    }
  }
  return out;
}

/// Face-centred gradient: forward difference across each face.
template <typename Scalar>
FaceFieldT<Scalar> gradient(const FieldT<Scalar>& u) {
  const Grid& g = u.grid;
  const int n = g.cells_per_axis();
  const Scalar inv = Scalar(1) / g.dx();
  FaceFieldT<Scalar> out(g);
  for (int j = 0; j < g.rows(); ++j)
    for (int i = 0; i <= n; ++i) out.axis[0][out.face_index(0, i, j)] = (u.at(i, j) - u.at(i - 1, j)) * inv;
  if (g.dim() == 2)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i < n; ++i) out.axis[1][out.face_index(1, i, j)] = (u.at(i, j) - u.at(i, j - 1)) * inv;
  return out;
}

/// Cell-centred divergence of a face field; the negative adjoint of `gradient`.
template <typename Scalar>
FieldT<Scalar> divergence(const FaceFieldT<Scalar>& flux) {
  const Grid& g = flux.grid;
  const int n = g.cells_per_axis();
  const Scalar inv = Scalar(1) / g.dx();
  FieldT<Scalar> out(g);
  for (int j = 0; j < g.rows(); ++j) {
    for (int i = 0; i < n; ++i) {
      Scalar acc = flux.high(0, i, j) - flux.low(0, i, j);
      if (g.dim() == 2) acc += flux.high(1, i, j) - flux.low(1, i, j);
      out.values[g.index(i, j)] = acc * inv;
    }
  }
  return out;
}

/// Discrete inner products, weighted by the cell volume.
template <typename Scalar>
Scalar inner(const FieldT<Scalar>& a, const FieldT<Scalar>& b) {
  require_same_grid(a.grid, b.grid, "inner");
  return (a.values * b.values).sum() * a.grid.cell_volume();
}
template <typename Scalar>
Scalar inner(const FaceFieldT<Scalar>& a, const FaceFieldT<Scalar>& b) {
  require_same_grid(a.grid, b.grid, "inner");
  Scalar s = (a.axis[0] * b.axis[0]).sum();
  if (a.grid.dim() == 2) s += (a.axis[1] * b.axis[1]).sum();
  return s * a.grid.cell_volume();
}

template <typename Scalar>
Scalar mass(const FieldT<Scalar>& u) {
  return u.values.sum() * u.grid.cell_volume();
}
template <typename Scalar>
Scalar l1_norm(const FieldT<Scalar>& u) {
  return u.values.abs().sum() * u.grid.cell_volume();
}
template <typename Scalar>
Scalar linf_norm(const FieldT<Scalar>& u) {
  return u.size() == 0 ? Scalar(0) : u.values.abs().maxCoeff();
}
template <typename Scalar>
Scalar l1_distance(const FieldT<Scalar>& u, const FieldT<Scalar>& v) {
  require_same_grid(u.grid, v.grid, "l1_distance");
  return (u.values - v.values).abs().sum() * u.grid.cell_volume();
}

// ---------------------------------------------------------------------------
// Persistence.

/// Header line {d, cells_per_axis, dx, origin, time_stamp, name} followed by the raw
/// little-endian doubles in row-major order.
void write_snapshot(const std::string& path, const Field& field, const std::string& name);

struct NamedField {
  Field field;
  std::string name;
};
NamedField read_snapshot(const std::string& path);

/// Run-length encoding: alternating run lengths, starting with a run of `false` cells.
std::string mask_to_rle_json(const Mask& mask);
Mask mask_from_rle_json(const std::string& text);

}  // namespace pmefb
