#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace nsm {

enum class Boundary { Periodic, Dirichlet };

// Direction of a stencil neighbour. In 1-D only Self/West/East occur.
// 2-D nodes are addressed as (row, col) with row = iy, col = ix:
// North is row-1, South row+1, West col-1, East col+1.
enum class Offset : std::uint8_t { Self, West, East, North, South };

struct Neighbour {
  // Negative index marks a Dirichlet ghost carrying the value 0.
  std::ptrdiff_t index;
  Offset offset;

  bool ghost() const { return index < 0; }
};

struct Stencil {
  std::array<Neighbour, 5> entries{};
  std::size_t count = 0;

  std::span<const Neighbour> view() const { return {entries.data(), count}; }
  auto begin() const { return entries.begin(); }
  auto end() const { return entries.begin() + static_cast<std::ptrdiff_t>(count); }
};

/// Equispaced 1-D or 2-D lattice with one spacing h shared by all axes.
///
/// Node i on an axis sits at origin + i*h. Nodes are numbered row-major with x
/// fastest: index = ix + nx*iy. Periodic grids have extent = n*h (node n
/// coincides with node 0); Dirichlet grids have extent = (n-1)*h.
class Grid {
 public:
  Grid() = default;

  int dim() const { return dim_; }
  int n(int axis) const { return n_[static_cast<std::size_t>(axis)]; }
  std::array<int, 2> shape() const { return n_; }
  std::size_t size() const;
  double h() const { return h_; }
  Boundary boundary() const { return boundary_; }
  double origin(int axis) const { return origin_[static_cast<std::size_t>(axis)]; }
  double extent(int axis) const { return extent_[static_cast<std::size_t>(axis)]; }

  std::size_t index(int ix, int iy = 0) const;
  std::array<int, 2> axis_index(std::size_t node) const;
  std::array<double, 2> coordinate(std::size_t node) const;

  bool operator==(const Grid&) const = default;

 private:
  friend Grid make_grid(int, std::array<int, 2>, std::array<double, 2>, Boundary);
  friend Grid make_grid_spaced(int, std::array<int, 2>, double, Boundary);

  int dim_ = 1;
  std::array<int, 2> n_{1, 1};
  double h_ = 1.0;
  Boundary boundary_ = Boundary::Periodic;
  std::array<double, 2> origin_{0.0, 0.0};
  std::array<double, 2> extent_{1.0, 1.0};
};

/// Builds a grid from point counts and physical extents (origin 0). In 2-D the
/// two axes must imply the same spacing. Throws ConfigError for n < 3 per axis,
/// nonpositive extents or dim outside {1, 2}.
Grid make_grid(int dim, std::array<int, 2> n_axis, std::array<double, 2> extent,
               Boundary boundary);

/// Builds a grid from point counts and a spacing; the extent follows from the
/// boundary convention. Used for meshes specified as "j = 0..n-1, step h".
Grid make_grid_spaced(int dim, std::array<int, 2> n_axis, double h, Boundary boundary);

inline Grid make_grid_1d(int n, double extent, Boundary b) {
  return make_grid(1, {n, 1}, {extent, 0.0}, b);
}
inline Grid make_grid_2d(int nx, int ny, double ex, double ey, Boundary b) {
  return make_grid(2, {nx, ny}, {ex, ey}, b);
}

Stencil stencil(const Grid& grid, std::size_t node);

/// Neighbour of `node` in one direction, or -1 when it falls outside a
/// Dirichlet domain.
std::ptrdiff_t neighbour(const Grid& grid, std::size_t node, Offset dir);

/// Real values on the nodes of a grid.
struct Field {
  Grid grid;
  std::vector<double> values;

  Field() = default;
  explicit Field(Grid g, double fill = 0.0);
  Field(Grid g, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
};

/// Throws ConfigError unless every value is finite and > 0.
void require_length_scale(const Field& ell);

/// Piecewise-linear (1-D) / bilinear (2-D) resampling onto `target`.
///
/// The grids are compatible when they share the origin and either the same
/// extent (periodic wrap is used for periodic sources) or the same node hull,
/// i.e. equal coordinates of the last node. Anything else is a ConfigError.
Field interpolate_to(const Field& field, const Grid& target);

/// CSV with header `index,x,value` (1-D) or `index,x,y,value` (2-D).
void write_field_csv(std::ostream& os, const Field& field);
Field read_field_csv(std::istream& is, const Grid& grid);

}  // namespace nsm
