#include "nsm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "nsm/csv.hpp"
#include "nsm/error.hpp"

namespace nsm {

std::size_t Grid::size() const {
  return static_cast<std::size_t>(n_[0]) * static_cast<std::size_t>(dim_ == 2 ? n_[1] : 1);
}

std::size_t Grid::index(int ix, int iy) const {
  return static_cast<std::size_t>(ix) + static_cast<std::size_t>(n_[0]) * static_cast<std::size_t>(iy);
}

std::array<int, 2> Grid::axis_index(std::size_t node) const {
  const auto nx = static_cast<std::size_t>(n_[0]);
  return {static_cast<int>(node % nx), static_cast<int>(node / nx)};
}

std::array<double, 2> Grid::coordinate(std::size_t node) const {
  auto [ix, iy] = axis_index(node);
  return {origin_[0] + ix * h_, dim_ == 2 ? origin_[1] + iy * h_ : 0.0};
}

namespace {

void check_shape(int dim, std::array<int, 2> n_axis) {
  if (dim != 1 && dim != 2) throw ConfigError("grid dim must be 1 or 2, got " + std::to_string(dim));
  for (int a = 0; a < dim; ++a) {
    if (n_axis[static_cast<std::size_t>(a)] < 3) {
      throw ConfigError("grid needs at least 3 points per axis, got " +
                        std::to_string(n_axis[static_cast<std::size_t>(a)]));
    }
  }
}

double spacing(int n, double extent, Boundary b) {
  return b == Boundary::Periodic ? extent / n : extent / (n - 1);
}

double extent_of(int n, double h, Boundary b) {
  return b == Boundary::Periodic ? n * h : (n - 1) * h;
}

}  // namespace

Grid make_grid(int dim, std::array<int, 2> n_axis, std::array<double, 2> extent, Boundary boundary) {
  check_shape(dim, n_axis);
  if (!(extent[0] > 0.0) || (dim == 2 && !(extent[1] > 0.0))) {
    throw ConfigError("grid extent must be positive");
  }
  Grid g;
  g.dim_ = dim;
  g.n_ = {n_axis[0], dim == 2 ? n_axis[1] : 1};
  g.boundary_ = boundary;
  g.h_ = spacing(n_axis[0], extent[0], boundary);
  g.extent_ = {extent[0], dim == 2 ? extent[1] : 0.0};
  if (dim == 2) {
    double hy = spacing(n_axis[1], extent[1], boundary);
    if (std::abs(hy - g.h_) > 1e-12 * g.h_) {
      throw ConfigError("2-D grid axes must share one spacing");
    }
  }
  return g;
}

Grid make_grid_spaced(int dim, std::array<int, 2> n_axis, double h, Boundary boundary) {
  check_shape(dim, n_axis);
  if (!(h > 0.0)) throw ConfigError("grid spacing must be positive");
  Grid g;
  g.dim_ = dim;
  g.n_ = {n_axis[0], dim == 2 ? n_axis[1] : 1};
  g.boundary_ = boundary;
  g.h_ = h;
  g.extent_ = {extent_of(n_axis[0], h, boundary), dim == 2 ? extent_of(n_axis[1], h, boundary) : 0.0};
  return g;
}

std::ptrdiff_t neighbour(const Grid& grid, std::size_t node, Offset dir) {
  auto [ix, iy] = grid.axis_index(node);
  const int nx = grid.n(0);
  const int ny = grid.n(1);
  int jx = ix;
  int jy = iy;
  switch (dir) {
    case Offset::Self: return static_cast<std::ptrdiff_t>(node);
    case Offset::West: jx = ix - 1; break;
    case Offset::East: jx = ix + 1; break;
    case Offset::North: jy = iy - 1; break;
    case Offset::South: jy = iy + 1; break;
  }
  if (grid.boundary() == Boundary::Periodic) {
    jx = (jx + nx) % nx;
    jy = (jy + ny) % ny;
  } else if (jx < 0 || jx >= nx || jy < 0 || jy >= ny) {
    return -1;
  }
  return static_cast<std::ptrdiff_t>(grid.index(jx, jy));
}

Stencil stencil(const Grid& grid, std::size_t node) {
  if (node >= grid.size()) throw ConfigError("stencil: node index out of range");
  Stencil s;
  auto push = [&](Offset o) { s.entries[s.count++] = {neighbour(grid, node, o), o}; };
  if (grid.dim() == 2) push(Offset::North);
  push(Offset::West);
  push(Offset::Self);
  push(Offset::East);
  if (grid.dim() == 2) push(Offset::South);
  return s;
}

Field::Field(Grid g, double fill) : grid(std::move(g)), values(grid.size(), fill) {}

Field::Field(Grid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
  if (values.size() != grid.size()) {
    throw ConfigError("field has " + std::to_string(values.size()) + " values for a grid of " +
                      std::to_string(grid.size()) + " nodes");
  }
}

void require_length_scale(const Field& ell) {
  for (double x : ell.values) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError("length-scale must be finite and positive");
  }
}

namespace {

struct Bracket {
  int i0;
  int i1;
  double w;
};

bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

Bracket bracket(const Grid& src, int axis, double x, bool wrap) {
  const int n = src.n(axis);
  double t = (x - src.origin(axis)) / src.h();
  double r = std::round(t);
  if (std::abs(t - r) < 1e-9) t = r;
  if (wrap) {
    t = std::fmod(t, static_cast<double>(n));
    if (t < 0) t += n;
    int i0 = static_cast<int>(std::floor(t));
    if (i0 >= n) i0 = n - 1;
    return {i0, (i0 + 1) % n, t - i0};
  }
  t = std::clamp(t, 0.0, static_cast<double>(n - 1));
  int i0 = static_cast<int>(std::floor(t));
  if (i0 >= n - 1) return {n - 1, n - 1, 0.0};
  return {i0, i0 + 1, t - i0};
}

}  // namespace

Field interpolate_to(const Field& field, const Grid& target) {
  const Grid& src = field.grid;
  if (src == target) return field;
  if (src.dim() != target.dim()) throw ConfigError("interpolate_to: dimension mismatch");
  std::array<bool, 2> wrap{false, false};
  for (int a = 0; a < src.dim(); ++a) {
    if (!close(src.origin(a), target.origin(a))) throw ConfigError("interpolate_to: origins differ");
    bool same_extent = close(src.extent(a), target.extent(a));
    bool same_hull = close((src.n(a) - 1) * src.h(), (target.n(a) - 1) * target.h());
    if (!same_extent && !same_hull) throw ConfigError("interpolate_to: extents differ");
    wrap[static_cast<std::size_t>(a)] = same_extent && src.boundary() == Boundary::Periodic;
  }
  Field out(target);
  for (std::size_t k = 0; k < target.size(); ++k) {
    auto xy = target.coordinate(k);
    Bracket bx = bracket(src, 0, xy[0], wrap[0]);
    if (src.dim() == 1) {
      double a = field.values[static_cast<std::size_t>(bx.i0)];
      double b = field.values[static_cast<std::size_t>(bx.i1)];
      out.values[k] = bx.w == 0.0 ? a : (1.0 - bx.w) * a + bx.w * b;
      continue;
    }
    Bracket by = bracket(src, 1, xy[1], wrap[1]);
    auto at = [&](int ix, int iy) { return field.values[src.index(ix, iy)]; };
    auto lerp = [](double a, double b, double w) { return w == 0.0 ? a : (1.0 - w) * a + w * b; };
    double lo = lerp(at(bx.i0, by.i0), at(bx.i1, by.i0), bx.w);
    double hi = lerp(at(bx.i0, by.i1), at(bx.i1, by.i1), bx.w);
    out.values[k] = lerp(lo, hi, by.w);
  }
  return out;
}

void write_field_csv(std::ostream& os, const Field& field) {
  const bool two_d = field.grid.dim() == 2;
  os << (two_d ? "index,x,y,value\n" : "index,x,value\n");
  for (std::size_t k = 0; k < field.size(); ++k) {
    auto xy = field.grid.coordinate(k);
    os << k << ',' << format_number(xy[0]) << ',';
    if (two_d) os << format_number(xy[1]) << ',';
    os << format_number(field.values[k]) << '\n';
  }
}

Field read_field_csv(std::istream& is, const Grid& grid) {
  CsvTable t = read_csv(is);
  const std::size_t col = t.column("value");
  const std::size_t idx = t.column("index");
  if (t.rows.size() != grid.size()) {
    throw ConfigError("field csv has " + std::to_string(t.rows.size()) + " rows, grid has " +
                      std::to_string(grid.size()) + " nodes");
  }
  Field f(grid);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto k = static_cast<std::size_t>(t.number(r, idx));
    if (k >= grid.size()) throw ConfigError("field csv index out of range");
    f.values[k] = t.number(r, col);
  }
  return f;
}

}  // namespace nsm
