#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "nsm/grid.hpp"
#include "nsm/spde.hpp"

namespace nsm {

/// y = A v + e with e ~ N(0, noise_std^2 I).
struct ForwardProblem {
  SparseMatrix A;
  double noise_std = 0.1;
  std::vector<double> y;
  Grid unknown_grid;
  // Measurement locations, (x) in 1-D or (x, y) in 2-D.
  std::vector<std::array<double, 2>> points;

  std::size_t measurements() const { return y.size(); }
};

/// 0/1 selection of the unknown nodes that coincide with the nodes of
/// `measurement_grid`. Throws ConfigError for any off-grid measurement.
SparseMatrix interp_operator(const Grid& unknown_grid, const Grid& measurement_grid);

/// Cumulative quadrature: A(j,i) = h for x_i < t_j, h/2 for x_i = t_j,
/// 0 otherwise, so (A v)_j approximates the integral of v from the origin to
/// t_j. 1-D only.
SparseMatrix heaviside_operator(const Grid& unknown_grid, std::span<const double> points);

std::vector<std::array<double, 2>> node_points(const Grid& grid);

// Interpolation truth: smooth bump on (0,5), +1 on [7,8], -1 on (8,9].
double phantom_interp_1d(double x);
// Differentiation truth: derivative of the bump, same boxcars.
double phantom_diff_1d(double x);
// Data-side antiderivative: bump plus a triangle on [7,9].
double phantom_diff_integral(double x);

struct Phantom2dGeometry {
  double box_lo = 0.15;
  double box_hi = 0.40;
  double box_height = 0.75;
  double bump_x = 0.65;
  double bump_y = 0.65;
  double bump_std = 0.12;
  double bump_height = 1.0;
};

double phantom_2d(double x, double y, const Phantom2dGeometry& geo = {});

Field sample_phantom(const Grid& grid, double (*fn)(double));
Field sample_phantom_2d(const Grid& grid, const Phantom2dGeometry& geo = {});

/// y = A truth + noise_std * xi with xi ~ N(0, I) from a generator seeded
/// with `seed`.
std::vector<double> synth_data(const SparseMatrix& A, std::span<const double> truth, double noise_std,
                               std::uint64_t seed);

}  // namespace nsm
