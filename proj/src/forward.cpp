#include "nsm/forward.hpp"

#include <cmath>
#include <string>

#include "nsm/error.hpp"
#include "nsm/random.hpp"

namespace nsm {

SparseMatrix interp_operator(const Grid& unknown_grid, const Grid& measurement_grid) {
  if (unknown_grid.dim() != measurement_grid.dim()) throw ConfigError("interp_operator: dimension mismatch");
  const double h = unknown_grid.h();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(measurement_grid.size());
  for (std::size_t j = 0; j < measurement_grid.size(); ++j) {
    auto p = measurement_grid.coordinate(j);
    std::array<int, 2> idx{0, 0};
    for (int a = 0; a < unknown_grid.dim(); ++a) {
      double t = (p[static_cast<std::size_t>(a)] - unknown_grid.origin(a)) / h;
      double r = std::round(t);
      if (std::abs(t - r) > 1e-9 || r < 0 || r >= unknown_grid.n(a)) {
        throw ConfigError("measurement point " + std::to_string(j) + " is not a node of the unknown grid");
      }
      idx[static_cast<std::size_t>(a)] = static_cast<int>(r);
    }
    trip.emplace_back(static_cast<int>(j), static_cast<int>(unknown_grid.index(idx[0], idx[1])), 1.0);
  }
  SparseMatrix A(static_cast<Eigen::Index>(measurement_grid.size()), static_cast<Eigen::Index>(unknown_grid.size()));
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  return A;
}

SparseMatrix heaviside_operator(const Grid& unknown_grid, std::span<const double> points) {
  if (unknown_grid.dim() != 1) throw ConfigError("heaviside_operator is 1-D only");
  const double h = unknown_grid.h();
  const double tol = 1e-9 * h;
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t j = 0; j < points.size(); ++j) {
    for (std::size_t i = 0; i < unknown_grid.size(); ++i) {
      double x = unknown_grid.coordinate(i)[0];
      if (x < points[j] - tol) {
        trip.emplace_back(static_cast<int>(j), static_cast<int>(i), h);
      } else if (std::abs(x - points[j]) <= tol) {
        trip.emplace_back(static_cast<int>(j), static_cast<int>(i), 0.5 * h);
      }
    }
  }
  SparseMatrix A(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(unknown_grid.size()));
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  return A;
}

std::vector<std::array<double, 2>> node_points(const Grid& grid) {
  std::vector<std::array<double, 2>> pts(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) pts[i] = grid.coordinate(i);
  return pts;
}

namespace {

double bump(double x) { return std::exp(4.0 - 25.0 / (x * (5.0 - x))); }

}  // namespace

double phantom_interp_1d(double x) {
  if (x > 0.0 && x < 5.0) return bump(x);
  if (x >= 7.0 && x <= 8.0) return 1.0;
  if (x > 8.0 && x <= 9.0) return -1.0;
  return 0.0;
}

double phantom_diff_1d(double x) {
  if (x > 0.0 && x < 5.0) {
    return (25.0 / (x * x * (5.0 - x)) - 25.0 / (x * (5.0 - x) * (5.0 - x))) * bump(x);
  }
  if (x >= 7.0 && x <= 8.0) return 1.0;
  if (x > 8.0 && x <= 9.0) return -1.0;
  return 0.0;
}

double phantom_diff_integral(double x) {
  if (x > 0.0 && x < 5.0) return bump(x);
  if (x >= 7.0 && x <= 8.0) return x - 7.0;
  if (x > 8.0 && x <= 9.0) return -x + 9.0;
  return 0.0;
}

double phantom_2d(double x, double y, const Phantom2dGeometry& geo) {
  double v = 0.0;
  if (x >= geo.box_lo && x <= geo.box_hi && y >= geo.box_lo && y <= geo.box_hi) v += geo.box_height;
  const double dx = x - geo.bump_x;
  const double dy = y - geo.bump_y;
  v += geo.bump_height * std::exp(-0.5 * (dx * dx + dy * dy) / (geo.bump_std * geo.bump_std));
  return v;
}

Field sample_phantom(const Grid& grid, double (*fn)(double)) {
  Field f(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) f[i] = fn(grid.coordinate(i)[0]);
  return f;
}

Field sample_phantom_2d(const Grid& grid, const Phantom2dGeometry& geo) {
  Field f(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto p = grid.coordinate(i);
    f[i] = phantom_2d(p[0], p[1], geo);
  }
  return f;
}

std::vector<double> synth_data(const SparseMatrix& A, std::span<const double> truth, double noise_std,
                               std::uint64_t seed) {
  if (static_cast<std::size_t>(A.cols()) != truth.size()) throw ConfigError("synth_data: truth size mismatch");
  if (noise_std < 0) throw ConfigError("noise standard deviation must be nonnegative");
  Eigen::Map<const Vector> x(truth.data(), static_cast<Eigen::Index>(truth.size()));
  Vector y = A * x;
  Rng rng(seed);
  std::vector<double> out(static_cast<std::size_t>(y.size()));
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    double xi = rng.normal();
    out[static_cast<std::size_t>(j)] = noise_std == 0.0 ? y[j] : y[j] + noise_std * xi;
  }
  return out;
}

}  // namespace nsm
