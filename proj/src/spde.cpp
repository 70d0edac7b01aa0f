#include "nsm/spde.hpp"

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "nsm/csv.hpp"
#include "nsm/error.hpp"

namespace nsm {

namespace {

double noise_scale(int dim, double ell, double sigma, double h) {
  return dim == 1 ? sigma * std::sqrt(ell / h) : sigma * ell / h;
}

void push(FactorRow& row, std::ptrdiff_t col, double value) {
  if (col < 0) return;
  auto c = static_cast<int>(col);
  for (int k = 0; k < row.size; ++k) {
    if (row.cols[static_cast<std::size_t>(k)] == c) {
      row.vals[static_cast<std::size_t>(k)] += value;
      return;
    }
  }
  row.cols[static_cast<std::size_t>(row.size)] = c;
  row.vals[static_cast<std::size_t>(row.size)] = value;
  ++row.size;
}

void sort_row(FactorRow& row) {
  for (int i = 1; i < row.size; ++i) {
    for (int j = i; j > 0 && row.cols[static_cast<std::size_t>(j - 1)] > row.cols[static_cast<std::size_t>(j)]; --j) {
      std::swap(row.cols[static_cast<std::size_t>(j - 1)], row.cols[static_cast<std::size_t>(j)]);
      std::swap(row.vals[static_cast<std::size_t>(j - 1)], row.vals[static_cast<std::size_t>(j)]);
    }
  }
}

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("prior sigma must be positive");
}

SparseMatrix from_rows(std::size_t n, const std::vector<FactorRow>& rows) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n * 9);
  for (std::size_t i = 0; i < n; ++i) {
    const FactorRow& r = rows[i];
    for (int k = 0; k < r.size; ++k) {
      trip.emplace_back(static_cast<int>(i), r.cols[static_cast<std::size_t>(k)], r.vals[static_cast<std::size_t>(k)]);
    }
  }
  SparseMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

}  // namespace

FactorRow PrecisionFactor::row(std::size_t node) const {
  FactorRow r;
  for (SparseMatrix::InnerIterator it(matrix_, static_cast<Eigen::Index>(node)); it; ++it) {
    r.cols[static_cast<std::size_t>(r.size)] = static_cast<int>(it.col());
    r.vals[static_cast<std::size_t>(r.size)] = it.value();
    ++r.size;
  }
  return r;
}

double PrecisionFactor::row_dot(std::size_t node, std::span<const double> v) const {
  double s = 0.0;
  for (SparseMatrix::InnerIterator it(matrix_, static_cast<Eigen::Index>(node)); it; ++it) {
    s += it.value() * v[static_cast<std::size_t>(it.col())];
  }
  return s;
}

Field sample_white_noise(const Grid& grid, Rng& rng) {
  const double sd = std::pow(grid.h(), -0.5 * grid.dim());
  Field w(grid);
  for (double& x : w.values) x = sd * rng.normal();
  return w;
}

FactorRow isotropic_row(const Grid& grid, std::size_t node, double ell, double sigma) {
  if (!(ell > 0.0) || !std::isfinite(ell)) throw ConfigError("length-scale must be finite and positive");
  const double h = grid.h();
  const double l2h2 = (ell * ell) / (h * h);
  const double s = noise_scale(grid.dim(), ell, sigma, h);
  const double centre = grid.dim() == 1 ? 1.0 + 2.0 * l2h2 : 1.0 + 2.0 * (l2h2 + l2h2);
  FactorRow row;
  for (const Neighbour& nb : stencil(grid, node)) {
    push(row, nb.index, (nb.offset == Offset::Self ? centre : -l2h2) / s);
  }
  sort_row(row);
  return row;
}

PrecisionFactor assemble_precision_factor(const Grid& grid, const Field& ell, double sigma) {
  check_sigma(sigma);
  if (!(ell.grid == grid)) throw ConfigError("length-scale field lives on a different grid");
  require_length_scale(ell);
  std::vector<FactorRow> rows(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) rows[i] = isotropic_row(grid, i, ell[i], sigma);
  PrecisionFactor f;
  f.grid_ = grid;
  f.sigma_ = sigma;
  f.ell_ = ell;
  f.matrix_ = from_rows(grid.size(), rows);
  return f;
}

PrecisionFactor assemble_anisotropic_factor(const Grid& grid, const AnisoSpec& aniso, double sigma) {
  if (grid.dim() != 2) throw ConfigError("anisotropic factor requires a 2-D grid");
  check_sigma(sigma);
  if (!(aniso.ell1.grid == grid) || !(aniso.ell2.grid == grid) || !(aniso.theta.grid == grid)) {
    throw ConfigError("anisotropic fields live on a different grid");
  }
  require_length_scale(aniso.ell1);
  require_length_scale(aniso.ell2);
  const double h = grid.h();
  const double h2 = h * h;
  std::vector<FactorRow> rows(grid.size());
  Field geo(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double l1 = aniso.ell1[i] * aniso.ell1[i];
    const double l2 = aniso.ell2[i] * aniso.ell2[i];
    const double c = std::cos(aniso.theta[i]);
    const double sn = std::sin(aniso.theta[i]);
    const double hxx = (l1 * (c * c) + l2 * (sn * sn)) / h2;
    const double hyy = (l1 * (sn * sn) + l2 * (c * c)) / h2;
    const double hxy = ((l1 - l2) * sn * c) / h2;
    geo[i] = std::sqrt(aniso.ell1[i] * aniso.ell2[i]);
    const double s = sigma * geo[i] / h;

    FactorRow& row = rows[i];
    push(row, static_cast<std::ptrdiff_t>(i), (1.0 + 2.0 * (hxx + hyy)) / s);
    push(row, neighbour(grid, i, Offset::West), -hxx / s);
    push(row, neighbour(grid, i, Offset::East), -hxx / s);
    push(row, neighbour(grid, i, Offset::North), -hyy / s);
    push(row, neighbour(grid, i, Offset::South), -hyy / s);
    if (hxy != 0.0) {
      // -2 hxy d2/dxdy with the cross difference over the four corners;
      // y grows with the row index, i.e. towards South.
      auto corner = [&](Offset ox, Offset oy) -> std::ptrdiff_t {
        auto a = neighbour(grid, i, ox);
        return a < 0 ? -1 : neighbour(grid, static_cast<std::size_t>(a), oy);
      };
      const double q = 0.5 * hxy / s;
      push(row, corner(Offset::East, Offset::South), -q);
      push(row, corner(Offset::West, Offset::North), -q);
      push(row, corner(Offset::East, Offset::North), q);
      push(row, corner(Offset::West, Offset::South), q);
    }
    sort_row(row);
  }
  PrecisionFactor f;
  f.grid_ = grid;
  f.sigma_ = sigma;
  f.ell_ = std::move(geo);
  f.matrix_ = from_rows(grid.size(), rows);
  f.anisotropic_ = true;
  return f;
}

RowUpdate replace_row(const PrecisionFactor& factor, std::size_t node, double new_ell) {
  if (factor.anisotropic()) throw ConfigError("row replacement is defined for isotropic factors only");
  if (node >= factor.size()) throw ConfigError("replace_row: node index out of range");
  RowUpdate up;
  up.node = node;
  up.old_ell = factor.ell()[node];
  up.new_ell = new_ell;
  up.old_row = factor.row(node);
  up.new_row = isotropic_row(factor.grid(), node, new_ell, factor.sigma());
  return up;
}

void commit_row(PrecisionFactor& factor, const RowUpdate& update) {
  auto& m = factor.matrix_;
  const auto start = m.outerIndexPtr()[update.node];
  const auto stop = m.outerIndexPtr()[update.node + 1];
  if (stop - start != update.new_row.size) throw ConfigError("commit_row: row structure mismatch");
  for (int k = 0; k < update.new_row.size; ++k) {
    if (m.innerIndexPtr()[start + k] != update.new_row.cols[static_cast<std::size_t>(k)]) {
      throw ConfigError("commit_row: row structure mismatch");
    }
    m.valuePtr()[start + k] = update.new_row.vals[static_cast<std::size_t>(k)];
  }
  factor.ell_[update.node] = update.new_ell;
}

SymmetricSplit symmetric_split(const PrecisionFactor& factor) {
  if (factor.anisotropic()) throw ConfigError("symmetric split needs an isotropic factor");
  const Grid& grid = factor.grid();
  const double h2 = grid.h() * grid.h();
  const double centre = 2.0 * grid.dim() / h2;
  const std::size_t n = factor.size();
  SymmetricSplit out;
  out.q.resize(static_cast<Eigen::Index>(n));
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n * 5);
  for (std::size_t i = 0; i < n; ++i) {
    const double ell = factor.ell()[i];
    const auto r = static_cast<int>(i);
    out.q[r] = ell * ell / noise_scale(grid.dim(), ell, factor.sigma(), grid.h());
    for (const Neighbour& nb : stencil(grid, i)) {
      if (nb.offset == Offset::Self) {
        trip.emplace_back(r, r, 1.0 / (ell * ell) + centre);
      } else if (!nb.ghost()) {
        trip.emplace_back(r, static_cast<int>(nb.index), -1.0 / h2);
      }
    }
  }
  out.M.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  out.M.setFromTriplets(trip.begin(), trip.end());
  return out;
}

void FactorSolver::compute(const PrecisionFactor& factor) {
  n_ = factor.size();
  banded_ = factor.grid().dim() == 1 && !factor.anisotropic();
  symmetric_ = factor.grid().dim() == 2 && !factor.anisotropic();
  if (symmetric_) {
    SymmetricSplit split = symmetric_split(factor);
    q_ = std::move(split.q);
    llt_.compute(split.M);
    if (llt_.info() != Eigen::Success) throw NumericalError("Cholesky factorisation of M failed");
    return;
  }
  if (!banded_) {
    Eigen::SparseMatrix<double> colmajor = factor.matrix();
    lu_.compute(colmajor);
    if (lu_.info() != Eigen::Success) throw NumericalError("sparse LU of the precision factor failed");
    return;
  }
  const std::size_t n = n_;
  std::vector<double> diag(n, 0.0);
  sub_.assign(n, 0.0);
  super_.assign(n, 0.0);
  alpha_ = 0.0;  // L(0, n-1)
  beta_ = 0.0;   // L(n-1, 0)
  const auto& m = factor.matrix();
  for (std::size_t i = 0; i < n; ++i) {
    for (SparseMatrix::InnerIterator it(m, static_cast<Eigen::Index>(i)); it; ++it) {
      const auto j = static_cast<std::size_t>(it.col());
      if (j == i) {
        diag[i] = it.value();
      } else if (j + 1 == i) {
        sub_[i] = it.value();
      } else if (j == i + 1) {
        super_[i] = it.value();
      } else if (i == 0 && j == n - 1) {
        alpha_ = it.value();
      } else if (i == n - 1 && j == 0) {
        beta_ = it.value();
      } else {
        throw ConfigError("factor is not tridiagonal-cyclic");
      }
    }
  }
  cyclic_ = alpha_ != 0.0 || beta_ != 0.0;
  if (cyclic_) {
    gamma_ = -diag[0];
    diag[0] -= gamma_;
    diag[n - 1] -= alpha_ * beta_ / gamma_;
  }
  cprime_.assign(n, 0.0);
  denom_.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    denom_[i] = diag[i] - (i ? sub_[i] * cprime_[i - 1] : 0.0);
    if (denom_[i] == 0.0 || !std::isfinite(denom_[i])) throw NumericalError("banded elimination hit a zero pivot");
    cprime_[i] = super_[i] / denom_[i];
  }
  if (cyclic_) {
    std::vector<double> u(n, 0.0);
    u[0] = gamma_;
    u[n - 1] = beta_;
    z_.assign(n, 0.0);
    thomas(u.data(), z_.data());
    sm_norm_ = 1.0 + z_[0] + alpha_ * z_[n - 1] / gamma_;
    if (sm_norm_ == 0.0) throw NumericalError("singular cyclic factor");
  }
}

void FactorSolver::thomas(const double* rhs, double* x) const {
  const std::size_t n = n_;
  x[0] = rhs[0] / denom_[0];
  for (std::size_t i = 1; i < n; ++i) x[i] = (rhs[i] - sub_[i] * x[i - 1]) / denom_[i];
  for (std::size_t i = n - 1; i-- > 0;) x[i] -= cprime_[i] * x[i + 1];
}

Vector FactorSolver::solve(const Vector& rhs) const {
  if (symmetric_) {
    Vector x = llt_.solve(rhs.cwiseQuotient(q_));
    return x;
  }
  if (!banded_) {
    Vector x = lu_.solve(rhs);
    return x;
  }
  Vector x(static_cast<Eigen::Index>(n_));
  thomas(rhs.data(), x.data());
  if (cyclic_) {
    const double fact = (x[0] + alpha_ * x[static_cast<Eigen::Index>(n_ - 1)] / gamma_) / sm_norm_;
    for (std::size_t i = 0; i < n_; ++i) x[static_cast<Eigen::Index>(i)] -= fact * z_[i];
  }
  return x;
}

Field sample_realization(const PrecisionFactor& factor, Rng& rng) {
  Vector w(static_cast<Eigen::Index>(factor.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.normal();
  FactorSolver solver(factor);
  Vector v = solver.solve(w);
  Field out(factor.grid());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = v[static_cast<Eigen::Index>(i)];
    if (!std::isfinite(out[i])) throw NumericalError("non-finite realisation value");
  }
  return out;
}

Eigen::MatrixXd to_dense(const PrecisionFactor& factor) { return Eigen::MatrixXd(factor.matrix()); }

void write_factor_coo(std::ostream& os, const PrecisionFactor& factor) {
  os << "row,col,value\n";
  const auto& m = factor.matrix();
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      os << it.row() << ',' << it.col() << ',' << format_number(it.value()) << '\n';
    }
  }
}

}  // namespace nsm
