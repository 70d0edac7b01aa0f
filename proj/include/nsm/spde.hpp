#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "nsm/grid.hpp"
#include "nsm/random.hpp"

namespace nsm {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Vector = Eigen::VectorXd;

/// Nonzeros of one row of a precision factor, sorted by column.
struct FactorRow {
  std::array<int, 9> cols{};
  std::array<double, 9> vals{};
  int size = 0;

  double dot(std::span<const double> v) const {
    double s = 0.0;
    for (int k = 0; k < size; ++k) s += vals[static_cast<std::size_t>(k)] * v[static_cast<std::size_t>(cols[static_cast<std::size_t>(k)])];
    return s;
  }
  double at(int col) const {
    for (int k = 0; k < size; ++k) {
      if (cols[static_cast<std::size_t>(k)] == col) return vals[static_cast<std::size_t>(k)];
    }
    return 0.0;
  }
  bool operator==(const FactorRow&) const = default;
};

struct AnisoSpec;
struct RowUpdate;

/// Sparse L(ell) with prior precision L^T L for the SPDE
/// (1 - ell(x)^2 Laplacian) v = sigma ell(x)^{d/2} w.
///
/// Row n is the finite-difference stencil at node n divided by the noise
/// standard deviation s_n = sigma ell_n^{d/2} h^{-d/2}, so L v is standard
/// normal under the prior. Row n depends on ell_n only; L is not symmetric
/// unless ell is constant.
class PrecisionFactor {
 public:
  const Grid& grid() const { return grid_; }
  double sigma() const { return sigma_; }
  const Field& ell() const { return ell_; }
  const SparseMatrix& matrix() const { return matrix_; }
  bool anisotropic() const { return anisotropic_; }
  std::size_t size() const { return grid_.size(); }

  FactorRow row(std::size_t node) const;
  double row_dot(std::size_t node, std::span<const double> v) const;

 private:
  friend PrecisionFactor assemble_precision_factor(const Grid&, const Field&, double);
  friend PrecisionFactor assemble_anisotropic_factor(const Grid&, const AnisoSpec&, double);
  friend void commit_row(PrecisionFactor&, const RowUpdate&);

  Grid grid_;
  double sigma_ = 1.0;
  Field ell_;
  SparseMatrix matrix_;
  bool anisotropic_ = false;
};

struct AnisoSpec {
  Field ell1;
  Field ell2;
  Field theta;  // tilt angle in radians, per node
};

/// Proposed change of one row, produced by replace_row and applied by
/// commit_row.
struct RowUpdate {
  std::size_t node = 0;
  double old_ell = 0.0;
  double new_ell = 0.0;
  FactorRow old_row;
  FactorRow new_row;
};

/// i.i.d. N(0, h^{-d}) values: the cell average of white noise.
Field sample_white_noise(const Grid& grid, Rng& rng);

/// Stencil row at `node` for length-scale `ell` (ghost neighbours dropped).
FactorRow isotropic_row(const Grid& grid, std::size_t node, double ell, double sigma);

PrecisionFactor assemble_precision_factor(const Grid& grid, const Field& ell, double sigma);

/// 9-point discretisation of 1 - div(H grad) with
/// H = R(theta) diag(ell1^2, ell2^2) R(theta)^T evaluated at each node.
/// The mixed derivative uses the 4-corner cross difference and the noise
/// scale uses the geometric mean sigma (ell1 ell2)^{1/2} / h. 2-D only.
PrecisionFactor assemble_anisotropic_factor(const Grid& grid, const AnisoSpec& aniso, double sigma);

/// Computes the row that node `node` would have with length-scale
/// `new_ell`. Does not modify `factor`.
RowUpdate replace_row(const PrecisionFactor& factor, std::size_t node, double new_ell);
void commit_row(PrecisionFactor& factor, const RowUpdate& update);

/// An isotropic factor is L = diag(q) M with q_n = l_n^2 / s_n and
/// M = diag(l^-2) - discrete Laplacian, which is symmetric positive definite.
struct SymmetricSplit {
  Eigen::SparseMatrix<double> M;
  Vector q;
};

SymmetricSplit symmetric_split(const PrecisionFactor& factor);

/// Solves L x = b for a fixed factor. 1-D factors (tridiagonal plus the two
/// periodic corners) use banded elimination with a Sherman-Morrison
/// correction for the corners; isotropic 2-D factors a Cholesky factor of M
/// from the symmetric split; anisotropic ones a sparse LU.
class FactorSolver {
 public:
  FactorSolver() = default;
  explicit FactorSolver(const PrecisionFactor& factor) { compute(factor); }
  void compute(const PrecisionFactor& factor);
  Vector solve(const Vector& rhs) const;
  std::size_t size() const { return n_; }

 private:
  void thomas(const double* rhs, double* x) const;

  std::size_t n_ = 0;
  bool banded_ = false;
  // banded path: sub/diag/super diagonals after the corner shift, Thomas
  // factors and the Sherman-Morrison vector
  std::vector<double> sub_, super_, cprime_, denom_, z_;
  double alpha_ = 0.0, beta_ = 0.0, gamma_ = 0.0, sm_norm_ = 0.0;
  bool cyclic_ = false;
  // symmetric path
  bool symmetric_ = false;
  Vector q_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
  // sparse path
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

/// Draws v ~ N(0, (L^T L)^{-1}) by solving L v = w with w ~ N(0, I).
Field sample_realization(const PrecisionFactor& factor, Rng& rng);

Eigen::MatrixXd to_dense(const PrecisionFactor& factor);

/// Coordinate-list dump with header `row,col,value`.
void write_factor_coo(std::ostream& os, const PrecisionFactor& factor);

}  // namespace nsm
