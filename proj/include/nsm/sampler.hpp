#pragma once

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nsm/forward.hpp"
#include "nsm/hyper.hpp"
#include "nsm/spde.hpp"

namespace nsm {

// ---------------------------------------------------------------------------
// Gibbs step for v given ell.

/// Exact draw from v | ell, y ~ N(m, Q^{-1}), Q = A^T A / noise^2 + L^T L,
/// computed as the least-squares solution of the perturbed stacked system
/// [A / noise; L] v = [y / noise; 0] + eta through its normal equations.
/// The sparsity pattern of Q is analysed once and reused.
class GibbsSolver {
 public:
  GibbsSolver(const SparseMatrix& A, double noise_std);

  void factorize(const PrecisionFactor& factor);
  // eta_data has length M, eta_prior length N.
  Vector solve(std::span<const double> y, std::span<const double> eta_data, std::span<const double> eta_prior) const;
  Vector draw(std::span<const double> y, Rng& rng) const;

 private:
  Eigen::SparseMatrix<double> At_;  // A^T / noise
  Eigen::SparseMatrix<double> AtA_;
  Eigen::SparseMatrix<double> L_;
  double noise_std_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
  bool analysed_ = false;
};

Vector gibbs_v_step(const SparseMatrix& A, double noise_std, std::span<const double> y,
                    const PrecisionFactor& factor, Rng& rng);

// ---------------------------------------------------------------------------
// Determinant ratios for a one-row change of L.

/// det(L_new) / det(L_old) = 1 + (new_row - old_row) . x with L_old x = e_node
/// (matrix determinant lemma). Factorises L_old from scratch.
double det_ratio_exact(const PrecisionFactor& factor, std::size_t node, const FactorRow& old_row,
                       const FactorRow& new_row);

/// Local approximation: replaces L_old by its restriction to the nodes within
/// `window_radius` of `node` (index distance in 1-D, Manhattan distance in
/// 2-D). Radius 1 gives the 3x3 block in 1-D and 5x5 block in 2-D.
double det_ratio_windowed(const PrecisionFactor& factor, std::size_t node, const FactorRow& old_row,
                          const FactorRow& new_row, int window_radius);

/// Solves with the current L while rows are replaced one at a time: a
/// factorisation of a base L0 plus a Woodbury correction for the committed
/// rows. Refactorises once `refresh_limit` rows have been committed.
class RowUpdateSolver {
 public:
  explicit RowUpdateSolver(std::size_t refresh_limit = 64) : refresh_limit_(refresh_limit) {}

  void reset(const PrecisionFactor& factor);
  /// Column `node` of the inverse of the current L.
  Vector inverse_column(std::size_t node) const;
  double det_ratio(std::size_t node, const FactorRow& old_row, const FactorRow& new_row) const;
  /// Records that row `node` changed from old_row to new_row; `factor` must
  /// already contain the new row.
  void commit(const PrecisionFactor& factor, std::size_t node, const FactorRow& old_row, const FactorRow& new_row);

  std::size_t pending() const { return nodes_.size(); }

 private:
  std::size_t refresh_limit_;
  std::size_t n_ = 0;
  FactorSolver base_;
  std::vector<std::size_t> nodes_;   // rows changed since reset
  std::vector<FactorRow> deltas_;    // new_row - old_row, as sparse rows
  Eigen::MatrixXd Z_;                // L0^{-1} e_node for each change
  Eigen::MatrixXd capacitance_;      // I + V^T Z
  Eigen::PartialPivLU<Eigen::MatrixXd> cap_lu_;
};

/// Exact determinant ratios for isotropic factors via the symmetric split
/// L = diag(q) M. Changing l_n scales q_n and moves M_nn by
/// delta = l_new^-2 - l_old^-2, so the ratio is
/// (q_new / q_old) (1 + delta [M^-1]_nn). diag(M^-1) comes from a selected
/// inversion of the Cholesky factor of M; committed changes are folded in by
/// a Woodbury correction until `refresh_limit` have accumulated.
class DiagonalUpdateSolver {
 public:
  explicit DiagonalUpdateSolver(std::size_t refresh_limit = 256) : refresh_limit_(std::max<std::size_t>(refresh_limit, 1)) {}

  void reset(const PrecisionFactor& factor);
  /// [M^-1]_nn for the current length-scales.
  double inverse_diagonal(std::size_t node) const;
  double det_ratio(std::size_t node, double old_ell, double new_ell) const;
  void commit(std::size_t node, double old_ell, double new_ell);

  std::size_t pending() const { return nodes_.size(); }

 private:
  void refactor();

  std::size_t refresh_limit_;
  std::size_t n_ = 0;
  int dim_ = 1;
  double laplace_diag_ = 0.0;
  std::vector<double> ell_;
  Eigen::SparseMatrix<double> M_;
  std::vector<Eigen::Index> diag_pos_;  // position of M_nn in M_'s value array
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
  bool analysed_ = false;
  std::vector<double> base_diag_;  // diag(M0^-1)
  std::vector<std::size_t> nodes_;
  std::vector<double> deltas_;
  std::vector<double> z_;  // row-major n x refresh_limit: column j is M0^-1 e_{nodes_[j]}
  Eigen::MatrixXd cap_inv_;  // (I + D G)^{-1}, G_ij = [M0^-1]_{nodes_i, nodes_j}
};

/// diag(A^-1) for symmetric positive definite A from its Cholesky factor.
std::vector<double> inverse_diagonal(const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>& llt);

FactorRow row_difference(const FactorRow& new_row, const FactorRow& old_row);

// ---------------------------------------------------------------------------
// Chain state and Metropolis-within-Gibbs.

enum class DetRatioMode { Exact, Windowed };

struct ChainState {
  Field v;
  Field u;
  Field ell;  // = link(u)
  PrecisionFactor L;
  std::size_t iteration = 0;
  std::vector<double> scales;
  // counters since the last adaptation
  std::vector<std::uint32_t> window_accepted;
  std::vector<std::uint32_t> window_proposed;
  // counters since adaptation was frozen (whole chain if never adapted)
  std::vector<std::uint64_t> accepted;
  std::vector<std::uint64_t> proposed;
  std::uint64_t nonfinite_rejections = 0;
};

/// u = 0, ell = link(0), L(ell), all proposal scales = initial_scale. v is
/// zero; callers draw it with a Gibbs step.
ChainState initial_state(const ForwardProblem& problem, const HyperModel& hyper, double prior_sigma,
                         double initial_scale);

struct MwgOptions {
  DetRatioMode det_ratio = DetRatioMode::Exact;
  int window_radius = 1;
  std::size_t refresh_limit = 64;
  // Nodes to update, in order. Empty means every node in index order.
  std::span<const std::size_t> nodes;
};

struct SweepStats {
  std::size_t proposed = 0;
  std::size_t accepted = 0;
};

/// Log acceptance ratio for moving u[node] to `candidate` with v fixed:
/// hyperprior delta + log det ratio - 0.5 ((r_new . v)^2 - (r_old . v)^2).
/// The likelihood does not involve ell and the Gaussian random-walk proposal
/// is symmetric, so no other terms enter.
double mwg_log_ratio(const ChainState& state, const HyperModel& hyper, std::size_t node, double candidate,
                     const RowUpdate& update, double det_ratio);

/// One Metropolis-within-Gibbs pass over the latent field with v fixed.
/// Each node proposes u' = u + scale * xi, xi ~ N(0, 1).
SweepStats mwg_sweep(ChainState& state, const HyperModel& hyper, Rng& rng, const MwgOptions& options = {});

struct AdaptOptions {
  double factor = 1.5;
  double lower = 0.25;
  double upper = 0.5;
};

/// Per node: scale *= factor above `upper` acceptance, /= factor below
/// `lower`; window counters reset.
void adapt_scales(ChainState& state, const AdaptOptions& options = {});

// ---------------------------------------------------------------------------
// Full chain.

struct ChainConfig {
  std::size_t iterations = 10000;
  std::size_t burn_in = 5000;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  std::size_t adapt_interval = 100;
  AdaptOptions adapt;
  // Adaptation stops after this iteration; default burn_in / 2.
  std::optional<std::size_t> freeze_at;
  double initial_scale = 0.5;
  DetRatioMode det_ratio = DetRatioMode::Exact;
  int window_radius = 1;
  std::size_t refresh_limit = 64;
  bool store_samples = true;
  std::vector<std::size_t> trace_nodes;
};

struct NodeTrace {
  std::size_t node = 0;
  std::vector<double> v;    // every iteration
  std::vector<double> ell;  // every iteration
};

struct ChainOutput {
  Grid grid;
  std::size_t sample_count = 0;
  std::vector<double> cm_v, cm_ell, std_v, std_ell;
  // Row-major [sample][node]; empty unless store_samples.
  std::vector<double> samples_v, samples_ell;
  std::vector<NodeTrace> traces;
  std::vector<double> acceptance;  // per node, after adaptation froze
  double mean_acceptance = 0.0;
  std::vector<double> final_scales;
  std::uint64_t nonfinite_rejections = 0;
  double runtime_seconds = 0.0;

  std::vector<double> sample_column_v(std::size_t node) const;
  std::vector<double> sample_column_ell(std::size_t node) const;
};

/// Alternates a Gibbs step for v and a Metropolis-within-Gibbs sweep for u.
/// Samples after burn-in, every `thin`-th iteration, are accumulated.
/// Deterministic given the config seed.
ChainOutput run_chain(const ForwardProblem& problem, const HyperModel& hyper, double prior_sigma,
                      const ChainConfig& config);

// ---------------------------------------------------------------------------
// Kernel density estimates.

struct KdeCurve {
  std::vector<double> x;
  std::vector<double> density;
  double bandwidth = 0.0;
  bool point_mass = false;
  double point_mass_at = 0.0;
};

double silverman_bandwidth(std::span<const double> samples);

/// Gaussian KDE on `points` evenly spaced nodes spanning the samples +- 3
/// bandwidths. bandwidth <= 0 selects Silverman's rule. Samples with zero
/// spread return a flagged point mass: one node carrying mass 1.
KdeCurve kde(std::span<const double> samples, double bandwidth = 0.0, std::size_t points = 512);

/// Indices of local maxima whose topographic prominence is at least
/// `min_prominence` times the global maximum.
std::vector<std::size_t> find_modes(const KdeCurve& curve, double min_prominence = 0.1);

}  // namespace nsm
