#include "nsm/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "nsm/error.hpp"
#include "nsm/kernels.hpp"

namespace nsm {

// ---------------------------------------------------------------------------
// Gibbs

GibbsSolver::GibbsSolver(const SparseMatrix& A, double noise_std) : noise_std_(noise_std) {
  if (!(noise_std > 0.0)) throw ConfigError("noise standard deviation must be positive");
  Eigen::SparseMatrix<double> Ac = A;
  At_ = Ac.transpose() / noise_std;
  AtA_ = At_ * Eigen::SparseMatrix<double>(At_.transpose());
}

void GibbsSolver::factorize(const PrecisionFactor& factor) {
  L_ = factor.matrix();
  if (L_.rows() != AtA_.rows()) throw ConfigError("forward operator and prior have different sizes");
  Eigen::SparseMatrix<double> Q = AtA_ + Eigen::SparseMatrix<double>(L_.transpose()) * L_;
  if (!analysed_) {
    llt_.analyzePattern(Q);
    analysed_ = true;
  }
  llt_.factorize(Q);
  if (llt_.info() != Eigen::Success) {
    throw NumericalError("stacked system is rank deficient (Q not positive definite)");
  }
}

Vector GibbsSolver::solve(std::span<const double> y, std::span<const double> eta_data,
                          std::span<const double> eta_prior) const {
  const auto m = static_cast<Eigen::Index>(y.size());
  if (m != At_.cols()) throw ConfigError("data length does not match the forward operator");
  Vector b(m);
  for (Eigen::Index j = 0; j < m; ++j) b[j] = y[static_cast<std::size_t>(j)] / noise_std_ + eta_data[static_cast<std::size_t>(j)];
  Eigen::Map<const Vector> ep(eta_prior.data(), static_cast<Eigen::Index>(eta_prior.size()));
  Vector rhs = At_ * b + L_.transpose() * ep;
  return llt_.solve(rhs);
}

Vector GibbsSolver::draw(std::span<const double> y, Rng& rng) const {
  std::vector<double> eta_data(y.size());
  std::vector<double> eta_prior(static_cast<std::size_t>(L_.rows()));
  for (double& e : eta_data) e = rng.normal();
  for (double& e : eta_prior) e = rng.normal();
  return solve(y, eta_data, eta_prior);
}

Vector gibbs_v_step(const SparseMatrix& A, double noise_std, std::span<const double> y,
                    const PrecisionFactor& factor, Rng& rng) {
  GibbsSolver solver(A, noise_std);
  solver.factorize(factor);
  return solver.draw(y, rng);
}

// ---------------------------------------------------------------------------
// Determinant ratios

FactorRow row_difference(const FactorRow& new_row, const FactorRow& old_row) {
  FactorRow d = new_row;
  for (int k = 0; k < old_row.size; ++k) {
    const int c = old_row.cols[static_cast<std::size_t>(k)];
    bool found = false;
    for (int j = 0; j < d.size; ++j) {
      if (d.cols[static_cast<std::size_t>(j)] == c) {
        d.vals[static_cast<std::size_t>(j)] -= old_row.vals[static_cast<std::size_t>(k)];
        found = true;
        break;
      }
    }
    if (!found) {
      d.cols[static_cast<std::size_t>(d.size)] = c;
      d.vals[static_cast<std::size_t>(d.size)] = -old_row.vals[static_cast<std::size_t>(k)];
      ++d.size;
    }
  }
  return d;
}

namespace {

Vector unit(std::size_t n, std::size_t i) {
  Vector e = Vector::Zero(static_cast<Eigen::Index>(n));
  e[static_cast<Eigen::Index>(i)] = 1.0;
  return e;
}

double sparse_dot(const FactorRow& r, const Vector& x) {
  double s = 0.0;
  for (int k = 0; k < r.size; ++k) {
    s += r.vals[static_cast<std::size_t>(k)] * x[r.cols[static_cast<std::size_t>(k)]];
  }
  return s;
}

std::vector<std::size_t> window_nodes(const Grid& grid, std::size_t node, int radius) {
  std::vector<std::size_t> out;
  auto [ix, iy] = grid.axis_index(node);
  const bool periodic = grid.boundary() == Boundary::Periodic;
  auto wrap = [&](int i, int n, bool& ok) {
    if (periodic) return ((i % n) + n) % n;
    ok = i >= 0 && i < n;
    return i;
  };
  const int ry = grid.dim() == 2 ? radius : 0;
  for (int dy = -ry; dy <= ry; ++dy) {
    const int rx = radius - std::abs(dy);
    for (int dx = -rx; dx <= rx; ++dx) {
      bool ok = true;
      int jx = wrap(ix + dx, grid.n(0), ok);
      int jy = grid.dim() == 2 ? wrap(iy + dy, grid.n(1), ok) : 0;
      if (ok) out.push_back(grid.index(jx, jy));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

double det_ratio_exact(const PrecisionFactor& factor, std::size_t node, const FactorRow& old_row,
                       const FactorRow& new_row) {
  FactorSolver solver(factor);
  Vector x = solver.solve(unit(factor.size(), node));
  return 1.0 + sparse_dot(row_difference(new_row, old_row), x);
}

double det_ratio_windowed(const PrecisionFactor& factor, std::size_t node, const FactorRow& old_row,
                          const FactorRow& new_row, int window_radius) {
  if (window_radius < 1) throw ConfigError("window radius must be at least 1");
  const auto w = window_nodes(factor.grid(), node, window_radius);
  std::map<std::size_t, Eigen::Index> local;
  for (std::size_t k = 0; k < w.size(); ++k) local[w[k]] = static_cast<Eigen::Index>(k);
  const auto m = static_cast<Eigen::Index>(w.size());
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t k = 0; k < w.size(); ++k) {
    for (SparseMatrix::InnerIterator it(factor.matrix(), static_cast<Eigen::Index>(w[k])); it; ++it) {
      auto f = local.find(static_cast<std::size_t>(it.col()));
      if (f != local.end()) block(static_cast<Eigen::Index>(k), f->second) = it.value();
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(block);
  if (!lu.isInvertible()) throw NumericalError("singular window block in det_ratio_windowed");
  Vector e = Vector::Zero(m);
  e[local.at(node)] = 1.0;
  Vector x = lu.solve(e);
  const FactorRow d = row_difference(new_row, old_row);
  double s = 0.0;
  for (int k = 0; k < d.size; ++k) {
    auto f = local.find(static_cast<std::size_t>(d.cols[static_cast<std::size_t>(k)]));
    if (f != local.end()) s += d.vals[static_cast<std::size_t>(k)] * x[f->second];
  }
  return 1.0 + s;
}

void RowUpdateSolver::reset(const PrecisionFactor& factor) {
  base_.compute(factor);
  n_ = factor.size();
  nodes_.clear();
  deltas_.clear();
  Z_.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(std::max<std::size_t>(refresh_limit_, 1)));
  capacitance_.resize(0, 0);
}

Vector RowUpdateSolver::inverse_column(std::size_t node) const {
  Vector x = base_.solve(unit(n_, node));
  const auto k = static_cast<Eigen::Index>(nodes_.size());
  if (k == 0) return x;
  Vector w(k);
  for (Eigen::Index i = 0; i < k; ++i) w[i] = sparse_dot(deltas_[static_cast<std::size_t>(i)], x);
  Vector t = cap_lu_.solve(w);
  x.noalias() -= Z_.leftCols(k) * t;
  return x;
}

double RowUpdateSolver::det_ratio(std::size_t node, const FactorRow& old_row, const FactorRow& new_row) const {
  const FactorRow d = row_difference(new_row, old_row);
  Vector x = base_.solve(unit(n_, node));
  const auto k = static_cast<Eigen::Index>(nodes_.size());
  double s = sparse_dot(d, x);
  if (k > 0) {
    Vector w(k);
    for (Eigen::Index i = 0; i < k; ++i) w[i] = sparse_dot(deltas_[static_cast<std::size_t>(i)], x);
    Vector t = cap_lu_.solve(w);
    for (int j = 0; j < d.size; ++j) {
      const Eigen::Index c = d.cols[static_cast<std::size_t>(j)];
      s -= d.vals[static_cast<std::size_t>(j)] * Z_.row(c).head(k).dot(t);
    }
  }
  return 1.0 + s;
}

void RowUpdateSolver::commit(const PrecisionFactor& factor, std::size_t node, const FactorRow& old_row,
                             const FactorRow& new_row) {
  if (nodes_.size() + 1 >= refresh_limit_) {
    reset(factor);
    return;
  }
  const auto k = static_cast<Eigen::Index>(nodes_.size());
  Z_.col(k) = base_.solve(unit(n_, node));
  nodes_.push_back(node);
  deltas_.push_back(row_difference(new_row, old_row));
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(k + 1, k + 1);
  if (k > 0) c.topLeftCorner(k, k) = capacitance_;
  for (Eigen::Index i = 0; i <= k; ++i) {
    const Vector zi = Z_.col(i);
    // row k: delta_k . z_i ; column k: delta_i . z_k
    c(k, i) = (i == k ? 1.0 : 0.0) + sparse_dot(deltas_[static_cast<std::size_t>(k)], zi);
    if (i < k) c(i, k) = sparse_dot(deltas_[static_cast<std::size_t>(i)], Z_.col(k));
  }
  capacitance_ = std::move(c);
  cap_lu_.compute(capacitance_);
}

std::vector<double> inverse_diagonal(const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>& llt) {
  const Eigen::SparseMatrix<double> L = llt.matrixL();
  const auto n = static_cast<std::size_t>(L.cols());
  const int* outer = L.outerIndexPtr();
  const int* inner = L.innerIndexPtr();
  const double* val = L.valuePtr();
  // selected inverse on the pattern of L, column by column from the right
  std::vector<double> sig(static_cast<std::size_t>(L.nonZeros()), 0.0);
  std::vector<int> dpos(n);
  for (std::size_t j = 0; j < n; ++j) {
    int p = outer[j];
    while (inner[p] != static_cast<int>(j)) ++p;
    dpos[j] = p;
  }
  std::vector<int> slot(n, -1);
  std::vector<double> acc;
  for (std::size_t jj = n; jj-- > 0;) {
    const int begin = dpos[jj] + 1;
    const int end = outer[jj + 1];
    const int m = end - begin;
    for (int a = 0; a < m; ++a) slot[static_cast<std::size_t>(inner[begin + a])] = a;
    acc.assign(static_cast<std::size_t>(m), 0.0);
    for (int a = 0; a < m; ++a) {
      const auto k = static_cast<std::size_t>(inner[begin + a]);
      const double lkj = val[begin + a];
      acc[static_cast<std::size_t>(a)] += sig[static_cast<std::size_t>(dpos[k])] * lkj;
      for (int p = dpos[k] + 1; p < outer[k + 1]; ++p) {
        const int b = slot[static_cast<std::size_t>(inner[p])];
        if (b < 0) continue;
        const double sik = sig[static_cast<std::size_t>(p)];
        acc[static_cast<std::size_t>(b)] += sik * lkj;
        acc[static_cast<std::size_t>(a)] += sik * val[begin + b];
      }
    }
    const double ljj = val[dpos[jj]];
    double diag = 1.0 / (ljj * ljj);
    for (int a = 0; a < m; ++a) {
      const double sij = -acc[static_cast<std::size_t>(a)] / ljj;
      sig[static_cast<std::size_t>(begin + a)] = sij;
      diag -= val[begin + a] * sij / ljj;
      slot[static_cast<std::size_t>(inner[begin + a])] = -1;
    }
    sig[static_cast<std::size_t>(dpos[jj])] = diag;
  }
  std::vector<double> out(n);
  const auto& perm = llt.permutationP().indices();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pi = perm.size() == 0 ? i : static_cast<std::size_t>(perm[static_cast<Eigen::Index>(i)]);
    out[i] = sig[static_cast<std::size_t>(dpos[pi])];
  }
  return out;
}

void DiagonalUpdateSolver::reset(const PrecisionFactor& factor) {
  SymmetricSplit split = symmetric_split(factor);
  n_ = factor.size();
  dim_ = factor.grid().dim();
  laplace_diag_ = 2.0 * dim_ / (factor.grid().h() * factor.grid().h());
  ell_.assign(factor.ell().values.begin(), factor.ell().values.end());
  M_ = std::move(split.M);
  diag_pos_.resize(n_);
  for (Eigen::Index j = 0; j < M_.outerSize(); ++j) {
    for (Eigen::Index p = M_.outerIndexPtr()[j]; p < M_.outerIndexPtr()[j + 1]; ++p) {
      if (M_.innerIndexPtr()[p] == j) diag_pos_[static_cast<std::size_t>(j)] = p;
    }
  }
  analysed_ = false;
  refactor();
}

void DiagonalUpdateSolver::refactor() {
  for (std::size_t i = 0; i < n_; ++i) M_.valuePtr()[diag_pos_[i]] = 1.0 / (ell_[i] * ell_[i]) + laplace_diag_;
  if (!analysed_) {
    llt_.analyzePattern(M_);
    analysed_ = true;
  }
  llt_.factorize(M_);
  if (llt_.info() != Eigen::Success) throw NumericalError("Cholesky factorisation of M failed");
  base_diag_ = nsm::inverse_diagonal(llt_);
  nodes_.clear();
  deltas_.clear();
  z_.assign(n_ * refresh_limit_, 0.0);
  cap_inv_.resize(static_cast<Eigen::Index>(refresh_limit_), static_cast<Eigen::Index>(refresh_limit_));
}

double DiagonalUpdateSolver::inverse_diagonal(std::size_t node) const {
  const auto k = static_cast<Eigen::Index>(nodes_.size());
  double s = base_diag_[node];
  if (k == 0) return s;
  Eigen::Map<const Vector> v(z_.data() + node * refresh_limit_, k);
  Eigen::Map<const Vector> d(deltas_.data(), k);
  const Vector t = cap_inv_.topLeftCorner(k, k) * v.cwiseProduct(d);
  return s - v.dot(t);
}

double DiagonalUpdateSolver::det_ratio(std::size_t node, double old_ell, double new_ell) const {
  const double delta = 1.0 / (new_ell * new_ell) - 1.0 / (old_ell * old_ell);
  const double scale = std::pow(new_ell / old_ell, 2.0 - 0.5 * dim_);
  return scale * (1.0 + delta * inverse_diagonal(node));
}

void DiagonalUpdateSolver::commit(std::size_t node, double old_ell, double new_ell) {
  ell_[node] = new_ell;
  if (nodes_.size() + 1 >= refresh_limit_) {
    refactor();
    return;
  }
  const auto k = static_cast<Eigen::Index>(nodes_.size());
  const double delta = 1.0 / (new_ell * new_ell) - 1.0 / (old_ell * old_ell);
  Vector e = Vector::Zero(static_cast<Eigen::Index>(n_));
  e[static_cast<Eigen::Index>(node)] = 1.0;
  const Vector z = llt_.solve(e);
  for (std::size_t i = 0; i < n_; ++i) z_[i * refresh_limit_ + static_cast<std::size_t>(k)] = z[static_cast<Eigen::Index>(i)];
  // border (I + D G) with row/column k and update its inverse through the Schur complement
  Vector b(k), c(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double g = z[static_cast<Eigen::Index>(nodes_[static_cast<std::size_t>(j)])];
    b[j] = deltas_[static_cast<std::size_t>(j)] * g;
    c[j] = delta * g;
  }
  const double d = 1.0 + delta * z[static_cast<Eigen::Index>(node)];
  auto ci = cap_inv_.topLeftCorner(k, k);
  const Vector cb = ci * b;
  const Vector cc = ci.transpose() * c;
  const double schur = d - c.dot(cb);
  if (!(schur > 0.0) || !std::isfinite(schur)) throw NumericalError("diagonal update lost positive definiteness");
  ci.noalias() += cb * cc.transpose() / schur;
  cap_inv_.block(0, k, k, 1) = -cb / schur;
  cap_inv_.block(k, 0, 1, k) = -cc.transpose() / schur;
  cap_inv_(k, k) = 1.0 / schur;
  nodes_.push_back(node);
  deltas_.push_back(delta);
}

// ---------------------------------------------------------------------------
// Metropolis-within-Gibbs

ChainState initial_state(const ForwardProblem& problem, const HyperModel& hyper, double prior_sigma,
                         double initial_scale) {
  if (!(hyper.grid() == problem.unknown_grid)) throw ConfigError("hypermodel grid differs from the unknown grid");
  if (!(initial_scale > 0.0)) throw ConfigError("initial proposal scale must be positive");
  const Grid& g = problem.unknown_grid;
  ChainState s;
  s.u = Field(g, 0.0);
  s.ell = apply_link(hyper.link(), s.u);
  s.L = assemble_precision_factor(g, s.ell, prior_sigma);
  s.v = Field(g, 0.0);
  s.scales.assign(g.size(), initial_scale);
  s.window_accepted.assign(g.size(), 0);
  s.window_proposed.assign(g.size(), 0);
  s.accepted.assign(g.size(), 0);
  s.proposed.assign(g.size(), 0);
  return s;
}

double mwg_log_ratio(const ChainState& state, const HyperModel& hyper, std::size_t node, double candidate,
                     const RowUpdate& update, double det_ratio) {
  const double hyper_delta = log_density_delta(hyper, state.u, node, candidate);
  const double r_old = update.old_row.dot(state.v.values);
  const double r_new = update.new_row.dot(state.v.values);
  return hyper_delta + std::log(det_ratio) - 0.5 * (r_new - r_old) * (r_new + r_old);
}

SweepStats mwg_sweep(ChainState& state, const HyperModel& hyper, Rng& rng, const MwgOptions& options) {
  const std::size_t n = state.u.size();
  const bool exact = options.det_ratio == DetRatioMode::Exact;
  const bool diagonal = exact && state.L.grid().dim() == 2 && !state.L.anisotropic();
  RowUpdateSolver solver(options.refresh_limit);
  DiagonalUpdateSolver diag_solver(options.refresh_limit);
  if (diagonal) {
    diag_solver.reset(state.L);
  } else if (exact) {
    solver.reset(state.L);
  }

  SweepStats stats;
  auto visit = [&](std::size_t node) {
    const double xi = rng.normal();
    const double log_u = std::log(rng.uniform());
    const double candidate = state.u[node] + state.scales[node] * xi;
    const double ell_c = link_value(hyper.link(), candidate);
    ++stats.proposed;
    ++state.window_proposed[node];
    ++state.proposed[node];
    if (!(ell_c > 0.0) || !std::isfinite(ell_c)) {
      ++state.nonfinite_rejections;
      return;
    }
    const RowUpdate up = replace_row(state.L, node, ell_c);
    const bool same_row = up.new_row == up.old_row;
    double ratio = 1.0;
    if (!same_row) {
      if (diagonal) {
        ratio = diag_solver.det_ratio(node, state.ell[node], ell_c);
      } else if (exact) {
        ratio = solver.det_ratio(node, up.old_row, up.new_row);
      } else {
        ratio = det_ratio_windowed(state.L, node, up.old_row, up.new_row, options.window_radius);
      }
    }
    double log_r = std::numeric_limits<double>::quiet_NaN();
    if (ratio > 0.0 && std::isfinite(ratio)) log_r = mwg_log_ratio(state, hyper, node, candidate, up, ratio);
    if (!std::isfinite(log_r)) {
      ++state.nonfinite_rejections;
      return;
    }
    if (log_u < log_r) {
      commit_row(state.L, up);
      if (diagonal && !same_row) {
        diag_solver.commit(node, state.ell[node], ell_c);
      } else if (exact && !same_row) {
        solver.commit(state.L, node, up.old_row, up.new_row);
      }
      state.u[node] = candidate;
      state.ell[node] = ell_c;
      ++stats.accepted;
      ++state.window_accepted[node];
      ++state.accepted[node];
    }
  };
  if (options.nodes.empty()) {
    for (std::size_t node = 0; node < n; ++node) visit(node);
  } else {
    for (std::size_t node : options.nodes) {
      if (node >= n) throw ConfigError("mwg_sweep: node index out of range");
      visit(node);
    }
  }
  return stats;
}

void adapt_scales(ChainState& state, const AdaptOptions& options) {
  for (std::size_t i = 0; i < state.scales.size(); ++i) {
    if (state.window_proposed[i] > 0) {
      const double rate = static_cast<double>(state.window_accepted[i]) / state.window_proposed[i];
      if (rate > options.upper) {
        state.scales[i] *= options.factor;
      } else if (rate < options.lower) {
        state.scales[i] /= options.factor;
      }
    }
    state.window_accepted[i] = 0;
    state.window_proposed[i] = 0;
  }
}

// ---------------------------------------------------------------------------
// Chain driver

std::vector<double> ChainOutput::sample_column_v(std::size_t node) const {
  std::vector<double> out(sample_count);
  const std::size_t n = grid.size();
  for (std::size_t s = 0; s < sample_count && !samples_v.empty(); ++s) out[s] = samples_v[s * n + node];
  return out;
}

std::vector<double> ChainOutput::sample_column_ell(std::size_t node) const {
  std::vector<double> out(sample_count);
  const std::size_t n = grid.size();
  for (std::size_t s = 0; s < sample_count && !samples_ell.empty(); ++s) out[s] = samples_ell[s * n + node];
  return out;
}

namespace {

struct Welford {
  std::size_t count = 0;
  std::vector<double> mean, m2, delta;

  explicit Welford(std::size_t n) : mean(n, 0.0), m2(n, 0.0), delta(n, 0.0) {}

  void push(std::span<const double> x) {
    ++count;
    for (std::size_t i = 0; i < x.size(); ++i) delta[i] = x[i] - mean[i];
    kernels::axpy(1.0 / static_cast<double>(count), delta, mean);
    for (std::size_t i = 0; i < x.size(); ++i) m2[i] += delta[i] * (x[i] - mean[i]);
  }

  std::vector<double> stddev() const {
    std::vector<double> s(mean.size(), 0.0);
    if (count < 2) return s;
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sqrt(m2[i] / static_cast<double>(count - 1));
    return s;
  }
};

}  // namespace

ChainOutput run_chain(const ForwardProblem& problem, const HyperModel& hyper, double prior_sigma,
                      const ChainConfig& config) {
  if (config.iterations == 0 || config.iterations <= config.burn_in) {
    throw ConfigError("chain needs iterations > burn_in");
  }
  if (config.thin == 0) throw ConfigError("thin must be at least 1");
  for (std::size_t node : config.trace_nodes) {
    if (node >= problem.unknown_grid.size()) {
      throw ConfigError("trace node " + std::to_string(node) + " is outside the grid");
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = problem.unknown_grid.size();
  const std::size_t freeze = config.freeze_at.value_or(config.burn_in / 2);

  Rng rng(config.seed);
  ChainState state = initial_state(problem, hyper, prior_sigma, config.initial_scale);
  GibbsSolver gibbs(problem.A, problem.noise_std);

  auto gibbs_update = [&]() {
    gibbs.factorize(state.L);
    Vector v = gibbs.draw(problem.y, rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = v[static_cast<Eigen::Index>(i)];
      if (!std::isfinite(x)) {
        throw NumericalError("non-finite v at node " + std::to_string(i) + ", iteration " +
                             std::to_string(state.iteration));
      }
      state.v[i] = x;
    }
  };
  gibbs_update();

  MwgOptions mwg;
  mwg.det_ratio = config.det_ratio;
  mwg.window_radius = config.window_radius;
  mwg.refresh_limit = config.refresh_limit;

  ChainOutput out;
  out.grid = problem.unknown_grid;
  for (std::size_t node : config.trace_nodes) {
    NodeTrace t;
    t.node = node;
    t.v.reserve(config.iterations);
    t.ell.reserve(config.iterations);
    out.traces.push_back(std::move(t));
  }
  const std::size_t expected = (config.iterations - config.burn_in) / config.thin;
  if (config.store_samples) {
    out.samples_v.reserve(expected * n);
    out.samples_ell.reserve(expected * n);
  }
  Welford acc_v(n), acc_ell(n);

  for (std::size_t k = 1; k <= config.iterations; ++k) {
    state.iteration = k;
    gibbs_update();
    mwg_sweep(state, hyper, rng, mwg);

    if (k <= freeze && config.adapt_interval > 0 && k % config.adapt_interval == 0) {
      adapt_scales(state, config.adapt);
    }
    if (k == freeze) {
      std::fill(state.accepted.begin(), state.accepted.end(), 0);
      std::fill(state.proposed.begin(), state.proposed.end(), 0);
    }
    for (auto& t : out.traces) {
      t.v.push_back(state.v[t.node]);
      t.ell.push_back(state.ell[t.node]);
    }
    if (k > config.burn_in && (k - config.burn_in) % config.thin == 0) {
      acc_v.push(state.v.values);
      acc_ell.push(state.ell.values);
      if (config.store_samples) {
        out.samples_v.insert(out.samples_v.end(), state.v.values.begin(), state.v.values.end());
        out.samples_ell.insert(out.samples_ell.end(), state.ell.values.begin(), state.ell.values.end());
      }
    }
  }

  out.sample_count = acc_v.count;
  out.cm_v = acc_v.mean;
  out.cm_ell = acc_ell.mean;
  out.std_v = acc_v.stddev();
  out.std_ell = acc_ell.stddev();
  out.acceptance.resize(n);
  double total_acc = 0.0;
  double total_prop = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.acceptance[i] = state.proposed[i] ? static_cast<double>(state.accepted[i]) / state.proposed[i] : 0.0;
    total_acc += static_cast<double>(state.accepted[i]);
    total_prop += static_cast<double>(state.proposed[i]);
  }
  out.mean_acceptance = total_prop > 0 ? total_acc / total_prop : 0.0;
  out.final_scales = state.scales;
  out.nonfinite_rejections = state.nonfinite_rejections;
  out.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// KDE

double silverman_bandwidth(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw ConfigError("kde needs at least two samples");
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  const double spread = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

KdeCurve kde(std::span<const double> samples, double bandwidth, std::size_t points) {
  if (samples.size() < 2) throw ConfigError("kde needs at least two samples");
  if (points < 2) throw ConfigError("kde needs at least two evaluation points");
  KdeCurve curve;
  auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  if (*lo_it == *hi_it) {
    curve.point_mass = true;
    curve.point_mass_at = *lo_it;
    curve.x = {*lo_it};
    curve.density = {1.0};
    return curve;
  }
  const double b = bandwidth > 0 ? bandwidth : silverman_bandwidth(samples);
  curve.bandwidth = b;
  const double lo = *lo_it - 3.0 * b;
  const double hi = *hi_it + 3.0 * b;
  const double norm = 1.0 / (static_cast<double>(samples.size()) * b * std::sqrt(2.0 * std::numbers::pi));
  curve.x.resize(points);
  curve.density.resize(points);
  for (std::size_t j = 0; j < points; ++j) {
    const double x = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(points - 1);
    curve.x[j] = x;
    curve.density[j] = norm * kernels::gaussian_kernel_sum(x, samples, 1.0 / b);
  }
  return curve;
}

std::vector<std::size_t> find_modes(const KdeCurve& curve, double min_prominence) {
  std::vector<std::size_t> modes;
  const auto& d = curve.density;
  if (curve.point_mass) return {0};
  if (d.size() < 3) return modes;
  const double peak = *std::max_element(d.begin(), d.end());
  for (std::size_t i = 1; i + 1 < d.size(); ++i) {
    if (!(d[i] > d[i - 1] && d[i] >= d[i + 1])) continue;
    double left_min = d[i];
    for (std::size_t j = i; j-- > 0;) {
      if (d[j] > d[i]) break;
      left_min = std::min(left_min, d[j]);
    }
    double right_min = d[i];
    for (std::size_t j = i + 1; j < d.size(); ++j) {
      if (d[j] > d[i]) break;
      right_min = std::min(right_min, d[j]);
    }
    const double prominence = d[i] - std::max(left_min, right_min);
    if (prominence >= min_prominence * peak) modes.push_back(i);
  }
  return modes;
}

}  // namespace nsm
