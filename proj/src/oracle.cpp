#include "nsm/oracle.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "nsm/error.hpp"
#include "nsm/kernels.hpp"

namespace nsm::oracle {

double matern_cov(double r, double nu, double ell) {
  if (r < 0 || nu <= 0 || ell <= 0) throw ConfigError("matern_cov: need r >= 0, nu > 0, ell > 0");
  if (r == 0.0) return 1.0;
  const double z = r / ell;
  if (z > 700.0) return 0.0;
  return std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(z, nu) * std::cyl_bessel_k(nu, z);
}

double spde_marginal_variance(double sigma, int dim) {
  const double nu = 2.0 - 0.5 * dim;
  return sigma * sigma * std::tgamma(nu) /
         (std::tgamma(nu + 0.5 * dim) * std::pow(4.0 * std::numbers::pi, 0.5 * dim));
}

double power_spectrum(double xi, double nu, double ell, int dim) {
  if (ell <= 0) throw ConfigError("power_spectrum: ell must be positive");
  const double d2 = 0.5 * dim;
  const double pref = std::pow(2.0, dim) * std::pow(std::numbers::pi, d2) * std::tgamma(nu + d2) /
                      (std::tgamma(nu) * std::pow(ell, 2.0 * nu));
  return pref * std::pow(1.0 / (ell * ell) + xi * xi, -(nu + d2));
}

namespace {

void guard(std::size_t n) {
  if (n > kDenseLimit) throw ConfigError("dense oracle limited to N <= 4096");
}

Eigen::MatrixXd dense_precision(const SparseMatrix& A, double noise_std, const PrecisionFactor& factor) {
  Eigen::MatrixXd Ad(A);
  Eigen::MatrixXd L = to_dense(factor);
  return Ad.transpose() * Ad / (noise_std * noise_std) + L.transpose() * L;
}

}  // namespace

Eigen::MatrixXd dense_covariance(const PrecisionFactor& factor) {
  guard(factor.size());
  Eigen::MatrixXd L = to_dense(factor);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(L);
  Eigen::MatrixXd Linv = lu.inverse();
  Eigen::MatrixXd C = Linv * Linv.transpose();
  return 0.5 * (C + C.transpose());
}

double dense_logdet(const Eigen::MatrixXd& L) {
  guard(static_cast<std::size_t>(L.rows()));
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(L);
  const auto& U = lu.matrixLU();
  double s = 0.0;
  for (Eigen::Index i = 0; i < U.rows(); ++i) s += std::log(std::abs(U(i, i)));
  return s;
}

double dense_logdet(const PrecisionFactor& factor) { return dense_logdet(to_dense(factor)); }

Eigen::MatrixXd covariance_columns(const PrecisionFactor& factor, std::span<const std::size_t> cols) {
  Eigen::SparseMatrix<double> L = factor.matrix();
  Eigen::SparseMatrix<double> Q = L.transpose() * L;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(Q);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance_columns: L^T L not positive definite");
  const auto n = static_cast<Eigen::Index>(factor.size());
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[static_cast<Eigen::Index>(cols[k])] = 1.0;
    out.col(static_cast<Eigen::Index>(k)) = llt.solve(e);
  }
  return out;
}

DenseGaussian conditional_gaussian(const SparseMatrix& A, double noise_std, std::span<const double> y,
                                   const PrecisionFactor& factor) {
  guard(factor.size());
  Eigen::MatrixXd Q = dense_precision(A, noise_std, factor);
  Eigen::LLT<Eigen::MatrixXd> llt(Q);
  if (llt.info() != Eigen::Success) throw NumericalError("conditional_gaussian: Q is singular");
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  Eigen::VectorXd rhs = Eigen::MatrixXd(A).transpose() * yv / (noise_std * noise_std);
  DenseGaussian g;
  g.mean = llt.solve(rhs);
  g.covariance = llt.solve(Eigen::MatrixXd::Identity(Q.rows(), Q.cols()));
  g.covariance = 0.5 * (g.covariance + g.covariance.transpose()).eval();
  return g;
}

Eigen::VectorXd conditional_mean(const SparseMatrix& A, double noise_std, std::span<const double> y,
                                 const PrecisionFactor& factor) {
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  if (factor.size() > kDenseLimit) {
    Eigen::SparseMatrix<double> Ac = A;
    Eigen::SparseMatrix<double> L = factor.matrix();
    Eigen::SparseMatrix<double> At = Ac.transpose();
    Eigen::SparseMatrix<double> Q = At * Ac / (noise_std * noise_std);
    Q += Eigen::SparseMatrix<double>(L.transpose()) * L;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(Q);
    if (llt.info() != Eigen::Success) throw NumericalError("conditional_mean: Q is singular");
    Eigen::VectorXd rhs = At * yv / (noise_std * noise_std);
    return llt.solve(rhs);
  }
  Eigen::MatrixXd Q = dense_precision(A, noise_std, factor);
  Eigen::LLT<Eigen::MatrixXd> llt(Q);
  if (llt.info() != Eigen::Success) throw NumericalError("conditional_mean: Q is singular");
  Eigen::VectorXd rhs = Eigen::MatrixXd(A).transpose() * yv / (noise_std * noise_std);
  return llt.solve(rhs);
}

Metrics metrics(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size() || truth.empty()) throw ConfigError("metrics: size mismatch");
  Metrics m;
  m.max_abs_error = kernels::max_abs_diff(estimate, truth);
  m.rmse = std::sqrt(kernels::sum_sq_diff(estimate, truth) / static_cast<double>(truth.size()));
  return m;
}

BaselineTable constant_ell_baseline(const ForwardProblem& problem, double prior_sigma,
                                    std::span<const double> ell_grid, std::span<const double> truth) {
  BaselineTable table;
  const Grid& g = problem.unknown_grid;
  for (double ell : ell_grid) {
    PrecisionFactor L = assemble_precision_factor(g, Field(g, ell), prior_sigma);
    Eigen::VectorXd m = conditional_mean(problem.A, problem.noise_std, problem.y, L);
    Metrics met = metrics({m.data(), static_cast<std::size_t>(m.size())}, truth);
    table.rows.push_back({ell, met.max_abs_error, met.rmse});
    table.estimates.push_back(std::move(m));
  }
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    if (table.rows[i].max_abs_error < table.rows[table.argmin_max_abs].max_abs_error) table.argmin_max_abs = i;
    if (table.rows[i].rmse < table.rows[table.argmin_rmse].rmse) table.argmin_rmse = i;
  }
  return table;
}

std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
  if (!(lo > 0 && hi >= lo) || count == 0) throw ConfigError("log_spaced: need 0 < lo <= hi, count > 0");
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

double kolmogorov_pvalue(double statistic, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * statistic;
  if (lambda < 1e-3) return 1.0;
  if (lambda < 1.18) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double s = 0.0;
    for (int j = 1; j <= 20; ++j) {
      const double k = 2.0 * j - 1.0;
      s += std::exp(-k * k * pi2 / (8.0 * lambda * lambda));
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    s += (j % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw ConfigError("ks_test: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return {d, kolmogorov_pvalue(d, samples.size())};
}

}  // namespace nsm::oracle
