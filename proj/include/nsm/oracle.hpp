#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "nsm/forward.hpp"
#include "nsm/spde.hpp"

// Slow dense references and analytic formulas. Everything here is meant for
// validation and baselines at test scale; dense routines refuse N > 4096.

namespace nsm::oracle {

constexpr std::size_t kDenseLimit = 4096;

/// Normalised Matérn correlation (2^{1-nu}/Gamma(nu)) (r/ell)^nu K_nu(r/ell).
double matern_cov(double r, double nu, double ell);

/// Marginal variance of the continuum solution of
/// (1 - ell^2 Laplacian) v = sigma ell^{d/2} w, i.e.
/// sigma^2 Gamma(nu) / (Gamma(nu + d/2) (4 pi)^{d/2}) with nu = 2 - d/2.
/// Independent of ell.
double spde_marginal_variance(double sigma, int dim);

/// Fourier transform of matern_cov:
/// 2^d pi^{d/2} Gamma(nu + d/2) / (Gamma(nu) ell^{2 nu}) (ell^-2 + xi^2)^{-(nu + d/2)}.
double power_spectrum(double xi, double nu, double ell, int dim);

struct DenseGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

Eigen::MatrixXd dense_covariance(const PrecisionFactor& factor);
double dense_logdet(const PrecisionFactor& factor);
double dense_logdet(const Eigen::MatrixXd& L);

/// Selected columns of (L^T L)^{-1} through a sparse Cholesky of L^T L.
/// Usable beyond the dense limit.
Eigen::MatrixXd covariance_columns(const PrecisionFactor& factor, std::span<const std::size_t> cols);

/// Q = A^T A / noise^2 + L^T L, mean = Q^{-1} A^T y / noise^2, cov = Q^{-1}.
DenseGaussian conditional_gaussian(const SparseMatrix& A, double noise_std, std::span<const double> y,
                                   const PrecisionFactor& factor);
/// Mean only; same formula without forming Q^{-1}. Falls back to a sparse
/// Cholesky of Q above the dense limit.
Eigen::VectorXd conditional_mean(const SparseMatrix& A, double noise_std, std::span<const double> y,
                                 const PrecisionFactor& factor);

struct Metrics {
  double max_abs_error = 0.0;
  double rmse = 0.0;
};

Metrics metrics(std::span<const double> estimate, std::span<const double> truth);

struct BaselineRow {
  double ell = 0.0;
  double max_abs_error = 0.0;
  double rmse = 0.0;
};

struct BaselineTable {
  std::vector<BaselineRow> rows;
  std::size_t argmin_max_abs = 0;
  std::size_t argmin_rmse = 0;
  std::vector<Eigen::VectorXd> estimates;  // one conditional mean per row
};

/// Closed-form conditional mean for each constant length-scale, scored
/// against `truth`.
BaselineTable constant_ell_baseline(const ForwardProblem& problem, double prior_sigma,
                                    std::span<const double> ell_grid, std::span<const double> truth);

std::vector<double> log_spaced(double lo, double hi, std::size_t count);

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
};

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);
double kolmogorov_pvalue(double statistic, std::size_t n);

}  // namespace nsm::oracle
