#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "nsm/oracle.hpp"

using namespace nsm;

TEST_CASE("Matérn correlation at half-integer smoothness") {
  for (double r : {0.0, 0.1, 0.5, 1.0, 3.0}) {
    const double z = r / 0.8;
    CHECK(oracle::matern_cov(r, 0.5, 0.8) == doctest::Approx(std::exp(-z)));
    CHECK(oracle::matern_cov(r, 1.5, 0.8) == doctest::Approx((1.0 + z) * std::exp(-z)));
  }
  CHECK(oracle::matern_cov(0.0, 1.0, 1.0) == 1.0);
}

TEST_CASE("SPDE marginal variance in one and two dimensions") {
  CHECK(oracle::spde_marginal_variance(1.0, 1) == doctest::Approx(0.25));
  CHECK(oracle::spde_marginal_variance(2.0, 1) == doctest::Approx(1.0));
  CHECK(oracle::spde_marginal_variance(1.0, 2) == doctest::Approx(1.0 / (4.0 * std::numbers::pi)));
}

TEST_CASE("power spectrum integrates to unit variance") {
  const double ell = 0.7;
  double s1 = 0.0;
  const double d = 1e-3;
  for (double xi = -2000.0; xi < 2000.0; xi += d) s1 += oracle::power_spectrum(xi + 0.5 * d, 1.5, ell, 1) * d;
  CHECK(s1 / (2 * std::numbers::pi) == doctest::Approx(1.0).epsilon(1e-3));
  double s2 = 0.0;
  for (double rho = 0.0; rho < 5000.0; rho += d) {
    const double m = rho + 0.5 * d;
    s2 += oracle::power_spectrum(m, 1.0, ell, 2) * m * d;
  }
  CHECK(s2 / (2 * std::numbers::pi) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("dense covariance agrees with sparse columns and is symmetric") {
  const Grid g = make_grid_1d(50, 10.0, Boundary::Periodic);
  Field ell(g);
  for (std::size_t i = 0; i < g.size(); ++i) ell[i] = 0.3 + 0.2 * std::sin(0.4 * i);
  const auto L = assemble_precision_factor(g, ell, 1.0);
  const Eigen::MatrixXd C = oracle::dense_covariance(L);
  CHECK((C - C.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * C.cwiseAbs().maxCoeff());
  const std::size_t cols[] = {0, 17, 49};
  const Eigen::MatrixXd S = oracle::covariance_columns(L, cols);
  for (int k = 0; k < 3; ++k) CHECK((S.col(k) - C.col(static_cast<Eigen::Index>(cols[k]))).norm() <= 1e-10 * C.norm());
  const Eigen::MatrixXd D = to_dense(L);
  CHECK(oracle::dense_logdet(L) == doctest::Approx(std::log(std::abs(D.determinant()))));
}

TEST_CASE("conditional mean matches the dense conditional Gaussian") {
  const Grid g = make_grid_spaced(1, {41, 1}, 0.25, Boundary::Periodic);
  const Grid m = make_grid_spaced(1, {21, 1}, 0.5, Boundary::Periodic);
  const SparseMatrix A = interp_operator(g, m);
  std::vector<double> y(21);
  for (int j = 0; j < 21; ++j) y[static_cast<std::size_t>(j)] = std::cos(0.3 * j);
  const auto L = assemble_precision_factor(g, Field(g, 0.6), 1.0);
  const auto G = oracle::conditional_gaussian(A, 0.2, y, L);
  const Eigen::VectorXd mean = oracle::conditional_mean(A, 0.2, y, L);
  CHECK((G.mean - mean).norm() <= 1e-10 * G.mean.norm());
  // Q mean = A^T y / s^2
  const Eigen::MatrixXd Ad = Eigen::MatrixXd(A);
  const Eigen::MatrixXd Ld = to_dense(L);
  const Eigen::MatrixXd Q = Ad.transpose() * Ad / 0.04 + Ld.transpose() * Ld;
  Eigen::Map<const Eigen::VectorXd> yy(y.data(), 21);
  CHECK((Q * G.mean - Ad.transpose() * yy / 0.04).norm() <= 1e-9 * yy.norm() / 0.04);
  CHECK((Q * G.covariance - Eigen::MatrixXd::Identity(41, 41)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("sparse conditional mean above the dense limit solves the normal equations") {
  const Grid g = make_grid_spaced(2, {70, 70}, 1.0 / 70, Boundary::Periodic);
  const Grid m = make_grid_spaced(2, {35, 35}, 2.0 / 70, Boundary::Periodic);
  REQUIRE(g.size() > oracle::kDenseLimit);
  const SparseMatrix A = interp_operator(g, m);
  std::vector<double> y(m.size());
  for (std::size_t j = 0; j < y.size(); ++j) y[j] = std::sin(0.01 * static_cast<double>(j));
  const auto L = assemble_precision_factor(g, Field(g, 0.05), 1.0);
  const Eigen::VectorXd mean = oracle::conditional_mean(A, 0.1, y, L);
  const Eigen::SparseMatrix<double> As(A);
  const Eigen::SparseMatrix<double> Ls(L.matrix());
  Eigen::Map<const Eigen::VectorXd> yy(y.data(), static_cast<Eigen::Index>(y.size()));
  const Eigen::VectorXd rhs = As.transpose() * yy / 0.01;
  const Eigen::VectorXd lhs = As.transpose() * (As * mean) / 0.01 + Ls.transpose() * (Ls * mean);
  CHECK((lhs - rhs).norm() <= 1e-8 * rhs.norm());
}

TEST_CASE("constant-ell baseline scores each estimate against the truth") {
  const Grid g = make_grid_spaced(1, {41, 1}, 0.25, Boundary::Periodic);
  const Grid m = make_grid_spaced(1, {21, 1}, 0.5, Boundary::Periodic);
  ForwardProblem p;
  p.A = interp_operator(g, m);
  p.noise_std = 0.1;
  p.unknown_grid = g;
  const Field truth = sample_phantom(g, [](double x) { return std::sin(x); });
  SparseMatrix I(21, 21);
  I.setIdentity();
  p.y = synth_data(I, sample_phantom(m, [](double x) { return std::sin(x); }).values, 0.1, 1);
  const auto ells = oracle::log_spaced(0.05, 5.0, 12);
  const auto table = oracle::constant_ell_baseline(p, 1.0, ells, truth.values);
  REQUIRE(table.rows.size() == 12);
  for (std::size_t k = 0; k < 12; ++k) {
    const auto L = assemble_precision_factor(g, Field(g, ells[k]), 1.0);
    const Eigen::VectorXd ref = oracle::conditional_mean(p.A, 0.1, p.y, L);
    CHECK((table.estimates[k] - ref).norm() <= 1e-12 * (1.0 + ref.norm()));
    const auto met = oracle::metrics(std::span<const double>(ref.data(), 41), truth.values);
    CHECK(table.rows[k].rmse == doctest::Approx(met.rmse));
    CHECK(table.rows[k].rmse >= table.rows[table.argmin_rmse].rmse);
    CHECK(table.rows[k].max_abs_error >= table.rows[table.argmin_max_abs].max_abs_error);
  }
}

TEST_CASE("log-spaced grid hits both ends with constant ratio") {
  const auto v = oracle::log_spaced(0.05, 5.0, 40);
  REQUIRE(v.size() == 40);
  CHECK(v.front() == doctest::Approx(0.05));
  CHECK(v.back() == doctest::Approx(5.0));
  for (std::size_t i = 2; i < v.size(); ++i) CHECK(v[i] / v[i - 1] == doctest::Approx(v[1] / v[0]));
}

TEST_CASE("metrics") {
  const std::vector<double> a{1.0, 2.0, 3.0};
  const std::vector<double> b{1.0, 0.0, 4.0};
  const auto m = oracle::metrics(a, b);
  CHECK(m.max_abs_error == 2.0);
  CHECK(m.rmse == doctest::Approx(std::sqrt(5.0 / 3.0)));
}

TEST_CASE("Kolmogorov distribution tail") {
  CHECK(oracle::kolmogorov_pvalue(1.3581 / std::sqrt(1e6), 1000000) == doctest::Approx(0.05).epsilon(0.02));
  CHECK(oracle::kolmogorov_pvalue(1.6276 / std::sqrt(1e6), 1000000) == doctest::Approx(0.01).epsilon(0.02));
  CHECK(oracle::kolmogorov_pvalue(0.0, 100) == doctest::Approx(1.0));
}

TEST_CASE("KS test accepts the true law and rejects a shifted one") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(5000);
  for (double& x : s) x = u(gen);
  const auto uniform_cdf = [](double x) { return std::clamp(x, 0.0, 1.0); };
  CHECK(oracle::ks_test(s, uniform_cdf).p_value > 0.01);
  for (double& x : s) x = 0.9 * x + 0.1;
  const auto r = oracle::ks_test(s, uniform_cdf);
  CHECK(r.statistic == doctest::Approx(0.1).epsilon(0.05));
  CHECK(r.p_value < 1e-6);
}
