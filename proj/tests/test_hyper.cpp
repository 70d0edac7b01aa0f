#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "nsm/error.hpp"
#include "nsm/hyper.hpp"

using namespace nsm;

TEST_CASE("link maps evaluate their closed forms") {
  CHECK(link_value(ExpLink{}, 0.0) == 1.0);
  CHECK(link_value(ExpLink{}, std::log(3.0)) == doctest::Approx(3.0));
  const CauchyLink c{2.0, 4.0, 0.5, 0.1};
  CHECK(link_value(c, 0.0) == doctest::Approx(0.6));
  CHECK(link_value(c, -2.0) == doctest::Approx(2.0 / 5.0 + 0.1));
  CHECK(link_value(c, 2.0) == link_value(c, -2.0));
  const BoundedExpLink b{1.0, 0.99, 0.01, 5.0};
  CHECK(link_value(b, 0.0) == doctest::Approx(0.01));
  CHECK(link_value(b, 1.0) == doctest::Approx(std::exp(1.0) - 0.99));
  CHECK(link_value(b, 100.0) == 5.0);
  CHECK(link_value(b, -1.0) == link_value(b, 1.0));
}

TEST_CASE("link maps stay positive and finite for extreme inputs") {
  const LinkMap links[] = {ExpLink{}, CauchyLink{}, BoundedExpLink{}};
  for (const auto& l : links) {
    for (double s : {-1e6, -50.0, 0.0, 50.0, 1e6}) {
      const double v = link_value(l, s);
      CHECK(std::isfinite(v));
      CHECK(v > 0.0);
    }
  }
}

TEST_CASE("invalid link parameters are rejected") {
  CHECK_THROWS_AS(validate_link(CauchyLink{1.0, 0.0, 1.0, 0.1}), ConfigError);
  CHECK_THROWS_AS(validate_link(CauchyLink{1.0, 1.0, 1.0, 0.0}), ConfigError);
  CHECK_THROWS_AS(validate_link(BoundedExpLink{1.0, 1.5, 0.1, 2.0}), ConfigError);
  CHECK_THROWS_AS(validate_link(BoundedExpLink{1.0, 0.5, 3.0, 2.0}), ConfigError);
  CHECK_NOTHROW(validate_link(ExpLink{}));
}

TEST_CASE("single-node log density delta equals the full difference") {
  const Grid g1 = make_grid_1d(25, 10.0, Boundary::Periodic);
  const Grid g2 = make_grid_2d(7, 7, 1.0, 1.0, Boundary::Periodic);
  const Grid g3 = make_grid_2d(7, 7, 1.0, 1.0, Boundary::Dirichlet);
  const std::vector<HyperModel> models = {
      HyperModel(g1, GaussianMatern{1.0, 2.0}, ExpLink{}),
      HyperModel(g1, CauchyWalk{}, CauchyLink{}),
      HyperModel(g1, CauchyWalk{0.3}, CauchyLink{}),
      HyperModel(g1, CauchyNoise{}, ExpLink{}),
      HyperModel(g2, GaussianMatern{0.2, 1.0}, ExpLink{}),
      HyperModel(g3, GaussianMatern{0.2, 1.0}, ExpLink{}),
      HyperModel(g2, CauchyNoise{0.5}, ExpLink{}),
  };
  Rng rng(3);
  for (const auto& m : models) {
    CAPTURE(describe(m.family()));
    Field u(m.grid());
    for (double& x : u.values) x = rng.normal();
    for (std::size_t node : {std::size_t{0}, std::size_t{3}, m.grid().size() - 1}) {
      const double t = u[node] + 1.7 * rng.normal();
      Field w = u;
      w[node] = t;
      const double full = hyper_log_density(m, w) - hyper_log_density(m, u);
      CHECK(log_density_delta(m, u, node, t) == doctest::Approx(full).epsilon(1e-10));
    }
  }
}

TEST_CASE("cauchy walk draws start at zero with scale-h increments") {
  const Grid g = make_grid_1d(20001, 100.0, Boundary::Dirichlet);
  const HyperModel m(g, CauchyWalk{}, CauchyLink{});
  CHECK(m.cauchy_scale() == doctest::Approx(g.h()));
  Rng rng(5);
  const Field u = sample_hyper(m, rng);
  CHECK(u[0] == 0.0);
  std::vector<double> inc;
  for (std::size_t j = 1; j < u.size(); ++j) inc.push_back(std::abs(u[j] - u[j - 1]));
  std::nth_element(inc.begin(), inc.begin() + inc.size() / 2, inc.end());
  CHECK(inc[inc.size() / 2] == doctest::Approx(g.h()).epsilon(0.05));
}

TEST_CASE("cauchy walk requires a 1-D grid") {
  CHECK_THROWS_AS(HyperModel(make_grid_2d(5, 5, 1.0, 1.0, Boundary::Periodic), CauchyWalk{}, CauchyLink{}),
                  ConfigError);
}

TEST_CASE("gaussian hypermodel carries its own SPDE factor") {
  const Grid g = make_grid_1d(30, 10.0, Boundary::Periodic);
  const HyperModel m(g, GaussianMatern{0.8, 3.0}, ExpLink{});
  REQUIRE(m.factor().has_value());
  CHECK(m.factor()->sigma() == 3.0);
  CHECK(m.factor()->ell()[4] == 0.8);
  CHECK_FALSE(HyperModel(g, CauchyNoise{}, ExpLink{}).factor().has_value());
}

TEST_CASE("link values at the origin") {
  CHECK(apply_link(ExpLink{}, Field(make_grid_1d(4, 4.0, Boundary::Periodic), 0.0)).values ==
        std::vector<double>(4, 1.0));
  const CauchyLink c{2.0, 4.0, 3.0, 0.1};
  CHECK(link_value(c, 0.0) == doctest::Approx(2.0 / 4.0 + 0.1));
  const BoundedExpLink b{2.0, 0.7, 0.3, 4.0};
  CHECK(link_value(b, 0.0) == doctest::Approx(0.3));
}

TEST_CASE("degenerate gaussian hyperprior draws vanish") {
  const Grid g = make_grid_1d(50, 10.0, Boundary::Periodic);
  const HyperModel m(g, GaussianMatern{1.0, 1e-12}, ExpLink{});
  Rng rng(1);
  for (double x : sample_hyper(m, rng).values) CHECK(std::abs(x) < 1e-9);
}

TEST_CASE("cauchy walk increments pass a KS test against the Cauchy law") {
  const Grid g = make_grid_1d(10001, 10.0, Boundary::Dirichlet);
  const HyperModel m(g, CauchyWalk{}, CauchyLink{});
  Rng rng(31);
  const Field u = sample_hyper(m, rng);
  std::vector<double> inc;
  for (std::size_t j = 1; j < u.size(); ++j) inc.push_back((u[j] - u[j - 1]) / g.h());
  std::sort(inc.begin(), inc.end());
  double d = 0.0;
  const double n = static_cast<double>(inc.size());
  for (std::size_t i = 0; i < inc.size(); ++i) {
    const double f = 0.5 + std::atan(inc[i]) / std::numbers::pi;
    d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  // asymptotic Kolmogorov quantile for p = 0.01
  CHECK(std::sqrt(n) * d < 1.628);
}

TEST_CASE("log density delta is zero for no move and antisymmetric") {
  const Grid g = make_grid_1d(20, 10.0, Boundary::Periodic);
  const std::vector<HyperModel> models = {HyperModel(g, GaussianMatern{1.0, 2.0}, ExpLink{}),
                                          HyperModel(g, CauchyWalk{}, CauchyLink{}),
                                          HyperModel(g, CauchyNoise{}, ExpLink{})};
  Rng rng(2);
  for (const auto& m : models) {
    Field u(g);
    for (double& x : u.values) x = rng.normal();
    CHECK(log_density_delta(m, u, 6, u[6]) == 0.0);
    Field w = u;
    w[6] = u[6] + 0.9;
    CHECK(log_density_delta(m, u, 6, w[6]) == doctest::Approx(-log_density_delta(m, w, 6, u[6])));
  }
}
