#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "nsm/config.hpp"
#include "nsm/csv.hpp"
#include "nsm/error.hpp"
#include "nsm/experiment.hpp"

using namespace nsm;
namespace fs = std::filesystem;

namespace {

std::string error_of(std::string_view text) {
  try {
    parse_config(text, "t.toml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults round trip through TOML for every kind") {
  for (auto kind : {ProblemKind::Interp1d, ProblemKind::Diff1d, ProblemKind::Interp2d, ProblemKind::Realize}) {
    CAPTURE(kind_name(kind));
    const ExperimentConfig c = default_config(kind);
    CHECK_NOTHROW(validate(c));
    const std::string text = to_toml(c);
    CHECK(to_toml(parse_config(text)) == text);
  }
}

TEST_CASE("problem defaults follow the experiment setups") {
  const auto i = default_config(ProblemKind::Interp1d);
  CHECK(i.grid.measurement_n == 81);
  CHECK(i.data.noise_std == 0.1);
  CHECK(i.grid.extent == 10.0);
  CHECK(i.mcmc.iterations == 10000);
  CHECK(i.mcmc.burn_in == 5000);
  const auto d = default_config(ProblemKind::Diff1d);
  CHECK(d.grid.measurement_n == 101);
  CHECK(d.data.noise_std == 0.03);
  const auto t = default_config(ProblemKind::Interp2d);
  CHECK(t.grid.dim == 2);
  CHECK(t.grid.measurement_n == 41);
  CHECK(t.data.noise_std == 0.025);
  CHECK(i.baseline.count == 40);
  CHECK(i.baseline.long_ell == 2.0);
}

TEST_CASE("overrides apply on top of the kind defaults") {
  const auto c = parse_config(R"(kind = "diff1d"
[mcmc]
iterations = 400
burn_in = 100
det_ratio = "windowed"
[output]
kde_nodes = [3, 4]
)");
  CHECK(c.kind == ProblemKind::Diff1d);
  CHECK(c.mcmc.iterations == 400);
  CHECK(c.mcmc.det_ratio == DetRatioMode::Windowed);
  CHECK(c.grid.measurement_n == 101);
  CHECK(c.output.kde_nodes == std::vector<std::size_t>{3, 4});
  CHECK(c.chain_config().store_samples);
}

TEST_CASE("errors carry the source line and column") {
  CHECK(error_of("kind = \"interp1d\"\n[grid]\nunknown_n = \"x\"\n") == "t.toml:3:13: grid.unknown_n must be an integer");
  CHECK(error_of("kind = \"interp1d\"\n\n[mcmc]\nbogus = 1\n").rfind("t.toml:4:1: unknown key", 0) == 0);
  CHECK(error_of("[nope]\n").rfind("t.toml:1:2: unknown table", 0) == 0);
  CHECK(error_of("kind = \"interp3d\"\n").rfind("t.toml:1:", 0) == 0);
  CHECK(error_of("kind = \"interp1d\"\n[grid]\nextent = = 3\n").rfind("t.toml:3:", 0) == 0);
  CHECK(error_of("[hyper]\nlink = \"tanh\"\n").rfind("t.toml:2:", 0) == 0);
}

TEST_CASE("validation rejects inconsistent configs") {
  CHECK(error_of("[mcmc]\niterations = 10\nburn_in = 10\n").find("burn_in") != std::string::npos);
  CHECK_FALSE(error_of("[grid]\nunknown_n = 160\n").empty());
  CHECK_FALSE(error_of("kind = \"diff1d\"\n[data]\nnoise_std = 0.5\n").empty());
  CHECK_FALSE(error_of("[output]\ntrace_nodes = [161]\n").empty());
  CHECK_FALSE(error_of("kind = \"realize\"\n[realize]\nanisotropic = true\n").empty());
  CHECK_FALSE(error_of("kind = \"interp2d\"\n[hyper]\nfamily = \"cauchy_walk\"\n").empty());
  CHECK_FALSE(error_of("[hyper]\nlink = \"bounded_exp\"\nbounded_b = 1.5\n").empty());
  CHECK_FALSE(error_of("[data]\nnoise_std = -1.0\n").empty());
}

TEST_CASE("missing config file is a config error") {
  CHECK_THROWS_AS(load_config("/nonexistent/x.toml"), ConfigError);
}

TEST_CASE("number formatting is shortest round-trip") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(2.0) == "2");
  CHECK(format_number(-1e-300) == "-1e-300");
  for (double x : {M_PI, 1.0 / 3.0, 6.02214076e23, -0.0, 5e-324, std::numeric_limits<double>::max()}) {
    CHECK(parse_number(format_number(x)) == x);
  }
  CHECK_THROWS_AS(parse_number("abc"), ConfigError);
  CHECK_THROWS_AS(parse_number("1.0x"), ConfigError);
}

TEST_CASE("CSV read then rewrite is byte-identical") {
  const std::string text = "a,b,c\n1,0.1,-3e-05\n2,1e+20,0.30000000000000004\n";
  std::istringstream in(text);
  const CsvTable t = read_csv(in);
  CHECK(t.column("b") == 1);
  CHECK(t.number(1, 2) == 0.30000000000000004);
  std::ostringstream out;
  write_csv(out, t);
  CHECK(out.str() == text);
  CHECK_THROWS_AS(t.column("zz"), ConfigError);
}

TEST_CASE("measurement CSV round trip in 1-D and 2-D") {
  for (auto kind : {ProblemKind::Interp1d, ProblemKind::Interp2d}) {
    const ExperimentConfig c = default_config(kind);
    const MeasurementData d = synthesize(c);
    const fs::path p = fs::temp_directory_path() / ("nsm_data_" + std::string(kind_name(kind)) + ".csv");
    {
      std::ofstream os(p);
      write_data_csv(os, d);
    }
    const MeasurementData back = read_data_csv(p, c.grid.dim);
    CHECK(back.y == d.y);
    CHECK(back.points == d.points);
    fs::remove(p);
  }
}

TEST_CASE("synthesized data sit on the measurement grid") {
  const ExperimentConfig c = default_config(ProblemKind::Interp1d);
  const MeasurementData d = synthesize(c);
  REQUIRE(d.y.size() == 81);
  CHECK(d.points[80][0] == doctest::Approx(10.0));
  const ForwardProblem p = build_problem(c, d, 161);
  CHECK(p.A.rows() == 81);
  CHECK(p.unknown_grid.size() == 161);
  CHECK_THROWS_AS(build_problem(c, d, 160), ConfigError);
}

TEST_CASE("relative L2 distance") {
  const std::vector<double> a{3.0, 4.0};
  const std::vector<double> b{0.0, 5.0};
  CHECK(relative_l2(a, b) == doctest::Approx(std::sqrt(10.0) / 5.0));
}
