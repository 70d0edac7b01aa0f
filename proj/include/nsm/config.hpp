#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nsm/grid.hpp"
#include "nsm/hyper.hpp"
#include "nsm/sampler.hpp"

namespace nsm {

enum class ProblemKind { Interp1d, Diff1d, Interp2d, Realize };

std::string_view kind_name(ProblemKind kind);
ProblemKind parse_kind(std::string_view name);

struct GridConfig {
  int dim = 1;
  int unknown_n = 161;      // per axis
  int measurement_n = 81;   // per axis; number of observations in 1-D problems
  double extent = 10.0;     // per axis
  Boundary boundary = Boundary::Periodic;
};

struct DataConfig {
  double noise_std = 0.1;
  std::uint64_t seed = 42;
};

struct HyperConfig {
  std::string family = "cauchy_walk";  // gaussian | cauchy_walk | cauchy_noise
  double ell0 = 1.0;
  double sigma0 = 5.0;
  double scale = 0.0;                  // Cauchy scale; <= 0 means grid spacing
  std::string link = "cauchy";         // exp | cauchy | bounded_exp
  CauchyLink cauchy;
  BoundedExpLink bounded;

  HyperFamily family_value() const;
  LinkMap link_value() const;
};

struct McmcConfig {
  std::size_t iterations = 10000;
  std::size_t burn_in = 5000;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  std::size_t adapt_interval = 100;
  double initial_scale = 0.5;
  DetRatioMode det_ratio = DetRatioMode::Exact;
  int window_radius = 1;
};

struct OutputConfig {
  std::vector<std::size_t> trace_nodes;
  std::vector<std::size_t> kde_nodes;
  std::vector<int> refine;  // unknown-grid sizes for a refinement sweep
  bool store_chains = true;
  bool emit_gnuplot = false;
};

struct BaselineConfig {
  double ell_min = 0.05;
  double ell_max = 5.0;
  std::size_t count = 40;
  double long_ell = 2.0;
};

struct RealizeConfig {
  std::size_t count = 4;
  double padding = 0.25;  // fraction of the extent added on each side, then cropped
  bool anisotropic = false;
  double ell1 = 0.1;
  double ell2 = 0.05;
  double theta = 0.0;
  bool dense_covariance = false;
};

struct ExperimentConfig {
  ProblemKind kind = ProblemKind::Interp1d;
  GridConfig grid;
  DataConfig data;
  double prior_sigma = 1.0;
  HyperConfig hyper;
  McmcConfig mcmc;
  OutputConfig output;
  BaselineConfig baseline;
  RealizeConfig realize;

  ChainConfig chain_config() const;
};

/// Defaults for each problem kind, mirroring the experiment setups.
ExperimentConfig default_config(ProblemKind kind);

/// Parses a TOML document. The `kind` key selects the defaults that the
/// remaining keys override. Errors are ConfigError with "source:line:col".
ExperimentConfig parse_config(std::string_view text, std::string_view source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Range and consistency checks; throws ConfigError.
void validate(const ExperimentConfig& config);

/// TOML rendering that parse_config accepts back unchanged.
std::string to_toml(const ExperimentConfig& config);

}  // namespace nsm
