#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "nsm/config.hpp"
#include "nsm/forward.hpp"
#include "nsm/hyper.hpp"
#include "nsm/sampler.hpp"

namespace nsm {

namespace fs = std::filesystem;

/// Observations as written by make-data.
struct MeasurementData {
  int dim = 1;
  std::vector<std::array<double, 2>> points;
  std::vector<double> y;
};

/// Unknown grid with `n` nodes per axis covering [0, extent] node to node.
Grid unknown_grid_for(const ExperimentConfig& config, int n);
Grid unknown_grid_for(const ExperimentConfig& config);
/// Measurement lattice of the interpolation problems.
Grid measurement_grid_for(const ExperimentConfig& config);

/// Truth of the configured problem sampled on `grid`.
Field truth_on(const ExperimentConfig& config, const Grid& grid);

/// Noisy observations of the analytic truth, seeded by data.seed.
MeasurementData synthesize(const ExperimentConfig& config);

void write_data_csv(std::ostream& os, const MeasurementData& data);
MeasurementData read_data_csv(const fs::path& path, int dim);

/// Forward problem for the unknown grid with `n` nodes per axis.
ForwardProblem build_problem(const ExperimentConfig& config, const MeasurementData& data, int n);

HyperModel build_hyper(const ExperimentConfig& config, const Grid& grid);

/// Relative L2 distance ||a - b|| / ||b||.
double relative_l2(std::span<const double> a, std::span<const double> b);

// Subcommands. Each writes into `out` and finishes with manifest-<command>.json.
void cmd_make_data(const ExperimentConfig& config, const fs::path& out);
void cmd_invert(const ExperimentConfig& config, const fs::path& out);
void cmd_realize(const ExperimentConfig& config, const fs::path& out);
void cmd_baseline(const ExperimentConfig& config, const fs::path& out);

std::string version_string();

}  // namespace nsm
