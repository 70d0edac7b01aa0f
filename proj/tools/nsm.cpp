#include <CLI11.hpp>
#include <charconv>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nsm/config.hpp"
#include "nsm/error.hpp"
#include "nsm/experiment.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

template <class T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    std::string item = text.substr(start, end - start);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    T value{};
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (item.empty() || ec != std::errc() || p != item.data() + item.size()) {
      throw nsm::ConfigError(std::string(flag) + ": '" + item + "' is not a non-negative integer");
    }
    out.push_back(value);
    start = end + 1;
  }
  return out;
}

struct Flags {
  std::string config;
  std::string kind = "interp1d";
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::string det_ratio;
  std::string refine;
  std::string trace_nodes;
  std::string kde_nodes;
  bool emit_gnuplot = false;
};

nsm::ExperimentConfig resolve(const Flags& f, bool data_seed) {
  nsm::ExperimentConfig c =
      f.config.empty() ? nsm::default_config(nsm::parse_kind(f.kind)) : nsm::load_config(f.config);
  if (f.seed) (data_seed ? c.data.seed : c.mcmc.seed) = *f.seed;
  if (f.det_ratio == "exact") {
    c.mcmc.det_ratio = nsm::DetRatioMode::Exact;
  } else if (f.det_ratio == "windowed") {
    c.mcmc.det_ratio = nsm::DetRatioMode::Windowed;
  } else if (!f.det_ratio.empty()) {
    throw nsm::ConfigError("--det-ratio must be exact or windowed");
  }
  if (!f.refine.empty()) c.output.refine = parse_list<int>(f.refine, "--refine");
  if (!f.trace_nodes.empty()) c.output.trace_nodes = parse_list<std::size_t>(f.trace_nodes, "--trace-nodes");
  if (!f.kde_nodes.empty()) c.output.kde_nodes = parse_list<std::size_t>(f.kde_nodes, "--kde-nodes");
  if (f.emit_gnuplot) c.output.emit_gnuplot = true;
  nsm::validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-stationary Matern priors: data synthesis, MCMC inversion, realisations and baselines"};
  app.set_version_flag("--version", nsm::version_string());
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  app.add_option("--config", f.config, "Experiment config (TOML)");
  app.add_option("--kind", f.kind, "Built-in defaults to use when no config is given")
      ->check(CLI::IsMember({"interp1d", "diff1d", "interp2d", "realize"}));
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--seed", f.seed, "Seed override (data seed for make-data, chain seed otherwise)");
  app.add_option("--det-ratio", f.det_ratio, "Determinant ratio mode")->check(CLI::IsMember({"exact", "windowed"}));
  app.add_option("--refine", f.refine, "Unknown-grid sizes for a refinement sweep, e.g. \"81,161,321\"");
  app.add_option("--trace-nodes", f.trace_nodes, "Nodes whose chains are written, e.g. \"15,66\"");
  app.add_option("--kde-nodes", f.kde_nodes, "Nodes with kernel density estimates, e.g. \"129,130,131\"");
  app.add_flag("--emit-gnuplot", f.emit_gnuplot, "Write gnuplot scripts next to the CSV outputs");

  auto* make_data = app.add_subcommand("make-data", "Synthesise truth and noisy measurements");
  auto* invert = app.add_subcommand("invert", "Run the MCMC inversion on <out>/data.csv");
  auto* realize = app.add_subcommand("realize", "Draw prior realisations");
  auto* baseline = app.add_subcommand("baseline", "Constant length-scale baselines on <out>/data.csv");
  auto* defaults = app.add_subcommand("defaults", "Print the default config of --kind (or the resolved --config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (defaults->parsed()) {
      std::cout << nsm::to_toml(resolve(f, false));
    } else if (make_data->parsed()) {
      nsm::cmd_make_data(resolve(f, true), f.out);
    } else if (invert->parsed()) {
      nsm::cmd_invert(resolve(f, false), f.out);
    } else if (realize->parsed()) {
      nsm::cmd_realize(resolve(f, false), f.out);
    } else if (baseline->parsed()) {
      nsm::cmd_baseline(resolve(f, false), f.out);
    }
  } catch (const nsm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const nsm::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
