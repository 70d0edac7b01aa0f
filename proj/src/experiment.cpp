#include "nsm/experiment.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "nsm/csv.hpp"
#include "nsm/error.hpp"
#include "nsm/oracle.hpp"

#ifndef NSM_VERSION
#define NSM_VERSION "dev"
#endif

namespace nsm {

using json = nlohmann::ordered_json;

std::string version_string() { return NSM_VERSION; }

Grid unknown_grid_for(const ExperimentConfig& c, int n) {
  const double h = c.grid.extent / (n - 1);
  return make_grid_spaced(c.grid.dim, {n, c.grid.dim == 2 ? n : 1}, h, c.grid.boundary);
}

Grid unknown_grid_for(const ExperimentConfig& c) { return unknown_grid_for(c, c.grid.unknown_n); }

Grid measurement_grid_for(const ExperimentConfig& c) {
  const int m = c.grid.measurement_n;
  const double h = c.grid.extent / (m - 1);
  return make_grid_spaced(c.grid.dim, {m, c.grid.dim == 2 ? m : 1}, h, c.grid.boundary);
}

Field truth_on(const ExperimentConfig& c, const Grid& grid) {
  switch (c.kind) {
    case ProblemKind::Interp1d: return sample_phantom(grid, phantom_interp_1d);
    case ProblemKind::Diff1d: return sample_phantom(grid, phantom_diff_1d);
    case ProblemKind::Interp2d: return sample_phantom_2d(grid);
    case ProblemKind::Realize: break;
  }
  throw ConfigError("realize configs have no truth");
}

namespace {

SparseMatrix identity(std::size_t m) {
  SparseMatrix I(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  I.setIdentity();
  return I;
}

std::vector<double> diff_points(const ExperimentConfig& c) {
  const int m = c.grid.measurement_n;
  std::vector<double> t(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) t[static_cast<std::size_t>(j)] = c.grid.extent * j / (m - 1);
  return t;
}

}  // namespace

MeasurementData synthesize(const ExperimentConfig& c) {
  MeasurementData d;
  d.dim = c.grid.dim;
  std::vector<double> clean;
  if (c.kind == ProblemKind::Diff1d) {
    for (double t : diff_points(c)) {
      d.points.push_back({t, 0.0});
      clean.push_back(phantom_diff_integral(t));
    }
  } else if (c.kind == ProblemKind::Interp1d || c.kind == ProblemKind::Interp2d) {
    const Grid m = measurement_grid_for(c);
    d.points = node_points(m);
    clean = truth_on(c, m).values;
  } else {
    throw ConfigError("make-data needs kind interp1d, diff1d or interp2d");
  }
  d.y = synth_data(identity(clean.size()), clean, c.data.noise_std, c.data.seed);
  return d;
}

void write_data_csv(std::ostream& os, const MeasurementData& data) {
  CsvTable t;
  t.header = data.dim == 2 ? std::vector<std::string>{"tx", "ty", "y"} : std::vector<std::string>{"t", "y"};
  for (std::size_t j = 0; j < data.y.size(); ++j) {
    if (data.dim == 2) {
      t.rows.push_back({format_number(data.points[j][0]), format_number(data.points[j][1]),
                        format_number(data.y[j])});
    } else {
      t.rows.push_back({format_number(data.points[j][0]), format_number(data.y[j])});
    }
  }
  write_csv(os, t);
}

MeasurementData read_data_csv(const fs::path& path, int dim) {
  if (!fs::exists(path)) throw ConfigError("missing data file " + path.string() + " (run make-data first)");
  CsvTable t = read_csv_file(path);
  MeasurementData d;
  d.dim = dim;
  const std::size_t cy = t.column("y");
  const std::size_t cx = t.column(dim == 2 ? "tx" : "t");
  const std::size_t cz = dim == 2 ? t.column("ty") : 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    d.points.push_back({t.number(r, cx), dim == 2 ? t.number(r, cz) : 0.0});
    d.y.push_back(t.number(r, cy));
  }
  return d;
}

ForwardProblem build_problem(const ExperimentConfig& c, const MeasurementData& data, int n) {
  ForwardProblem p;
  p.unknown_grid = unknown_grid_for(c, n);
  p.noise_std = c.data.noise_std;
  p.y = data.y;
  p.points = data.points;
  if (c.kind == ProblemKind::Diff1d) {
    std::vector<double> t;
    for (const auto& pt : data.points) t.push_back(pt[0]);
    p.A = heaviside_operator(p.unknown_grid, t);
  } else if (c.kind == ProblemKind::Interp1d || c.kind == ProblemKind::Interp2d) {
    const Grid m = measurement_grid_for(c);
    const auto expected = node_points(m);
    bool match = expected.size() == data.points.size();
    for (std::size_t j = 0; match && j < expected.size(); ++j) {
      const double tol = 1e-9 * std::max(1.0, c.grid.extent);
      match = std::abs(expected[j][0] - data.points[j][0]) <= tol && std::abs(expected[j][1] - data.points[j][1]) <= tol;
    }
    if (!match) throw ConfigError("data file does not match the configured measurement grid");
    p.A = interp_operator(p.unknown_grid, m);
  } else {
    throw ConfigError("realize configs have no forward problem");
  }
  return p;
}

HyperModel build_hyper(const ExperimentConfig& c, const Grid& grid) {
  return HyperModel(grid, c.hyper.family_value(), c.hyper.link_value());
}

double relative_l2(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("relative_l2: size mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

namespace {

// Collects the files a command writes so the manifest can list them.
class OutputDir {
 public:
  explicit OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  void write(const fs::path& rel, const std::string& contents) {
    const fs::path full = root_ / rel;
    if (full.has_parent_path()) fs::create_directories(full.parent_path());
    write_text_file_atomic(full, contents);
    files_.push_back(rel.generic_string());
  }

  void field(const fs::path& rel, const Field& f) {
    std::ostringstream os;
    write_field_csv(os, f);
    write(rel, os.str());
  }

  void manifest(json m) {
    m["files"] = files_;
    const std::string command = m["command"].get<std::string>();
    write_text_file_atomic(root_ / ("manifest-" + command + ".json"), m.dump(2) + "\n");
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::vector<std::string> files_;
};

json manifest_head(const ExperimentConfig& c, std::string_view command, std::uint64_t seed) {
  json m;
  m["command"] = command;
  m["version"] = version_string();
  m["kind"] = kind_name(c.kind);
  m["seed"] = seed;
  m["config"] = to_toml(c);
  return m;
}

std::string coordinate_columns(const Grid& g, std::size_t k) {
  const auto x = g.coordinate(k);
  std::string s = format_number(x[0]);
  if (g.dim() == 2) s += "," + format_number(x[1]);
  return s;
}

std::string error_bars(const Grid& g, std::span<const double> mean, std::span<const double> sd, double width) {
  std::ostringstream os;
  os << (g.dim() == 2 ? "index,x,y,mean,lower,upper\n" : "index,x,mean,lower,upper\n");
  for (std::size_t k = 0; k < g.size(); ++k) {
    os << k << ',' << coordinate_columns(g, k) << ',' << format_number(mean[k]) << ','
       << format_number(mean[k] - width * sd[k]) << ',' << format_number(mean[k] + width * sd[k]) << '\n';
  }
  return os.str();
}

std::string long_format(const std::vector<NodeTrace>& traces, bool ell, bool cumulative) {
  std::ostringstream os;
  os << "iter,node,value\n";
  for (const auto& t : traces) {
    const auto& series = ell ? t.ell : t.v;
    double sum = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
      sum += series[i];
      const double value = cumulative ? sum / static_cast<double>(i + 1) : series[i];
      os << i + 1 << ',' << t.node << ',' << format_number(value) << '\n';
    }
  }
  return os.str();
}

std::string gnuplot_estimate(const Grid& g, bool has_truth) {
  std::ostringstream os;
  if (g.dim() == 2) {
    os << "set datafile separator ','\nset view map\nset title 'CM estimate of v'\n"
       << "splot 'cm_v.csv' every ::1 using 2:3:4 with image notitle\n";
    return os.str();
  }
  os << "set datafile separator ','\nset key outside\nset xlabel 'x'\n"
     << "set title 'CM estimate of v with 3 sigma bands'\n"
     << "plot 'v_errorbars.csv' every ::1 using 2:4:5 with filledcurves lc rgb '#cccccc' title '3 sigma', \\\n"
     << "     'v_errorbars.csv' every ::1 using 2:3 with lines lw 2 title 'CM'";
  if (has_truth) os << ", \\\n     'truth.csv' every ::1 using 2:3 with lines dt 2 title 'truth'";
  os << "\npause mouse close\n";
  return os.str();
}

std::string gnuplot_ell(const Grid& g) {
  std::ostringstream os;
  if (g.dim() == 2) {
    os << "set datafile separator ','\nset view map\nset title 'CM estimate of ell'\n"
       << "splot 'cm_ell.csv' every ::1 using 2:3:4 with image notitle\n";
    return os.str();
  }
  os << "set datafile separator ','\nset xlabel 'x'\nset title 'CM estimate of ell with 1 sigma bands'\n"
     << "plot 'ell_errorbars.csv' every ::1 using 2:4:5 with filledcurves lc rgb '#cccccc' title '1 sigma', \\\n"
     << "     'ell_errorbars.csv' every ::1 using 2:3 with lines lw 2 title 'CM'\npause mouse close\n";
  return os.str();
}

std::string gnuplot_chains(const std::vector<NodeTrace>& traces) {
  std::ostringstream os;
  os << "set datafile separator ','\nset xlabel 'iteration'\nset key outside\n"
     << "set title 'chains and cumulative means of v'\nplot ";
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto node = traces[i].node;
    os << (i ? ", \\\n     " : "") << "'chains_v.csv' every ::1 using ($2==" << node << "?$1:1/0):3 with lines title 'node "
       << node << "', \\\n     'cummean_v.csv' every ::1 using ($2==" << node
       << "?$1:1/0):3 with lines lw 2 title 'cumulative mean " << node << "'";
  }
  os << "\npause mouse close\n";
  return os.str();
}

json run_summary(const ChainOutput& out, std::uint64_t seed, int n) {
  json r;
  r["unknown_n"] = n;
  r["seed"] = seed;
  r["samples"] = out.sample_count;
  r["runtime_seconds"] = out.runtime_seconds;
  double lo = 1.0;
  double hi = 0.0;
  std::size_t in_band = 0;
  for (double a : out.acceptance) {
    lo = std::min(lo, a);
    hi = std::max(hi, a);
    if (a >= 0.2 && a <= 0.55) ++in_band;
  }
  r["acceptance"] = {{"mean", out.mean_acceptance},
                     {"min", lo},
                     {"max", hi},
                     {"fraction_in_0.20_0.55", static_cast<double>(in_band) / static_cast<double>(out.acceptance.size())}};
  r["nonfinite_rejections"] = out.nonfinite_rejections;
  return r;
}

}  // namespace

void cmd_make_data(const ExperimentConfig& c, const fs::path& out) {
  validate(c);
  OutputDir dir(out);
  const MeasurementData data = synthesize(c);
  std::ostringstream os;
  write_data_csv(os, data);
  dir.write("data.csv", os.str());
  dir.field("truth.csv", truth_on(c, unknown_grid_for(c)));
  dir.write("config.toml", to_toml(c));
  json m = manifest_head(c, "make-data", c.data.seed);
  m["measurements"] = data.y.size();
  m["noise_std"] = c.data.noise_std;
  dir.manifest(std::move(m));
}

void cmd_invert(const ExperimentConfig& c, const fs::path& out) {
  validate(c);
  if (c.kind == ProblemKind::Realize) throw ConfigError("invert needs an inverse-problem config");
  OutputDir dir(out);
  const MeasurementData data = read_data_csv(out / "data.csv", c.grid.dim);
  const bool refine = !c.output.refine.empty();
  const std::vector<int> sizes = refine ? c.output.refine : std::vector<int>{c.grid.unknown_n};

  json m = manifest_head(c, "invert", c.mcmc.seed);
  json runs = json::array();
  std::vector<Field> estimates;
  for (int n : sizes) {
    const fs::path sub = refine ? fs::path("N" + std::to_string(n)) : fs::path();
    const ForwardProblem problem = build_problem(c, data, n);
    const Grid& g = problem.unknown_grid;
    const HyperModel hyper = build_hyper(c, g);
    ChainConfig cc = c.chain_config();
    if (refine) cc.seed = c.mcmc.seed + static_cast<std::uint64_t>(n);
    for (std::size_t node : c.output.kde_nodes) {
      if (node >= g.size()) throw ConfigError("kde node " + std::to_string(node) + " is outside the grid");
    }
    const ChainOutput chain = run_chain(problem, hyper, c.prior_sigma, cc);

    const Field truth = truth_on(c, g);
    dir.field(sub / "truth.csv", truth);
    dir.field(sub / "cm_v.csv", Field(g, chain.cm_v));
    dir.field(sub / "cm_ell.csv", Field(g, chain.cm_ell));
    dir.field(sub / "std_v.csv", Field(g, chain.std_v));
    dir.field(sub / "std_ell.csv", Field(g, chain.std_ell));
    dir.field(sub / "acceptance.csv", Field(g, chain.acceptance));
    dir.write(sub / "v_errorbars.csv", error_bars(g, chain.cm_v, chain.std_v, 3.0));
    dir.write(sub / "ell_errorbars.csv", error_bars(g, chain.cm_ell, chain.std_ell, 1.0));
    if (c.output.store_chains && !chain.traces.empty()) {
      dir.write(sub / "chains_v.csv", long_format(chain.traces, false, false));
      dir.write(sub / "chains_ell.csv", long_format(chain.traces, true, false));
      dir.write(sub / "cummean_v.csv", long_format(chain.traces, false, true));
      dir.write(sub / "cummean_ell.csv", long_format(chain.traces, true, true));
    }

    json run = run_summary(chain, cc.seed, n);
    const auto met = oracle::metrics(chain.cm_v, truth.values);
    run["metrics_vs_truth"] = {{"max_abs_error", met.max_abs_error}, {"rmse", met.rmse}};
    if (refine) run["directory"] = sub.generic_string();

    json kdes = json::object();
    for (std::size_t node : c.output.kde_nodes) {
      const auto samples = chain.sample_column_v(node);
      const KdeCurve curve = kde(samples);
      std::ostringstream os;
      os << "x,density\n";
      for (std::size_t j = 0; j < curve.x.size(); ++j) {
        os << format_number(curve.x[j]) << ',' << format_number(curve.density[j]) << '\n';
      }
      dir.write(sub / ("kde_v_" + std::to_string(node) + ".csv"), os.str());
      json modes = json::array();
      for (std::size_t i : find_modes(curve)) modes.push_back(curve.x[i]);
      kdes[std::to_string(node)] = {{"bandwidth", curve.bandwidth},
                                    {"point_mass", curve.point_mass},
                                    {"modes", modes}};
    }
    if (!c.output.kde_nodes.empty()) run["kde"] = kdes;

    if (c.output.emit_gnuplot) {
      dir.write(sub / "plot_v.gp", gnuplot_estimate(g, true));
      dir.write(sub / "plot_ell.gp", gnuplot_ell(g));
      if (c.output.store_chains && !chain.traces.empty()) dir.write(sub / "plot_chains.gp", gnuplot_chains(chain.traces));
    }
    runs.push_back(std::move(run));
    estimates.emplace_back(g, chain.cm_v);
  }
  m["runs"] = runs;

  if (refine && estimates.size() > 1) {
    std::size_t finest = 0;
    for (std::size_t i = 1; i < estimates.size(); ++i) {
      if (estimates[i].size() > estimates[finest].size()) finest = i;
    }
    const Grid& target = estimates[finest].grid;
    std::ostringstream os;
    os << "n_coarse,n_fine,relative_l2\n";
    json dist = json::array();
    for (std::size_t i = 0; i + 1 < estimates.size(); ++i) {
      const Field a = interpolate_to(estimates[i], target);
      const Field b = interpolate_to(estimates[i + 1], target);
      const double d = relative_l2(a.values, b.values);
      os << sizes[i] << ',' << sizes[i + 1] << ',' << format_number(d) << '\n';
      dist.push_back({{"n_coarse", sizes[i]}, {"n_fine", sizes[i + 1]}, {"relative_l2", d}});
    }
    dir.write("refine.csv", os.str());
    m["refinement"] = dist;
  }
  dir.manifest(std::move(m));
}

void cmd_baseline(const ExperimentConfig& c, const fs::path& out) {
  validate(c);
  if (c.kind == ProblemKind::Realize) throw ConfigError("baseline needs an inverse-problem config");
  OutputDir dir(out);
  const MeasurementData data = read_data_csv(out / "data.csv", c.grid.dim);
  const ForwardProblem problem = build_problem(c, data, c.grid.unknown_n);
  const Grid& g = problem.unknown_grid;
  const fs::path truth_path = out / "truth.csv";
  if (!fs::exists(truth_path)) throw ConfigError("missing " + truth_path.string() + " (run make-data first)");
  std::ifstream tin(truth_path);
  const Field truth = read_field_csv(tin, g);

  const auto ells = oracle::log_spaced(c.baseline.ell_min, c.baseline.ell_max, c.baseline.count);
  const auto table = oracle::constant_ell_baseline(problem, c.prior_sigma, ells, truth.values);
  std::ostringstream os;
  os << "ell,max_abs_error,rmse\n";
  for (const auto& r : table.rows) {
    os << format_number(r.ell) << ',' << format_number(r.max_abs_error) << ',' << format_number(r.rmse) << '\n';
  }
  dir.write("baseline.csv", os.str());

  auto estimate = [&](std::size_t row) {
    const auto& e = table.estimates[row];
    return Field(g, std::vector<double>(e.data(), e.data() + e.size()));
  };
  dir.field("baseline_min_max_abs.csv", estimate(table.argmin_max_abs));
  dir.field("baseline_min_rmse.csv", estimate(table.argmin_rmse));

  const PrecisionFactor L = assemble_precision_factor(g, Field(g, c.baseline.long_ell), c.prior_sigma);
  const Eigen::VectorXd long_est = oracle::conditional_mean(problem.A, problem.noise_std, problem.y, L);
  const Field long_field(g, std::vector<double>(long_est.data(), long_est.data() + long_est.size()));
  dir.field("baseline_long_ell.csv", long_field);
  const auto long_met = oracle::metrics(long_field.values, truth.values);

  auto row_json = [&](std::size_t i) {
    const auto& r = table.rows[i];
    return json{{"row", i}, {"ell", r.ell}, {"max_abs_error", r.max_abs_error}, {"rmse", r.rmse}};
  };
  json m = manifest_head(c, "baseline", c.data.seed);
  m["min_max_abs_error"] = row_json(table.argmin_max_abs);
  m["min_rmse"] = row_json(table.argmin_rmse);
  m["long_ell"] = {{"ell", c.baseline.long_ell}, {"max_abs_error", long_met.max_abs_error}, {"rmse", long_met.rmse}};
  dir.manifest(std::move(m));
}

void cmd_realize(const ExperimentConfig& c, const fs::path& out) {
  validate(c);
  OutputDir dir(out);
  const int n = c.grid.unknown_n;
  const int dim = c.grid.dim;
  const double h = c.grid.extent / (n - 1);
  const int pad = static_cast<int>(std::lround(c.realize.padding * (n - 1)));
  const int np = n + 2 * pad;
  const Grid padded = make_grid_spaced(dim, {np, dim == 2 ? np : 1}, h, c.grid.boundary);
  const Grid g = unknown_grid_for(c);

  std::vector<std::size_t> inner(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    auto [ix, iy] = g.axis_index(k);
    inner[k] = padded.index(ix + pad, dim == 2 ? iy + pad : 0);
  }
  auto crop = [&](const Field& f) {
    std::vector<double> v(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) v[k] = f[inner[k]];
    return Field(g, std::move(v));
  };

  Rng rng(c.mcmc.seed);
  const HyperModel hyper = build_hyper(c, padded);
  const Field u = sample_hyper(hyper, rng);
  const Field ell = apply_link(hyper.link(), u);
  PrecisionFactor factor = [&] {
    if (!c.realize.anisotropic) return assemble_precision_factor(padded, ell, c.prior_sigma);
    // The hyper field modulates both axes; ell1, ell2 fix their values at u = 0.
    const double g0 = link_value(hyper.link(), 0.0);
    AnisoSpec spec{Field(padded, 0.0), Field(padded, 0.0), Field(padded, c.realize.theta)};
    for (std::size_t k = 0; k < padded.size(); ++k) {
      spec.ell1[k] = c.realize.ell1 * ell[k] / g0;
      spec.ell2[k] = c.realize.ell2 * ell[k] / g0;
    }
    return assemble_anisotropic_factor(padded, spec, c.prior_sigma);
  }();

  dir.field("u.csv", crop(u));
  dir.field("ell.csv", crop(ell));
  for (std::size_t r = 0; r < c.realize.count; ++r) {
    dir.field("realization_" + std::to_string(r) + ".csv", crop(sample_realization(factor, rng)));
  }
  if (c.realize.dense_covariance) {
    const Eigen::MatrixXd C = oracle::dense_covariance(factor);
    std::ostringstream os;
    os << "row,col,value\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = 0; j < g.size(); ++j) {
        os << i << ',' << j << ',' << format_number(C(static_cast<Eigen::Index>(inner[i]), static_cast<Eigen::Index>(inner[j])))
           << '\n';
      }
    }
    dir.write("covariance.csv", os.str());
    std::ostringstream fo;
    write_factor_coo(fo, factor);
    dir.write("factor_padded.csv", fo.str());
  }
  if (c.output.emit_gnuplot) {
    std::ostringstream os;
    os << "set datafile separator ','\n";
    if (dim == 2) {
      os << "set view map\nset title 'realisation 0'\nsplot 'realization_0.csv' every ::1 using 2:3:4 with image notitle\n";
    } else {
      os << "set xlabel 'x'\nset key outside\nplot ";
      for (std::size_t r = 0; r < c.realize.count; ++r) {
        os << (r ? ", \\\n     " : "") << "'realization_" << r << ".csv' every ::1 using 2:3 with lines title 'v" << r << "'";
      }
      os << "\npause mouse close\n";
    }
    dir.write("plot_realizations.gp", os.str());
  }
  json m = manifest_head(c, "realize", c.mcmc.seed);
  m["padding_nodes_per_side"] = pad;
  m["hyper"] = describe(hyper.family());
  m["link"] = describe(hyper.link());
  dir.manifest(std::move(m));
}

}  // namespace nsm
