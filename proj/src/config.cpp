#include "nsm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "nsm/csv.hpp"
#include "nsm/error.hpp"

namespace nsm {

std::string_view kind_name(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::Interp1d: return "interp1d";
    case ProblemKind::Diff1d: return "diff1d";
    case ProblemKind::Interp2d: return "interp2d";
    case ProblemKind::Realize: return "realize";
  }
  return "?";
}

ProblemKind parse_kind(std::string_view name) {
  for (auto k : {ProblemKind::Interp1d, ProblemKind::Diff1d, ProblemKind::Interp2d, ProblemKind::Realize}) {
    if (kind_name(k) == name) return k;
  }
  throw ConfigError("unknown problem kind '" + std::string(name) + "' (interp1d, diff1d, interp2d, realize)");
}

HyperFamily HyperConfig::family_value() const {
  if (family == "gaussian") return GaussianMatern{ell0, sigma0};
  if (family == "cauchy_walk") return CauchyWalk{scale};
  if (family == "cauchy_noise") return CauchyNoise{scale};
  throw ConfigError("unknown hyper family '" + family + "' (gaussian, cauchy_walk, cauchy_noise)");
}

LinkMap HyperConfig::link_value() const {
  if (link == "exp") return ExpLink{};
  if (link == "cauchy") return cauchy;
  if (link == "bounded_exp") return bounded;
  throw ConfigError("unknown link '" + link + "' (exp, cauchy, bounded_exp)");
}

ChainConfig ExperimentConfig::chain_config() const {
  ChainConfig c;
  c.iterations = mcmc.iterations;
  c.burn_in = mcmc.burn_in;
  c.thin = mcmc.thin;
  c.seed = mcmc.seed;
  c.adapt_interval = mcmc.adapt_interval;
  c.initial_scale = mcmc.initial_scale;
  c.det_ratio = mcmc.det_ratio;
  c.window_radius = mcmc.window_radius;
  c.trace_nodes = output.trace_nodes;
  c.store_samples = !output.kde_nodes.empty();
  // Woodbury updates only pay off when a fresh factorisation is expensive.
  c.refresh_limit = grid.dim == 1 ? 1 : 256;
  return c;
}

ExperimentConfig default_config(ProblemKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ProblemKind::Interp1d:
      break;
    case ProblemKind::Diff1d:
      c.grid.unknown_n = 201;
      c.grid.measurement_n = 101;
      c.data.noise_std = 0.03;
      break;
    case ProblemKind::Interp2d:
      c.grid.dim = 2;
      c.grid.unknown_n = 81;
      c.grid.measurement_n = 41;
      c.grid.extent = 1.0;
      c.data.noise_std = 0.025;
      c.hyper.family = "gaussian";
      c.hyper.ell0 = 0.1;
      c.hyper.sigma0 = 1.0;
      c.hyper.link = "cauchy";
      c.hyper.cauchy = CauchyLink{0.1, 1.0, 1.0, 0.005};
      c.mcmc.iterations = 2000;
      c.mcmc.burn_in = 1000;
      break;
    case ProblemKind::Realize:
      c.grid.unknown_n = 500;
      c.grid.measurement_n = 0;
      break;
  }
  return c;
}

namespace {

std::string where(std::string_view source, const toml::source_region& r) {
  std::ostringstream os;
  os << source << ':' << r.begin.line << ':' << r.begin.column;
  return os.str();
}

class Reader {
 public:
  Reader(std::string_view source, const toml::table& root) : source_(source), root_(root) {}

  const toml::table* table(std::string_view name) {
    known_tables_.insert(std::string(name));
    const toml::node* n = root_.get(name);
    if (!n) return nullptr;
    if (!n->is_table()) fail(*n, "'" + std::string(name) + "' must be a table");
    return n->as_table();
  }

  void number(const toml::table* t, std::string_view key, double& out) {
    if (const toml::node* n = lookup(t, key)) {
      if (auto v = n->value<double>()) {
        out = *v;
      } else {
        fail(*n, qualified(key) + " must be a number");
      }
    }
  }

  template <class Int>
  void integer(const toml::table* t, std::string_view key, Int& out) {
    if (const toml::node* n = lookup(t, key)) {
      auto v = n->as_integer();
      if (!v) fail(*n, qualified(key) + " must be an integer");
      const std::int64_t x = v->get();
      if constexpr (std::is_unsigned_v<Int>) {
        if (x < 0) fail(*n, qualified(key) + " must be non-negative");
      }
      out = static_cast<Int>(x);
    }
  }

  void boolean(const toml::table* t, std::string_view key, bool& out) {
    if (const toml::node* n = lookup(t, key)) {
      auto v = n->value<bool>();
      if (!v) fail(*n, qualified(key) + " must be true or false");
      out = *v;
    }
  }

  template <class Int>
  void integer_list(const toml::table* t, std::string_view key, std::vector<Int>& out) {
    if (const toml::node* n = lookup(t, key)) {
      const toml::array* a = n->as_array();
      if (!a) fail(*n, qualified(key) + " must be an array of integers");
      out.clear();
      for (const toml::node& e : *a) {
        auto v = e.value<std::int64_t>();
        if (!v || *v < 0) fail(e, qualified(key) + " entries must be non-negative integers");
        out.push_back(static_cast<Int>(*v));
      }
    }
  }

  template <class F>
  void with_node(const toml::table* t, std::string_view key, F&& f) {
    if (const toml::node* n = lookup(t, key)) {
      try {
        f(*n);
      } catch (const ConfigError& e) {
        fail(*n, e.what());
      }
    }
  }

  // Rejects keys and tables nobody asked for.
  void finish() {
    for (const auto& [k, n] : root_) {
      const std::string key(k.str());
      if (n.is_table()) {
        if (!known_tables_.count(key)) fail(k.source(), "unknown table [" + key + "]");
        for (const auto& [k2, n2] : *n.as_table()) {
          const std::string full = key + "." + std::string(k2.str());
          if (!known_keys_.count(full)) fail(k2.source(), "unknown key '" + full + "'");
        }
      } else if (!known_keys_.count(key)) {
        fail(k.source(), "unknown key '" + key + "'");
      }
    }
  }

  [[noreturn]] void fail(const toml::node& n, const std::string& msg) const { fail(n.source(), msg); }
  [[noreturn]] void fail(const toml::source_region& at, const std::string& msg) const {
    throw ConfigError(where(source_, at) + ": " + msg);
  }

 private:
  const toml::node* lookup(const toml::table* t, std::string_view key) {
    current_ = pending_;
    known_keys_.insert(qualified(key));
    if (!t) return nullptr;
    return t->get(key);
  }

  std::string qualified(std::string_view key) const {
    return current_.empty() ? std::string(key) : current_ + "." + std::string(key);
  }

 public:
  // Table whose keys are being read; empty for top-level keys.
  std::string pending_;

 private:
  std::string_view source_;
  const toml::table& root_;
  std::set<std::string> known_tables_;
  std::set<std::string> known_keys_;
  std::string current_;
};

}  // namespace

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ':' << e.source().begin.line << ':' << e.source().begin.column << ": "
       << e.description();
    throw ConfigError(os.str());
  }
  Reader r(source, root);

  ProblemKind kind = ProblemKind::Interp1d;
  r.with_node(&root, "kind", [&](const toml::node& n) {
    auto v = n.value<std::string>();
    if (!v) throw ConfigError("kind must be a string");
    kind = parse_kind(*v);
  });
  ExperimentConfig c = default_config(kind);

  auto section = [&](std::string_view name) {
    r.pending_ = std::string(name);
    return r.table(name);
  };

  const toml::table* g = section("grid");
  r.integer(g, "dim", c.grid.dim);
  r.integer(g, "unknown_n", c.grid.unknown_n);
  r.integer(g, "measurement_n", c.grid.measurement_n);
  r.number(g, "extent", c.grid.extent);
  r.with_node(g, "boundary", [&](const toml::node& n) {
    auto v = n.value<std::string>();
    if (v && *v == "periodic") {
      c.grid.boundary = Boundary::Periodic;
    } else if (v && *v == "dirichlet") {
      c.grid.boundary = Boundary::Dirichlet;
    } else {
      throw ConfigError("grid.boundary must be \"periodic\" or \"dirichlet\"");
    }
  });

  const toml::table* d = section("data");
  r.number(d, "noise_std", c.data.noise_std);
  r.integer(d, "seed", c.data.seed);

  const toml::table* p = section("prior");
  r.number(p, "sigma", c.prior_sigma);

  const toml::table* h = section("hyper");
  r.with_node(h, "family", [&](const toml::node& n) {
    auto v = n.value<std::string>();
    if (!v) throw ConfigError("hyper.family must be a string");
    c.hyper.family = *v;
    c.hyper.family_value();
  });
  r.number(h, "ell0", c.hyper.ell0);
  r.number(h, "sigma0", c.hyper.sigma0);
  r.number(h, "scale", c.hyper.scale);
  r.with_node(h, "link", [&](const toml::node& n) {
    auto v = n.value<std::string>();
    if (!v) throw ConfigError("hyper.link must be a string");
    c.hyper.link = *v;
    c.hyper.link_value();
  });
  r.number(h, "cauchy_a", c.hyper.cauchy.a);
  r.number(h, "cauchy_b", c.hyper.cauchy.b);
  r.number(h, "cauchy_c", c.hyper.cauchy.c);
  r.number(h, "cauchy_d", c.hyper.cauchy.d);
  r.number(h, "bounded_a", c.hyper.bounded.a);
  r.number(h, "bounded_b", c.hyper.bounded.b);
  r.number(h, "bounded_lower", c.hyper.bounded.lower);
  r.number(h, "bounded_upper", c.hyper.bounded.upper);

  const toml::table* m = section("mcmc");
  r.integer(m, "iterations", c.mcmc.iterations);
  r.integer(m, "burn_in", c.mcmc.burn_in);
  r.integer(m, "thin", c.mcmc.thin);
  r.integer(m, "seed", c.mcmc.seed);
  r.integer(m, "adapt_interval", c.mcmc.adapt_interval);
  r.number(m, "initial_scale", c.mcmc.initial_scale);
  r.integer(m, "window_radius", c.mcmc.window_radius);
  r.with_node(m, "det_ratio", [&](const toml::node& n) {
    auto v = n.value<std::string>();
    if (v && *v == "exact") {
      c.mcmc.det_ratio = DetRatioMode::Exact;
    } else if (v && *v == "windowed") {
      c.mcmc.det_ratio = DetRatioMode::Windowed;
    } else {
      throw ConfigError("mcmc.det_ratio must be \"exact\" or \"windowed\"");
    }
  });

  const toml::table* o = section("output");
  r.integer_list(o, "trace_nodes", c.output.trace_nodes);
  r.integer_list(o, "kde_nodes", c.output.kde_nodes);
  r.integer_list(o, "refine", c.output.refine);
  r.boolean(o, "store_chains", c.output.store_chains);
  r.boolean(o, "emit_gnuplot", c.output.emit_gnuplot);

  const toml::table* b = section("baseline");
  r.number(b, "ell_min", c.baseline.ell_min);
  r.number(b, "ell_max", c.baseline.ell_max);
  r.integer(b, "count", c.baseline.count);
  r.number(b, "long_ell", c.baseline.long_ell);

  const toml::table* z = section("realize");
  r.integer(z, "count", c.realize.count);
  r.number(z, "padding", c.realize.padding);
  r.boolean(z, "anisotropic", c.realize.anisotropic);
  r.number(z, "ell1", c.realize.ell1);
  r.number(z, "ell2", c.realize.ell2);
  r.number(z, "theta", c.realize.theta);
  r.boolean(z, "dense_covariance", c.realize.dense_covariance);

  r.pending_.clear();
  r.finish();

  try {
    validate(c);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

void validate(const ExperimentConfig& c) {
  require(c.grid.dim == 1 || c.grid.dim == 2, "grid.dim must be 1 or 2");
  require(c.grid.unknown_n >= 3, "grid.unknown_n must be at least 3");
  require(c.grid.extent > 0, "grid.extent must be positive");
  require(c.prior_sigma > 0, "prior.sigma must be positive");
  if (c.kind == ProblemKind::Interp2d) require(c.grid.dim == 2, "interp2d needs grid.dim = 2");
  if (c.kind == ProblemKind::Interp1d || c.kind == ProblemKind::Diff1d) {
    require(c.grid.dim == 1, std::string(kind_name(c.kind)) + " needs grid.dim = 1");
  }
  if (c.kind != ProblemKind::Realize) {
    require(c.grid.measurement_n >= 2, "grid.measurement_n must be at least 2");
    require(c.data.noise_std > 0, "data.noise_std must be positive");
    require(c.mcmc.iterations > c.mcmc.burn_in, "mcmc.iterations must exceed mcmc.burn_in");
    require(c.mcmc.thin >= 1, "mcmc.thin must be at least 1");
    require(c.mcmc.initial_scale > 0, "mcmc.initial_scale must be positive");
    require(c.mcmc.window_radius >= 1, "mcmc.window_radius must be at least 1");
  }
  if (c.kind == ProblemKind::Interp1d || c.kind == ProblemKind::Interp2d) {
    const int nu = c.grid.unknown_n - 1;
    const int nm = c.grid.measurement_n - 1;
    require(nm <= nu && nu % nm == 0,
            "measurement nodes must coincide with unknown nodes: (unknown_n - 1) must be a multiple of "
            "(measurement_n - 1)");
  }
  if (c.kind == ProblemKind::Diff1d) {
    require(c.data.noise_std <= 0.1,
            "differentiation is unstable at this noise level: data.noise_std must be <= 0.1");
  }
  for (int n : c.output.refine) require(n >= 3, "output.refine entries must be at least 3");
  for (std::size_t n : c.output.trace_nodes) {
    require(n < static_cast<std::size_t>(c.grid.unknown_n) * (c.grid.dim == 2 ? c.grid.unknown_n : 1),
            "output.trace_nodes entry " + std::to_string(n) + " is outside the unknown grid");
  }
  for (std::size_t n : c.output.kde_nodes) {
    require(n < static_cast<std::size_t>(c.grid.unknown_n) * (c.grid.dim == 2 ? c.grid.unknown_n : 1),
            "output.kde_nodes entry " + std::to_string(n) + " is outside the unknown grid");
  }
  require(c.baseline.ell_min > 0 && c.baseline.ell_max >= c.baseline.ell_min && c.baseline.count >= 1,
          "baseline needs 0 < ell_min <= ell_max and count >= 1");
  require(c.baseline.long_ell > 0, "baseline.long_ell must be positive");
  require(c.realize.padding >= 0 && c.realize.padding <= 2, "realize.padding must lie in [0, 2]");
  require(c.realize.ell1 > 0 && c.realize.ell2 > 0, "realize.ell1 and realize.ell2 must be positive");
  if (c.realize.anisotropic) require(c.grid.dim == 2, "anisotropic realisations need grid.dim = 2");

  const HyperFamily fam = c.hyper.family_value();
  validate_link(c.hyper.link_value());
  if (std::holds_alternative<GaussianMatern>(fam)) {
    require(c.hyper.ell0 > 0 && c.hyper.sigma0 > 0, "hyper.ell0 and hyper.sigma0 must be positive");
  }
  if (std::holds_alternative<CauchyWalk>(fam)) require(c.grid.dim == 1, "cauchy_walk is defined in 1-D only");
}

namespace {

std::string num(double x) {
  std::string s = format_number(x);
  if (s.find_first_of(".eEni") == std::string::npos) s += ".0";
  return s;
}

template <class T>
std::string list(const std::vector<T>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s + "]";
}

std::string flag(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string to_toml(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "kind = \"" << kind_name(c.kind) << "\"\n\n";
  os << "[grid]\n"
     << "dim = " << c.grid.dim << '\n'
     << "unknown_n = " << c.grid.unknown_n << '\n'
     << "measurement_n = " << c.grid.measurement_n << '\n'
     << "extent = " << num(c.grid.extent) << '\n'
     << "boundary = \"" << (c.grid.boundary == Boundary::Periodic ? "periodic" : "dirichlet") << "\"\n\n";
  os << "[data]\n"
     << "noise_std = " << num(c.data.noise_std) << '\n'
     << "seed = " << c.data.seed << "\n\n";
  os << "[prior]\n"
     << "sigma = " << num(c.prior_sigma) << "\n\n";
  os << "[hyper]\n"
     << "family = \"" << c.hyper.family << "\"\n"
     << "ell0 = " << num(c.hyper.ell0) << '\n'
     << "sigma0 = " << num(c.hyper.sigma0) << '\n'
     << "scale = " << num(c.hyper.scale) << '\n'
     << "link = \"" << c.hyper.link << "\"\n"
     << "cauchy_a = " << num(c.hyper.cauchy.a) << '\n'
     << "cauchy_b = " << num(c.hyper.cauchy.b) << '\n'
     << "cauchy_c = " << num(c.hyper.cauchy.c) << '\n'
     << "cauchy_d = " << num(c.hyper.cauchy.d) << '\n'
     << "bounded_a = " << num(c.hyper.bounded.a) << '\n'
     << "bounded_b = " << num(c.hyper.bounded.b) << '\n'
     << "bounded_lower = " << num(c.hyper.bounded.lower) << '\n'
     << "bounded_upper = " << num(c.hyper.bounded.upper) << "\n\n";
  os << "[mcmc]\n"
     << "iterations = " << c.mcmc.iterations << '\n'
     << "burn_in = " << c.mcmc.burn_in << '\n'
     << "thin = " << c.mcmc.thin << '\n'
     << "seed = " << c.mcmc.seed << '\n'
     << "adapt_interval = " << c.mcmc.adapt_interval << '\n'
     << "initial_scale = " << num(c.mcmc.initial_scale) << '\n'
     << "det_ratio = \"" << (c.mcmc.det_ratio == DetRatioMode::Exact ? "exact" : "windowed") << "\"\n"
     << "window_radius = " << c.mcmc.window_radius << "\n\n";
  os << "[output]\n"
     << "trace_nodes = " << list(c.output.trace_nodes) << '\n'
     << "kde_nodes = " << list(c.output.kde_nodes) << '\n'
     << "refine = " << list(c.output.refine) << '\n'
     << "store_chains = " << flag(c.output.store_chains) << '\n'
     << "emit_gnuplot = " << flag(c.output.emit_gnuplot) << "\n\n";
  os << "[baseline]\n"
     << "ell_min = " << num(c.baseline.ell_min) << '\n'
     << "ell_max = " << num(c.baseline.ell_max) << '\n'
     << "count = " << c.baseline.count << '\n'
     << "long_ell = " << num(c.baseline.long_ell) << "\n\n";
  os << "[realize]\n"
     << "count = " << c.realize.count << '\n'
     << "padding = " << num(c.realize.padding) << '\n'
     << "anisotropic = " << flag(c.realize.anisotropic) << '\n'
     << "ell1 = " << num(c.realize.ell1) << '\n'
     << "ell2 = " << num(c.realize.ell2) << '\n'
     << "theta = " << num(c.realize.theta) << '\n'
     << "dense_covariance = " << flag(c.realize.dense_covariance) << '\n';
  return os.str();
}

}  // namespace nsm
