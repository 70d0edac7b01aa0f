#include "nsm/hyper.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nsm/error.hpp"

namespace nsm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kExpClamp = 700.0;

double cauchy_log_kernel(double scale, double x) { return std::log(scale / (scale * scale + x * x)); }

}  // namespace

void validate_link(const LinkMap& link) {
  std::visit(overloaded{
                 [](const ExpLink&) {},
                 [](const CauchyLink& l) {
                   if (!(l.a > 0 && l.b > 0 && l.c > 0 && l.d > 0)) {
                     throw ConfigError("cauchy link needs a, b, c, d > 0");
                   }
                 },
                 [](const BoundedExpLink& l) {
                   if (!(l.a > 0)) throw ConfigError("bounded_exp link needs a > 0");
                   if (!(l.b > 0 && l.b < 1)) throw ConfigError("bounded_exp link needs b in (0, 1)");
                   if (!(l.lower > 0 && l.lower < l.upper)) {
                     throw ConfigError("bounded_exp link needs 0 < lower < upper");
                   }
                 },
             },
             link);
}

double link_value(const LinkMap& link, double s) {
  return std::visit(overloaded{
                        [s](const ExpLink&) { return std::exp(std::clamp(s, -kExpClamp, kExpClamp)); },
                        [s](const CauchyLink& l) { return l.a / (l.b + l.c * std::abs(s)) + l.d; },
                        [s](const BoundedExpLink& l) {
                          double e = std::exp(std::min(l.a * std::abs(s), kExpClamp)) - l.b;
                          return std::clamp(e, l.lower, l.upper);
                        },
                    },
                    link);
}

Field apply_link(const LinkMap& link, const Field& u) {
  Field ell(u.grid);
  for (std::size_t i = 0; i < u.size(); ++i) ell[i] = link_value(link, u[i]);
  return ell;
}

HyperModel::HyperModel(const Grid& grid, HyperFamily family, LinkMap link)
    : grid_(grid), family_(std::move(family)), link_(std::move(link)) {
  validate_link(link_);
  std::visit(overloaded{
                 [this](const GaussianMatern& g) {
                   if (!(g.ell0 > 0) || !(g.sigma0 > 0)) throw ConfigError("gaussian hypermodel needs ell0, sigma0 > 0");
                   factor_ = assemble_precision_factor(grid_, Field(grid_, g.ell0), g.sigma0);
                 },
                 [this](const CauchyWalk& w) {
                   if (grid_.dim() != 1) throw ConfigError("cauchy walk hypermodel is 1-D only");
                   cauchy_scale_ = w.scale > 0 ? w.scale : grid_.h();
                 },
                 [this](const CauchyNoise& c) { cauchy_scale_ = c.scale > 0 ? c.scale : grid_.h(); },
             },
             family_);
}

Field sample_hyper(const HyperModel& model, Rng& rng) {
  const Grid& g = model.grid();
  return std::visit(overloaded{
                        [&](const GaussianMatern&) { return sample_realization(*model.factor(), rng); },
                        [&](const CauchyWalk&) {
                          Field u(g);
                          for (std::size_t j = 1; j < u.size(); ++j) u[j] = u[j - 1] + rng.cauchy(model.cauchy_scale());
                          return u;
                        },
                        [&](const CauchyNoise&) {
                          Field u(g);
                          for (double& x : u.values) x = rng.cauchy(model.cauchy_scale());
                          return u;
                        },
                    },
                    model.family());
}

double hyper_log_density(const HyperModel& model, const Field& u) {
  const double gamma = model.cauchy_scale();
  return std::visit(overloaded{
                        [&](const GaussianMatern&) {
                          double q = 0.0;
                          for (std::size_t m = 0; m < u.size(); ++m) {
                            double r = model.factor()->row_dot(m, u.values);
                            q += r * r;
                          }
                          return -0.5 * q;
                        },
                        [&](const CauchyWalk&) {
                          double s = 0.0;
                          for (std::size_t j = 1; j < u.size(); ++j) s += cauchy_log_kernel(gamma, u[j] - u[j - 1]);
                          return s;
                        },
                        [&](const CauchyNoise&) {
                          double s = 0.0;
                          for (double x : u.values) s += cauchy_log_kernel(gamma, x);
                          return s;
                        },
                    },
                    model.family());
}

double log_density_delta(const HyperModel& model, const Field& u, std::size_t node, double new_value) {
  const double old_value = u[node];
  const double gamma = model.cauchy_scale();
  return std::visit(
      overloaded{
          [&](const GaussianMatern&) {
            // Rows whose stencil contains `node` are the stencil of `node`.
            const PrecisionFactor& f = *model.factor();
            const double du = new_value - old_value;
            double delta = 0.0;
            for (const Neighbour& nb : stencil(model.grid(), node)) {
              if (nb.ghost()) continue;
              const auto m = static_cast<std::size_t>(nb.index);
              const double r_old = f.row_dot(m, u.values);
              const double r_new = r_old + f.row(m).at(static_cast<int>(node)) * du;
              delta -= 0.5 * (r_new - r_old) * (r_new + r_old);
            }
            return delta;
          },
          [&](const CauchyWalk&) {
            double delta = 0.0;
            if (node >= 1) {
              delta += cauchy_log_kernel(gamma, new_value - u[node - 1]) - cauchy_log_kernel(gamma, old_value - u[node - 1]);
            }
            if (node + 1 < u.size()) {
              delta += cauchy_log_kernel(gamma, u[node + 1] - new_value) - cauchy_log_kernel(gamma, u[node + 1] - old_value);
            }
            return delta;
          },
          [&](const CauchyNoise&) {
            return cauchy_log_kernel(gamma, new_value) - cauchy_log_kernel(gamma, old_value);
          },
      },
      model.family());
}

std::string describe(const HyperFamily& family) {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const GaussianMatern& g) { os << "gaussian(ell0=" << g.ell0 << ", sigma0=" << g.sigma0 << ")"; },
                 [&](const CauchyWalk& w) { os << "cauchy_walk(scale=" << w.scale << ")"; },
                 [&](const CauchyNoise& c) { os << "cauchy_noise(scale=" << c.scale << ")"; },
             },
             family);
  return os.str();
}

std::string describe(const LinkMap& link) {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const ExpLink&) { os << "exp"; },
                 [&](const CauchyLink& l) { os << "cauchy(a=" << l.a << ", b=" << l.b << ", c=" << l.c << ", d=" << l.d << ")"; },
                 [&](const BoundedExpLink& l) {
                   os << "bounded_exp(a=" << l.a << ", b=" << l.b << ", lower=" << l.lower << ", upper=" << l.upper << ")";
                 },
             },
             link);
  return os.str();
}

}  // namespace nsm
