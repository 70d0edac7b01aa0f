#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>

#include "nsm/grid.hpp"
#include "nsm/random.hpp"
#include "nsm/spde.hpp"

namespace nsm {

// Link maps g: latent value s -> length-scale g(s) > 0.

struct ExpLink {};

// g(s) = a / (b + c|s|) + d, range (d, a/b + d].
struct CauchyLink {
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;
  double d = 0.05;
};

// g(s) = clamp(exp(a|s|) - b, lower, upper), range [lower, upper].
// lower = 1 - b makes g(0) the lower bound.
struct BoundedExpLink {
  double a = 1.0;
  double b = 0.99;
  double lower = 0.01;
  double upper = 5.0;
};

using LinkMap = std::variant<ExpLink, CauchyLink, BoundedExpLink>;

/// Throws ConfigError on parameters outside the documented ranges.
void validate_link(const LinkMap& link);
double link_value(const LinkMap& link, double s);
Field apply_link(const LinkMap& link, const Field& u);

// Hyperprior families for the latent field u.

/// Stationary Matérn field with constant length-scale ell0 and scale sigma0.
struct GaussianMatern {
  double ell0 = 1.0;
  double sigma0 = 1.0;
};

/// 1-D walk with i.i.d. Cauchy(scale, 0) increments, anchored at u(0) = 0.
/// A nonpositive scale means "use the grid spacing h".
struct CauchyWalk {
  double scale = 0.0;
};

/// i.i.d. Cauchy(scale, 0) per node. A nonpositive scale means h.
struct CauchyNoise {
  double scale = 0.0;
};

using HyperFamily = std::variant<GaussianMatern, CauchyWalk, CauchyNoise>;

/// A hyperprior bound to a grid together with its link map.
class HyperModel {
 public:
  HyperModel(const Grid& grid, HyperFamily family, LinkMap link);

  const Grid& grid() const { return grid_; }
  const HyperFamily& family() const { return family_; }
  const LinkMap& link() const { return link_; }
  // Effective Cauchy scale (walk increments or per-node noise).
  double cauchy_scale() const { return cauchy_scale_; }
  // Precision factor of the Gaussian family; empty for Cauchy families.
  const std::optional<PrecisionFactor>& factor() const { return factor_; }

 private:
  Grid grid_;
  HyperFamily family_;
  LinkMap link_;
  double cauchy_scale_ = 0.0;
  std::optional<PrecisionFactor> factor_;
};

/// Draws u from the hyperprior.
Field sample_hyper(const HyperModel& model, Rng& rng);

/// Unnormalised log density of u (constants dropped).
double hyper_log_density(const HyperModel& model, const Field& u);

/// log D(u') - log D(u) where u' equals u except u'[node] = new_value.
/// Touches only the terms that involve `node`.
double log_density_delta(const HyperModel& model, const Field& u, std::size_t node, double new_value);

std::string describe(const HyperFamily& family);
std::string describe(const LinkMap& link);

}  // namespace nsm
