#pragma once

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mfgelec/errors.hpp"
#include "mfgelec/grids.hpp"
#include "mfgelec/measure.hpp"

namespace mfgelec {

/// Shape of a state distribution before scaling by its total mass.
struct DensitySpec {
  enum class Kind { point, truncated_gamma, beta, table, masses };
  Kind kind = Kind::point;
  double at = 0.0;                  ///< point
  double shape = 1.0, scale = 1.0;  ///< truncated_gamma
  double alpha = 1.0, beta = 1.0;   ///< beta on [support_lo, support_hi]
  double support_lo = 0.0, support_hi = 1.0;
  std::vector<double> weights;      ///< table: relative weights per node; masses: absolute node masses

  friend bool operator==(const DensitySpec&, const DensitySpec&) = default;
};

struct AgeProfileSpec {
  enum class Kind { point, uniform };
  Kind kind = Kind::point;
  double years = 0.0;           ///< point
  double from = 0.0, to = 0.0;  ///< uniform over the age nodes in [from, to]

  friend bool operator==(const AgeProfileSpec&, const AgeProfileSpec&) = default;
};

/// Probability weights per grid node (cells split at node midpoints). For
/// `masses` the stored node masses are returned unchanged.
inline std::vector<double> discretize_density(const DensitySpec& d, const StateGrid& grid) {
  const std::size_t n = grid.size();
  std::vector<double> w(n, 0.0);
  auto by_cdf = [&](auto&& cdf, double lo, double hi) {
    const double total = cdf(hi) - cdf(lo);
    if (!(total > 1e-12)) throw ConfigError("density has no mass on the state grid");
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::clamp(grid.cell_lo(i), lo, hi), b = std::clamp(grid.cell_hi(i), lo, hi);
      w[i] = (cdf(b) - cdf(a)) / total;
    }
  };
  switch (d.kind) {
    case DensitySpec::Kind::point:
      if (d.at < grid.lo() - 1e-12 || d.at > grid.hi() + 1e-12)
        throw ConfigError("point mass at " + std::to_string(d.at) + " lies outside the state grid");
      w[grid.nearest(d.at)] = 1.0;
      break;
    case DensitySpec::Kind::truncated_gamma: {
      if (!(d.shape > 0.0 && d.scale > 0.0)) throw ConfigError("gamma shape and scale must be positive");
      if (grid.lo() < 0.0) throw ConfigError("gamma density needs a state grid within [0, inf)");
      const boost::math::gamma_distribution<double> g(d.shape, d.scale);
      by_cdf([&](double x) { return x <= 0.0 ? 0.0 : boost::math::cdf(g, x); }, grid.lo(), grid.hi());
      break;
    }
    case DensitySpec::Kind::beta: {
      if (!(d.alpha > 0.0 && d.beta > 0.0)) throw ConfigError("beta parameters must be positive");
      if (!(d.support_hi > d.support_lo)) throw ConfigError("beta support must be a nonempty interval");
      if (d.support_lo < grid.lo() - 1e-12 || d.support_hi > grid.hi() + 1e-12)
        throw ConfigError("beta support lies outside the state grid");
      const boost::math::beta_distribution<double> b(d.alpha, d.beta);
      const double lo = d.support_lo, len = d.support_hi - d.support_lo;
      by_cdf([&](double x) { return boost::math::cdf(b, std::clamp((x - lo) / len, 0.0, 1.0)); }, lo, d.support_hi);
      break;
    }
    case DensitySpec::Kind::table:
    case DensitySpec::Kind::masses: {
      if (d.weights.size() != n)
        throw ConfigError("density table has " + std::to_string(d.weights.size()) + " entries for a grid of " +
                          std::to_string(n) + " nodes");
      double s = 0.0;
      for (double v : d.weights) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("density table entries must be nonnegative");
        s += v;
      }
      if (d.kind == DensitySpec::Kind::masses) return d.weights;
      if (!(s > 0.0)) throw ConfigError("density table has zero total weight");
      for (std::size_t i = 0; i < n; ++i) w[i] = d.weights[i] / s;
      break;
    }
  }
  return w;
}

/// Probability weights per age slot.
inline std::vector<double> discretize_ages(const AgeProfileSpec& p, const AgeGrid& ages) {
  std::vector<double> w(ages.size(), 0.0);
  if (p.kind == AgeProfileSpec::Kind::point) {
    w[ages.slot_for_age(p.years)] = 1.0;
    return w;
  }
  if (p.from < 0.0 || p.to < p.from) throw ConfigError("uniform age range must satisfy 0 <= from <= to");
  std::vector<std::size_t> slots;
  for (std::size_t k = 0;; ++k) {
    const double a = p.from + ages.step() * static_cast<double>(k);
    if (a > p.to + 1e-9 * ages.step()) break;
    slots.push_back(ages.slot_for_age(a));
  }
  const double share = 1.0 / static_cast<double>(slots.size());
  for (auto s : slots) w[s] += share;
  return w;
}

/// Configured mass and shape of one technology's initial populations.
struct InitialMeasureSpec {
  double potential_mass = 0.0;
  DensitySpec potential_density;
  double installed_mass = 0.0;
  AgeProfileSpec installed_ages;
  DensitySpec installed_density;
  std::vector<std::vector<double>> installed_table;  ///< explicit [age][state] masses; overrides the above

  friend bool operator==(const InitialMeasureSpec&, const InitialMeasureSpec&) = default;
};

inline InitialMeasures discretize_initials(const InitialMeasureSpec& spec, const StateGrid& grid, const AgeGrid& ages) {
  const std::size_t X = grid.size(), A = ages.size();
  InitialMeasures m = InitialMeasures::zero({1, A, X});
  if (spec.potential_mass < 0.0 || spec.installed_mass < 0.0) throw ConfigError("initial masses must be nonnegative");

  if (spec.potential_density.kind == DensitySpec::Kind::masses) {
    m.potential = discretize_density(spec.potential_density, grid);
  } else if (spec.potential_mass > 0.0) {
    const auto w = discretize_density(spec.potential_density, grid);
    for (std::size_t x = 0; x < X; ++x) m.potential[x] = spec.potential_mass * w[x];
  }

  if (!spec.installed_table.empty()) {
    if (spec.installed_table.size() != A) throw ConfigError("installed table must have one row per age slot");
    for (std::size_t a = 0; a < A; ++a) {
      if (spec.installed_table[a].size() != X) throw ConfigError("installed table rows must match the state grid");
      for (std::size_t x = 0; x < X; ++x) {
        const double v = spec.installed_table[a][x];
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("installed table entries must be nonnegative");
        m.installed[a * X + x] = v;
      }
    }
  } else if (spec.installed_mass > 0.0) {
    const auto wa = discretize_ages(spec.installed_ages, ages);
    const auto wx = discretize_density(spec.installed_density, grid);
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t x = 0; x < X; ++x) m.installed[a * X + x] = spec.installed_mass * wa[a] * wx[x];
    if (!ages.holds_mass(A - 1))
      for (std::size_t x = 0; x < X; ++x)
        if (m.installed[(A - 1) * X + x] > 0.0) throw ConfigError("initial plants placed in the decommission slot");
  }
  return m;
}

}  // namespace mfgelec
