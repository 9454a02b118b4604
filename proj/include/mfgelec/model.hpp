#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mfgelec/errors.hpp"
#include "mfgelec/grids.hpp"
#include "mfgelec/supply_curve.hpp"

namespace mfgelec {

inline constexpr double kInfiniteLifetime = std::numeric_limits<double>::infinity();
inline constexpr double kDefaultPeakFraction = 65.0 / 168.0;

enum class TechKind { conventional, renewable };

/// Fuel consumed by a conventional technology.
struct FuelLink {
  std::size_t fuel = 0;         ///< index into Scenario::fuels
  double units_per_mwh = 1.0;   ///< conversion ratio f_i
  friend bool operator==(const FuelLink&, const FuelLink&) = default;
};

struct TechnologySpec {
  std::string name;
  TechKind kind = TechKind::conventional;
  std::optional<FuelLink> fuel;  ///< conventional only

  double fixed_cost = 0.0;       ///< kappa, per MW per year
  double capital_cost = 0.0;     ///< K, per MW
  double scrap_value = 0.0;      ///< K tilde, per MW
  double capital_decay = 0.0;    ///< gamma, per year
  double build_time = 0.0;       ///< years
  double lifetime = kInfiniteLifetime;
  double ramp_width = 0.0;       ///< smoothing of the capacity profile, years

  double mean_reversion = 1.0;
  double level = 1.0;
  double volatility = 0.1;
  double offer_scale = 10.0;     ///< width of the offer ramp, EUR/MWh (conventional only)

  bool conventional() const { return kind == TechKind::conventional; }
  bool renewable() const { return kind == TechKind::renewable; }

  void validate() const {
    const std::string who = "technology '" + name + "': ";
    if (conventional()) {
      if (!fuel) throw ConfigError(who + "conventional technology needs a fuel");
      if (!(fuel->units_per_mwh > 0.0)) throw ConfigError(who + "fuel conversion ratio must be positive");
      if (!(level > 0.0)) throw ConfigError(who + "cost level must be positive");
      if (!(offer_scale > 0.0)) throw ConfigError(who + "offer scale must be positive");
    } else {
      if (fuel) throw ConfigError(who + "renewable technology carries no fuel");
      if (!(level > 0.0 && level < 1.0))
        throw ConfigError(who + "capacity-factor level must lie strictly inside (0, 1)");
    }
    if (fixed_cost < 0.0) throw ConfigError(who + "fixed cost must be nonnegative");
    if (scrap_value < 0.0) throw ConfigError(who + "scrap value must be nonnegative");
    if (capital_cost < scrap_value) throw ConfigError(who + "capital cost must be at least the scrap value");
    if (capital_decay < 0.0) throw ConfigError(who + "capital decay rate must be nonnegative");
    if (build_time < 0.0) throw ConfigError(who + "build time must be nonnegative");
    if (!(lifetime > build_time)) throw ConfigError(who + "lifetime must exceed build time");
    if (ramp_width < 0.0) throw ConfigError(who + "ramp width must be nonnegative");
    if (!(mean_reversion > 0.0)) throw ConfigError(who + "mean reversion must be positive");
    if (!(volatility > 0.0)) throw ConfigError(who + "volatility must be positive");
  }

  friend bool operator==(const TechnologySpec&, const TechnologySpec&) = default;
};

struct FuelSpec {
  std::string name;
  double emission_intensity = 0.0;  ///< tCO2 per fuel unit
  SupplyCurve supply;               ///< fuel units delivered at a given fuel price

  friend bool operator==(const FuelSpec&, const FuelSpec&) = default;
};

// Quintic smoothstep and its antiderivative on [0, 1].
namespace detail {
inline double smoothstep5(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}
inline double smoothstep5_derivative(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  const double v = u * (1.0 - u);
  return 30.0 * v * v;
}
inline double smoothstep5_integral(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 0.5 + (u - 1.0);
  const double u2 = u * u;
  return u2 * u2 * (2.5 + u * (-3.0 + u));
}
}  // namespace detail

/// Offer fraction F(x) = s(x / scale) with s the quintic smoothstep, and its
/// antiderivative G (the instantaneous gain).
class OfferFunction {
 public:
  explicit OfferFunction(double scale) : scale_(scale) {}

  double scale() const { return scale_; }
  double operator()(double margin) const { return detail::smoothstep5(margin / scale_); }
  double derivative(double margin) const {
    return detail::smoothstep5_derivative(margin / scale_) / scale_;
  }
  double gain(double margin) const { return scale_ * detail::smoothstep5_integral(margin / scale_); }

 private:
  double scale_;
};

inline double offer_fraction(const TechnologySpec& tech, double margin) {
  if (!tech.conventional()) throw InputError("offer_fraction requires a conventional technology");
  return OfferFunction(tech.offer_scale)(margin);
}

inline double gain(const TechnologySpec& tech, double margin) {
  if (!tech.conventional()) throw InputError("gain requires a conventional technology");
  return OfferFunction(tech.offer_scale).gain(margin);
}

/// lambda_i evaluated on the age slots.
struct CapacityProfile {
  std::vector<double> values;
  double operator[](std::size_t a) const { return values[a]; }
  std::size_t size() const { return values.size(); }
};

inline CapacityProfile capacity_profile(const TechnologySpec& tech, const AgeGrid& ages) {
  constexpr double eps = 1e-9;
  const double w = tech.ramp_width;
  const double top = ages.age(ages.size() - 1);
  if (ages.has_mature_bucket()) {
    if (top + eps < tech.build_time + w)
      throw ConfigError("age grid of '" + tech.name + "' is too short for its build time");
  } else if (top <= tech.build_time) {
    throw ConfigError("age grid of '" + tech.name + "' ends before construction completes");
  }

  CapacityProfile p;
  p.values.resize(ages.size());
  for (std::size_t a = 0; a < ages.size(); ++a) {
    const double age = ages.age(a);
    double v;
    if (ages.has_mature_bucket() && a + 1 == ages.size()) {
      v = 1.0;
    } else if (!ages.holds_mass(a)) {
      v = 0.0;
    } else if (w == 0.0) {
      v = (age + eps >= tech.build_time && age <= tech.lifetime + eps) ? 1.0 : 0.0;
    } else {
      const double rise = detail::smoothstep5((age - (tech.build_time - w)) / (2.0 * w));
      const double fall = std::isinf(tech.lifetime)
                              ? 1.0
                              : 1.0 - detail::smoothstep5((age - (tech.lifetime - w)) / (2.0 * w));
      v = rise * fall;
    }
    p.values[a] = v;
  }
  return p;
}

/// Market data and initial populations for one run.
struct Scenario {
  double horizon = 25.0;        ///< years
  std::size_t time_steps = 100;
  double start_year = 0.0;

  std::vector<TechnologySpec> technologies;
  std::vector<FuelSpec> fuels;

  // Sampled at time_steps + 1 grid times.
  std::vector<double> demand_peak;     ///< GW
  std::vector<double> demand_offpeak;  ///< GW
  std::vector<double> carbon_price;    ///< EUR/tCO2

  SupplyCurve baseline_supply;         ///< GW at a given electricity price
  double price_cap = 3000.0;           ///< EUR/MWh
  double discount_rate = 0.05;         ///< per year
  double peak_fraction = kDefaultPeakFraction;
  double hours_per_year = 8760.0;      ///< converts EUR/MWh gains into EUR/MW/year

  std::vector<StateGrid> state_grids;
  std::vector<std::vector<double>> init_potential;  ///< per technology, mass per state node
  std::vector<std::vector<double>> init_installed;  ///< per technology, [age slot][state node]

  double dt() const { return horizon / static_cast<double>(time_steps); }
  double time(std::size_t t) const { return dt() * static_cast<double>(t); }
  double offpeak_fraction() const { return 1.0 - peak_fraction; }

  AgeGrid age_grid(std::size_t tech) const {
    const auto& s = technologies[tech];
    return AgeGrid::for_plant(s.build_time, s.lifetime, s.ramp_width, dt());
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

}  // namespace mfgelec
