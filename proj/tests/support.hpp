#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "mfgelec/mfgelec.hpp"

namespace support {

inline std::string source_path(const std::string& rel) { return std::string(MFGELEC_SOURCE_DIR) + "/" + rel; }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Random increasing supply curve through the origin or with a negative intercept.
inline mfgelec::SupplyCurve random_curve(std::mt19937_64& rng, double top_price, double intercept) {
  std::vector<double> p{0.0}, q{intercept};
  const std::size_t n = pick(rng, 1, 3);
  for (std::size_t k = 0; k < n; ++k) {
    p.push_back(top_price * static_cast<double>(k + 1) / static_cast<double>(n));
    q.push_back(q.back() + uniform(rng, 0.05, 2.0) * (p.back() - p[p.size() - 2]));
  }
  return {p, q};
}

inline mfgelec::TechnologySpec conventional_spec(std::mt19937_64& rng, std::size_t fuel) {
  mfgelec::TechnologySpec s;
  s.name = "c";
  s.kind = mfgelec::TechKind::conventional;
  s.fuel = mfgelec::FuelLink{fuel, uniform(rng, 1.0, 3.0)};
  s.mean_reversion = uniform(rng, 0.3, 2.0);
  s.level = uniform(rng, 2.0, 10.0);
  s.volatility = uniform(rng, 0.3, 1.5);
  s.offer_scale = uniform(rng, 2.0, 15.0);
  return s;
}

inline mfgelec::TechnologySpec renewable_spec(std::mt19937_64& rng) {
  mfgelec::TechnologySpec s;
  s.name = "r";
  s.kind = mfgelec::TechKind::renewable;
  s.mean_reversion = uniform(rng, 0.3, 2.0);
  s.level = uniform(rng, 0.2, 0.5);
  s.volatility = uniform(rng, 0.1, 0.4);
  return s;
}

/// Random market and clearing input with the given numbers of fuels and conventional technologies.
struct ClearingCase {
  mfgelec::Market market;
  mfgelec::ClearingInput input;
};

inline ClearingCase random_clearing_case(std::mt19937_64& rng, std::size_t fuels, std::size_t techs, bool short_supply) {
  ClearingCase c;
  c.market.price_cap = uniform(rng, 300.0, 3000.0);
  c.market.baseline = random_curve(rng, c.market.price_cap, 0.0);
  for (std::size_t k = 0; k < fuels; ++k) {
    mfgelec::FuelSpec f;
    f.name = "f" + std::to_string(k);
    f.emission_intensity = uniform(rng, 0.0, 0.4);
    f.supply = random_curve(rng, 100.0, -uniform(rng, 0.0, 50.0));
    c.market.fuels.push_back(f);
  }
  c.input.carbon_price = uniform(rng, 0.0, 100.0);
  double capacity = c.market.baseline(c.market.price_cap);
  for (std::size_t i = 0; i < techs; ++i) {
    mfgelec::ConventionalOffer o;
    o.fuel = pick(rng, 0, fuels - 1);
    o.units_per_mwh = uniform(rng, 1.0, 3.0);
    o.offer_scale = uniform(rng, 2.0, 15.0);
    const std::size_t n = pick(rng, 3, 8);
    for (std::size_t j = 0; j < n; ++j) {
      o.costs.push_back(uniform(rng, 0.0, 60.0));
      o.mass.push_back(uniform(rng, 0.0, 10.0));
      capacity += o.mass.back();
    }
    c.input.conventional.push_back(o);
  }
  c.input.renewable = uniform(rng, 0.0, 20.0);
  const double scale = short_supply ? uniform(rng, 1.05, 1.5) : uniform(rng, 0.2, 0.9);
  c.input.demand_peak = scale * (capacity + c.input.renewable);
  c.input.demand_offpeak = uniform(rng, 0.3, 1.0) * c.input.demand_peak;
  return c;
}

/// YAML text of a small two-technology scenario used by several tests.
inline std::string small_config(std::size_t steps = 8, std::size_t nodes = 6) {
  return "name: small\n"
         "horizon_years: 4\n"
         "time_steps: " + std::to_string(steps) + "\n"
         "start_year: 2020\n"
         "discount_rate_per_year: 0.05\n"
         "price_cap_eur_per_mwh: 500\n"
         "state_nodes: " + std::to_string(nodes) + "\n"
         "demand_gw:\n"
         "  peak: [[0, 30], [4, 34]]\n"
         "  offpeak: [[0, 20], [4, 22]]\n"
         "carbon_eur_per_t: [[0, 20], [4, 60]]\n"
         "baseline_supply_gw: [[0, 0], [50, 8], [500, 15]]\n"
         "fuels:\n"
         "  - name: gas\n"
         "    emission_t_per_unit: 0.2\n"
         "    supply: [[0, -100], [20, 30], [100, 300]]\n"
         "technologies:\n"
         "  - name: gas\n"
         "    kind: conventional\n"
         "    fuel: gas\n"
         "    fuel_units_per_mwh: 1.8\n"
         "    fixed_cost_eur_per_mw_year: 20000\n"
         "    capital_cost_eur_per_mw: 300000\n"
         "    build_time_years: 1\n"
         "    mean_reversion_per_year: 0.5\n"
         "    level: 5\n"
         "    volatility: 1.0\n"
         "    potential: {mass_gw: 15, density: {type: truncated_gamma, shape: 5, scale: 1}}\n"
         "    installed: {mass_gw: 10, age: {type: point, years: 1}, density: {type: truncated_gamma, shape: 5, scale: 1}}\n"
         "  - name: wind\n"
         "    kind: renewable\n"
         "    fixed_cost_eur_per_mw_year: 30000\n"
         "    capital_cost_eur_per_mw: 1200000\n"
         "    capital_decay_per_year: 0.05\n"
         "    mean_reversion_per_year: 1.0\n"
         "    level: 0.3\n"
         "    volatility: 0.3\n"
         "    potential: {mass_gw: 40, density: {type: beta, alpha: 6, beta: 14}}\n"
         "    installed: {mass_gw: 3, age: {type: point, years: 0}, density: {type: beta, alpha: 6, beta: 14}}\n"
         "solver:\n"
         "  max_iter: 200\n"
         "  schedule: simplicial\n";
}

inline mfgelec::LoadedConfig small_loaded(std::size_t steps = 8, std::size_t nodes = 6) {
  return mfgelec::load_text(small_config(steps, nodes), "small");
}

}  // namespace support
