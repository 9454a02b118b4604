#pragma once

#include <fmt/core.h>

#include <algorithm>
#include <cstddef>
#include <vector>

#include "mfgelec/clearing.hpp"
#include "mfgelec/errors.hpp"
#include "mfgelec/measure.hpp"
#include "mfgelec/model.hpp"
#include "mfgelec/parallel.hpp"

namespace mfgelec {

/// A scenario with all grids, operators and constraint systems built.
/// Not copyable: constraint systems refer to the technologies it owns.
class Problem {
 public:
  explicit Problem(Scenario sc) : scenario_(std::move(sc)), market_(market_from(scenario_)) {
    const auto& s = scenario_;
    market_.validate();
    if (s.time_steps == 0) throw ConfigError("time_steps must be positive");
    if (!(s.horizon > 0.0)) throw ConfigError("horizon must be positive");
    const std::size_t n = s.time_steps + 1;
    if (s.demand_peak.size() != n || s.demand_offpeak.size() != n || s.carbon_price.size() != n)
      throw ConfigError("demand and carbon-price paths must have time_steps + 1 samples");
    const std::size_t I = s.technologies.size();
    if (s.state_grids.size() != I || s.init_potential.size() != I || s.init_installed.size() != I)
      throw ConfigError("every technology needs a state grid and initial measures");
    techs_.reserve(I);
    for (std::size_t i = 0; i < I; ++i) {
      const auto& spec = s.technologies[i];
      if (spec.conventional() && spec.fuel->fuel >= s.fuels.size())
        throw ConfigError("technology '" + spec.name + "' references an unknown fuel");
      techs_.push_back(DiscreteTechnology::make(spec, s.state_grids[i], s.time_steps, s.dt()));
    }
    constraints_.reserve(I);
    for (std::size_t i = 0; i < I; ++i)
      constraints_.emplace_back(techs_[i], InitialMeasures{s.init_potential[i], s.init_installed[i]});
  }

  Problem(const Problem&) = delete;
  Problem& operator=(const Problem&) = delete;
  Problem(Problem&&) = default;

  const Scenario& scenario() const { return scenario_; }
  const Market& market() const { return market_; }
  std::size_t technologies() const { return techs_.size(); }
  std::size_t steps() const { return scenario_.time_steps; }
  const DiscreteTechnology& technology(std::size_t i) const { return techs_[i]; }
  const ConstraintSystem& constraints(std::size_t i) const { return constraints_[i]; }
  const InitialMeasures& initial(std::size_t i) const { return constraints_[i].initial(); }

  double initial_mass() const {
    double m = 0.0;
    for (const auto& c : constraints_) m += c.initial().potential_mass() + c.initial().installed_mass();
    return m;
  }

 private:
  Scenario scenario_;
  Market market_;
  std::vector<DiscreteTechnology> techs_;
  std::vector<ConstraintSystem> constraints_;
};

using FlowProfile = std::vector<MeasureFlow>;

/// Capacity-weighted occupation of technology i at time t, per state node.
inline std::vector<double> available_capacity(const Problem& p, const FlowProfile& flows, std::size_t i,
                                              std::size_t t) {
  const auto& tech = p.technology(i);
  std::vector<double> h(tech.grid.size(), 0.0);
  for (std::size_t a = 0; a < tech.ages.size(); ++a) {
    const double lam = tech.capacity[a];
    if (lam == 0.0) continue;
    const auto row = flows[i].standing_row(t, a);
    for (std::size_t x = 0; x < h.size(); ++x) h[x] += lam * row[x];
  }
  // Convex combinations can leave rounding-level negatives.
  for (double& v : h) v = std::max(v, 0.0);
  return h;
}

/// Renewable output of technology i at time t, GW.
inline double renewable_output(const Problem& p, const FlowProfile& flows, std::size_t i, std::size_t t) {
  const auto h = available_capacity(p, flows, i, t);
  const auto& nodes = p.technology(i).grid.nodes;
  double r = 0.0;
  for (std::size_t x = 0; x < h.size(); ++x) r += nodes[x] * h[x];
  return r;
}

inline ClearingInput clearing_input(const Problem& p, const FlowProfile& flows, std::size_t t) {
  const auto& sc = p.scenario();
  ClearingInput in;
  in.demand_peak = sc.demand_peak[t];
  in.demand_offpeak = sc.demand_offpeak[t];
  in.carbon_price = sc.carbon_price[t];
  for (std::size_t i = 0; i < p.technologies(); ++i) {
    const auto& tech = p.technology(i);
    if (tech.spec.conventional()) {
      in.conventional.push_back({tech.spec.fuel->fuel, tech.spec.fuel->units_per_mwh, tech.spec.offer_scale,
                                 tech.grid.nodes, available_capacity(p, flows, i, t)});
    } else {
      in.renewable += renewable_output(p, flows, i, t);
    }
  }
  return in;
}

inline PriceSystem clear_all(const Problem& p, const FlowProfile& flows, const ClearingOptions& opt = {}) {
  PriceSystem ps;
  ps.points.resize(p.steps() + 1);
  parallel_for(ps.size(), [&](std::size_t t) {
    try {
      ps[t] = clear(p.market(), clearing_input(p, flows, t), opt);
    } catch (const NumericalError& e) {
      throw NumericalError(fmt::format("time step {}: {}", t, e.what()), e.residual());
    }
  });
  return ps;
}

}  // namespace mfgelec
