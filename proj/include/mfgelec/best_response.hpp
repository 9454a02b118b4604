#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "mfgelec/clearing.hpp"
#include "mfgelec/errors.hpp"
#include "mfgelec/lp.hpp"
#include "mfgelec/measure.hpp"
#include "mfgelec/model.hpp"
#include "mfgelec/reward.hpp"
#include "mfgelec/staged_lp.hpp"

namespace mfgelec {

/// Price-dependent profit per unit of available capacity and per year at
/// each state node, before fixed costs.
inline std::vector<double> yearly_gain(const DiscreteTechnology& tech, const PricePoint& p, double carbon_price,
                                       const Scenario& sc) {
  const auto& spec = tech.spec;
  const double H = sc.hours_per_year, cp = sc.peak_fraction, cop = sc.offpeak_fraction();
  std::vector<double> g(tech.grid.size());
  if (spec.conventional()) {
    const auto& link = *spec.fuel;
    if (link.fuel >= p.fuel.size()) throw InputError("price system lacks the fuel of '" + spec.name + "'");
    const double e = sc.fuels.at(link.fuel).emission_intensity;
    const double variable = link.units_per_mwh * e * carbon_price + link.units_per_mwh * p.fuel[link.fuel];
    const OfferFunction F(spec.offer_scale);
    for (std::size_t x = 0; x < g.size(); ++x) {
      const double z = tech.grid.nodes[x];
      g[x] = H * (cp * F.gain(p.peak - variable - z) + cop * F.gain(p.offpeak - variable - z));
    }
  } else {
    const double avg = cp * p.peak + cop * p.offpeak;
    for (std::size_t x = 0; x < g.size(); ++x) g[x] = H * avg * tech.grid.nodes[x];
  }
  return g;
}

/// Running rewards are left-endpoint: the cell (t, a, x) earns the
/// discounted per-year profit at time t_k times dt. Entry costs and scrap
/// values use the capital discount rate rho + gamma at the decision time.
inline RewardField assemble_reward(const DiscreteTechnology& tech, const PriceSystem& prices, const Scenario& sc) {
  const FlowShape s = tech.shape();
  if (prices.size() != s.steps + 1)
    throw InputError("price system has " + std::to_string(prices.size()) + " points, expected " +
                     std::to_string(s.steps + 1));
  if (sc.carbon_price.size() != s.steps + 1) throw InputError("carbon price path does not match the time grid");
  const auto& spec = tech.spec;
  const double dt = tech.dt;

  RewardField r = RewardField::zero(s);
  for (std::size_t t = 0; t <= s.steps; ++t) {
    const double time = dt * static_cast<double>(t);
    const double capital = std::exp(-(sc.discount_rate + spec.capital_decay) * time);
    for (std::size_t a = 0; a < s.ages; ++a)
      for (std::size_t x = 0; x < s.states; ++x) r.scrap_at(t, a, x) = spec.scrap_value * capital;
    if (t == s.steps) break;

    for (std::size_t x = 0; x < s.states; ++x) r.entry_at(t, x) = -spec.capital_cost * capital;

    const double disc = std::exp(-sc.discount_rate * time);
    const auto per_year = yearly_gain(tech, prices[t], sc.carbon_price[t], sc);
    for (std::size_t a = 0; a < s.ages; ++a) {
      const double lam = tech.capacity[a];
      for (std::size_t x = 0; x < s.states; ++x)
        r.running_at(t, a, x) = disc * lam * (per_year[x] - spec.fixed_cost) * dt;
    }
  }
  return r;
}

struct BestResponse {
  MeasureFlow flow;
  double objective = 0.0;
  LpSolution lp;
};

inline BestResponse solve_best_response(const ConstraintSystem& cs, const RewardField& reward,
                                        const LpBackend& backend) {
  reward.check(cs.layout().shape());
  BestResponse out;
  if (backend.structured()) {
    out.lp = backend.solve_stopping(cs, reward);
  } else {
    const auto lp = linear_program(cs, reward);
    out.lp = backend.solve(lp);
    if (out.lp.status != LpStatus::optimal)
      throw InternalError(std::string("best-response LP ended ") + to_string(out.lp.status) +
                          "; the stopping constraints are always feasible and bounded");
  }
  out.flow = cs.layout().unpack(out.lp.x);
  out.objective = reward.value(out.flow);
  return out;
}

inline std::unique_ptr<LpBackend> make_backend(const std::string& name) {
  if (name == "staged") return std::make_unique<StagedBackend>();
  if (name == "simplex") return std::make_unique<DenseSimplexBackend>();
  throw ConfigError("unknown LP backend '" + name + "' (expected 'staged' or 'simplex')");
}

/// Backward induction on the pure stopping problem. Used as a reference
/// value for the LP on small grids.
struct DpResult {
  double value = 0.0;
  std::vector<char> enter;  ///< [t][x], t < steps
  std::vector<char> exit;   ///< [t][a][x], t < steps
};

inline constexpr std::size_t kDpOracleCellLimit = 100000;

inline DpResult dp_oracle(const DiscreteTechnology& tech, const RewardField& reward, const InitialMeasures& initial) {
  const FlowShape s = tech.shape();
  if (s.steps * s.ages * s.states > kDpOracleCellLimit)
    throw InputError("dp_oracle is limited to n_t * n_a * n_x <= 100000");
  reward.check(s);
  initial.check(s);
  const std::size_t T = s.steps, A = s.ages, X = s.states;

  DpResult out;
  out.enter.assign(T * X, 0);
  out.exit.assign(T * A * X, 0);

  // V_next[a][x]: expected installed value one step ahead; W_next[x]: same for undecided projects.
  std::vector<std::vector<double>> v_inst(A, std::vector<double>(X)), v_next(A, std::vector<double>(X));
  std::vector<double> w(X), w_next(X);

  const auto& B = tech.step.balance();
  const TridiagonalLU lu(B.transposed());
  auto expect = [&](std::vector<double> f) {
    lu.solve_in_place(f);
    return f;
  };

  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t x = 0; x < X; ++x) v_inst[a][x] = reward.scrap_at(T, a, x);
  std::fill(w.begin(), w.end(), 0.0);

  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t a = 0; a < A; ++a) v_next[a] = expect(v_inst[a]);
    w_next = expect(w);
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t x = 0; x < X; ++x) {
        const double stop = reward.scrap_at(t, a, x);
        if (!tech.ages.holds_mass(a)) {
          v_inst[a][x] = stop;
          out.exit[(t * A + a) * X + x] = 1;
          continue;
        }
        const double go_on = reward.running_at(t, a, x) + v_next[tech.ages.next(a)][x];
        v_inst[a][x] = std::max(stop, go_on);
        out.exit[(t * A + a) * X + x] = stop > go_on ? 1 : 0;
      }
    }
    for (std::size_t x = 0; x < X; ++x) {
      const double enter = reward.entry_at(t, x) + v_inst[0][x];
      w[x] = std::max(w_next[x], enter);
      out.enter[t * X + x] = enter > w_next[x] ? 1 : 0;
    }
  }

  double v = 0.0;
  for (std::size_t x = 0; x < X; ++x) {
    v += initial.potential[x] * w[x];
    for (std::size_t a = 0; a < A; ++a) v += initial.installed[a * X + x] * v_inst[a][x];
  }
  out.value = v;
  return out;
}

}  // namespace mfgelec
