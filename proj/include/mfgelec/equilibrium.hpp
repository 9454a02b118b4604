#pragma once

#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mfgelec/best_response.hpp"
#include "mfgelec/clearing.hpp"
#include "mfgelec/errors.hpp"
#include "mfgelec/measure.hpp"
#include "mfgelec/model.hpp"
#include "mfgelec/parallel.hpp"
#include "mfgelec/problem.hpp"
#include "mfgelec/simplicial.hpp"

namespace mfgelec {

enum class Schedule { harmonic, constant, power, line_search, simplicial };
enum class InitialFlows { wait, enter };

struct SolverSettings {
  std::size_t max_iter = 2000;
  double price_tol = 1e-3;                  ///< EUR/MWh
  std::optional<double> exploitability_tol; ///< default 1e-4 * initial mass * P* * hours per year
  Schedule schedule = Schedule::harmonic;
  double schedule_value = 0.5;     ///< constant weight, or scale of the power schedule
  double schedule_exponent = 1.0;  ///< power schedule: value / j^exponent
  std::string backend = "staged";
  InitialFlows initial_flows = InitialFlows::wait;
  bool uniqueness_check = false;
  bool progress = false;
  ClearingOptions clearing;

  friend bool operator==(const SolverSettings& a, const SolverSettings& b) {
    return a.max_iter == b.max_iter && a.price_tol == b.price_tol && a.exploitability_tol == b.exploitability_tol &&
           a.schedule == b.schedule && a.schedule_value == b.schedule_value &&
           a.schedule_exponent == b.schedule_exponent && a.backend == b.backend &&
           a.initial_flows == b.initial_flows && a.uniqueness_check == b.uniqueness_check;
  }
};

inline double exploitability_tolerance(const Problem& p, const SolverSettings& s) {
  if (s.exploitability_tol) return *s.exploitability_tol;
  return 1e-4 * p.initial_mass() * p.scenario().price_cap * p.scenario().hours_per_year;
}

/// Fixed weight for iteration j >= 1 (the line search picks its own).
inline double schedule_weight(const SolverSettings& s, std::size_t j) {
  if (j == 0) throw InputError("fictitious-play iterations are numbered from 1");
  const double jd = static_cast<double>(j);
  switch (s.schedule) {
    case Schedule::harmonic:
    case Schedule::line_search:
    case Schedule::simplicial: return 1.0 / (jd + 1.0);
    case Schedule::constant: return s.schedule_value;
    case Schedule::power: return std::min(1.0, s.schedule_value / std::pow(jd, s.schedule_exponent));
  }
  return 1.0;
}

struct IterationDiagnostics {
  std::size_t iteration = 0;
  double price_delta = 0.0;              ///< sup-norm change of cleared prices since the previous iteration
  std::vector<double> exploitability;    ///< per technology
  double weight = 0.0;                   ///< epsilon_j applied after this iteration
  double fractional_share = 0.0;
  double seconds = 0.0;

  double max_exploitability() const {
    double m = 0.0;
    for (double e : exploitability) m = std::max(m, e);
    return m;
  }
};

struct IterationState {
  FlowProfile flows;   ///< averaged flows entering the iteration
  PriceSystem prices;  ///< prices cleared from `flows` (empty before the first iteration)
  std::size_t j = 1;
  std::optional<IterationDiagnostics> last;
  ColumnSet columns;   ///< simplicial schedule: per technology, flows = sum of weight * flow
};

inline FlowProfile initial_flows(const Problem& p, InitialFlows kind) {
  FlowProfile f;
  for (std::size_t i = 0; i < p.technologies(); ++i) {
    const auto& tech = p.technology(i);
    const auto c = kind == InitialFlows::wait ? StoppingControls::constant(tech.shape(), 0.0, 0.0)
                                               : StoppingControls::enter_now(tech.shape());
    f.push_back(forward_evolve(tech, c, p.initial(i)));
  }
  return f;
}

/// Share of decision cells carrying mass whose stopped fraction is strictly between 0 and 1.
inline double fractional_share(const FlowProfile& flows) {
  constexpr double eps = 1e-9;
  std::size_t cells = 0, fractional = 0;
  auto count = [&](double stop, double stay) {
    const double total = stop + stay;
    if (total <= 1e-12) return;
    ++cells;
    const double r = stop / total;
    if (r > eps && r < 1.0 - eps) ++fractional;
  };
  for (const auto& f : flows) {
    const auto& s = f.shape();
    for (std::size_t t = 0; t < s.steps; ++t)
      for (std::size_t x = 0; x < s.states; ++x) {
        count(f.entry(t, x), f.potential(t, x));
        for (std::size_t a = 0; a < s.ages; ++a) count(f.exit(t, a, x), f.installed(t, a, x));
      }
  }
  return cells == 0 ? 0.0 : static_cast<double>(fractional) / static_cast<double>(cells);
}

struct Responses {
  std::vector<RewardField> rewards;
  std::vector<BestResponse> best;
  std::vector<double> current_value;
};

inline std::vector<RewardField> rewards_for(const Problem& p, const PriceSystem& prices) {
  std::vector<RewardField> r(p.technologies());
  parallel_for(r.size(), [&](std::size_t i) { r[i] = assemble_reward(p.technology(i), prices, p.scenario()); });
  return r;
}

inline Responses best_responses(const Problem& p, const FlowProfile& flows, const PriceSystem& prices,
                                const LpBackend& backend) {
  Responses out;
  out.rewards = rewards_for(p, prices);
  out.best.resize(p.technologies());
  out.current_value.resize(p.technologies());
  parallel_for(p.technologies(), [&](std::size_t i) {
    out.best[i] = solve_best_response(p.constraints(i), out.rewards[i], backend);
    out.current_value[i] = out.rewards[i].value(flows[i]);
  });
  return out;
}

/// Best-response value minus the value of the current flows, per technology.
inline std::vector<double> exploitability(const Problem& p, const FlowProfile& flows, const PriceSystem& prices,
                                          const LpBackend& backend) {
  const auto r = best_responses(p, flows, prices, backend);
  std::vector<double> e(p.technologies());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = r.best[i].objective - r.current_value[i];
  return e;
}

namespace detail {

inline FlowProfile mix(const FlowProfile& base, const std::vector<BestResponse>& best, double w) {
  FlowProfile out = base;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].blend(best[i].flow, w);
  return out;
}

inline FlowProfile along(const FlowProfile& base, const FlowProfile& dir, double g) {
  FlowProfile out = base;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].add_scaled(dir[i], g);
  return out;
}

// Directional derivative of the aggregate welfare along dir at base + g dir.
// Rewards are its gradient, so this is sum_i reward_i(g) . dir_i; it decreases in g.
inline double welfare_slope(const Problem& p, const FlowProfile& base, const FlowProfile& dir, double g,
                            const ClearingOptions& opt) {
  const auto rewards = rewards_for(p, clear_all(p, along(base, dir, g), opt));
  double s = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) s += rewards[i].value(dir[i]);
  return s;
}

// Maximizes the welfare on [0, g_max] along dir by bisection on its slope.
inline double line_search(const Problem& p, const FlowProfile& base, const FlowProfile& dir, double g_max,
                          const ClearingOptions& opt) {
  if (welfare_slope(p, base, dir, g_max, opt) >= 0.0) return g_max;
  double lo = 0.0, hi = g_max;
  for (int k = 0; k < 40; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (welfare_slope(p, base, dir, mid, opt) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

inline FlowProfile towards(const FlowProfile& base, const std::vector<BestResponse>& best) {
  FlowProfile dir = base;
  for (std::size_t i = 0; i < dir.size(); ++i) {
    dir[i].scale(-1.0);
    dir[i].add_scaled(best[i].flow, 1.0);
  }
  return dir;
}

// Flows produced by the LP are compared with a tolerance so that repeated
// best responses map onto one column.
inline bool same_flow(const MeasureFlow& a, const MeasureFlow& b) { return a.max_difference(b) <= 1e-12; }

// Adds the best responses as columns, re-solves the master over all columns
// and returns the mean weight the new columns received.
inline double simplicial_step(const Problem& p, IterationState& st, const PriceSystem& prices,
                              const Responses& resp, const ClearingOptions& opt) {
  const std::size_t I = p.technologies();
  if (st.columns.empty()) {
    st.columns.resize(I);
    for (std::size_t i = 0; i < I; ++i) {
      st.columns[i].push_back(make_column(p, i, st.flows[i], resp.rewards[i], prices));
      st.columns[i].back().weight = 1.0;
    }
  }
  std::vector<std::size_t> fresh(I);
  for (std::size_t i = 0; i < I; ++i) {
    auto& cols = st.columns[i];
    fresh[i] = cols.size();
    for (std::size_t k = 0; k < cols.size(); ++k)
      if (same_flow(cols[k].flow, resp.best[i].flow)) fresh[i] = k;
    if (fresh[i] == cols.size()) cols.push_back(make_column(p, i, resp.best[i].flow, resp.rewards[i], prices));
  }
  SimplicialMaster(p, st.columns, {.clearing = opt}).solve();
  double w = 0.0;
  for (std::size_t i = 0; i < I; ++i) {
    auto& cols = st.columns[i];
    w += cols[fresh[i]].weight / static_cast<double>(I);
    std::erase_if(cols, [](const Column& c) { return c.weight <= 0.0; });
    st.flows[i] = combine(cols);
  }
  return w;
}

}  // namespace detail

/// One fictitious-play step: clear prices from the averaged flows, compute
/// best responses, record diagnostics, then average with weight epsilon_j.
inline IterationState iterate(const Problem& p, IterationState state, const SolverSettings& settings,
                              const LpBackend& backend) {
  const auto start = std::chrono::steady_clock::now();
  if (state.flows.size() != p.technologies()) throw InputError("iteration state does not match the problem");
  PriceSystem prices;
  std::optional<Responses> resp;
  try {
    prices = clear_all(p, state.flows, settings.clearing);
    resp = best_responses(p, state.flows, prices, backend);
  } catch (const NumericalError& e) {
    throw NumericalError(fmt::format("fictitious-play iteration {}: {}", state.j, e.what()), e.residual());
  } catch (const Error& e) {
    throw InternalError(fmt::format("fictitious-play iteration {}: {}", state.j, e.what()));
  }

  IterationDiagnostics d;
  d.iteration = state.j;
  d.price_delta = state.prices.size() == 0 ? std::numeric_limits<double>::infinity()
                                            : sup_distance(prices, state.prices);
  d.exploitability.resize(p.technologies());
  for (std::size_t i = 0; i < p.technologies(); ++i)
    d.exploitability[i] = resp->best[i].objective - resp->current_value[i];
  d.fractional_share = fractional_share(state.flows);

  const bool searched = settings.schedule == Schedule::line_search || settings.schedule == Schedule::simplicial;
  IterationState next;
  double w = 0.0;
  if (settings.schedule == Schedule::simplicial) {
    next.flows = std::move(state.flows);
    next.columns = std::move(state.columns);
    w = detail::simplicial_step(p, next, prices, *resp, settings.clearing);
  } else {
    if (settings.schedule == Schedule::line_search) {
      if (d.max_exploitability() > 0.0)
        w = detail::line_search(p, state.flows, detail::towards(state.flows, resp->best), 1.0, settings.clearing);
    } else {
      w = schedule_weight(settings, state.j);
    }
    if (!searched && !(w > 0.0 && w <= 1.0)) throw InputError("fictitious-play weight must lie in (0, 1]");
    next.flows = w > 0.0 ? detail::mix(state.flows, resp->best, w) : std::move(state.flows);
  }
  d.weight = w;
  next.j = state.j + 1;
  d.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  next.last = d;
  // Prices belong to the flows that produced them; the converged output uses these.
  next.prices = std::move(prices);
  return next;
}

struct UniquenessCheck {
  double gap = 0.0;  ///< sup-norm distance between the two price systems
  bool agreed = false;
  bool other_converged = false;
};

struct EquilibriumReport {
  bool converged = false;
  std::size_t iterations = 0;
  PriceSystem prices;
  FlowProfile flows;
  std::vector<IterationDiagnostics> history;
  std::optional<UniquenessCheck> uniqueness;
  std::string backend;
};

namespace detail {

inline EquilibriumReport run_once(const Problem& p, const SolverSettings& settings, InitialFlows start) {
  const auto backend = make_backend(settings.backend);
  const double expl_tol = exploitability_tolerance(p, settings);
  EquilibriumReport rep;
  rep.backend = backend->name();

  IterationState st;
  st.flows = initial_flows(p, start);
  FlowProfile entering;
  for (std::size_t it = 0; it < settings.max_iter; ++it) {
    entering = st.flows;
    st = iterate(p, std::move(st), settings, *backend);
    const auto& d = *st.last;
    rep.history.push_back(d);
    if (settings.progress)
      fmt::print(stderr, "iter {:5d}  price_delta {:.3e}  max_exploitability {:.3e}  weight {:.3e}  {:.3f}s\n",
                 d.iteration, d.price_delta, d.max_exploitability(), d.weight, d.seconds);
    const bool empty = p.initial_mass() == 0.0;
    if (empty || (d.price_delta < settings.price_tol && d.max_exploitability() < expl_tol)) {
      rep.converged = true;
      rep.iterations = d.iteration;
      rep.prices = st.prices;
      rep.flows = std::move(entering);
      return rep;
    }
  }
  rep.converged = false;
  rep.iterations = settings.max_iter;
  rep.prices = st.prices;
  rep.flows = std::move(entering);
  return rep;
}

}  // namespace detail

/// Fictitious play until the cleared prices stop moving and no technology
/// can gain by deviating, or max_iter. Non-convergence is flagged, not thrown.
inline EquilibriumReport run(const Problem& p, const SolverSettings& settings) {
  auto rep = detail::run_once(p, settings, settings.initial_flows);
  if (settings.uniqueness_check) {
    const auto other_start = settings.initial_flows == InitialFlows::wait ? InitialFlows::enter : InitialFlows::wait;
    const auto other = detail::run_once(p, settings, other_start);
    UniquenessCheck u;
    u.gap = sup_distance(rep.prices, other.prices);
    u.agreed = u.gap < 10.0 * settings.price_tol;
    u.other_converged = other.converged;
    rep.uniqueness = u;
  }
  return rep;
}

}  // namespace mfgelec
