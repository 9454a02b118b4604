#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mfgelec/mfgelec.hpp"
#include "support.hpp"

using namespace mfgelec;

namespace {

// One renewable technology with free capacity facing demand far above what
// the market can supply: the price sits at the cap, so entering at once is optimal.
std::string dominance_config(const std::string& schedule) {
  return "name: dominance\n"
         "horizon_years: 3\n"
         "time_steps: 6\n"
         "discount_rate_per_year: 0.05\n"
         "price_cap_eur_per_mwh: 500\n"
         "state_nodes: 5\n"
         "demand_gw: {peak: [[0, 1000], [3, 1000]], offpeak: [[0, 1000], [3, 1000]]}\n"
         "carbon_eur_per_t: [[0, 0], [3, 0]]\n"
         "baseline_supply_gw: [[0, 0], [500, 10]]\n"
         "technologies:\n"
         "  - name: wind\n"
         "    kind: renewable\n"
         "    fixed_cost_eur_per_mw_year: 0\n"
         "    capital_cost_eur_per_mw: 0\n"
         "    mean_reversion_per_year: 1.0\n"
         "    level: 0.4\n"
         "    volatility: 0.2\n"
         "    potential: {mass_gw: 20, density: {type: beta, alpha: 4, beta: 6}}\n"
         "solver:\n"
         "  max_iter: 10\n"
         "  schedule: " + schedule + "\n";
}

std::string zero_mass_config() {
  std::string s = support::small_config();
  for (const char* from : {"mass_gw: 15", "mass_gw: 10", "mass_gw: 40", "mass_gw: 3"}) {
    const auto at = s.find(from);
    s.replace(at, std::string(from).size(), "mass_gw: 0");
  }
  const auto at = s.find("peak: [[0, 30], [4, 34]]");
  s.replace(at, 24, "peak: [[0, 5], [4, 5]]");
  const auto at2 = s.find("offpeak: [[0, 20], [4, 22]]");
  s.replace(at2, 27, "offpeak: [[0, 3], [4, 3]]");
  return s;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(Equilibrium, DominantEntryConvergesAtOnce) {
  for (const std::string schedule : {"constant\n  schedule_value: 1", "simplicial"}) {
    const auto c = load_text(dominance_config(schedule));
    const Problem p(c.scenario);
    const auto rep = run(p, c.config.solver);
    ASSERT_TRUE(rep.converged) << schedule;
    EXPECT_LE(rep.iterations, 3u) << schedule;
    for (const auto& pt : rep.prices.points) {
      EXPECT_DOUBLE_EQ(pt.peak, 500.0);
      EXPECT_TRUE(pt.loss_of_load_peak);
    }
    ASSERT_GE(rep.history.size(), 2u);
    EXPECT_GT(rep.history[0].max_exploitability(), 0.0);
    EXPECT_NEAR(rep.history[1].max_exploitability(), 0.0, 1e-9 * (1.0 + rep.history[0].max_exploitability()));
    const auto& f = rep.flows[0];
    // Node 0 has capacity factor 0 and earns nothing either way.
    for (std::size_t x = 1; x < f.shape().states; ++x) EXPECT_NEAR(f.potential(0, x), 0.0, 1e-9) << schedule;
  }
}

TEST(Equilibrium, ZeroMassClearsOnTheBaseline) {
  const auto c = load_text(zero_mass_config());
  const Problem p(c.scenario);
  EXPECT_EQ(p.initial_mass(), 0.0);
  const auto rep = run(p, c.config.solver);
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(rep.iterations, 1u);
  // Baseline 8 GW at 50 EUR/MWh: 5 GW clears at 31.25, 3 GW at 18.75.
  for (const auto& pt : rep.prices.points) {
    EXPECT_NEAR(pt.peak, 31.25, 1e-8);
    EXPECT_NEAR(pt.offpeak, 18.75, 1e-8);
  }
}

TEST(Equilibrium, RejectsZeroWeight) {
  const auto c = support::small_loaded();
  const Problem p(c.scenario);
  auto s = c.config.solver;
  s.schedule = Schedule::constant;
  s.schedule_value = 0.0;
  IterationState st;
  st.flows = initial_flows(p, InitialFlows::wait);
  EXPECT_THROW(iterate(p, st, s, StagedBackend()), InputError);
  EXPECT_THROW(schedule_weight(s, 0), InputError);
}

TEST(Equilibrium, IteratesStayFeasibleWithNonnegativeGaps) {
  const auto c = support::small_loaded();
  const Problem p(c.scenario);
  const StagedBackend backend;
  for (auto schedule : {Schedule::harmonic, Schedule::line_search, Schedule::simplicial}) {
    auto s = c.config.solver;
    s.schedule = schedule;
    IterationState st;
    st.flows = initial_flows(p, InitialFlows::wait);
    for (int k = 0; k < 15; ++k) {
      for (std::size_t i = 0; i < p.technologies(); ++i) {
        EXPECT_LT(p.constraints(i).residual_norm(st.flows[i]), 1e-9) << detail::schedule_name(schedule) << " iter " << k;
        EXPECT_GE(st.flows[i].min_value(), -1e-12);
      }
      st = iterate(p, std::move(st), s, backend);
      const auto& d = *st.last;
      EXPECT_GE(d.weight, 0.0);
      EXPECT_LE(d.weight, 1.0);
      for (double e : d.exploitability) EXPECT_GE(e, -1e-9 * (1.0 + std::abs(e))) << detail::schedule_name(schedule);
      if (schedule == Schedule::simplicial) {
        ASSERT_EQ(st.columns.size(), p.technologies());
        for (const auto& cols : st.columns) {
          double sum = 0.0;
          for (const auto& col : cols) {
            EXPECT_GT(col.weight, 0.0);
            sum += col.weight;
          }
          EXPECT_NEAR(sum, 1.0, 1e-12);
        }
      }
    }
  }
}

TEST(Equilibrium, ConvergedRunSatisfiesIdentities) {
  const auto c = support::small_loaded();
  const Problem p(c.scenario);
  const auto rep = run(p, c.config.solver);
  ASSERT_TRUE(rep.converged);
  for (std::size_t i = 0; i < p.technologies(); ++i) {
    EXPECT_LT(p.constraints(i).residual_norm(rep.flows[i]), 1e-9);
    const auto mb = mass_balance(rep.flows[i], p.initial(i));
    EXPECT_LT(mb.potential_gap, 1e-9);
    EXPECT_LT(mb.installed_gap, 1e-9);
    EXPECT_LT(capacity_balance(p, rep.flows, i).max_gap, 1e-6);
  }
  // The reported prices are the ones cleared from the reported flows.
  EXPECT_LT(sup_distance(clear_all(p, rep.flows, c.config.solver.clearing), rep.prices), 1e-9);
}

TEST(Equilibrium, RunsAreDeterministic) {
  const auto c = support::small_loaded();
  const Problem p(c.scenario);
  const auto a = make_bundle(p, run(p, c.config.solver), c.hash, c.config.name);
  const auto b = make_bundle(p, run(p, c.config.solver), c.hash, c.config.name);
  EXPECT_EQ(a.prices, b.prices);
  EXPECT_EQ(a.capacity, b.capacity);
  EXPECT_EQ(a.supply, b.supply);
  EXPECT_EQ(a.flows, b.flows);
  auto ma = a.manifest, mb = b.manifest;
  ma.erase("timestamp");
  mb.erase("timestamp");
  EXPECT_EQ(ma, mb);
  // Diagnostics carry wall-clock seconds only in memory, not in the file.
  EXPECT_EQ(a.diagnostics, b.diagnostics);
}

TEST(Equilibrium, ExploitabilityFallsFromRandomStarts) {
  const auto c = load_validate(support::source_path("scenarios/illustration.yaml"));
  const Problem p(c.scenario);
  const auto backend = make_backend(c.config.solver.backend);
  std::mt19937_64 rng(2024);
  std::vector<double> early, late;
  for (int seed = 0; seed < 5; ++seed) {
    IterationState st;
    for (std::size_t i = 0; i < p.technologies(); ++i) {
      const auto& tech = p.technology(i);
      const auto ctl = StoppingControls::constant(tech.shape(), support::uniform(rng, 0.0, 0.2),
                                                  support::uniform(rng, 0.0, 0.2));
      st.flows.push_back(forward_evolve(tech, ctl, p.initial(i)));
    }
    for (int k = 1; k <= 50; ++k) {
      st = iterate(p, std::move(st), c.config.solver, *backend);
      if (k == 5) early.push_back(st.last->max_exploitability());
      if (k == 50) late.push_back(st.last->max_exploitability());
    }
  }
  EXPECT_LT(median(late), median(early));
}
