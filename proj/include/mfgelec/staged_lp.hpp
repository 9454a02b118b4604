#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mfgelec/errors.hpp"
#include "mfgelec/lp.hpp"
#include "mfgelec/measure.hpp"
#include "mfgelec/reward.hpp"

namespace mfgelec {

/// Dual variables of the stopping LP, indexed like the constraint rows.
struct StoppingDuals {
  FlowShape shape;
  std::vector<double> potential;  ///< [t][x], t <= steps
  std::vector<double> installed;  ///< [t][a][x], t <= steps

  double& potential_at(std::size_t t, std::size_t x) { return potential[t * shape.states + x]; }
  double potential_at(std::size_t t, std::size_t x) const { return potential[t * shape.states + x]; }
  double& installed_at(std::size_t t, std::size_t a, std::size_t x) {
    return installed[(t * shape.ages + a) * shape.states + x];
  }
  double installed_at(std::size_t t, std::size_t a, std::size_t x) const {
    return installed[(t * shape.ages + a) * shape.states + x];
  }
};

/// Solves the stopping LP through its staircase structure. The duals come
/// from a backward sweep over time; the primal is the flow of the pure
/// stopping rule read off the duals. Primal feasibility, dual feasibility and
/// a zero duality gap are checked before returning, so the answer is an LP
/// optimum with a certificate rather than a heuristic.
class StagedBackend final : public LpBackend {
 public:
  struct Options {
    double tie_tolerance = 1e-12;   ///< stop only when strictly better by this relative margin
    double certificate_tolerance = 1e-8;
  };

  StagedBackend() = default;
  explicit StagedBackend(Options o) : opt_(o) {}

  std::string name() const override { return "staged"; }
  bool structured() const override { return true; }

  LpSolution solve(const LinearProgram&) const override {
    throw InputError("staged backend solves stopping problems only; use solve_stopping");
  }

  struct Result {
    StoppingDuals duals;
    StoppingControls controls;
    MeasureFlow flow;
    double primal = 0.0;
    double dual = 0.0;
  };

  Result solve_full(const ConstraintSystem& cs, const RewardField& reward) const {
    const auto& tech = cs.technology();
    const FlowShape s = tech.shape();
    reward.check(s);
    const std::size_t T = s.steps, A = s.ages, X = s.states;
    const auto& ages = tech.ages;

    Result r;
    r.duals = {s, std::vector<double>((T + 1) * X, 0.0), std::vector<double>((T + 1) * A * X, 0.0)};
    r.controls = StoppingControls::constant(s, 0.0, 0.0);
    auto& d = r.duals;

    std::vector<double> g(A * X), gp(X);
    auto better = [&](double stop, double cont) { return stop > cont + opt_.tie_tolerance * (1.0 + std::abs(cont)); };

    for (std::size_t t = T + 1; t-- > 0;) {
      for (std::size_t a = 0; a < A; ++a) {
        const bool can_hold = t < T && ages.holds_mass(a);
        for (std::size_t x = 0; x < X; ++x) {
          const double stop = reward.scrap_at(t, a, x);
          if (!can_hold) {
            g[a * X + x] = stop;
            continue;
          }
          const double cont = reward.running_at(t, a, x) + d.installed_at(t + 1, ages.next(a), x);
          const bool exit = better(stop, cont);
          r.controls.exit_at(t, a, x) = exit ? 1.0 : 0.0;
          g[a * X + x] = exit ? stop : cont;
        }
      }
      for (std::size_t x = 0; x < X; ++x) {
        if (t == T) {
          gp[x] = 0.0;
          continue;
        }
        const double wait = d.potential_at(t + 1, x);
        const double enter = reward.entry_at(t, x) + g[x];
        const bool go = better(enter, wait);
        r.controls.entry_at(t, x) = go ? 1.0 : 0.0;
        gp[x] = go ? enter : wait;
      }
      if (t > 0) {
        tech.step.expect_in_place(gp);
        for (std::size_t a = 0; a < A; ++a) tech.step.expect_in_place(std::span<double>(g.data() + a * X, X));
      }
      std::copy(gp.begin(), gp.end(), d.potential.begin() + static_cast<std::ptrdiff_t>(t * X));
      std::copy(g.begin(), g.end(), d.installed.begin() + static_cast<std::ptrdiff_t>(t * A * X));
    }

    const auto& init = cs.initial();
    for (std::size_t x = 0; x < X; ++x) {
      r.dual += init.potential[x] * d.potential_at(0, x);
      for (std::size_t a = 0; a < A; ++a) r.dual += init.installed[a * X + x] * d.installed_at(0, a, x);
    }

    r.flow = forward_evolve(tech, r.controls, init);
    r.primal = reward.value(r.flow);

    const double scale = 1.0 + std::abs(r.dual);
    const double gap = std::abs(r.primal - r.dual);
    if (gap > opt_.certificate_tolerance * scale)
      throw InternalError("staged LP solve: duality gap " + std::to_string(gap) + " exceeds certificate tolerance");
    const double mass = 1.0 + init.potential_mass() + init.installed_mass();
    const double res = cs.residual_norm(r.flow);
    if (res > 1e-10 * mass)
      throw InternalError("staged LP solve: primal residual " + std::to_string(res) + " exceeds tolerance");
    return r;
  }

  LpSolution solve_stopping(const ConstraintSystem& cs, const RewardField& reward) const override {
    auto r = solve_full(cs, reward);
    LpSolution out;
    out.status = LpStatus::optimal;
    const auto& layout = cs.layout();
    out.x = layout.pack(r.flow);
    out.y.assign(layout.rows(), 0.0);
    const auto& s = layout.shape();
    for (std::size_t t = 0; t <= s.steps; ++t)
      for (std::size_t x = 0; x < s.states; ++x) {
        out.y[layout.potential_row(t) + x] = r.duals.potential_at(t, x);
        for (std::size_t a = 0; a < s.ages; ++a) out.y[layout.installed_row(t, a) + x] = r.duals.installed_at(t, a, x);
      }
    out.objective = r.primal;
    out.iterations = s.steps + 1;
    return out;
  }

 private:
  Options opt_;
};

}  // namespace mfgelec
