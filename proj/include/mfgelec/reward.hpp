#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mfgelec/errors.hpp"
#include "mfgelec/lp.hpp"
#include "mfgelec/measure.hpp"

namespace mfgelec {

/// Objective coefficients of one technology's best-response problem.
struct RewardField {
  FlowShape shape;
  std::vector<double> running;  ///< [t][a][x], t < steps; multiplies installed(t, a, x)
  std::vector<double> entry;    ///< [t][x], t < steps; multiplies entry(t, x)
  std::vector<double> scrap;    ///< [t][a][x], t <= steps; multiplies exit(t, a, x)

  static RewardField zero(const FlowShape& s) {
    return {s, std::vector<double>(s.steps * s.ages * s.states, 0.0), std::vector<double>(s.steps * s.states, 0.0),
            std::vector<double>((s.steps + 1) * s.ages * s.states, 0.0)};
  }

  double& running_at(std::size_t t, std::size_t a, std::size_t x) { return running[cell(t, a, x)]; }
  double running_at(std::size_t t, std::size_t a, std::size_t x) const { return running[cell(t, a, x)]; }
  double& entry_at(std::size_t t, std::size_t x) { return entry[t * shape.states + x]; }
  double entry_at(std::size_t t, std::size_t x) const { return entry[t * shape.states + x]; }
  double& scrap_at(std::size_t t, std::size_t a, std::size_t x) { return scrap[cell(t, a, x)]; }
  double scrap_at(std::size_t t, std::size_t a, std::size_t x) const { return scrap[cell(t, a, x)]; }

  /// Objective vector in the column order of `layout`.
  std::vector<double> objective(const FlowLayout& layout) const {
    check(layout.shape());
    std::vector<double> c(layout.columns(), 0.0);
    const auto& s = shape;
    for (std::size_t t = 0; t <= s.steps; ++t) {
      if (layout.entry(t) != FlowLayout::none)
        for (std::size_t x = 0; x < s.states; ++x) c[layout.entry(t) + x] = entry_at(t, x);
      for (std::size_t a = 0; a < s.ages; ++a)
        for (std::size_t x = 0; x < s.states; ++x) {
          if (layout.installed(t, a) != FlowLayout::none) c[layout.installed(t, a) + x] = running_at(t, a, x);
          c[layout.exit(t, a) + x] = scrap_at(t, a, x);
        }
    }
    return c;
  }

  /// Objective value of a flow.
  double value(const MeasureFlow& f) const {
    check(f.shape());
    const auto& s = shape;
    double v = 0.0;
    for (std::size_t t = 0; t <= s.steps; ++t) {
      for (std::size_t a = 0; a < s.ages; ++a)
        for (std::size_t x = 0; x < s.states; ++x) {
          if (t < s.steps) v += running_at(t, a, x) * f.installed(t, a, x);
          v += scrap_at(t, a, x) * f.exit(t, a, x);
        }
      if (t < s.steps)
        for (std::size_t x = 0; x < s.states; ++x) v += entry_at(t, x) * f.entry(t, x);
    }
    return v;
  }

  void check(const FlowShape& s) const {
    if (!(s == shape)) throw InputError("reward field does not match the flow grids");
  }

 private:
  std::size_t cell(std::size_t t, std::size_t a, std::size_t x) const {
    return (t * shape.ages + a) * shape.states + x;
  }
};

inline LinearProgram linear_program(const ConstraintSystem& cs, const RewardField& reward, bool with_names = false) {
  LinearProgram lp{cs.matrix(), cs.rhs(), reward.objective(cs.layout()), {}, {}};
  if (with_names) {
    lp.column_names = cs.layout().column_names();
    lp.row_names = cs.layout().row_names();
  }
  return lp;
}

}  // namespace mfgelec
