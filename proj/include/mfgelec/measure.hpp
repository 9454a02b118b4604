#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfgelec/diffusion.hpp"
#include "mfgelec/errors.hpp"
#include "mfgelec/grids.hpp"
#include "mfgelec/model.hpp"
#include "mfgelec/sparse.hpp"

namespace mfgelec {

/// One implicit Euler step of the forward (mass) equation, v = (I - dt L*)^{-1} m,
/// with the factorizations needed to apply it and its transpose repeatedly.
class ImplicitStep {
 public:
  ImplicitStep() = default;

  ImplicitStep(const GeneratorMatrix& gen, double dt) : dt_(dt) {
    if (!(dt > 0.0)) throw InputError("implicit step needs dt > 0");
    const Tridiagonal forward = gen.is_adjoint ? gen.matrix : gen.matrix.transposed();
    const std::size_t n = forward.size();
    balance_ = Tridiagonal(n);
    for (std::size_t i = 0; i < n; ++i) {
      balance_.diag[i] = 1.0 - dt * forward.diag[i];
      balance_.lower[i] = -dt * forward.lower[i];
      balance_.upper[i] = -dt * forward.upper[i];
    }
    forward_lu_ = TridiagonalLU(balance_);
    backward_lu_ = TridiagonalLU(balance_.transposed());
  }

  double dt() const { return dt_; }
  std::size_t size() const { return balance_.size(); }

  /// The matrix I - dt L* appearing in the balance equations.
  const Tridiagonal& balance() const { return balance_; }

  std::vector<double> forward(std::span<const double> mass) const { return forward_lu_.solve(mass); }
  void forward_in_place(std::span<double> mass) const { forward_lu_.solve_in_place(mass); }

  /// Conditional expectation of node values one step ahead: (I - dt L)^{-1} f.
  std::vector<double> expect(std::span<const double> values) const { return backward_lu_.solve(values); }
  void expect_in_place(std::span<double> values) const { backward_lu_.solve_in_place(values); }

 private:
  double dt_ = 0.0;
  Tridiagonal balance_;
  TridiagonalLU forward_lu_, backward_lu_;
};

inline std::vector<double> implicit_step(const GeneratorMatrix& gen, double dt, std::span<const double> mass) {
  for (double m : mass)
    if (m < 0.0) throw InputError("implicit_step expects a nonnegative mass vector");
  return ImplicitStep(gen, dt).forward(mass);
}

struct FlowShape {
  std::size_t steps = 0;   ///< time steps; time nodes are 0..steps
  std::size_t ages = 1;
  std::size_t states = 1;
  friend bool operator==(const FlowShape&, const FlowShape&) = default;
};

/// Discretized measure flows of one technology.
///
/// potential(t)     mass of undecided projects after entry decisions at t; potential(steps) is what
///                  expires unused at the horizon
/// entry(t)         mass that starts construction at t (zero at t = steps)
/// installed(t, a)  mass under construction or operating after exit decisions at t (zero at t = steps)
/// exit(t, a)       mass decommissioned at t; exit(steps, .) is the terminal lump
class MeasureFlow {
 public:
  MeasureFlow() = default;
  explicit MeasureFlow(FlowShape shape)
      : shape_(shape),
        potential_((shape.steps + 1) * shape.states, 0.0),
        entry_((shape.steps + 1) * shape.states, 0.0),
        installed_((shape.steps + 1) * shape.ages * shape.states, 0.0),
        exit_((shape.steps + 1) * shape.ages * shape.states, 0.0) {}

  const FlowShape& shape() const { return shape_; }

  double& potential(std::size_t t, std::size_t x) { return potential_[t * shape_.states + x]; }
  double potential(std::size_t t, std::size_t x) const { return potential_[t * shape_.states + x]; }
  double& entry(std::size_t t, std::size_t x) { return entry_[t * shape_.states + x]; }
  double entry(std::size_t t, std::size_t x) const { return entry_[t * shape_.states + x]; }
  double& installed(std::size_t t, std::size_t a, std::size_t x) { return installed_[cell(t, a, x)]; }
  double installed(std::size_t t, std::size_t a, std::size_t x) const { return installed_[cell(t, a, x)]; }
  double& exit(std::size_t t, std::size_t a, std::size_t x) { return exit_[cell(t, a, x)]; }
  double exit(std::size_t t, std::size_t a, std::size_t x) const { return exit_[cell(t, a, x)]; }

  std::span<double> potential_row(std::size_t t) { return {potential_.data() + t * shape_.states, shape_.states}; }
  std::span<const double> potential_row(std::size_t t) const {
    return {potential_.data() + t * shape_.states, shape_.states};
  }
  std::span<double> entry_row(std::size_t t) { return {entry_.data() + t * shape_.states, shape_.states}; }
  std::span<const double> entry_row(std::size_t t) const { return {entry_.data() + t * shape_.states, shape_.states}; }
  std::span<double> installed_row(std::size_t t, std::size_t a) {
    return {installed_.data() + cell(t, a, 0), shape_.states};
  }
  std::span<const double> installed_row(std::size_t t, std::size_t a) const {
    return {installed_.data() + cell(t, a, 0), shape_.states};
  }
  std::span<double> exit_row(std::size_t t, std::size_t a) { return {exit_.data() + cell(t, a, 0), shape_.states}; }
  std::span<const double> exit_row(std::size_t t, std::size_t a) const {
    return {exit_.data() + cell(t, a, 0), shape_.states};
  }

  /// Plants standing in the market at time t: installed(t) before the
  /// horizon, the terminal lump at t = steps.
  std::span<const double> standing_row(std::size_t t, std::size_t a) const {
    return t < shape_.steps ? installed_row(t, a) : exit_row(t, a);
  }

  /// *this = weight * other + (1 - weight) * *this.
  void blend(const MeasureFlow& other, double weight) {
    if (!(other.shape_ == shape_)) throw InputError("cannot blend measure flows of different shapes");
    const double keep = 1.0 - weight;
    auto mix = [&](std::vector<double>& a, const std::vector<double>& b) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = weight * b[i] + keep * a[i];
    };
    mix(potential_, other.potential_);
    mix(entry_, other.entry_);
    mix(installed_, other.installed_);
    mix(exit_, other.exit_);
  }

  /// *this += s * other.
  void add_scaled(const MeasureFlow& other, double s) {
    if (!(other.shape_ == shape_)) throw InputError("cannot combine measure flows of different shapes");
    auto axpy = [&](std::vector<double>& a, const std::vector<double>& b) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
    };
    axpy(potential_, other.potential_);
    axpy(entry_, other.entry_);
    axpy(installed_, other.installed_);
    axpy(exit_, other.exit_);
  }

  /// Largest absolute entry of *this - other.
  double max_difference(const MeasureFlow& other) const {
    if (!(other.shape_ == shape_)) throw InputError("cannot compare measure flows of different shapes");
    double d = 0.0;
    auto walk = [&](const std::vector<double>& a, const std::vector<double>& b) {
      for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    };
    walk(potential_, other.potential_);
    walk(entry_, other.entry_);
    walk(installed_, other.installed_);
    walk(exit_, other.exit_);
    return d;
  }

  void scale(double s) {
    for (auto* v : {&potential_, &entry_, &installed_, &exit_})
      for (double& x : *v) x *= s;
  }

  double min_value() const {
    double m = 0.0;
    for (const auto* v : {&potential_, &entry_, &installed_, &exit_})
      for (double x : *v) m = std::min(m, x);
    return m;
  }

  double total_entry() const { return sum(entry_); }
  double total_exit() const { return sum(exit_); }
  double expired() const {
    double s = 0.0;
    for (double x : potential_row(shape_.steps)) s += x;
    return s;
  }

  friend bool operator==(const MeasureFlow&, const MeasureFlow&) = default;

 private:
  std::size_t cell(std::size_t t, std::size_t a, std::size_t x) const {
    return (t * shape_.ages + a) * shape_.states + x;
  }
  static double sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }

  FlowShape shape_;
  std::vector<double> potential_, entry_, installed_, exit_;
};

/// A technology with its grids and discretized dynamics on a time grid.
struct DiscreteTechnology {
  TechnologySpec spec;
  StateGrid grid;
  AgeGrid ages{1.0, 1, AgeGrid::Tail::mature};
  GeneratorMatrix generator;
  ImplicitStep step;
  CapacityProfile capacity;
  std::size_t steps = 0;
  double dt = 1.0;

  static DiscreteTechnology make(const TechnologySpec& spec, const StateGrid& grid, std::size_t steps, double dt) {
    spec.validate();
    if (steps == 0) throw ConfigError("time grid needs at least one step");
    DiscreteTechnology d;
    d.spec = spec;
    d.grid = grid;
    d.ages = AgeGrid::for_plant(spec.build_time, spec.lifetime, spec.ramp_width, dt);
    d.generator = state_generator(spec, grid);
    d.step = ImplicitStep(d.generator, dt);
    d.capacity = capacity_profile(spec, d.ages);
    d.steps = steps;
    d.dt = dt;
    return d;
  }

  FlowShape shape() const { return {steps, ages.size(), grid.size()}; }
};

/// Initial populations: undecided projects per state node and existing plants
/// per (age slot, state node).
struct InitialMeasures {
  std::vector<double> potential;
  std::vector<double> installed;

  static InitialMeasures zero(const FlowShape& s) {
    return {std::vector<double>(s.states, 0.0), std::vector<double>(s.ages * s.states, 0.0)};
  }

  double potential_mass() const {
    double s = 0.0;
    for (double x : potential) s += x;
    return s;
  }
  double installed_mass() const {
    double s = 0.0;
    for (double x : installed) s += x;
    return s;
  }

  void check(const FlowShape& s) const {
    if (potential.size() != s.states)
      throw ConfigError("initial potential measure does not match the state grid");
    if (installed.size() != s.ages * s.states)
      throw ConfigError("initial installed measure does not match the age x state grid");
    for (double x : potential)
      if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("initial potential measure must be nonnegative");
    for (double x : installed)
      if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("initial installed measure must be nonnegative");
  }
};

/// Column indices of the flow variables in the linear program. Columns are
/// ordered by time: potential(t), entry(t), then per age installed(t,a), exit(t,a).
class FlowLayout {
 public:
  static constexpr std::size_t none = static_cast<std::size_t>(-1);

  FlowLayout() = default;
  FlowLayout(FlowShape shape, const AgeGrid& ages) : shape_(shape) {
    const std::size_t T = shape.steps, A = shape.ages, X = shape.states;
    potential_.assign(T + 1, none);
    entry_.assign(T + 1, none);
    installed_.assign((T + 1) * A, none);
    exit_.assign((T + 1) * A, none);
    std::size_t col = 0;
    for (std::size_t t = 0; t <= T; ++t) {
      potential_[t] = col, col += X;
      if (t < T) entry_[t] = col, col += X;
      for (std::size_t a = 0; a < A; ++a) {
        if (t < T && ages.holds_mass(a)) installed_[t * A + a] = col, col += X;
        exit_[t * A + a] = col, col += X;
      }
    }
    columns_ = col;
  }

  std::size_t columns() const { return columns_; }
  std::size_t rows() const { return (shape_.steps + 1) * (1 + shape_.ages) * shape_.states; }
  const FlowShape& shape() const { return shape_; }

  // First column of each block, or `none` when the block has no variables.
  std::size_t potential(std::size_t t) const { return potential_[t]; }
  std::size_t entry(std::size_t t) const { return entry_[t]; }
  std::size_t installed(std::size_t t, std::size_t a) const { return installed_[t * shape_.ages + a]; }
  std::size_t exit(std::size_t t, std::size_t a) const { return exit_[t * shape_.ages + a]; }

  // Rows: per time, the pre-entry balance then the installed balance per age.
  std::size_t potential_row(std::size_t t) const { return t * (1 + shape_.ages) * shape_.states; }
  std::size_t installed_row(std::size_t t, std::size_t a) const {
    return (t * (1 + shape_.ages) + 1 + a) * shape_.states;
  }

  std::vector<double> pack(const MeasureFlow& f) const {
    std::vector<double> v(columns_, 0.0);
    const std::size_t T = shape_.steps, A = shape_.ages, X = shape_.states;
    for (std::size_t t = 0; t <= T; ++t) {
      for (std::size_t x = 0; x < X; ++x) {
        v[potential(t) + x] = f.potential(t, x);
        if (entry(t) != none) v[entry(t) + x] = f.entry(t, x);
      }
      for (std::size_t a = 0; a < A; ++a)
        for (std::size_t x = 0; x < X; ++x) {
          if (installed(t, a) != none) v[installed(t, a) + x] = f.installed(t, a, x);
          v[exit(t, a) + x] = f.exit(t, a, x);
        }
    }
    return v;
  }

  MeasureFlow unpack(std::span<const double> v) const {
    MeasureFlow f(shape_);
    const std::size_t T = shape_.steps, A = shape_.ages, X = shape_.states;
    for (std::size_t t = 0; t <= T; ++t) {
      for (std::size_t x = 0; x < X; ++x) {
        f.potential(t, x) = v[potential(t) + x];
        if (entry(t) != none) f.entry(t, x) = v[entry(t) + x];
      }
      for (std::size_t a = 0; a < A; ++a)
        for (std::size_t x = 0; x < X; ++x) {
          if (installed(t, a) != none) f.installed(t, a, x) = v[installed(t, a) + x];
          f.exit(t, a, x) = v[exit(t, a) + x];
        }
    }
    return f;
  }

  /// Column names: mh_t_x, muh_t_x, m_t_a_x, mu_t_a_x.
  std::vector<std::string> column_names() const {
    std::vector<std::string> names(columns_);
    const std::size_t T = shape_.steps, A = shape_.ages, X = shape_.states;
    auto s = [](std::size_t i) { return std::to_string(i); };
    for (std::size_t t = 0; t <= T; ++t) {
      for (std::size_t x = 0; x < X; ++x) {
        names[potential(t) + x] = "mh_" + s(t) + "_" + s(x);
        if (entry(t) != none) names[entry(t) + x] = "muh_" + s(t) + "_" + s(x);
      }
      for (std::size_t a = 0; a < A; ++a)
        for (std::size_t x = 0; x < X; ++x) {
          if (installed(t, a) != none) names[installed(t, a) + x] = "m_" + s(t) + "_" + s(a) + "_" + s(x);
          names[exit(t, a) + x] = "mu_" + s(t) + "_" + s(a) + "_" + s(x);
        }
    }
    return names;
  }

  std::vector<std::string> row_names() const {
    std::vector<std::string> names(rows());
    const std::size_t T = shape_.steps, A = shape_.ages, X = shape_.states;
    auto s = [](std::size_t i) { return std::to_string(i); };
    for (std::size_t t = 0; t <= T; ++t)
      for (std::size_t x = 0; x < X; ++x) {
        names[potential_row(t) + x] = "bh_" + s(t) + "_" + s(x);
        for (std::size_t a = 0; a < A; ++a) names[installed_row(t, a) + x] = "b_" + s(t) + "_" + s(a) + "_" + s(x);
      }
    return names;
  }

 private:
  FlowShape shape_;
  std::vector<std::size_t> potential_, entry_, installed_, exit_;
  std::size_t columns_ = 0;
};

/// The discretized balance equations a technology's measure flow must satisfy.
///
/// Pre-entry class, per state node x:
///   t = 0:  potential(0) + entry(0) = nu_hat_0
///   t > 0:  B (potential(t) + entry(t)) - potential(t-1) = 0
/// Installed class, per age slot a and node x:
///   t = 0:  installed(0,a) + exit(0,a) - [a = 0] entry(0) = nu_0(a)
///   t > 0:  B (installed(t,a) + exit(t,a) - [a = 0] entry(t)) - sum_{a' -> a} installed(t-1,a') = 0
/// with B = I - dt L* the implicit-step matrix and a' -> a the age transport.
class ConstraintSystem {
 public:
  ConstraintSystem(const DiscreteTechnology& tech, InitialMeasures initial)
      : tech_(&tech), initial_(std::move(initial)), layout_(tech.shape(), tech.ages) {
    initial_.check(tech.shape());
  }

  const DiscreteTechnology& technology() const { return *tech_; }
  const InitialMeasures& initial() const { return initial_; }
  const FlowLayout& layout() const { return layout_; }
  std::size_t rows() const { return layout_.rows(); }
  std::size_t columns() const { return layout_.columns(); }

  /// Row-wise residual A v - b of a flow.
  std::vector<double> residual(const MeasureFlow& f) const {
    if (!(f.shape() == layout_.shape())) throw InputError("measure flow shape does not match the constraints");
    const auto& s = layout_.shape();
    const auto& B = tech_->step.balance();
    const auto& ages = tech_->ages;
    std::vector<double> r(rows(), 0.0);
    std::vector<double> w(s.states);

    for (std::size_t t = 0; t <= s.steps; ++t) {
      for (std::size_t x = 0; x < s.states; ++x) w[x] = f.potential(t, x) + (t < s.steps ? f.entry(t, x) : 0.0);
      const auto lhs = t == 0 ? w : B.apply(w);
      for (std::size_t x = 0; x < s.states; ++x) {
        const double src = t == 0 ? initial_.potential[x] : f.potential(t - 1, x);
        r[layout_.potential_row(t) + x] = lhs[x] - src;
      }
      for (std::size_t a = 0; a < s.ages; ++a) {
        for (std::size_t x = 0; x < s.states; ++x) {
          double v = f.exit(t, a, x);
          if (t < s.steps && ages.holds_mass(a)) v += f.installed(t, a, x);
          if (a == 0 && t < s.steps) v -= f.entry(t, x);
          w[x] = v;
        }
        const auto lhs2 = t == 0 ? w : B.apply(w);
        for (std::size_t x = 0; x < s.states; ++x) {
          double src = 0.0;
          if (t == 0) {
            src = initial_.installed[a * s.states + x];
          } else {
            for (std::size_t ap = 0; ap < s.ages; ++ap)
              if (ages.holds_mass(ap) && ages.next(ap) == a) src += f.installed(t - 1, ap, x);
          }
          r[layout_.installed_row(t, a) + x] = lhs2[x] - src;
        }
      }
    }
    return r;
  }

  double residual_norm(const MeasureFlow& f) const {
    double m = 0.0;
    for (double v : residual(f)) m = std::max(m, std::abs(v));
    return m;
  }

  /// Right-hand side b; nonzero only at t = 0.
  std::vector<double> rhs() const {
    const auto& s = layout_.shape();
    std::vector<double> b(rows(), 0.0);
    for (std::size_t x = 0; x < s.states; ++x) {
      b[layout_.potential_row(0) + x] = initial_.potential[x];
      for (std::size_t a = 0; a < s.ages; ++a) b[layout_.installed_row(0, a) + x] = initial_.installed[a * s.states + x];
    }
    return b;
  }

  /// The constraint matrix A.
  SparseMatrix matrix() const {
    const auto& s = layout_.shape();
    const auto& B = tech_->step.balance();
    const auto& ages = tech_->ages;
    std::vector<SparseMatrix::Entry> e;
    const std::size_t X = s.states;

    // Adds coef * (B or I) applied to block starting at column `col` into rows starting at `row`.
    auto block = [&](std::size_t row, std::size_t col, double coef, bool identity) {
      for (std::size_t x = 0; x < X; ++x) {
        if (identity) {
          e.push_back({row + x, col + x, coef});
          continue;
        }
        e.push_back({row + x, col + x, coef * B.diag[x]});
        if (x > 0) e.push_back({row + x, col + x - 1, coef * B.lower[x]});
        if (x + 1 < X) e.push_back({row + x, col + x + 1, coef * B.upper[x]});
      }
    };

    for (std::size_t t = 0; t <= s.steps; ++t) {
      const bool first = t == 0;
      const std::size_t prow = layout_.potential_row(t);
      block(prow, layout_.potential(t), 1.0, first);
      if (layout_.entry(t) != FlowLayout::none) block(prow, layout_.entry(t), 1.0, first);
      if (!first) block(prow, layout_.potential(t - 1), -1.0, true);

      for (std::size_t a = 0; a < s.ages; ++a) {
        const std::size_t irow = layout_.installed_row(t, a);
        block(irow, layout_.exit(t, a), 1.0, first);
        if (layout_.installed(t, a) != FlowLayout::none) block(irow, layout_.installed(t, a), 1.0, first);
        if (a == 0 && layout_.entry(t) != FlowLayout::none) block(irow, layout_.entry(t), -1.0, first);
        if (!first)
          for (std::size_t ap = 0; ap < s.ages; ++ap)
            if (ages.holds_mass(ap) && ages.next(ap) == a) block(irow, layout_.installed(t - 1, ap), -1.0, true);
      }
    }
    return SparseMatrix(rows(), columns(), std::move(e));
  }

 private:
  const DiscreteTechnology* tech_;
  InitialMeasures initial_;
  FlowLayout layout_;
};

inline ConstraintSystem build_constraints(const DiscreteTechnology& tech, InitialMeasures initial) {
  return ConstraintSystem(tech, std::move(initial));
}

/// Fractions of the local mass that stop at each decision cell.
struct StoppingControls {
  FlowShape shape;
  std::vector<double> entry;  ///< [t][x], t < steps
  std::vector<double> exit;   ///< [t][a][x], t < steps

  static StoppingControls constant(const FlowShape& s, double entry_fraction, double exit_fraction) {
    return {s, std::vector<double>(s.steps * s.states, entry_fraction),
            std::vector<double>(s.steps * s.ages * s.states, exit_fraction)};
  }
  /// Enter everything at t = 0 and never exit voluntarily.
  static StoppingControls enter_now(const FlowShape& s) {
    auto c = constant(s, 0.0, 0.0);
    std::fill(c.entry.begin(), c.entry.begin() + static_cast<std::ptrdiff_t>(s.states), 1.0);
    return c;
  }
  double& entry_at(std::size_t t, std::size_t x) { return entry[t * shape.states + x]; }
  double entry_at(std::size_t t, std::size_t x) const { return entry[t * shape.states + x]; }
  double& exit_at(std::size_t t, std::size_t a, std::size_t x) { return exit[(t * shape.ages + a) * shape.states + x]; }
  double exit_at(std::size_t t, std::size_t a, std::size_t x) const {
    return exit[(t * shape.ages + a) * shape.states + x];
  }
};

/// Evolves the initial populations forward under the given stopping controls.
/// Decisions at each step are taken after the diffusion step; all standing
/// plants stop at the horizon and decommission slots are emptied.
inline MeasureFlow forward_evolve(const DiscreteTechnology& tech, const StoppingControls& controls,
                                  const InitialMeasures& initial) {
  const FlowShape s = tech.shape();
  initial.check(s);
  if (!(controls.shape == s)) throw InputError("stopping controls do not match the technology grids");
  for (double c : controls.entry)
    if (!(c >= 0.0 && c <= 1.0)) throw InputError("entry control outside [0, 1]");
  for (double c : controls.exit)
    if (!(c >= 0.0 && c <= 1.0)) throw InputError("exit control outside [0, 1]");

  MeasureFlow f(s);
  const std::size_t X = s.states, A = s.ages;
  const auto& ages = tech.ages;

  std::vector<double> pre_hat(initial.potential);
  for (std::size_t t = 0; t < s.steps; ++t) {
    for (std::size_t x = 0; x < X; ++x) {
      const double e = controls.entry_at(t, x) * pre_hat[x];
      f.entry(t, x) = e;
      f.potential(t, x) = pre_hat[x] - e;
    }
    std::copy_n(f.potential_row(t).begin(), X, pre_hat.begin());
    tech.step.forward_in_place(pre_hat);
  }
  std::copy_n(pre_hat.begin(), X, f.potential_row(s.steps).begin());

  std::vector<double> pre(initial.installed), next(A * X), moved(X);
  for (std::size_t x = 0; x < X; ++x) pre[x] += f.entry(0, x);
  for (std::size_t t = 0; t < s.steps; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t x = 0; x < X; ++x) {
        const double p = pre[a * X + x];
        const double out = ages.holds_mass(a) ? controls.exit_at(t, a, x) * p : p;
        f.exit(t, a, x) = out;
        if (ages.holds_mass(a)) f.installed(t, a, x) = p - out;
      }
      if (!ages.holds_mass(a)) continue;
      std::copy_n(f.installed_row(t, a).begin(), X, moved.begin());
      tech.step.forward_in_place(moved);
      const std::size_t na = ages.next(a);
      for (std::size_t x = 0; x < X; ++x) next[na * X + x] += moved[x];
    }
    if (t + 1 < s.steps)
      for (std::size_t x = 0; x < X; ++x) next[x] += f.entry(t + 1, x);
    pre.swap(next);
  }
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t x = 0; x < X; ++x) f.exit(s.steps, a, x) = pre[a * X + x];
  return f;
}

/// Mass-balance identities obtained with the test function u = 1.
struct MassBalance {
  double potential_gap;  ///< |sum entry + expired - sum nu_hat_0|
  double installed_gap;  ///< |sum exit - sum nu_0 - sum entry|
};

inline MassBalance mass_balance(const MeasureFlow& f, const InitialMeasures& initial) {
  return {std::abs(f.total_entry() + f.expired() - initial.potential_mass()),
          std::abs(f.total_exit() - initial.installed_mass() - f.total_entry())};
}

}  // namespace mfgelec
