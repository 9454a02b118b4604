#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mfgelec/errors.hpp"

namespace mfgelec {

/// Nodes of the state space of one technology (cost level or capacity factor).
struct StateGrid {
  std::vector<double> nodes;

  static StateGrid uniform(double lo, double hi, std::size_t count) {
    if (count < 3) throw ConfigError("state grid needs at least 3 nodes");
    if (!(hi > lo)) throw ConfigError("state grid upper bound must exceed lower bound");
    StateGrid g;
    g.nodes.resize(count);
    const double h = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) g.nodes[i] = lo + h * static_cast<double>(i);
    g.nodes.back() = hi;
    return g;
  }

  std::size_t size() const { return nodes.size(); }
  double lo() const { return nodes.front(); }
  double hi() const { return nodes.back(); }

  /// Left edge of the cell owned by node i (midpoint convention, clipped to the domain).
  double cell_lo(std::size_t i) const { return i == 0 ? lo() : 0.5 * (nodes[i - 1] + nodes[i]); }
  double cell_hi(std::size_t i) const {
    return i + 1 == nodes.size() ? hi() : 0.5 * (nodes[i] + nodes[i + 1]);
  }

  std::size_t nearest(double x) const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < nodes.size(); ++i)
      if (std::abs(nodes[i] - x) < std::abs(nodes[best] - x)) best = i;
    return best;
  }

  void validate() const {
    if (nodes.size() < 3) throw ConfigError("state grid needs at least 3 nodes");
    for (std::size_t i = 1; i < nodes.size(); ++i)
      if (!(nodes[i] > nodes[i - 1])) throw ConfigError("state grid nodes must be strictly increasing");
  }

  friend bool operator==(const StateGrid&, const StateGrid&) = default;
};

/// Plant ages on the time step. Age transport is an index shift by one slot
/// per step. The last slot is either an absorbing "mature" bucket (infinite
/// lifetime) or a decommission slot that cannot hold mass.
class AgeGrid {
 public:
  enum class Tail { mature, decommission };

  AgeGrid(double step, std::size_t slots, Tail tail) : step_(step), slots_(slots), tail_(tail) {
    if (!(step > 0.0)) throw ConfigError("age step must be positive");
    if (slots == 0) throw ConfigError("age grid needs at least one slot");
    if (tail == Tail::decommission && slots < 2)
      throw ConfigError("finite-lifetime age grid needs a decommission slot after the operating ages");
  }

  /// Grid for a plant with the given build time, lifetime (may be +inf) and
  /// capacity ramp width, on time step dt.
  static AgeGrid for_plant(double build_time, double lifetime, double ramp_width, double dt) {
    constexpr double eps = 1e-9;
    if (std::isinf(lifetime)) {
      const auto mature = static_cast<std::size_t>(std::ceil((build_time + ramp_width) / dt - eps));
      return AgeGrid(dt, mature + 1, Tail::mature);
    }
    const auto last = static_cast<std::size_t>(std::floor((lifetime + ramp_width) / dt + eps)) + 1;
    return AgeGrid(dt, last + 1, Tail::decommission);
  }

  double step() const { return step_; }
  std::size_t size() const { return slots_; }
  Tail tail() const { return tail_; }
  bool has_mature_bucket() const { return tail_ == Tail::mature; }
  double age(std::size_t a) const { return step_ * static_cast<double>(a); }

  /// Slot occupied one step later by mass now in slot a.
  std::size_t next(std::size_t a) const {
    if (tail_ == Tail::mature && a + 1 >= slots_) return slots_ - 1;
    return a + 1;
  }

  /// False for the decommission slot, whose occupation is identically zero.
  bool holds_mass(std::size_t a) const { return !(tail_ == Tail::decommission && a + 1 == slots_); }

  /// Slot of a plant of the given age; ages past the mature bucket collapse into it.
  std::size_t slot_for_age(double years) const {
    if (years < -1e-12) throw InputError("plant age must be nonnegative");
    const auto k = static_cast<std::size_t>(std::llround(years / step_));
    if (k + 1 >= slots_) {
      if (tail_ == Tail::mature) return slots_ - 1;
      throw InputError("plant age beyond the technology lifetime");
    }
    return k;
  }

  friend bool operator==(const AgeGrid&, const AgeGrid&) = default;

 private:
  double step_;
  std::size_t slots_;
  Tail tail_;
};

}  // namespace mfgelec
