#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mfgelec/errors.hpp"
#include "mfgelec/model.hpp"
#include "mfgelec/supply_curve.hpp"

namespace mfgelec {

/// Market data that does not change between time steps.
struct Market {
  SupplyCurve baseline;
  std::vector<FuelSpec> fuels;
  double price_cap = 3000.0;
  double peak_fraction = kDefaultPeakFraction;

  double offpeak_fraction() const { return 1.0 - peak_fraction; }
  std::size_t dimension() const { return 2 + fuels.size(); }

  void validate() const {
    if (baseline(0.0) != 0.0) throw ConfigError("baseline supply must vanish at price 0");
    if (!(baseline.min_slope() > 0.0))
      throw ConfigError("baseline supply must be strictly increasing (positive minimum slope) so that the clearing potential is strongly convex");
    for (const auto& f : fuels) {
      if (!(f.supply.min_slope() > 0.0))
        throw ConfigError("fuel '" + f.name +
                          "': supply curve must be strictly increasing (positive minimum slope) so that the clearing potential is strongly convex");
      if (f.emission_intensity < 0.0) throw ConfigError("fuel '" + f.name + "': emission intensity must be nonnegative");
    }
    if (!(price_cap > 0.0)) throw ConfigError("price cap must be positive");
    if (!(peak_fraction > 0.0 && peak_fraction < 1.0)) throw ConfigError("peak fraction must lie in (0, 1)");
  }
};

inline Market market_from(const Scenario& s) {
  return {s.baseline_supply, s.fuels, s.price_cap, s.peak_fraction};
}

/// Offers of one conventional technology at one time step.
struct ConventionalOffer {
  std::size_t fuel = 0;
  double units_per_mwh = 1.0;
  double offer_scale = 1.0;
  std::vector<double> costs;  ///< state nodes (marginal cost level)
  std::vector<double> mass;   ///< capacity-weighted occupation per node, GW
};

struct ClearingInput {
  std::vector<ConventionalOffer> conventional;
  double renewable = 0.0;  ///< R_t, GW
  double demand_peak = 0.0;
  double demand_offpeak = 0.0;
  double carbon_price = 0.0;

  double residual_peak() const { return std::max(demand_peak - renewable, 0.0); }
  double residual_offpeak() const { return std::max(demand_offpeak - renewable, 0.0); }

  void check(const Market& m) const {
    for (const auto& c : conventional) {
      if (c.fuel >= m.fuels.size()) throw InputError("clearing input references an unknown fuel");
      if (c.costs.size() != c.mass.size()) throw InputError("clearing histogram and cost nodes differ in size");
      for (double v : c.mass)
        if (!(v >= 0.0)) throw InputError("clearing histogram must be nonnegative");
    }
    if (!(renewable >= 0.0)) throw InputError("renewable supply must be nonnegative");
  }
};

struct PricePoint {
  double peak = 0.0;
  double offpeak = 0.0;
  std::vector<double> fuel;
  bool loss_of_load_peak = false;
  bool loss_of_load_offpeak = false;

  std::vector<double> coordinates() const {
    std::vector<double> z{peak, offpeak};
    z.insert(z.end(), fuel.begin(), fuel.end());
    return z;
  }
  friend bool operator==(const PricePoint&, const PricePoint&) = default;
};

struct PriceSystem {
  std::vector<PricePoint> points;

  std::size_t size() const { return points.size(); }
  const PricePoint& operator[](std::size_t t) const { return points[t]; }
  PricePoint& operator[](std::size_t t) { return points[t]; }
  friend bool operator==(const PriceSystem&, const PriceSystem&) = default;
};

/// Largest componentwise difference between two price systems.
inline double sup_distance(const PriceSystem& a, const PriceSystem& b) {
  if (a.size() != b.size()) throw InputError("price systems of different lengths");
  double d = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    d = std::max({d, std::abs(a[t].peak - b[t].peak), std::abs(a[t].offpeak - b[t].offpeak)});
    for (std::size_t k = 0; k < a[t].fuel.size(); ++k) d = std::max(d, std::abs(a[t].fuel[k] - b[t].fuel[k]));
  }
  return d;
}

struct PotentialValue {
  double value = 0.0;
  std::vector<double> gradient;  ///< (peak, offpeak, fuel_1..fuel_K)
};

namespace detail {
inline double margin(const ConventionalOffer& c, const Market& m, const ClearingInput& in, double power, double fuel,
                     double cost) {
  const double e = m.fuels[c.fuel].emission_intensity;
  return power - c.units_per_mwh * e * in.carbon_price - c.units_per_mwh * fuel - cost;
}
}  // namespace detail

/// Conventional output (GW) offered at an electricity price given fuel prices.
inline double conventional_supply(const Market& m, const ClearingInput& in, std::size_t tech, double power,
                                  std::span<const double> fuel) {
  const auto& c = in.conventional[tech];
  const OfferFunction F(c.offer_scale);
  double s = 0.0;
  for (std::size_t j = 0; j < c.costs.size(); ++j)
    s += c.mass[j] * F(detail::margin(c, m, in, power, fuel[c.fuel], c.costs[j]));
  return s;
}

/// Value and gradient of the clearing potential at z = (P^p, P^op, P^1..P^K).
/// The gradient components are the clearing residuals (supply minus demand).
inline PotentialValue potential(const Market& m, const ClearingInput& in, std::span<const double> z) {
  const std::size_t K = m.fuels.size();
  if (z.size() != 2 + K) throw InputError("price candidate has the wrong dimension");
  const double cp = m.peak_fraction, cop = m.offpeak_fraction();
  const double dp = in.residual_peak(), dop = in.residual_offpeak();

  PotentialValue out;
  out.gradient.assign(2 + K, 0.0);
  auto& gr = out.gradient;

  double v = cp * m.baseline.integral(z[0]) + cop * m.baseline.integral(z[1]) - cp * z[0] * dp - cop * z[1] * dop;
  double sp = m.baseline(z[0]) - dp, sop = m.baseline(z[1]) - dop;
  for (std::size_t k = 0; k < K; ++k) {
    v += m.fuels[k].supply.integral(z[2 + k]);
    gr[2 + k] = m.fuels[k].supply(z[2 + k]);
  }
  for (const auto& c : in.conventional) {
    const OfferFunction F(c.offer_scale);
    const double pk = z[2 + c.fuel];
    double gp = 0.0, gop = 0.0, fp = 0.0, fop = 0.0;
    for (std::size_t j = 0; j < c.costs.size(); ++j) {
      if (c.mass[j] == 0.0) continue;
      const double mp = detail::margin(c, m, in, z[0], pk, c.costs[j]);
      const double mop = detail::margin(c, m, in, z[1], pk, c.costs[j]);
      gp += c.mass[j] * F.gain(mp);
      gop += c.mass[j] * F.gain(mop);
      fp += c.mass[j] * F(mp);
      fop += c.mass[j] * F(mop);
    }
    v += cp * gp + cop * gop;
    sp += fp;
    sop += fop;
    gr[2 + c.fuel] -= c.units_per_mwh * (cp * fp + cop * fop);
  }
  gr[0] = cp * sp;
  gr[1] = cop * sop;
  out.value = v;
  return out;
}

/// Hessian of the potential (right derivatives at supply-curve kinks).
inline Eigen::MatrixXd potential_hessian(const Market& m, const ClearingInput& in, std::span<const double> z) {
  const std::size_t K = m.fuels.size();
  const double cp = m.peak_fraction, cop = m.offpeak_fraction();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 + K), static_cast<Eigen::Index>(2 + K));
  H(0, 0) = cp * m.baseline.slope(z[0]);
  H(1, 1) = cop * m.baseline.slope(z[1]);
  for (std::size_t k = 0; k < K; ++k) {
    const auto i = static_cast<Eigen::Index>(2 + k);
    H(i, i) = m.fuels[k].supply.slope(z[2 + k]);
  }
  for (const auto& c : in.conventional) {
    const OfferFunction F(c.offer_scale);
    const auto k = static_cast<Eigen::Index>(2 + c.fuel);
    const double f = c.units_per_mwh;
    double dp = 0.0, dop = 0.0;
    for (std::size_t j = 0; j < c.costs.size(); ++j) {
      if (c.mass[j] == 0.0) continue;
      dp += c.mass[j] * F.derivative(detail::margin(c, m, in, z[0], z[2 + c.fuel], c.costs[j]));
      dop += c.mass[j] * F.derivative(detail::margin(c, m, in, z[1], z[2 + c.fuel], c.costs[j]));
    }
    H(0, 0) += cp * dp;
    H(1, 1) += cop * dop;
    H(0, k) -= cp * f * dp;
    H(k, 0) -= cp * f * dp;
    H(1, k) -= cop * f * dop;
    H(k, 1) -= cop * f * dop;
    H(k, k) += f * f * (cp * dp + cop * dop);
  }
  return H;
}

struct ClearingOptions {
  std::size_t max_iter = 200;
  double kkt_tolerance = 1e-8;  ///< scaled by max(1, demand)
  double armijo = 1e-4;
};

/// Box of admissible price coordinates.
struct PriceBox {
  std::vector<double> lo, hi;
};

/// [0, P*]^2 for electricity; for each fuel, [0, P̄_k] with P̄_k above the
/// price at which supply covers the largest conceivable consumption.
inline PriceBox price_box(const Market& m, const ClearingInput& in) {
  const std::size_t K = m.fuels.size();
  PriceBox b{std::vector<double>(2 + K, 0.0), std::vector<double>(2 + K, 0.0)};
  b.hi[0] = b.hi[1] = m.price_cap;
  std::vector<double> demand(K, 0.0);
  for (const auto& c : in.conventional)
    for (double v : c.mass) demand[c.fuel] += c.units_per_mwh * v;
  for (std::size_t k = 0; k < K; ++k) b.hi[2 + k] = std::max(0.0, m.fuels[k].supply.inverse(demand[k])) + 1.0;
  return b;
}

/// Infinity norm of z - proj(z - grad), the first-order optimality residual on the box.
inline double kkt_residual(const PriceBox& box, std::span<const double> z, std::span<const double> grad) {
  double r = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double p = std::clamp(z[i] - grad[i], box.lo[i], box.hi[i]);
    r = std::max(r, std::abs(z[i] - p));
  }
  return r;
}

struct ClearingResult {
  PricePoint prices;
  std::size_t iterations = 0;
  double kkt = 0.0;
};

/// Unique minimizer of the clearing potential over the price box, by
/// projected Newton with Armijo backtracking along the projection arc.
inline ClearingResult clear_detailed(const Market& m, const ClearingInput& in, const ClearingOptions& opt = {}) {
  in.check(m);
  const std::size_t n = m.dimension();
  const auto box = price_box(m, in);
  const double tol = opt.kkt_tolerance * std::max({1.0, in.demand_peak, in.demand_offpeak});

  std::vector<double> z(n);
  z[0] = std::clamp(m.baseline.inverse(in.residual_peak()), 0.0, m.price_cap);
  z[1] = std::clamp(m.baseline.inverse(in.residual_offpeak()), 0.0, m.price_cap);
  for (std::size_t k = 0; k < m.fuels.size(); ++k)
    z[2 + k] = std::clamp(m.fuels[k].supply.inverse(0.0), box.lo[2 + k], box.hi[2 + k]);

  auto pv = potential(m, in, z);
  double kkt = kkt_residual(box, z, pv.gradient);
  std::size_t it = 0;
  std::vector<double> trial(n), dir(n);
  for (; kkt > tol; ++it) {
    if (it >= opt.max_iter) throw NumericalError("price clearing did not converge", kkt);

    const double eps = std::min(1e-6, kkt);
    std::vector<bool> active(n, false);
    for (std::size_t i = 0; i < n; ++i)
      active[i] = (z[i] <= box.lo[i] + eps && pv.gradient[i] > 0.0) || (z[i] >= box.hi[i] - eps && pv.gradient[i] < 0.0);

    const auto H = potential_hessian(m, in, z);
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < n; ++i)
      if (!active[i]) free.push_back(i);
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd Hf(nf, nf);
    Eigen::VectorXd gf(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      gf(a) = pv.gradient[free[static_cast<std::size_t>(a)]];
      for (Eigen::Index b = 0; b < nf; ++b)
        Hf(a, b) = H(static_cast<Eigen::Index>(free[static_cast<std::size_t>(a)]),
                     static_cast<Eigen::Index>(free[static_cast<std::size_t>(b)]));
    }
    const Eigen::VectorXd df = nf > 0 ? Eigen::VectorXd(Hf.ldlt().solve(gf)) : Eigen::VectorXd();
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) dir[i] = pv.gradient[i] / std::max(H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)), 1e-12);
    }
    for (Eigen::Index a = 0; a < nf; ++a) dir[free[static_cast<std::size_t>(a)]] = df(a);

    double alpha = 1.0;
    bool accepted = false;
    std::vector<double> best_z;
    PotentialValue best_pv;
    double best_kkt = kkt;
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = std::clamp(z[i] - alpha * dir[i], box.lo[i], box.hi[i]);
      auto tv = potential(m, in, trial);
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) decrease += pv.gradient[i] * (z[i] - trial[i]);
      // Near the optimum value differences drown in rounding, so a step that
      // halves the residual without raising the value beyond rounding is also taken.
      const double tk = kkt_residual(box, trial, tv.gradient);
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(pv.value));
      const bool armijo = tv.value <= pv.value - opt.armijo * decrease && decrease > 0.0;
      if (armijo || (tk <= 0.5 * kkt && tv.value <= pv.value + noise)) {
        z = trial;
        pv = std::move(tv);
        accepted = true;
        break;
      }
      if (tk < best_kkt) {
        best_kkt = tk;
        best_z = trial;
        best_pv = std::move(tv);
      }
    }
    if (!accepted) {
      if (best_z.empty()) throw NumericalError("price clearing line search failed", kkt);
      z = std::move(best_z);
      pv = std::move(best_pv);
    }
    kkt = kkt_residual(box, z, pv.gradient);
  }

  ClearingResult r;
  r.iterations = it;
  r.kkt = kkt;
  r.prices.peak = z[0];
  r.prices.offpeak = z[1];
  r.prices.fuel.assign(z.begin() + 2, z.end());
  r.prices.loss_of_load_peak = z[0] >= m.price_cap && pv.gradient[0] < 0.0;
  r.prices.loss_of_load_offpeak = z[1] >= m.price_cap && pv.gradient[1] < 0.0;
  return r;
}

inline PricePoint clear(const Market& m, const ClearingInput& in, const ClearingOptions& opt = {}) {
  return clear_detailed(m, in, opt).prices;
}

}  // namespace mfgelec
