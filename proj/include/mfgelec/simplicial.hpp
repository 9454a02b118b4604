#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mfgelec/best_response.hpp"
#include "mfgelec/clearing.hpp"
#include "mfgelec/errors.hpp"
#include "mfgelec/measure.hpp"
#include "mfgelec/parallel.hpp"
#include "mfgelec/problem.hpp"

namespace mfgelec {

/// A vertex of one technology's flow polytope (a pure stopping policy)
/// together with what is needed to price it without touching the flow.
struct Column {
  MeasureFlow flow;
  double weight = 0.0;
  double fixed = 0.0;        ///< part of the objective that does not depend on prices
  std::vector<double> load;  ///< [t][x], t < steps: capacity-weighted occupation
};

using ColumnSet = std::vector<std::vector<Column>>;  ///< per technology

namespace detail {

inline std::vector<double> column_load(const Problem& p, std::size_t i, const MeasureFlow& f) {
  const auto& tech = p.technology(i);
  const std::size_t T = p.steps(), X = tech.grid.size();
  std::vector<double> load(T * X, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t a = 0; a < tech.ages.size(); ++a) {
      const double lam = tech.capacity[a];
      if (lam == 0.0) continue;
      const auto row = f.installed_row(t, a);
      for (std::size_t x = 0; x < X; ++x) load[t * X + x] += lam * row[x];
    }
  return load;
}

// Discounted per-step price coefficients of the load: the running reward of
// a column is sum_{t,x} load * coefficient plus its fixed part.
inline std::vector<double> load_coefficients(const Problem& p, std::size_t i, const std::vector<PricePoint>& prices) {
  const auto& tech = p.technology(i);
  const auto& sc = p.scenario();
  const std::size_t T = p.steps(), X = tech.grid.size();
  std::vector<double> c(T * X);
  for (std::size_t t = 0; t < T; ++t) {
    const double disc = std::exp(-sc.discount_rate * sc.time(t)) * sc.dt();
    const auto g = yearly_gain(tech, prices[t], sc.carbon_price[t], sc);
    for (std::size_t x = 0; x < X; ++x) c[t * X + x] = disc * g[x];
  }
  return c;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

}  // namespace detail

inline Column make_column(const Problem& p, std::size_t i, MeasureFlow flow, const RewardField& reward,
                          const PriceSystem& prices) {
  Column c;
  c.load = detail::column_load(p, i, flow);
  const auto coef = detail::load_coefficients(p, i, prices.points);
  c.fixed = reward.value(flow) - detail::dot(c.load, coef);
  c.flow = std::move(flow);
  return c;
}

/// Maximizes the aggregate welfare over convex combinations of the columns
/// of each technology. Rewards are the welfare gradient, so a column's
/// marginal value is its reward; the Hessian in the weights is
/// -sum_t w_t s_t^T M_t^{-1} s_t with M_t the clearing Hessian and s_t the
/// columns' supply responses at the cleared prices.
class SimplicialMaster {
 public:
  struct Options {
    std::size_t max_newton = 100;
    double tolerance = 1e-10;  ///< on the reduced gradient, relative to the largest column value
    ClearingOptions clearing;
  };

  SimplicialMaster(const Problem& p, ColumnSet& columns, Options opt) : p_(p), cols_(columns), opt_(opt) {
    for (std::size_t i = 0; i < cols_.size(); ++i)
      for (std::size_t k = 0; k < cols_[i].size(); ++k) index_.push_back({i, k});
  }

  /// Returns the number of Newton steps taken.
  std::size_t solve() {
    const std::size_t n = index_.size();
    std::vector<double> w(n);
    for (std::size_t j = 0; j < n; ++j) w[j] = column(j).weight;
    normalize(w);
    auto ev = evaluate(w, true);
    std::size_t it = 0;
    for (; it < opt_.max_newton; ++it) {
      const auto lambda = multipliers(w, ev.grad);
      if (residual(w, ev.grad, lambda) <= tolerance(ev.grad)) break;
      std::vector<char> free(n, 0);
      for (std::size_t j = 0; j < n; ++j)
        free[j] = w[j] > 0.0 || ev.grad[j] > lambda[index_[j].tech] + tolerance(ev.grad);
      auto d = newton_direction(ev, free);
      // Columns at zero weight that the step would push negative leave the free set.
      for (bool trimmed = true; trimmed;) {
        trimmed = false;
        for (std::size_t j = 0; j < n; ++j)
          if (free[j] && w[j] == 0.0 && d[j] < 0.0) free[j] = 0, trimmed = true;
        if (trimmed) d = newton_direction(ev, free);
      }
      double slope0 = 0.0;
      for (std::size_t j = 0; j < n; ++j) slope0 += d[j] * ev.grad[j];
      if (!(slope0 > tolerance(ev.grad) * 1e-6)) {
        d = towards_best(w, ev.grad);
        slope0 = 0.0;
        for (std::size_t j = 0; j < n; ++j) slope0 += d[j] * ev.grad[j];
      }
      if (!(slope0 > 0.0)) break;

      double step_max = std::numeric_limits<double>::infinity();
      std::size_t blocking = n;
      for (std::size_t j = 0; j < n; ++j)
        if (d[j] < 0.0 && w[j] / -d[j] < step_max) step_max = w[j] / -d[j], blocking = j;
      const double first = std::min(1.0, step_max);
      const double step = line_search(w, d, first);
      if (!(step > 0.0)) break;
      for (std::size_t j = 0; j < n; ++j) w[j] = std::max(w[j] + step * d[j], 0.0);
      if (step == step_max && blocking < n) w[blocking] = 0.0;
      for (auto& v : w)
        if (v < 1e-15) v = 0.0;
      normalize(w);
      ev = evaluate(w, true);
    }
    for (std::size_t j = 0; j < n; ++j) column(j).weight = w[j];
    return it;
  }

 private:
  struct Ref {
    std::size_t tech, k;
  };
  struct Evaluation {
    std::vector<double> grad;
    Eigen::MatrixXd hessian;  ///< negative semidefinite
  };

  Column& column(std::size_t j) { return cols_[index_[j].tech][index_[j].k]; }
  const Column& column(std::size_t j) const { return cols_[index_[j].tech][index_[j].k]; }

  void normalize(std::vector<double>& w) const {
    std::vector<double> total(cols_.size(), 0.0);
    for (std::size_t j = 0; j < w.size(); ++j) total[index_[j].tech] += w[j];
    for (std::size_t j = 0; j < w.size(); ++j)
      if (total[index_[j].tech] > 0.0) w[j] /= total[index_[j].tech];
  }

  double tolerance(const std::vector<double>& g) const {
    double m = 1.0;
    for (double v : g) m = std::max(m, std::abs(v));
    return opt_.tolerance * m;
  }

  std::vector<double> multipliers(const std::vector<double>& w, const std::vector<double>& g) const {
    std::vector<double> lam(cols_.size(), 0.0);
    for (std::size_t j = 0; j < w.size(); ++j) lam[index_[j].tech] += w[j] * g[j];
    return lam;
  }

  double residual(const std::vector<double>& w, const std::vector<double>& g, const std::vector<double>& lam) const {
    double r = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gap = g[j] - lam[index_[j].tech];
      r = std::max(r, w[j] > 0.0 ? std::abs(gap) : std::max(gap, 0.0));
    }
    return r;
  }

  // Aggregate loads of each technology under weights w.
  std::vector<std::vector<double>> aggregate(const std::vector<double>& w) const {
    std::vector<std::vector<double>> agg(cols_.size());
    for (std::size_t i = 0; i < cols_.size(); ++i) agg[i].assign(cols_[i].front().load.size(), 0.0);
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (w[j] == 0.0) continue;
      const auto& load = column(j).load;
      auto& a = agg[index_[j].tech];
      for (std::size_t q = 0; q < load.size(); ++q) a[q] += w[j] * load[q];
    }
    for (auto& a : agg)
      for (auto& v : a) v = std::max(v, 0.0);
    return agg;
  }

  ClearingInput input_at(const std::vector<std::vector<double>>& agg, std::size_t t) const {
    const auto& sc = p_.scenario();
    ClearingInput in;
    in.demand_peak = sc.demand_peak[t];
    in.demand_offpeak = sc.demand_offpeak[t];
    in.carbon_price = sc.carbon_price[t];
    for (std::size_t i = 0; i < p_.technologies(); ++i) {
      const auto& tech = p_.technology(i);
      const std::size_t X = tech.grid.size();
      const auto first = agg[i].begin() + static_cast<std::ptrdiff_t>(t * X);
      if (tech.spec.conventional()) {
        in.conventional.push_back({tech.spec.fuel->fuel, tech.spec.fuel->units_per_mwh, tech.spec.offer_scale,
                                   tech.grid.nodes, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(X))});
      } else {
        for (std::size_t x = 0; x < X; ++x) in.renewable += tech.grid.nodes[x] * agg[i][t * X + x];
      }
    }
    return in;
  }

  Evaluation evaluate(const std::vector<double>& w, bool with_hessian) const {
    const std::size_t T = p_.steps(), n = w.size(), I = cols_.size();
    const auto agg = aggregate(w);
    std::vector<PricePoint> prices(T);
    std::vector<ClearingInput> inputs(T);
    parallel_for(T, [&](std::size_t t) {
      inputs[t] = input_at(agg, t);
      prices[t] = clear(p_.market(), inputs[t], opt_.clearing);
    });

    Evaluation ev;
    ev.grad.resize(n);
    std::vector<std::vector<double>> coef(I);
    for (std::size_t i = 0; i < I; ++i) coef[i] = detail::load_coefficients(p_, i, prices);
    for (std::size_t j = 0; j < n; ++j) {
      const auto& c = column(j);
      ev.grad[j] = c.fixed + detail::dot(c.load, coef[index_[j].tech]);
    }
    if (!with_hessian) return ev;

    const auto& m = p_.market();
    const auto& sc = p_.scenario();
    const std::size_t dim = m.dimension();
    const auto N = static_cast<Eigen::Index>(n);
    ev.hessian = Eigen::MatrixXd::Zero(N, N);
    Eigen::MatrixXd S(N, static_cast<Eigen::Index>(dim));
    for (std::size_t t = 0; t < T; ++t) {
      const auto& pt = prices[t];
      const auto z = pt.coordinates();
      const auto box = price_box(m, inputs[t]);
      const auto pv = potential(m, inputs[t], z);
      std::vector<std::size_t> freec;
      for (std::size_t q = 0; q < dim; ++q) {
        const bool at_lo = z[q] <= box.lo[q] + 1e-9 * std::max(1.0, box.hi[q]) && pv.gradient[q] >= 0.0;
        const bool at_hi = z[q] >= box.hi[q] - 1e-9 * std::max(1.0, box.hi[q]) && pv.gradient[q] <= 0.0;
        if (!at_lo && !at_hi) freec.push_back(q);
      }
      if (freec.empty()) continue;
      const auto Mfull = potential_hessian(m, inputs[t], z);
      const auto nf = static_cast<Eigen::Index>(freec.size());
      Eigen::MatrixXd M(nf, nf);
      for (Eigen::Index a = 0; a < nf; ++a)
        for (Eigen::Index b = 0; b < nf; ++b)
          M(a, b) = Mfull(static_cast<Eigen::Index>(freec[static_cast<std::size_t>(a)]),
                          static_cast<Eigen::Index>(freec[static_cast<std::size_t>(b)]));

      // Supply response of one unit of each column at the cleared prices.
      std::vector<std::vector<double>> unit(I);
      for (std::size_t i = 0; i < I; ++i) {
        const auto& tech = p_.technology(i);
        const std::size_t X = tech.grid.size();
        unit[i].assign(X * dim, 0.0);
        if (tech.spec.conventional()) {
          const auto& link = *tech.spec.fuel;
          const OfferFunction F(tech.spec.offer_scale);
          const double var = link.units_per_mwh * (sc.fuels[link.fuel].emission_intensity * sc.carbon_price[t] +
                                                   pt.fuel[link.fuel]);
          for (std::size_t x = 0; x < X; ++x) {
            const double fp = m.peak_fraction * F(pt.peak - var - tech.grid.nodes[x]);
            const double fop = m.offpeak_fraction() * F(pt.offpeak - var - tech.grid.nodes[x]);
            unit[i][x * dim + 0] = fp;
            unit[i][x * dim + 1] = fop;
            unit[i][x * dim + 2 + link.fuel] = -link.units_per_mwh * (fp + fop);
          }
        } else {
          const double sp = inputs[t].demand_peak > inputs[t].renewable ? m.peak_fraction : 0.0;
          const double sop = inputs[t].demand_offpeak > inputs[t].renewable ? m.offpeak_fraction() : 0.0;
          for (std::size_t x = 0; x < X; ++x) {
            unit[i][x * dim + 0] = sp * tech.grid.nodes[x];
            unit[i][x * dim + 1] = sop * tech.grid.nodes[x];
          }
        }
      }
      S.setZero();
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t i = index_[j].tech;
        const std::size_t X = p_.technology(i).grid.size();
        const auto& load = column(j).load;
        for (std::size_t x = 0; x < X; ++x) {
          const double l = load[t * X + x];
          if (l == 0.0) continue;
          for (std::size_t q = 0; q < dim; ++q) S(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(q)) += l * unit[i][x * dim + q];
        }
      }
      Eigen::MatrixXd Sf(N, nf);
      for (Eigen::Index a = 0; a < nf; ++a) Sf.col(a) = S.col(static_cast<Eigen::Index>(freec[static_cast<std::size_t>(a)]));
      const double scale = std::exp(-sc.discount_rate * sc.time(t)) * sc.dt() * sc.hours_per_year;
      const Eigen::MatrixXd Y = M.ldlt().solve(Sf.transpose());
      ev.hessian.noalias() -= scale * (Sf * Y);
    }
    return ev;
  }

  // Newton direction on the free columns keeping each technology's weights summing to one.
  std::vector<double> newton_direction(const Evaluation& ev, const std::vector<char>& free) const {
    const std::size_t n = free.size(), I = cols_.size();
    std::vector<std::size_t> f;
    for (std::size_t j = 0; j < n; ++j)
      if (free[j]) f.push_back(j);
    const auto nf = static_cast<Eigen::Index>(f.size());
    Eigen::MatrixXd Q(nf, nf);
    Eigen::VectorXd g(nf);
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(nf, static_cast<Eigen::Index>(I));
    double diag = 0.0;
    for (Eigen::Index a = 0; a < nf; ++a) {
      const auto ja = static_cast<Eigen::Index>(f[static_cast<std::size_t>(a)]);
      g(a) = ev.grad[f[static_cast<std::size_t>(a)]];
      E(a, static_cast<Eigen::Index>(index_[f[static_cast<std::size_t>(a)]].tech)) = 1.0;
      for (Eigen::Index b = 0; b < nf; ++b) Q(a, b) = -ev.hessian(ja, static_cast<Eigen::Index>(f[static_cast<std::size_t>(b)]));
      diag = std::max(diag, Q(a, a));
    }
    // Flat directions (columns with equal loads) get a tiny proximal term
    // and are then resolved by the ratio test.
    const double mu = 1e-9 * std::max(diag, 1e-300) + 1e-300;
    Q.diagonal().array() += mu;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(Q);
    const Eigen::MatrixXd QE = ldlt.solve(E);
    const Eigen::VectorXd Qg = ldlt.solve(g);
    Eigen::MatrixXd ETQE = E.transpose() * QE;
    for (Eigen::Index i = 0; i < ETQE.rows(); ++i)
      if (ETQE(i, i) == 0.0) ETQE(i, i) = 1.0;
    const Eigen::VectorXd nu = ETQE.ldlt().solve(E.transpose() * Qg);
    const Eigen::VectorXd d = Qg - QE * nu;
    std::vector<double> out(n, 0.0);
    for (Eigen::Index a = 0; a < nf; ++a) out[f[static_cast<std::size_t>(a)]] = d(a);
    return out;
  }

  // Per technology, from w straight to the column of largest value.
  std::vector<double> towards_best(const std::vector<double>& w, const std::vector<double>& g) const {
    std::vector<std::size_t> best(cols_.size(), w.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
      auto& b = best[index_[j].tech];
      if (b == w.size() || g[j] > g[b]) b = j;
    }
    std::vector<double> d(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) d[j] = (best[index_[j].tech] == j ? 1.0 : 0.0) - w[j];
    return d;
  }

  double slope(const std::vector<double>& w, const std::vector<double>& d, double s) const {
    std::vector<double> trial(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) trial[j] = std::max(w[j] + s * d[j], 0.0);
    const auto ev = evaluate(trial, false);
    double r = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) r += d[j] * ev.grad[j];
    return r;
  }

  // Largest maximizer of the concave welfare on [0, first] along d.
  double line_search(const std::vector<double>& w, const std::vector<double>& d, double first) const {
    double hi_slope = slope(w, d, first);
    if (hi_slope >= 0.0) return first;
    double lo = 0.0, hi = first;
    double lo_slope = slope(w, d, 0.0);
    for (int k = 0; k < 60 && hi - lo > 1e-14 * first; ++k) {
      // Regula falsi with bisection safeguard.
      double mid = lo + (hi - lo) * lo_slope / (lo_slope - hi_slope);
      if (!(mid > lo + 0.01 * (hi - lo) && mid < hi - 0.01 * (hi - lo))) mid = 0.5 * (lo + hi);
      const double sm = slope(w, d, mid);
      if (sm > 0.0)
        lo = mid, lo_slope = sm;
      else
        hi = mid, hi_slope = sm;
      if (std::abs(sm) <= 1e-12 * std::abs(lo_slope) + 1e-300) return mid;
    }
    return lo;
  }

  const Problem& p_;
  ColumnSet& cols_;
  Options opt_;
  std::vector<Ref> index_;
};

/// Combines the columns of technology i into a flow.
inline MeasureFlow combine(const std::vector<Column>& cols) {
  MeasureFlow f = cols.front().flow;
  f.scale(cols.front().weight);
  for (std::size_t k = 1; k < cols.size(); ++k)
    if (cols[k].weight != 0.0) f.add_scaled(cols[k].flow, cols[k].weight);
  return f;
}

}  // namespace mfgelec
