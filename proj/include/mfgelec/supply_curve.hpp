#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mfgelec/errors.hpp"

namespace mfgelec {

/// Piecewise-linear increasing supply function q = S(p).
///
/// Breakpoints are (price, quantity) pairs with the first price at 0, so the
/// first quantity is the intercept. Beyond the last breakpoint the final slope
/// is extended; below 0 the first slope is extended. The intercept may be
/// negative, which yields a floor price at which supply starts.
class SupplyCurve {
 public:
  SupplyCurve() : SupplyCurve({0.0, 1.0}, {0.0, 1.0}) {}

  SupplyCurve(std::vector<double> prices, std::vector<double> quantities)
      : prices_(std::move(prices)), quantities_(std::move(quantities)) {
    if (prices_.size() != quantities_.size() || prices_.size() < 2)
      throw ConfigError("supply curve needs at least two (price, quantity) breakpoints");
    if (prices_.front() != 0.0)
      throw ConfigError("supply curve breakpoints must start at price 0");
    for (std::size_t i = 1; i < prices_.size(); ++i) {
      if (!(prices_[i] > prices_[i - 1]))
        throw ConfigError("supply curve prices must be strictly increasing");
      if (quantities_[i] < quantities_[i - 1])
        throw ConfigError("supply curve quantities must be nondecreasing in price");
    }
    cumulative_.assign(prices_.size(), 0.0);
    for (std::size_t i = 1; i < prices_.size(); ++i)
      cumulative_[i] = cumulative_[i - 1] +
                       0.5 * (quantities_[i] + quantities_[i - 1]) * (prices_[i] - prices_[i - 1]);
  }

  static SupplyCurve linear(double slope, double intercept = 0.0) {
    return SupplyCurve({0.0, 1.0}, {intercept, intercept + slope});
  }

  double operator()(double p) const {
    const std::size_t s = segment(p);
    return quantities_[s] + segment_slope(s) * (p - prices_[s]);
  }

  /// Right derivative dS/dp.
  double slope(double p) const { return segment_slope(segment(p)); }

  /// Integral of S from 0 to p.
  double integral(double p) const {
    const std::size_t s = segment(p);
    const double dp = p - prices_[s];
    return cumulative_[s] + quantities_[s] * dp + 0.5 * segment_slope(s) * dp * dp;
  }

  double min_slope() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s + 1 < prices_.size(); ++s) m = std::min(m, segment_slope(s));
    return m;
  }

  /// Smallest price p with S(p) >= q, extrapolating the end segments.
  double inverse(double q) const {
    std::size_t s = 0;
    while (s + 2 < prices_.size() && q > quantities_[s + 1]) ++s;
    const double k = segment_slope(s);
    if (k <= 0.0) return prices_[s];
    return prices_[s] + (q - quantities_[s]) / k;
  }

  std::span<const double> prices() const { return prices_; }
  std::span<const double> quantities() const { return quantities_; }

  friend bool operator==(const SupplyCurve& a, const SupplyCurve& b) {
    return a.prices_ == b.prices_ && a.quantities_ == b.quantities_;
  }

 private:
  std::size_t segment(double p) const {
    const auto it = std::upper_bound(prices_.begin() + 1, prices_.end() - 1, p);
    return static_cast<std::size_t>(it - prices_.begin()) - 1;
  }
  double segment_slope(std::size_t s) const {
    return (quantities_[s + 1] - quantities_[s]) / (prices_[s + 1] - prices_[s]);
  }

  std::vector<double> prices_;
  std::vector<double> quantities_;
  std::vector<double> cumulative_;
};

}  // namespace mfgelec
