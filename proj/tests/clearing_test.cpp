#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mfgelec/mfgelec.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mfgelec;

TEST(Clearing, MatchesCoordinateOracleOnRandomInputs) {
  std::mt19937_64 rng(11);
  int loss_of_load = 0;
  for (int c = 0; c < 50; ++c) {
    const auto cs = support::random_clearing_case(rng, support::pick(rng, 1, 3), support::pick(rng, 1, 4), c % 5 == 0);
    const auto r = clear_detailed(cs.market, cs.input);
    const auto want = oracles::clearing(cs.market, cs.input);
    const auto got = r.prices.coordinates();
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-4) << "case " << c << " coordinate " << i;

    const oracles::Excess ex{cs.market, cs.input};
    const double tol = 1e-6 * std::max({1.0, cs.input.demand_peak});
    for (std::size_t i = 0; i < 2; ++i) {
      const double e = ex(got, i);
      const double p = got[i];
      const bool flag = i == 0 ? r.prices.loss_of_load_peak : r.prices.loss_of_load_offpeak;
      if (p >= cs.market.price_cap) {
        EXPECT_LE(e, tol) << "case " << c;
        EXPECT_EQ(flag, e < 0.0) << "case " << c;
      } else if (p <= 0.0) {
        EXPECT_GE(e, -tol) << "case " << c;
      } else {
        EXPECT_NEAR(e, 0.0, tol) << "case " << c;
        EXPECT_FALSE(flag);
      }
      loss_of_load += flag ? 1 : 0;
    }
  }
  EXPECT_GT(loss_of_load, 0);
}

TEST(Clearing, NoProducersGivesBaselineInversion) {
  Market m;
  m.baseline = SupplyCurve({0.0, 40.0, 400.0}, {0.0, 10.0, 25.0});
  m.price_cap = 400.0;
  ClearingInput in;
  in.demand_peak = 18.0;
  in.demand_offpeak = 5.0;
  const auto p = clear(m, in);
  EXPECT_NEAR(p.peak, m.baseline.inverse(18.0), 1e-8);
  EXPECT_NEAR(p.offpeak, 20.0, 1e-8);

  in.demand_peak = 30.0;
  const auto q = clear(m, in);
  EXPECT_DOUBLE_EQ(q.peak, 400.0);
  EXPECT_TRUE(q.loss_of_load_peak);
  EXPECT_FALSE(q.loss_of_load_offpeak);
}

TEST(Clearing, RenewablesAboveDemandClearAtZero) {
  Market m;
  m.baseline = SupplyCurve::linear(0.5);
  ClearingInput in;
  in.demand_peak = 10.0;
  in.demand_offpeak = 8.0;
  in.renewable = 12.0;
  const auto p = clear(m, in);
  EXPECT_EQ(p.peak, 0.0);
  EXPECT_EQ(p.offpeak, 0.0);
}

TEST(Clearing, PeakShareDefault) { EXPECT_DOUBLE_EQ(kDefaultPeakFraction, 65.0 / 168.0); }

TEST(Potential, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(5);
  for (int c = 0; c < 100; ++c) {
    const auto cs = support::random_clearing_case(rng, support::pick(rng, 1, 3), support::pick(rng, 1, 4), false);
    std::vector<double> z{support::uniform(rng, 1.0, 150.0), support::uniform(rng, 1.0, 150.0)};
    for (std::size_t k = 0; k < cs.market.fuels.size(); ++k) z.push_back(support::uniform(rng, 1.0, 60.0));
    const auto g = potential(cs.market, cs.input, z).gradient;
    double err = 0.0, size = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double h = 1e-5 * std::max(1.0, z[i]);
      auto a = z, b = z;
      a[i] += h;
      b[i] -= h;
      const double fd = (potential(cs.market, cs.input, a).value - potential(cs.market, cs.input, b).value) / (2 * h);
      err = std::max(err, std::abs(fd - g[i]));
      size = std::max(size, std::abs(fd));
    }
    EXPECT_LT(err / std::max(size, 1e-12), 1e-5) << "point " << c;
  }
}

TEST(Potential, HessianMatchesGradientDifferences) {
  std::mt19937_64 rng(6);
  for (int c = 0; c < 30; ++c) {
    const auto cs = support::random_clearing_case(rng, support::pick(rng, 1, 3), support::pick(rng, 1, 4), false);
    std::vector<double> z{support::uniform(rng, 1.0, 150.0), support::uniform(rng, 1.0, 150.0)};
    for (std::size_t k = 0; k < cs.market.fuels.size(); ++k) z.push_back(support::uniform(rng, 1.0, 60.0));
    const auto H = potential_hessian(cs.market, cs.input, z);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, z[i]);
      auto a = z, b = z;
      a[i] += h;
      b[i] -= h;
      const auto ga = potential(cs.market, cs.input, a).gradient;
      const auto gb = potential(cs.market, cs.input, b).gradient;
      for (std::size_t j = 0; j < z.size(); ++j) {
        const double fd = (ga[j] - gb[j]) / (2 * h);
        const double hij = H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        EXPECT_NEAR(hij, fd, 1e-4 * std::max(1.0, std::abs(fd))) << "point " << c;
      }
    }
    // Symmetric positive definite.
    EXPECT_LT((H - H.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Offer, GainDerivativeIsOfferFraction) {
  TechnologySpec t;
  t.offer_scale = 7.5;
  std::mt19937_64 rng(3);
  for (int k = 0; k < 200; ++k) {
    double x = support::uniform(rng, -5.0, 12.5);
    if (std::abs(x) < 1e-2 || std::abs(x - t.offer_scale) < 1e-2) continue;
    const double h = 1e-5;
    const double fd = (gain(t, x + h) - gain(t, x - h)) / (2 * h);
    const double f = offer_fraction(t, x);
    if (f == 0.0) {
      EXPECT_LT(std::abs(fd), 1e-12);
    } else {
      EXPECT_LT(std::abs(fd - f) / f, 1e-6) << x;
    }
  }
}

TEST(Offer, ShapeAndLimits) {
  const OfferFunction F(4.0);
  EXPECT_EQ(F(-1.0), 0.0);
  EXPECT_EQ(F(0.0), 0.0);
  EXPECT_DOUBLE_EQ(F(4.0), 1.0);
  EXPECT_EQ(F(9.0), 1.0);
  EXPECT_DOUBLE_EQ(F(2.0), 0.5);
  EXPECT_EQ(F.derivative(0.0), 0.0);
  EXPECT_NEAR(F.derivative(4.0), 0.0, 1e-15);
  double prev = 0.0;
  for (double x = 0.0; x <= 4.0; x += 0.01) {
    EXPECT_GE(F(x), prev);
    prev = F(x);
  }
  // Above the ramp the gain grows one for one with the margin.
  EXPECT_NEAR(F.gain(10.0) - F.gain(6.0), 4.0, 1e-12);
  EXPECT_NEAR(F.gain(4.0), 2.0, 1e-12);
}

TEST(Offer, RequiresConventionalTechnology) {
  TechnologySpec t;
  t.kind = TechKind::renewable;
  EXPECT_THROW(offer_fraction(t, 1.0), InputError);
  EXPECT_THROW(gain(t, 1.0), InputError);
}

TEST(SupplyCurve, InverseAndIntegral) {
  const SupplyCurve s({0.0, 10.0, 30.0}, {-5.0, 15.0, 25.0});
  EXPECT_DOUBLE_EQ(s(5.0), 5.0);
  EXPECT_DOUBLE_EQ(s.inverse(5.0), 5.0);
  EXPECT_NEAR(s.inverse(20.0), 20.0, 1e-12);
  EXPECT_DOUBLE_EQ(s(40.0), 30.0);
  EXPECT_NEAR(s.integral(10.0), 50.0, 1e-12);
  EXPECT_THROW(SupplyCurve({1.0, 2.0}, {0.0, 1.0}), ConfigError);
  EXPECT_THROW(SupplyCurve({0.0, 2.0}, {1.0, 0.0}), ConfigError);
}

TEST(Market, FlatSupplyIsRejected) {
  Market m;
  m.baseline = SupplyCurve({0.0, 10.0, 20.0}, {0.0, 5.0, 5.0});
  EXPECT_THROW(m.validate(), ConfigError);
}
