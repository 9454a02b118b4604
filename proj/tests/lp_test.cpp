#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mfgelec/mfgelec.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mfgelec;

namespace {

// Best objective over all basic feasible solutions, by brute force.
double enumerate_vertices(const LinearProgram& lp) {
  const auto m = static_cast<Eigen::Index>(lp.rows()), n = static_cast<Eigen::Index>(lp.columns());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    lp.A.for_row(static_cast<std::size_t>(i), [&](std::size_t j, double v) { A(i, static_cast<Eigen::Index>(j)) = v; });
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(lp.b.data(), m);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  const auto r = lu.rank();

  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> pick(static_cast<std::size_t>(r));
  for (Eigen::Index k = 0; k < r; ++k) pick[static_cast<std::size_t>(k)] = static_cast<int>(k);
  for (;;) {
    Eigen::MatrixXd B(m, r);
    for (Eigen::Index k = 0; k < r; ++k) B.col(k) = A.col(pick[static_cast<std::size_t>(k)]);
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
    if (qr.rank() == r) {
      const Eigen::VectorXd xb = qr.solve(b);
      if ((B * xb - b).cwiseAbs().maxCoeff() < 1e-9 && xb.minCoeff() > -1e-10) {
        double v = 0.0;
        for (Eigen::Index k = 0; k < r; ++k) v += lp.c[static_cast<std::size_t>(pick[static_cast<std::size_t>(k)])] * xb(k);
        best = std::max(best, v);
      }
    }
    Eigen::Index k = r - 1;
    while (k >= 0 && pick[static_cast<std::size_t>(k)] == static_cast<int>(n - r + k)) --k;
    if (k < 0) break;
    ++pick[static_cast<std::size_t>(k)];
    for (Eigen::Index q = k + 1; q < r; ++q) pick[static_cast<std::size_t>(q)] = pick[static_cast<std::size_t>(q - 1)] + 1;
  }
  return best;
}

}  // namespace

TEST(BestResponse, LpBackendsMatchDynamicProgramming) {
  std::mt19937_64 rng(21);
  const DenseSimplexBackend simplex;
  const StagedBackend staged;
  for (int c = 0; c < 25; ++c) {
    const auto in = oracles::random_lp_instance(rng);
    ASSERT_LE(in.tech.shape().ages, 4u);
    const ConstraintSystem cs(in.tech, in.initial);
    const double dp = dp_oracle(in.tech, in.reward, in.initial).value;
    const double tol = 1e-7 * (1.0 + std::abs(dp));
    for (const LpBackend* b : {static_cast<const LpBackend*>(&simplex), static_cast<const LpBackend*>(&staged)}) {
      const auto br = solve_best_response(cs, in.reward, *b);
      EXPECT_NEAR(br.objective, dp, tol) << "instance " << c << " backend " << b->name();
      EXPECT_LT(cs.residual_norm(br.flow), 1e-9) << "instance " << c;
      EXPECT_GE(br.flow.min_value(), -1e-12) << "instance " << c;
    }
  }
}

TEST(BestResponse, SimplexMatchesVertexEnumeration) {
  std::mt19937_64 rng(8);
  const DenseSimplexBackend simplex;
  for (int c = 0; c < 5; ++c) {
    auto spec = support::conventional_spec(rng, 0);
    const auto tech = DiscreteTechnology::make(spec, default_state_grid(spec, 3), 1, 1.0);
    auto initial = InitialMeasures::zero(tech.shape());
    for (auto& v : initial.potential) v = support::uniform(rng, 0.0, 2.0);
    for (auto& v : initial.installed) v = support::uniform(rng, 0.0, 1.0);
    auto reward = RewardField::zero(tech.shape());
    for (auto& v : reward.running) v = support::uniform(rng, -1.0, 1.0);
    for (auto& v : reward.entry) v = support::uniform(rng, -1.0, 0.5);
    for (auto& v : reward.scrap) v = support::uniform(rng, -0.5, 1.0);
    const ConstraintSystem cs(tech, initial);
    const auto lp = linear_program(cs, reward);
    const double brute = enumerate_vertices(lp);
    EXPECT_NEAR(solve_best_response(cs, reward, simplex).objective, brute, 1e-9 * (1.0 + std::abs(brute)));
  }
}

TEST(BestResponse, SimplexReturnsComplementaryDuals) {
  std::mt19937_64 rng(4);
  const DenseSimplexBackend simplex;
  for (int c = 0; c < 10; ++c) {
    const auto in = oracles::random_lp_instance(rng);
    const ConstraintSystem cs(in.tech, in.initial);
    const auto lp = linear_program(cs, in.reward);
    const auto sol = simplex.solve(lp);
    ASSERT_EQ(sol.status, LpStatus::optimal);
    ASSERT_EQ(sol.y.size(), lp.rows());
    const double scale = 1.0 + std::abs(sol.objective);
    EXPECT_LT(lp.primal_residual(sol.x), 1e-9);
    EXPECT_LT(lp.dual_infeasibility(sol.y), 1e-9 * scale);
    EXPECT_LT(lp.complementarity(sol.x, sol.y), 1e-9 * scale);
    EXPECT_NEAR(lp.dual_objective(sol.y), sol.objective, 1e-9 * scale);
  }
}

TEST(BestResponse, ObjectiveIsHomogeneousInInitialMass) {
  std::mt19937_64 rng(9);
  const StagedBackend staged;
  for (int c = 0; c < 10; ++c) {
    const auto in = oracles::random_lp_instance(rng);
    auto scaled = in.initial;
    const double s = support::uniform(rng, 0.1, 10.0);
    for (auto& v : scaled.potential) v *= s;
    for (auto& v : scaled.installed) v *= s;
    const auto a = solve_best_response(ConstraintSystem(in.tech, in.initial), in.reward, staged);
    const auto b = solve_best_response(ConstraintSystem(in.tech, scaled), in.reward, staged);
    EXPECT_NEAR(b.objective, s * a.objective, 1e-9 * (1.0 + std::abs(s * a.objective)));
    auto f = a.flow;
    f.scale(s);
    EXPECT_LT(f.max_difference(b.flow), 1e-9 * (1.0 + s));
  }
}

TEST(BestResponse, PositiveRunningRewardMeansEnterAtOnceAndStay) {
  TechnologySpec spec;
  spec.kind = TechKind::renewable;
  spec.level = 0.4;
  spec.volatility = 0.2;
  const auto tech = DiscreteTechnology::make(spec, default_state_grid(spec, 5), 6, 0.5);
  auto initial = InitialMeasures::zero(tech.shape());
  for (auto& v : initial.potential) v = 1.0;
  auto reward = RewardField::zero(tech.shape());
  for (auto& v : reward.running) v = 1.0;
  const ConstraintSystem cs(tech, initial);
  const auto br = solve_best_response(cs, reward, StagedBackend());
  for (std::size_t x = 0; x < tech.grid.size(); ++x) EXPECT_NEAR(br.flow.entry(0, x), 1.0, 1e-12);
  EXPECT_NEAR(br.objective, 5.0 * 6.0, 1e-9);
}

TEST(Mps, ExportUsesFlowNames) {
  std::mt19937_64 rng(2);
  auto spec = support::conventional_spec(rng, 0);
  const auto tech = DiscreteTechnology::make(spec, default_state_grid(spec, 3), 2, 1.0);
  auto initial = InitialMeasures::zero(tech.shape());
  initial.potential.assign(3, 1.0);
  const ConstraintSystem cs(tech, initial);
  auto reward = RewardField::zero(tech.shape());
  reward.entry_at(0, 1) = -2.5;
  const auto text = to_mps(linear_program(cs, reward, true));
  EXPECT_EQ(text.rfind("NAME MFGELEC\n", 0), 0u);
  EXPECT_NE(text.find("    MAX"), std::string::npos);
  for (const char* name : {"m_0_0_0", "mu_2_0_2", "mh_1_1", "muh_0_1  OBJ  -2.5"})
    EXPECT_NE(text.find(name), std::string::npos) << name;
  EXPECT_NE(text.find("ENDATA"), std::string::npos);
}
