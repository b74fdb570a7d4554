#include <gtest/gtest.h>

#include <cmath>

#include "oracles/refine_oracle.hpp"
#include "ppu/refine.hpp"
#include "support.hpp"

using namespace ppu;
using testing_support::max_abs_diff;
using testing_support::random_probs;
using testing_support::random_problem;
using testing_support::to_oracle;

namespace {

RefineProblem two_by_two() {
  Matrix p(2, 2);
  p(0, 0) = 0.9;
  p(0, 1) = 0.1;
  p(1, 0) = 0.2;
  p(1, 1) = 0.8;
  return {ProbMatrix(p), {RowRole::Forget, RowRole::Retain}, 1.0, {1.0, 1.0}};
}

}  // namespace

TEST(PrimalUpdate, FrozenTilt) {
  RefineProblem prob{ProbMatrix(Matrix(1, 2, 0.5)), {RowRole::Forget}, 1.0, {0.5, 0.5}};
  DualState d;
  d.alpha = {std::log(3.0), 0.0};
  const auto q = primal_update(prob, d);
  EXPECT_NEAR(q(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(q(0, 1), 0.75, 1e-15);
}

TEST(PrimalUpdate, FlatMultipliersReturnTargetBitwise) {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto prob = random_problem(rng);
    DualState d;
    d.alpha.assign(prob.target.classes(), 0.125 * t);
    EXPECT_TRUE(primal_update(prob, d) == prob.target);
  }
}

TEST(PrimalUpdate, ShiftInvariant) {
  Rng rng(4);
  const auto prob = random_problem(rng, 4, 4, 3, 3);
  DualState a, b;
  a.alpha = {0.3, -0.2, 0.7};
  b.alpha = {1.3, 0.8, 1.7};
  EXPECT_LT(max_abs_diff(primal_update(prob, a).values().data, primal_update(prob, b).values().data), 1e-15);
}

TEST(PrimalUpdate, WeightSoftensRetainRows) {
  // A heavier row weight moves the row less for the same multipliers.
  RefineProblem prob{ProbMatrix(Matrix(2, 2, 0.5)), {RowRole::Forget, RowRole::Retain}, 4.0, {1.0, 1.0}};
  DualState d;
  d.alpha = {1.0, 0.0};
  const auto q = primal_update(prob, d);
  EXPECT_LT(q(0, 0), q(1, 0));
  EXPECT_LT(q(1, 0), 0.5);
}

TEST(Refine, FrozenTwoByTwo) {
  const auto r = refine(two_by_two());
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.q(0, 0), 6.0 / 7.0, 1e-6);
  EXPECT_NEAR(r.q(1, 1), 6.0 / 7.0, 1e-6);
  EXPECT_NEAR(r.objective, 0.0202027073175194, 1e-6);
}

TEST(Refine, OracleTwoByTwoFrozen) {
  const auto s = oracle::solve_refine(to_oracle(two_by_two()));
  EXPECT_NEAR(s.q[0], 6.0 / 7.0, 1e-10);
  EXPECT_NEAR(s.objective, 0.0202027073175194, 1e-12);
}

TEST(Refine, MatchesPrimalOracle) {
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    const auto prob = random_problem(rng);
    const auto r = refine(prob);
    ASSERT_TRUE(r.converged) << "instance " << t;
    const auto s = oracle::solve_refine(to_oracle(prob));
    ASSERT_LT(s.stationarity, 1e-9);
    EXPECT_NEAR(r.objective, s.objective, 1e-5) << "instance " << t;
    EXPECT_LT(max_abs_diff(r.q.values().data, s.q), 1e-5) << "instance " << t;
  }
}

TEST(Refine, IteratesStayRowStochastic) {
  Rng rng(12);
  for (int t = 0; t < 30; ++t) {
    const auto prob = random_problem(rng, 3, 10, 2, 6);
    const auto r = refine(prob);
    for (std::size_t i = 0; i < r.q.rows(); ++i) {
      double s = 0.0;
      for (double v : r.q.row(i)) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    EXPECT_LE(mass_residual(class_mass(r.q), prob.mass), 1e-6);
  }
}

TEST(Refine, ResidualNonIncreasingForSmallSteps) {
  Rng rng(21);
  for (int t = 0; t < 40; ++t) {
    const auto prob = random_problem(rng, 2, 8, 2, 4);
    RefineConfig cfg;
    cfg.eta = 0.5 / static_cast<double>(prob.target.rows());
    const auto r = refine(prob, cfg);
    const auto& h = r.dual.residual_history;
    ASSERT_FALSE(h.empty());
    const std::size_t start = h.size() / 10;
    for (std::size_t i = start + 1; i < h.size(); ++i) {
      EXPECT_LE(h[i], h[i - 1] * (1.0 + 1e-12) + 1e-15) << "instance " << t << " step " << i;
    }
  }
}

TEST(Refine, UniqueAcrossWarmStarts) {
  Rng rng(31);
  for (int t = 0; t < 25; ++t) {
    const auto prob = random_problem(rng, 2, 8, 2, 4);
    const auto from_target = refine(prob);
    RefineConfig cfg;
    cfg.warm_start = ProbMatrix(Matrix(prob.target.rows(), prob.target.classes(),
                                       1.0 / static_cast<double>(prob.target.classes())));
    const auto from_uniform = refine(prob, cfg);
    ASSERT_TRUE(from_target.converged && from_uniform.converged);
    EXPECT_LT(max_abs_diff(from_target.q.values().data, from_uniform.q.values().data), 1e-5);
    EXPECT_NEAR(from_target.objective, from_uniform.objective, 1e-6);
  }
}

TEST(Refine, FeasibleTargetIsAFixedPoint) {
  Rng rng(41);
  for (int t = 0; t < 20; ++t) {
    auto prob = random_problem(rng);
    prob.mass = class_mass(prob.target);
    const auto r = refine(prob);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 1u);
    EXPECT_TRUE(r.q == prob.target);
    EXPECT_EQ(r.objective, 0.0);
  }
}

TEST(Refine, LambdaRoleSymmetry) {
  // Swapping roles and inverting lambda rescales the objective by a constant,
  // so the minimiser is unchanged.
  Rng rng(51);
  for (int t = 0; t < 20; ++t) {
    auto prob = random_problem(rng, 3, 6, 2, 3);
    prob.lambda = 2.5;
    auto swapped = prob;
    swapped.lambda = 1.0 / prob.lambda;
    for (auto& r : swapped.roles) r = r == RowRole::Forget ? RowRole::Retain : RowRole::Forget;
    const auto a = refine(prob), b = refine(swapped);
    EXPECT_LT(max_abs_diff(a.q.values().data, b.q.values().data), 1e-5);
    EXPECT_NEAR(a.objective, b.objective * prob.lambda, 1e-5);
  }
}

TEST(Refine, ObjectiveMatchesWeightedSum) {
  Rng rng(61);
  const auto prob = random_problem(rng, 5, 5, 3, 3);
  const auto q = random_probs(5, 3, rng);
  double expect = 0.0;
  for (std::size_t i = 0; i < 5; ++i) expect += prob.row_weight(i) * kl_div(q.row(i), prob.target.row(i));
  EXPECT_NEAR(objective(q, prob), expect, 1e-14);
}

TEST(Refine, RejectsInvalidProblems) {
  auto prob = two_by_two();
  prob.mass = {1.5, 1.0};
  EXPECT_THROW(refine(prob), InfeasibleError);
  prob.mass = {-0.5, 2.5};
  EXPECT_THROW(refine(prob), InfeasibleError);
  prob = two_by_two();
  prob.lambda = 0.0;
  EXPECT_THROW(refine(prob), SpecError);
  prob = two_by_two();
  prob.roles.pop_back();
  EXPECT_THROW(refine(prob), ShapeError);
  prob = two_by_two();
  prob.mass = {2.0};
  EXPECT_THROW(refine(prob), ShapeError);
  RefineConfig cfg;
  cfg.eta = -1.0;
  EXPECT_THROW(refine(two_by_two(), cfg), SpecError);
}

TEST(Refine, NonConvergenceReturnsBestIterate) {
  RefineConfig cfg;
  cfg.max_iters = 3;
  const auto r = refine(two_by_two(), cfg);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3u);
  const auto& h = r.dual.residual_history;
  ASSERT_EQ(h.size(), 3u);
  EXPECT_EQ(mass_residual(class_mass(r.q), two_by_two().mass), *std::min_element(h.begin(), h.end()));
}

TEST(Refine, RecordCarriesHistory) {
  const auto r = refine(two_by_two());
  const auto j = refine_record(r);
  EXPECT_EQ(j.at("iterations").get<std::size_t>(), r.iterations);
  EXPECT_EQ(j.at("residual_history").size(), r.dual.residual_history.size());
  EXPECT_TRUE(j.at("converged").get<bool>());
}
