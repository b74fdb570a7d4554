#include <gtest/gtest.h>

#include <thread>

#include "ppu/eval.hpp"

using namespace ppu;

namespace {

std::vector<double> normal_losses(std::size_t n, double mean, double sd, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd(mean, sd);
  std::vector<double> v(n);
  for (double& x : v) x = std::abs(nd(rng));
  return v;
}

}  // namespace

TEST(ErrorRate, PermutationInvariant) {
  BlobConfig bc;
  bc.classes = 3;
  bc.dims = 4;
  bc.n_per_class = 20;
  bc.seed = 2;
  const auto ds = gen_blobs(bc);
  const auto model = init_model({4, 3, 3}, 6);
  const double base = error_rate(model, ds.inputs, ds.labels);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto perm = seeded_permutation(ds.size(), s);
    const auto sub = make_subset(ds, "", perm);
    EXPECT_EQ(error_rate(model, sub.inputs, sub.labels), base);
  }
}

TEST(ErrorRate, CountsMisclassifications) {
  ModelParams p = init_model({1, 1, 2}, 0);
  // Always predicts class 1.
  p.weights = {0.0, 0.0, 0.0, 0.0, 0.0, 1.0};
  const Matrix x(4, 1);
  const std::vector<int> y{0, 1, 1, 0};
  EXPECT_EQ(error_rate(p, x, y), 50.0);
}

TEST(Evaluate, ReportsAllThreeSubsets) {
  BlobConfig bc;
  bc.classes = 2;
  bc.dims = 3;
  bc.n_per_class = 20;
  const auto ds = gen_blobs(bc);
  const auto split = make_forget_split(ds, {ForgetSpec::Mode::Selective, 0, 3, 1});
  const auto r = evaluate(init_model({3, 2, 2}, 1), ds, split);
  EXPECT_EQ(r.test_count, ds.splits.test.size());
  EXPECT_EQ(r.retain_count, split.retain.size());
  EXPECT_EQ(r.forget_count, 3u);
  const auto back = eval_report_from_json(to_json(r));
  EXPECT_EQ(back.forget_error, r.forget_error);
  EXPECT_EQ(back.retain_count, r.retain_count);
}

TEST(ExampleLosses, AreCrossEntropyOfTrueLabel) {
  const auto p = init_model({2, 3, 3}, 2);
  Matrix x(2, 2, 0.3);
  const std::vector<int> y{0, 2};
  const auto q = forward_probs(p, x);
  const auto l = example_losses(p, x, y);
  EXPECT_NEAR(l[0], -std::log(q(0, 0)), 1e-15);
  EXPECT_NEAR(l[1], -std::log(q(1, 2)), 1e-15);
}

TEST(Mia, IdenticalSetsGiveChance) {
  const auto v = normal_losses(60, 1.0, 0.3, 1);
  const auto r = mia_attack_losses(v, v);
  EXPECT_EQ(r.mean_accuracy, 50.0);
  for (double a : r.accuracies) EXPECT_EQ(a, 50.0);
}

TEST(Mia, SeparatedLossesAreFullyDetected) {
  const auto in = normal_losses(50, 0.0, 0.05, 2);
  auto out = normal_losses(50, 0.0, 0.05, 3);
  for (double& x : out) x += 3.0;
  const auto r = mia_attack_losses(in, out);
  EXPECT_EQ(r.mean_accuracy, 100.0);
  EXPECT_EQ(r.std_accuracy, 0.0);
}

TEST(Mia, SwappingSidesKeepsAccuracy) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = normal_losses(80, 0.8, 0.5, 10 + s);
    const auto b = normal_losses(80, 1.4, 0.5, 20 + s);
    MiaConfig cfg;
    cfg.seed = s;
    EXPECT_NEAR(mia_attack_losses(a, b, cfg).mean_accuracy, mia_attack_losses(b, a, cfg).mean_accuracy, 1e-9);
  }
}

TEST(Mia, BalancesBySubsampling) {
  const auto in = normal_losses(30, 0.5, 0.2, 4);
  const auto out = normal_losses(300, 0.9, 0.2, 5);
  const auto r = mia_attack_losses(in, out);
  EXPECT_EQ(r.per_side, 30u);
  EXPECT_EQ(r.accuracies.size(), 5u);
  EXPECT_GT(r.mean_accuracy, 60.0);
  const auto again = mia_attack_losses(in, out);
  EXPECT_EQ(again.accuracies, r.accuracies);
}

TEST(Mia, RejectsTooFewExamples) {
  const auto small = normal_losses(9, 0.5, 0.2, 4);
  const auto big = normal_losses(50, 0.5, 0.2, 5);
  EXPECT_THROW(mia_attack_losses(small, big), InsufficientData);
  MiaConfig cfg;
  cfg.repetitions = 0;
  EXPECT_THROW(mia_attack_losses(big, big, cfg), UsageError);
}

TEST(Mia, ReportSerialises) {
  const auto v = normal_losses(20, 1.0, 0.3, 1);
  MiaConfig cfg;
  cfg.seed = 77;
  const auto j = to_json(mia_attack_losses(v, v, cfg));
  EXPECT_EQ(j.at("split_seed").get<std::uint64_t>(), 77u);
  EXPECT_EQ(j.at("accuracies").size(), 5u);
}

TEST(Timing, RecordsRepetitionsAfterWarmup) {
  int calls = 0;
  const auto rec = time_stage("sleep", [&] {
    ++calls;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }, 3, 2);
  EXPECT_EQ(calls, 5);
  EXPECT_EQ(rec.samples.size(), 3u);
  EXPECT_GE(rec.mean, 0.002);
  EXPECT_GE(rec.std_error, 0.0);
  EXPECT_FALSE(rec.host.empty());
}
