#ifndef PPU_EVAL_HPP
#define PPU_EVAL_HPP

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppu/data.hpp"
#include "ppu/errors.hpp"
#include "ppu/model.hpp"
#include "ppu/random.hpp"

namespace ppu {

struct EvalReport {
  double test_error = 0.0;
  double retain_error = 0.0;
  double forget_error = 0.0;
  std::size_t test_count = 0;
  std::size_t retain_count = 0;
  std::size_t forget_count = 0;
};

inline EvalReport evaluate(const ModelParams& model, const Dataset& ds, const SplitResult& split) {
  EvalReport r;
  auto err = [&](const std::vector<std::size_t>& idx, std::size_t& count) {
    count = idx.size();
    if (idx.empty()) return 0.0;
    const auto s = make_subset(ds, "", idx);
    return error_rate(model, s.inputs, s.labels);
  };
  r.test_error = err(ds.splits.test, r.test_count);
  r.retain_error = err(split.retain, r.retain_count);
  r.forget_error = err(split.forget, r.forget_count);
  return r;
}

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"test_error", r.test_error},     {"retain_error", r.retain_error}, {"forget_error", r.forget_error},
          {"test_count", r.test_count},     {"retain_count", r.retain_count}, {"forget_count", r.forget_count}};
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.test_error = j.at("test_error");
  r.retain_error = j.at("retain_error");
  r.forget_error = j.at("forget_error");
  r.test_count = j.at("test_count");
  r.retain_count = j.at("retain_count");
  r.forget_count = j.at("forget_count");
  return r;
}

/// Per-example cross-entropy of the true label (probabilities floored).
inline std::vector<double> example_losses(const ModelParams& model, const Matrix& inputs, std::span<const int> labels) {
  const ProbMatrix q = forward_probs(model, inputs);
  std::vector<double> losses(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) losses[i] = -std::log(q(i, static_cast<std::size_t>(labels[i])));
  return losses;
}

struct MiaConfig {
  std::size_t repetitions = 5;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::size_t max_iters = 5000;
  double learning_rate = 1.0;
  std::size_t min_per_side = 10;
};

struct MiaReport {
  double mean_accuracy = 0.0;  // percent
  double std_accuracy = 0.0;
  std::vector<double> accuracies;
  std::size_t repetitions = 0;
  std::size_t per_side = 0;
  std::string attacker = "logistic regression on the per-example cross-entropy loss";
  std::uint64_t split_seed = 0;
};

inline nlohmann::json to_json(const MiaReport& r) {
  return {{"mean_accuracy", r.mean_accuracy}, {"std_accuracy", r.std_accuracy}, {"accuracies", r.accuracies},
          {"repetitions", r.repetitions},     {"per_side", r.per_side},         {"attacker", r.attacker},
          {"split_seed", r.split_seed}};
}

namespace detail {

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Fits p(in | loss) = sigmoid(w * (loss - mu) / sd + b) by full-batch gradient
// descent on pairs (in_loss, out_loss); returns holdout accuracy in percent.
inline double attacker_accuracy(std::span<const double> in_train, std::span<const double> out_train,
                                std::span<const double> in_hold, std::span<const double> out_hold,
                                const MiaConfig& cfg) {
  const std::size_t n = in_train.size();
  double mu = 0.0;
  for (std::size_t j = 0; j < n; ++j) mu += in_train[j] + out_train[j];
  mu /= static_cast<double>(2 * n);
  double var = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    var += (in_train[j] - mu) * (in_train[j] - mu) + (out_train[j] - mu) * (out_train[j] - mu);
  }
  const double sd = std::sqrt(var / static_cast<double>(2 * n));
  const double scale = sd > 0.0 ? 1.0 / sd : 1.0;

  double w = 0.0, b = 0.0;
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    double gw = 0.0, gb = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double xi = (in_train[j] - mu) * scale;
      const double xo = (out_train[j] - mu) * scale;
      const double ri = sigmoid(w * xi + b) - 1.0;
      const double ro = sigmoid(w * xo + b);
      gw += ri * xi + ro * xo;
      gb += ri + ro;
    }
    gw /= static_cast<double>(2 * n);
    gb /= static_cast<double>(2 * n);
    w -= cfg.learning_rate * gw;
    b -= cfg.learning_rate * gb;
    if (std::abs(gw) < 1e-10 && std::abs(gb) < 1e-10) break;
  }

  std::size_t correct = 0;
  for (std::size_t j = 0; j < in_hold.size(); ++j) {
    correct += sigmoid(w * (in_hold[j] - mu) * scale + b) >= 0.5;
    correct += sigmoid(w * (out_hold[j] - mu) * scale + b) < 0.5;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(2 * in_hold.size());
}

}  // namespace detail

/// Membership inference on scalar losses: balance the two sides by seeded
/// subsampling of the larger one, split each side 80/20 with a shared
/// permutation, fit the attacker, and report holdout accuracy over
/// `repetitions` split seeds.
inline MiaReport mia_attack_losses(std::span<const double> in_losses, std::span<const double> out_losses,
                                   const MiaConfig& cfg = {}) {
  if (cfg.repetitions < 1) throw UsageError("mia: repetitions must be >= 1");
  const std::size_t n = std::min(in_losses.size(), out_losses.size());
  if (n < cfg.min_per_side) {
    throw InsufficientData("mia: " + std::to_string(n) + " examples per side after balancing (need " +
                           std::to_string(cfg.min_per_side) + ")");
  }
  auto balance = [&](std::span<const double> v) {
    if (v.size() == n) return std::vector<double>(v.begin(), v.end());
    auto perm = seeded_permutation(v.size(), derive_seed(cfg.seed, 0));
    perm.resize(n);
    std::sort(perm.begin(), perm.end());
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i : perm) out.push_back(v[i]);
    return out;
  };
  const auto in_b = balance(in_losses);
  const auto out_b = balance(out_losses);

  const auto n_train = static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) throw InsufficientData("mia: train/holdout split leaves an empty side");

  MiaReport report;
  report.repetitions = cfg.repetitions;
  report.per_side = n;
  report.split_seed = cfg.seed;
  std::vector<double> it(n_train), ot(n_train), ih(n - n_train), oh(n - n_train);
  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    const auto perm = seeded_permutation(n, derive_seed(cfg.seed, 100 + r));
    for (std::size_t j = 0; j < n; ++j) {
      if (j < n_train) {
        it[j] = in_b[perm[j]];
        ot[j] = out_b[perm[j]];
      } else {
        ih[j - n_train] = in_b[perm[j]];
        oh[j - n_train] = out_b[perm[j]];
      }
    }
    report.accuracies.push_back(detail::attacker_accuracy(it, ot, ih, oh, cfg));
  }
  const double m = std::accumulate(report.accuracies.begin(), report.accuracies.end(), 0.0) /
                   static_cast<double>(report.accuracies.size());
  double ss = 0.0;
  for (double a : report.accuracies) ss += (a - m) * (a - m);
  report.mean_accuracy = m;
  report.std_accuracy = report.accuracies.size() > 1 ? std::sqrt(ss / static_cast<double>(report.accuracies.size() - 1)) : 0.0;
  return report;
}

inline MiaReport mia_attack(const ModelParams& model, const EvalSubset& forget, const EvalSubset& test,
                            const MiaConfig& cfg = {}) {
  if (forget.inputs.rows == 0 || test.inputs.rows == 0) throw UsageError("mia: both sets must be non-empty");
  const auto in = example_losses(model, forget.inputs, forget.labels);
  const auto out = example_losses(model, test.inputs, test.labels);
  return mia_attack_losses(in, out, cfg);
}

struct TimingRecord {
  std::string label;
  std::vector<double> samples;  // seconds
  double mean = 0.0;
  double std_error = 0.0;
  std::string host;
};

inline std::string host_descriptor() {
  char name[256] = {0};
  if (gethostname(name, sizeof name - 1) != 0) name[0] = '\0';
  return std::string(name) + " (" + std::to_string(std::thread::hardware_concurrency()) + " hw threads)";
}

inline void summarize(TimingRecord& rec) {
  const auto n = static_cast<double>(rec.samples.size());
  if (rec.samples.empty()) return;
  rec.mean = std::accumulate(rec.samples.begin(), rec.samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : rec.samples) ss += (s - rec.mean) * (s - rec.mean);
  rec.std_error = rec.samples.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
}

/// Wall-clock timing on the steady clock; `warmup` untimed runs first.
inline TimingRecord time_stage(std::string label, const std::function<void()>& thunk, std::size_t repetitions = 1,
                               std::size_t warmup = 0) {
  TimingRecord rec{std::move(label), {}, 0.0, 0.0, host_descriptor()};
  for (std::size_t i = 0; i < warmup; ++i) thunk();
  for (std::size_t i = 0; i < repetitions; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    thunk();
    const auto t1 = std::chrono::steady_clock::now();
    rec.samples.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  summarize(rec);
  return rec;
}

inline nlohmann::json to_json(const TimingRecord& r) {
  return {{"label", r.label}, {"samples", r.samples}, {"mean", r.mean}, {"std_error", r.std_error}, {"host", r.host}};
}

}  // namespace ppu

#endif  // PPU_EVAL_HPP
