#ifndef PPU_MODEL_HPP
#define PPU_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ppu/errors.hpp"
#include "ppu/matrix.hpp"
#include "ppu/probmatrix.hpp"
#include "ppu/random.hpp"

namespace ppu {

struct Layout {
  std::size_t inputs = 0;   // D
  std::size_t hidden = 0;   // H
  std::size_t classes = 0;  // K

  bool operator==(const Layout&) const = default;

  std::size_t parameter_count() const { return hidden * inputs + hidden + classes * hidden + classes; }
};

/// Weights of the D -> H (tanh) -> K (softmax) classifier, stored as one
/// flat vector: W1 (H x D, row-major), b1 (H), W2 (K x H, row-major), b2 (K).
struct ModelParams {
  Layout layout;
  std::uint64_t seed = 0;
  std::vector<double> weights;

  std::span<const double> w1() const { return {weights.data(), layout.hidden * layout.inputs}; }
  std::span<const double> b1() const { return {weights.data() + b1_offset(), layout.hidden}; }
  std::span<const double> w2() const { return {weights.data() + w2_offset(), layout.classes * layout.hidden}; }
  std::span<const double> b2() const { return {weights.data() + b2_offset(), layout.classes}; }

  std::size_t b1_offset() const { return layout.hidden * layout.inputs; }
  std::size_t w2_offset() const { return b1_offset() + layout.hidden; }
  std::size_t b2_offset() const { return w2_offset() + layout.classes * layout.hidden; }

  bool bitwise_equal(const ModelParams& o) const {
    return layout == o.layout && seed == o.seed && ppu::bitwise_equal(weights, o.weights);
  }
};

inline ModelParams init_model(const Layout& layout, std::uint64_t seed) {
  if (layout.inputs == 0 || layout.hidden == 0 || layout.classes == 0) {
    throw InvalidLayout("layout dimensions must all be >= 1");
  }
  ModelParams p{layout, seed, std::vector<double>(layout.parameter_count())};
  Rng rng(seed);
  auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-s, s);
    for (std::size_t i = 0; i < count; ++i) p.weights[offset + i] = u(rng);
  };
  fill(0, layout.hidden * layout.inputs, layout.inputs);
  fill(p.b1_offset(), layout.hidden, layout.inputs);
  fill(p.w2_offset(), layout.classes * layout.hidden, layout.hidden);
  fill(p.b2_offset(), layout.classes, layout.hidden);
  return p;
}

namespace detail {

// Hidden activations and output probabilities for one input row.
inline void forward_row(const ModelParams& p, std::span<const double> x, std::span<double> hidden,
                        std::span<double> logits, std::span<double> probs) {
  const auto& L = p.layout;
  const double* w1 = p.weights.data();
  const double* b1 = w1 + p.b1_offset();
  const double* w2 = w1 + p.w2_offset();
  const double* b2 = w1 + p.b2_offset();
  for (std::size_t h = 0; h < L.hidden; ++h) {
    double a = b1[h];
    const double* wr = w1 + h * L.inputs;
    for (std::size_t d = 0; d < L.inputs; ++d) a += wr[d] * x[d];
    hidden[h] = std::tanh(a);
  }
  for (std::size_t k = 0; k < L.classes; ++k) {
    double z = b2[k];
    const double* wr = w2 + k * L.hidden;
    for (std::size_t h = 0; h < L.hidden; ++h) z += wr[h] * hidden[h];
    logits[k] = z;
  }
  softmax(logits, probs);
}

inline void check_inputs(const ModelParams& p, const Matrix& inputs) {
  if (inputs.cols != p.layout.inputs) {
    throw ShapeError("input width " + std::to_string(inputs.cols) + " does not match model input dim " +
                     std::to_string(p.layout.inputs));
  }
}

// KL(target || floored q) for one row; q is copied so the caller's buffer stays raw.
inline double row_kl(std::span<const double> target, std::span<const double> q, std::vector<double>& scratch) {
  scratch.assign(q.begin(), q.end());
  floor_row(scratch);
  return kl_div(target, scratch);
}

}  // namespace detail

inline ProbMatrix forward_probs(const ModelParams& p, const Matrix& inputs, std::vector<std::size_t> registry = {}) {
  detail::check_inputs(p, inputs);
  const auto& L = p.layout;
  Matrix out(inputs.rows, L.classes);
  std::vector<double> hidden(L.hidden), logits(L.classes);
  for (std::size_t i = 0; i < inputs.rows; ++i) detail::forward_row(p, inputs.row(i), hidden, logits, out.row(i));
  return ProbMatrix(std::move(out), std::move(registry));
}

/// Argmax class per row; ties go to the lowest class index.
inline std::vector<int> predict(const ModelParams& p, const Matrix& inputs) {
  detail::check_inputs(p, inputs);
  const auto& L = p.layout;
  std::vector<int> labels(inputs.rows);
  std::vector<double> hidden(L.hidden), logits(L.classes), probs(L.classes);
  for (std::size_t i = 0; i < inputs.rows; ++i) {
    detail::forward_row(p, inputs.row(i), hidden, logits, probs);
    labels[i] = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }
  return labels;
}

/// 100 x misclassification rate of argmax predictions.
inline double error_rate(const ModelParams& p, const Matrix& inputs, std::span<const int> labels) {
  if (inputs.rows == 0) throw UsageError("error_rate on an empty subset");
  if (labels.size() != inputs.rows) throw ShapeError("label count does not match input rows");
  const auto pred = predict(p, inputs);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != labels[i];
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(pred.size());
}

enum class LossKind { CrossEntropy, KlToTarget };

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::CrossEntropy;

  void validate() const {
    if (!(learning_rate > 0.0)) throw SpecError("learning rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw SpecError("momentum must be in [0,1)");
    if (batch_size < 1) throw SpecError("batch size must be >= 1");
  }
};

/// (1/N) sum_i w_i KL(target_i || f(x_i)). The weights scale rows without
/// renormalizing, so raising one group's weight strengthens its pull.
/// `row_weights` may be empty (all ones).
inline double target_loss(const ModelParams& p, const Matrix& inputs, const Matrix& targets,
                          std::span<const double> row_weights = {}) {
  detail::check_inputs(p, inputs);
  const auto& L = p.layout;
  std::vector<double> hidden(L.hidden), logits(L.classes), probs(L.classes), scratch;
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.rows; ++i) {
    detail::forward_row(p, inputs.row(i), hidden, logits, probs);
    const double w = row_weights.empty() ? 1.0 : row_weights[i];
    total += w * detail::row_kl(targets.row(i), probs, scratch);
  }
  return inputs.rows > 0 ? total / static_cast<double>(inputs.rows) : 0.0;
}

namespace detail {

// Adds sum_i w_i * d KL_i / d params over `rows` into `grad`; returns
// (weighted loss sum, weight sum).
inline std::pair<double, double> accumulate_gradient(const ModelParams& p, const Matrix& inputs,
                                                     const Matrix& targets, std::span<const double> row_weights,
                                                     std::span<const std::size_t> rows, std::vector<double>& grad,
                                                     double scale = 1.0) {
  const auto& L = p.layout;
  const double* w2 = p.weights.data() + p.w2_offset();
  double* g_w1 = grad.data();
  double* g_b1 = g_w1 + p.b1_offset();
  double* g_w2 = g_w1 + p.w2_offset();
  double* g_b2 = g_w1 + p.b2_offset();
  std::vector<double> hidden(L.hidden), logits(L.classes), probs(L.classes), dz(L.classes), da(L.hidden), scratch;
  double loss = 0.0, wsum = 0.0;
  for (std::size_t i : rows) {
    const auto x = inputs.row(i);
    const auto t = targets.row(i);
    forward_row(p, x, hidden, logits, probs);
    const double w = row_weights.empty() ? 1.0 : row_weights[i];
    loss += w * row_kl(t, probs, scratch);
    wsum += w;
    const double ws = w * scale;
    for (std::size_t k = 0; k < L.classes; ++k) dz[k] = ws * (probs[k] - t[k]);
    std::fill(da.begin(), da.end(), 0.0);
    for (std::size_t k = 0; k < L.classes; ++k) {
      g_b2[k] += dz[k];
      double* gr = g_w2 + k * L.hidden;
      const double* wr = w2 + k * L.hidden;
      for (std::size_t h = 0; h < L.hidden; ++h) {
        gr[h] += dz[k] * hidden[h];
        da[h] += wr[h] * dz[k];
      }
    }
    for (std::size_t h = 0; h < L.hidden; ++h) {
      const double d = da[h] * (1.0 - hidden[h] * hidden[h]);
      g_b1[h] += d;
      double* gr = g_w1 + h * L.inputs;
      for (std::size_t j = 0; j < L.inputs; ++j) gr[j] += d * x[j];
    }
  }
  return {loss, wsum};
}

}  // namespace detail

/// Gradient of target_loss with respect to the flat weight vector.
inline std::vector<double> target_loss_gradient(const ModelParams& p, const Matrix& inputs, const Matrix& targets,
                                                std::span<const double> row_weights = {}) {
  detail::check_inputs(p, inputs);
  std::vector<std::size_t> rows(inputs.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::vector<double> grad(p.weights.size(), 0.0);
  detail::accumulate_gradient(p, inputs, targets, row_weights, rows, grad);
  if (!rows.empty()) {
    for (double& g : grad) g /= static_cast<double>(rows.size());
  }
  return grad;
}

/// Seeded, per-epoch shuffled mini-batch sequence over `n` rows. Shared by
/// epoch-based training and the iteration-based NegGrad+ baseline so that the
/// two visit rows in the same order.
class BatchStream {
 public:
  BatchStream(std::size_t n, std::size_t batch_size, std::uint64_t seed)
      : n_(n), batch_(batch_size), seed_(seed) {}

  std::size_t batches_per_epoch() const { return n_ == 0 ? 0 : (n_ + batch_ - 1) / batch_; }

  std::span<const std::size_t> next() {
    if (cursor_ >= order_.size()) {
      order_ = seeded_permutation(n_, derive_seed(seed_, epoch_++));
      cursor_ = 0;
    }
    const std::size_t len = std::min(batch_, order_.size() - cursor_);
    std::span<const std::size_t> out(order_.data() + cursor_, len);
    cursor_ += len;
    return out;
  }

 private:
  std::size_t n_, batch_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> order_;
};

/// Momentum SGD state: v <- mu v + g; w <- w - lr v.
struct MomentumSgd {
  double learning_rate;
  double momentum;
  std::vector<double> velocity;

  void step(std::vector<double>& weights, const std::vector<double>& grad) {
    if (velocity.empty()) velocity.assign(weights.size(), 0.0);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      velocity[i] = momentum * velocity[i] + grad[i];
      weights[i] -= learning_rate * velocity[i];
    }
  }
};

/// Runs cfg.epochs epochs of mini-batch momentum SGD on the weighted KL loss.
/// `on_epoch(epoch, params)` is called after each epoch (1-based).
inline ModelParams fit_targets(ModelParams p, const Matrix& inputs, const Matrix& targets,
                               std::span<const double> row_weights, const TrainConfig& cfg,
                               const std::function<void(std::size_t, const ModelParams&)>& on_epoch = {}) {
  cfg.validate();
  detail::check_inputs(p, inputs);
  if (targets.rows != inputs.rows || targets.cols != p.layout.classes) {
    throw ShapeError("targets must be N x K with N matching the inputs");
  }
  if (!row_weights.empty() && row_weights.size() != inputs.rows) throw ShapeError("row weight count mismatch");
  if (inputs.rows == 0 || cfg.epochs == 0) return p;

  BatchStream stream(inputs.rows, cfg.batch_size, cfg.seed);
  MomentumSgd opt{cfg.learning_rate, cfg.momentum, {}};
  std::vector<double> grad(p.weights.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t b = 0; b < stream.batches_per_epoch(); ++b) {
      const auto rows = stream.next();
      std::fill(grad.begin(), grad.end(), 0.0);
      detail::accumulate_gradient(p, inputs, targets, row_weights, rows, grad);
      for (double& g : grad) g /= static_cast<double>(rows.size());
      opt.step(p.weights, grad);
    }
    if (on_epoch) on_epoch(epoch, p);
  }
  return p;
}

inline Matrix one_hot(std::span<const int> labels, std::size_t classes) {
  Matrix t(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) + " outside [0," +
                      std::to_string(classes) + ")");
    }
    t(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return t;
}

/// Cross-entropy training (KL to one-hot targets).
inline ModelParams train_ce(const ModelParams& p, const Matrix& inputs, std::span<const int> labels,
                            const TrainConfig& cfg) {
  if (cfg.loss != LossKind::CrossEntropy) throw SpecError("train_ce requires loss = cross-entropy");
  if (labels.size() != inputs.rows) throw ShapeError("label count does not match input rows");
  return fit_targets(p, inputs, one_hot(labels, p.layout.classes), {}, cfg);
}

struct EvalSubset {
  std::string name;
  Matrix inputs;
  std::vector<int> labels;
};

struct Checkpoint {
  std::size_t epoch = 0;
  ModelParams params;
  double loss = 0.0;  // full-dataset fine-tuning loss after this epoch
  std::map<std::string, double> errors;
};

struct CheckpointSet {
  double initial_loss = 0.0;
  std::vector<Checkpoint> entries;
};

inline std::map<std::string, double> subset_errors(const ModelParams& p, std::span<const EvalSubset> subsets) {
  std::map<std::string, double> errs;
  for (const auto& s : subsets) {
    if (s.inputs.rows > 0) errs[s.name] = error_rate(p, s.inputs, s.labels);
  }
  return errs;
}

/// Fine-tunes toward per-row target distributions with the (row-weighted)
/// KL loss, snapshotting the model and subset error rates after every epoch.
inline CheckpointSet finetune_kl(const ModelParams& p, const Matrix& inputs, const Matrix& targets,
                                 const TrainConfig& cfg, std::span<const EvalSubset> subsets = {},
                                 std::span<const double> row_weights = {}) {
  if (targets.rows != inputs.rows) throw ShapeError("target rows do not match input rows");
  for (std::size_t i = 0; i < targets.rows; ++i) {
    double sum = 0.0;
    for (double v : targets.row(i)) {
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidTarget("target row " + std::to_string(i) + " has entry outside [0,1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw InvalidTarget("target row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }
  CheckpointSet cps;
  cps.initial_loss = target_loss(p, inputs, targets, row_weights);
  fit_targets(p, inputs, targets, row_weights, cfg, [&](std::size_t epoch, const ModelParams& cur) {
    cps.entries.push_back({epoch, cur, target_loss(cur, inputs, targets, row_weights), subset_errors(cur, subsets)});
  });
  return cps;
}

inline CheckpointSet finetune_kl(const ModelParams& p, const Matrix& inputs, const ProbMatrix& targets,
                                 const TrainConfig& cfg, std::span<const EvalSubset> subsets = {},
                                 std::span<const double> row_weights = {}) {
  return finetune_kl(p, inputs, targets.values(), cfg, subsets, row_weights);
}

}  // namespace ppu

#endif  // PPU_MODEL_HPP
