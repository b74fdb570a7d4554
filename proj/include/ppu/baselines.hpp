#ifndef PPU_BASELINES_HPP
#define PPU_BASELINES_HPP

#include <chrono>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ppu/data.hpp"
#include "ppu/errors.hpp"
#include "ppu/eval.hpp"
#include "ppu/model.hpp"
#include "ppu/pipeline.hpp"

namespace ppu {

enum class BaselineKind { Retrain, Original, Finetune, NegGradPlus };

inline std::string to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::Retrain: return "retrain";
    case BaselineKind::Original: return "original";
    case BaselineKind::Finetune: return "finetune";
    case BaselineKind::NegGradPlus: return "neggrad-plus";
  }
  return "?";
}

struct BaselineSpec {
  BaselineKind kind = BaselineKind::Original;
  TrainConfig train;
  std::size_t neggrad_iters = 500;
  double ascent_weight = 0.5;

  void validate() const {
    train.validate();
    if (kind == BaselineKind::NegGradPlus && neggrad_iters < 1) throw SpecError("neggrad-plus needs >= 1 iteration");
    if (!(ascent_weight >= 0.0)) throw SpecError("ascent weight must be non-negative");
  }
};

/// Fresh model trained on the retain rows only. Takes the retain indices
/// alone so forget rows are never visible to it.
inline ModelParams retrain(const Layout& layout, std::uint64_t init_seed, const Dataset& ds,
                           std::span<const std::size_t> retain, const TrainConfig& cfg) {
  if (retain.empty()) throw SpecError("retrain: empty retain set");
  const auto s = make_subset(ds, "retain", retain);
  return train_ce(init_model(layout, init_seed), s.inputs, s.labels, cfg);
}

/// Continues cross-entropy training on the retain rows.
inline ModelParams finetune_retain(const ModelParams& model, const Dataset& ds, const SplitResult& split,
                                   const TrainConfig& cfg) {
  if (split.retain.empty()) throw SpecError("finetune: empty retain set");
  const auto s = make_subset(ds, "retain", split.retain);
  return train_ce(model, s.inputs, s.labels, cfg);
}

struct NegGradResult {
  ModelParams params;
  std::size_t iterations = 0;
  bool diverged = false;
};

inline constexpr double kDivergenceLimit = 1e3;

/// Each iteration takes one retain mini-batch and one forget mini-batch and
/// steps on  L_retain - ascent_weight * L_forget.
inline NegGradResult neggrad_plus(const ModelParams& model, const Dataset& ds, const SplitResult& split,
                                  const TrainConfig& cfg, std::size_t iters, double ascent_weight) {
  cfg.validate();
  if (split.retain.empty() || split.forget.empty()) throw SpecError("neggrad-plus: both sets must be non-empty");
  const auto r = make_subset(ds, "retain", split.retain);
  const auto f = make_subset(ds, "forget", split.forget);
  const Matrix rt = one_hot(r.labels, model.layout.classes);
  const Matrix ft = one_hot(f.labels, model.layout.classes);

  NegGradResult out{model, 0, false};
  BatchStream retain_stream(r.inputs.rows, cfg.batch_size, cfg.seed);
  BatchStream forget_stream(f.inputs.rows, cfg.batch_size, derive_seed(cfg.seed, 0xF0));
  MomentumSgd opt{cfg.learning_rate, cfg.momentum, {}};
  std::vector<double> grad(model.weights.size()), fgrad(model.weights.size());
  for (std::size_t it = 0; it < iters; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    auto [rloss, rw] = detail::accumulate_gradient(out.params, r.inputs, rt, {}, retain_stream.next(), grad);
    for (double& g : grad) g /= rw;
    double combined = rloss / rw;
    if (ascent_weight != 0.0) {
      std::fill(fgrad.begin(), fgrad.end(), 0.0);
      auto [floss, fw] = detail::accumulate_gradient(out.params, f.inputs, ft, {}, forget_stream.next(), fgrad);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] -= ascent_weight * fgrad[i] / fw;
      combined -= ascent_weight * floss / fw;
    }
    if (!std::isfinite(combined) || std::abs(combined) > kDivergenceLimit) {
      out.diverged = true;
      break;
    }
    opt.step(out.params.weights, grad);
    out.iterations = it + 1;
  }
  return out;
}

/// Runs a baseline and wraps it in the same report shape as the PPU modes.
inline UnlearnReport run_baseline(const BaselineSpec& spec, const ModelParams& original, const Dataset& ds,
                                  const SplitResult& split) {
  spec.validate();
  UnlearnReport report;
  report.mode = to_string(spec.kind);
  const auto t0 = std::chrono::steady_clock::now();
  switch (spec.kind) {
    case BaselineKind::Original:
      report.model = original;
      break;
    case BaselineKind::Retrain:
      report.model = retrain(original.layout, original.seed, ds, split.retain, spec.train);
      report.selected_epoch = spec.train.epochs;
      break;
    case BaselineKind::Finetune:
      report.model = finetune_retain(original, ds, split, spec.train);
      report.selected_epoch = spec.train.epochs;
      break;
    case BaselineKind::NegGradPlus: {
      auto r = neggrad_plus(original, ds, split, spec.train, spec.neggrad_iters, spec.ascent_weight);
      report.model = std::move(r.params);
      if (r.diverged) report.flags.push_back("neggrad-diverged");
      break;
    }
  }
  report.timings.emplace_back(to_string(spec.kind),
                              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  const auto test_class = test_rows_of_class(ds, split.target_class);
  if (!test_class.empty()) {
    const auto s = make_subset(ds, "", test_class);
    report.reference = error_rate(original, s.inputs, s.labels);
  }
  report.final_eval = evaluate(report.model, ds, split);
  return report;
}

}  // namespace ppu

#endif  // PPU_BASELINES_HPP
