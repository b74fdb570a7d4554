#ifndef PPU_PIPELINE_HPP
#define PPU_PIPELINE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppu/data.hpp"
#include "ppu/errors.hpp"
#include "ppu/eval.hpp"
#include "ppu/model.hpp"
#include "ppu/probmatrix.hpp"
#include "ppu/refine.hpp"

namespace ppu {

enum class UnlearnMode { Bias, Privacy, Adaptive };

inline std::string to_string(UnlearnMode m) {
  switch (m) {
    case UnlearnMode::Bias: return "bias";
    case UnlearnMode::Privacy: return "privacy";
    case UnlearnMode::Adaptive: return "adaptive";
  }
  return "?";
}

enum class SelectionKind { ForgetErrorProxy, OutputDistance };

struct UnlearnTask {
  SplitResult split;
  UnlearnMode mode = UnlearnMode::Bias;
  UnlearnMode adaptive_base = UnlearnMode::Bias;  // behaviour applied on top of the predecessor
  PseudoScheme scheme;
  double lambda = 1.0;
  TrainConfig finetune{0.05, 0.9, 10, 32, 0, LossKind::KlToTarget};
  std::optional<RefineConfig> refine;
  SelectionKind selection = SelectionKind::ForgetErrorProxy;

  UnlearnMode effective_mode() const { return mode == UnlearnMode::Adaptive ? adaptive_base : mode; }

  void validate() const {
    if (!(lambda > 0.0)) throw SpecError("unlearn task: lambda must be positive");
    if (mode == UnlearnMode::Adaptive && adaptive_base == UnlearnMode::Adaptive) {
      throw SpecError("unlearn task: adaptive base must be bias or privacy");
    }
    if (effective_mode() == UnlearnMode::Privacy && !refine) {
      throw SpecError("unlearn task: privacy mode requires a refinement config");
    }
    scheme.validate();
    finetune.validate();
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::map<std::string, double> errors;
};

struct RefineSummary {
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double final_residual = 0.0;
  nlohmann::json record;
};

struct UnlearnReport {
  std::string mode;
  ModelParams model;
  std::size_t selected_epoch = 0;  // 0 = input model (no fine-tuning epochs)
  double reference = 0.0;          // held-out error of the input model on the forget class
  std::vector<EpochRecord> trajectory;
  std::optional<RefineSummary> refinement;
  std::vector<std::string> flags;  // e.g. "refinement-not-converged", "neggrad-diverged"
  std::vector<std::pair<std::string, double>> timings;  // seconds per stage
  EvalReport final_eval;
  CheckpointSet checkpoints;         // not serialised into the report JSON
  std::optional<ProbMatrix> targets;  // fine-tuning targets (refined Q in privacy mode)

  double total_seconds() const {
    double t = 0.0;
    for (const auto& [_, s] : timings) t += s;
    return t;
  }
};

inline nlohmann::json to_json(const UnlearnReport& r) {
  nlohmann::json traj = nlohmann::json::array();
  for (const auto& e : r.trajectory) traj.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"errors", e.errors}});
  nlohmann::json timings = nlohmann::json::array();
  for (const auto& [label, s] : r.timings) timings.push_back({{"stage", label}, {"seconds", s}});
  nlohmann::json j = {{"mode", r.mode},
                      {"selected_epoch", r.selected_epoch},
                      {"reference", r.reference},
                      {"trajectory", traj},
                      {"flags", r.flags},
                      {"timings", timings},
                      {"final_eval", to_json(r.final_eval)}};
  if (r.refinement) {
    j["refinement"] = {{"objective", r.refinement->objective},
                       {"iterations", r.refinement->iterations},
                       {"converged", r.refinement->converged},
                       {"final_residual", r.refinement->final_residual}};
  }
  return j;
}

struct ForgetErrorProxy {
  double reference = 0.0;
};

struct OutputDistance {
  Matrix retain_inputs;
  ProbMatrix original;  // reference outputs on retain_inputs
};

using SelectionCriterion = std::variant<ForgetErrorProxy, OutputDistance>;

/// Picks the checkpoint closest to the original model under `criterion`;
/// ties go to the earliest epoch.
inline std::pair<std::size_t, ModelParams> select_checkpoint(const CheckpointSet& cps,
                                                             const SelectionCriterion& criterion) {
  if (cps.entries.empty()) throw UsageError("select_checkpoint: empty checkpoint set");
  auto score = [&](const Checkpoint& c) {
    if (const auto* proxy = std::get_if<ForgetErrorProxy>(&criterion)) {
      const auto it = c.errors.find("forget");
      if (it == c.errors.end()) throw UsageError("select_checkpoint: checkpoint lacks a forget error");
      return std::abs(it->second - proxy->reference);
    }
    const auto& od = std::get<OutputDistance>(criterion);
    const ProbMatrix q = forward_probs(c.params, od.retain_inputs);
    double total = 0.0;
    for (std::size_t i = 0; i < q.rows(); ++i) total += kl_div(od.original.row(i), q.row(i));
    return q.rows() ? total / static_cast<double>(q.rows()) : 0.0;
  };
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cps.entries.size(); ++i) {
    const double s = score(cps.entries[i]);
    if (s < best_score) {
      best_score = s;
      best = i;
    }
  }
  return {cps.entries[best].epoch, cps.entries[best].params};
}

namespace detail {

class StageClock {
 public:
  explicit StageClock(std::vector<std::pair<std::string, double>>& sink) : sink_(sink) {}

  template <class F>
  auto operator()(const std::string& label, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto result = f();
    sink_.emplace_back(label, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return result;
  }

 private:
  std::vector<std::pair<std::string, double>>& sink_;
};

// Shared PPU core. `base` supplies both the starting weights and the
// probabilities the targets are built from.
inline UnlearnReport run_ppu(const ModelParams& base, const Dataset& ds, const UnlearnTask& task,
                             UnlearnMode behaviour) {
  task.validate();
  UnlearnReport report;
  report.mode = to_string(task.mode);
  detail::StageClock clock(report.timings);

  const auto& train = ds.splits.train;
  const Matrix inputs = select_rows(ds.inputs, train);
  std::vector<std::size_t> forget_pos;
  std::vector<RowRole> roles(train.size(), RowRole::Retain);
  {
    std::size_t f = 0;
    for (std::size_t pos = 0; pos < train.size(); ++pos) {
      while (f < task.split.forget.size() && task.split.forget[f] < train[pos]) ++f;
      if (f < task.split.forget.size() && task.split.forget[f] == train[pos]) {
        forget_pos.push_back(pos);
        roles[pos] = RowRole::Forget;
      }
    }
  }

  const ProbMatrix original = clock("extract", [&] { return forward_probs(base, inputs, train); });
  const ProbMatrix substituted = clock("pseudo", [&] {
    if (forget_pos.empty()) return original;
    return replace_rows(original, forget_pos, pseudo_generate(forget_pos.size(), ds.classes, task.scheme));
  });

  ProbMatrix targets = substituted;
  std::vector<double> row_weights(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) row_weights[i] = roles[i] == RowRole::Forget ? 1.0 : task.lambda;

  if (behaviour == UnlearnMode::Privacy) {
    RefineProblem problem{substituted, roles, task.lambda, class_mass(original)};
    const RefineResult res = clock("refine", [&] { return refine(problem, *task.refine); });
    report.refinement = RefineSummary{res.objective, res.iterations, res.converged,
                                      res.dual.residual_history.empty() ? 0.0 : res.dual.residual_history.back(),
                                      refine_record(res)};
    if (!res.converged) report.flags.push_back("refinement-not-converged");
    targets = res.q;
  }

  const auto test_class = test_rows_of_class(ds, task.split.target_class);
  std::vector<EvalSubset> subsets;
  subsets.push_back(make_subset(ds, "forget", task.split.forget));
  subsets.push_back(make_subset(ds, "retain", task.split.retain));
  subsets.push_back(make_subset(ds, "test", ds.splits.test));
  if (!test_class.empty()) {
    const auto s = make_subset(ds, "", test_class);
    report.reference = error_rate(base, s.inputs, s.labels);
  }

  TrainConfig cfg = task.finetune;
  cfg.loss = LossKind::KlToTarget;
  report.checkpoints = clock("finetune", [&] { return finetune_kl(base, inputs, targets, cfg, subsets, row_weights); });
  for (const auto& c : report.checkpoints.entries) report.trajectory.push_back({c.epoch, c.loss, c.errors});

  clock("select", [&] {
    if (report.checkpoints.entries.empty()) {
      report.model = base;
      report.selected_epoch = 0;
    } else if (behaviour == UnlearnMode::Privacy) {
      SelectionCriterion crit = ForgetErrorProxy{report.reference};
      if (task.selection == SelectionKind::OutputDistance) {
        std::vector<std::size_t> retain_pos;
        for (std::size_t i = 0; i < roles.size(); ++i) {
          if (roles[i] == RowRole::Retain) retain_pos.push_back(i);
        }
        const Matrix rin = select_rows(inputs, retain_pos);
        crit = OutputDistance{rin, forward_probs(base, rin)};
      }
      std::tie(report.selected_epoch, report.model) = select_checkpoint(report.checkpoints, crit);
    } else {
      report.selected_epoch = report.checkpoints.entries.back().epoch;
      report.model = report.checkpoints.entries.back().params;
    }
    return 0;
  });
  report.targets = std::move(targets);
  report.final_eval = evaluate(report.model, ds, task.split);
  return report;
}

}  // namespace detail

/// Bias removal: forget-row targets replaced by pseudo-probabilities, no
/// refinement, fine-tune on every training row, keep the last epoch.
inline UnlearnReport ppu_bias(const ModelParams& model, const Dataset& ds, const UnlearnTask& task) {
  if (task.mode != UnlearnMode::Bias) throw UsageError("ppu_bias requires mode = bias");
  return detail::run_ppu(model, ds, task, UnlearnMode::Bias);
}

/// Privacy protection: pseudo substitution, constrained refinement with class
/// masses from the original outputs, fine-tuning with per-epoch checkpoints,
/// then checkpoint selection.
inline UnlearnReport ppu_privacy(const ModelParams& model, const Dataset& ds, const UnlearnTask& task) {
  if (task.mode != UnlearnMode::Privacy) throw UsageError("ppu_privacy requires mode = privacy");
  return detail::run_ppu(model, ds, task, UnlearnMode::Privacy);
}

/// Post-processing on top of another unlearning method's model.
inline UnlearnReport adaptive_post(const ModelParams& predecessor, const Dataset& ds, const UnlearnTask& task) {
  if (task.mode != UnlearnMode::Adaptive) throw UsageError("adaptive_post requires mode = adaptive");
  return detail::run_ppu(predecessor, ds, task, task.adaptive_base);
}

}  // namespace ppu

#endif  // PPU_PIPELINE_HPP
