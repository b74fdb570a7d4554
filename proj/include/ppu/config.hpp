#ifndef PPU_CONFIG_HPP
#define PPU_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppu/baselines.hpp"
#include "ppu/data.hpp"
#include "ppu/errors.hpp"
#include "ppu/eval.hpp"
#include "ppu/hash.hpp"
#include "ppu/pipeline.hpp"
#include "ppu/random.hpp"

namespace ppu {

inline constexpr int kConfigSchemaVersion = 1;

enum class MethodKind { PpuBias, PpuPrivacy, Adaptive, Baseline };

struct Method {
  MethodKind kind = MethodKind::PpuBias;
  BaselineKind baseline = BaselineKind::Original;  // used when kind == Baseline

  bool operator==(const Method&) const = default;
};

inline std::string to_string(const Method& m) {
  switch (m.kind) {
    case MethodKind::PpuBias: return "ppu-bias";
    case MethodKind::PpuPrivacy: return "ppu-privacy";
    case MethodKind::Adaptive: return "adaptive";
    case MethodKind::Baseline: return "baseline:" + to_string(m.baseline);
  }
  return "?";
}

inline std::optional<Method> parse_method(const std::string& s) {
  if (s == "ppu-bias") return Method{MethodKind::PpuBias};
  if (s == "ppu-privacy") return Method{MethodKind::PpuPrivacy};
  if (s == "adaptive") return Method{MethodKind::Adaptive};
  for (auto k : {BaselineKind::Retrain, BaselineKind::Original, BaselineKind::Finetune, BaselineKind::NegGradPlus}) {
    if (s == "baseline:" + to_string(k)) return Method{MethodKind::Baseline, k};
  }
  return std::nullopt;
}

struct DatasetSpec {
  std::string kind = "blobs";  // "blobs" | "csv"
  std::size_t classes = 5;
  std::size_t dims = 1024;
  std::size_t n_per_class = 125;
  double spread = 0.45;
  std::string path;      // csv only
  bool shuffle = false;  // csv only: seeded split assignment instead of file order
  SplitRatios ratios;    // csv only; blobs always use the default ratios
};

/// Every random draw in a run derives from one of these.
struct Seeds {
  std::uint64_t data = 1;      // blob sampling, csv split shuffle
  std::uint64_t model = 1;     // initialization and original training order
  std::uint64_t protocol = 1;  // forget sample, pseudo rows, fine-tune order, MIA splits, baselines
};

enum class SeedStream : std::uint64_t { Forget = 1, Pseudo = 2, Finetune = 3, Mia = 4, Baseline = 5 };

inline std::uint64_t stream_seed(const Seeds& s, SeedStream stream) {
  return derive_seed(s.protocol, static_cast<std::uint64_t>(stream));
}

struct ModelSpec {
  std::size_t hidden = 32;
  TrainConfig train{0.05, 0.9, 100, 32, 0, LossKind::CrossEntropy};
};

struct ForgetSettings {
  ForgetSpec::Mode mode = ForgetSpec::Mode::Selective;
  int target_class = 0;
  std::size_t count = 25;
};

struct RefineSettings {
  double tol = 1e-6;
  std::size_t max_iters = 10000;
  std::optional<double> eta;
};

struct UnlearnSettings {
  std::optional<PseudoScheme::Kind> scheme;  // unset: uniform for privacy, random-softmax otherwise
  double lambda = 1.0;
  TrainConfig finetune{0.05, 0.9, 30, 32, 0, LossKind::KlToTarget};
  RefineSettings refine;
  SelectionKind selection = SelectionKind::ForgetErrorProxy;
  UnlearnMode adaptive_base = UnlearnMode::Bias;
  BaselineKind predecessor = BaselineKind::Finetune;  // adaptive only
};

struct BaselineSettings {
  std::optional<TrainConfig> train;  // unset: model.train for retrain, 10 fine-tune epochs otherwise
  std::size_t neggrad_iters = 500;
  double ascent_weight = 0.5;
};

struct Evaluations {
  bool errors = true;
  bool mia = false;
  bool timing = false;
};

struct SweepSpec {
  enum class Axis { Lambda, Seed };
  Axis axis = Axis::Lambda;
  std::vector<double> values;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  DatasetSpec dataset;
  Seeds seeds;
  ModelSpec model;
  ForgetSettings forget;
  Method method;
  UnlearnSettings unlearn;
  BaselineSettings baseline;
  Evaluations evaluations;
  std::size_t mia_repetitions = 5;
  std::optional<SweepSpec> sweep;
  std::string output_dir;
};

inline PseudoScheme::Kind resolved_scheme(const ExperimentConfig& c) {
  if (c.unlearn.scheme) return *c.unlearn.scheme;
  const bool privacy = c.method.kind == MethodKind::PpuPrivacy ||
                       (c.method.kind == MethodKind::Adaptive && c.unlearn.adaptive_base == UnlearnMode::Privacy);
  return privacy ? PseudoScheme::Kind::Uniform : PseudoScheme::Kind::RandomSoftmax;
}

inline TrainConfig resolved_baseline_train(const ExperimentConfig& c, BaselineKind kind) {
  if (c.baseline.train) return *c.baseline.train;
  if (kind == BaselineKind::Retrain) return c.model.train;
  return {0.05, 0.9, 10, 32, 0, LossKind::CrossEntropy};
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline nlohmann::json train_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"momentum", t.momentum}, {"epochs", t.epochs},
          {"batch_size", t.batch_size}};
}

inline std::string selection_name(SelectionKind k) {
  return k == SelectionKind::ForgetErrorProxy ? "forget-error-proxy" : "output-distance";
}

inline std::string scheme_name(PseudoScheme::Kind k) {
  return k == PseudoScheme::Kind::Uniform ? "uniform" : "random-softmax";
}

// Typed field access that records problems instead of throwing, so one pass
// reports every bad field.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& obj, std::string path, std::vector<std::string>& issues)
      : obj_(obj), path_(std::move(path)), issues_(issues) {
    if (!obj_.is_object()) issues_.push_back(where("") + " must be an object");
  }

  bool has(const std::string& key) const { return obj_.is_object() && obj_.contains(key); }

  template <class T>
  void read(const std::string& key, T& out) {
    const nlohmann::json* v = take(key);
    if (!v) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (v->is_boolean()) out = v->get<bool>(); else bad(key, "a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (v->is_string()) out = v->get<std::string>(); else bad(key, "a string");
    } else if constexpr (std::is_same_v<T, double>) {
      if (v->is_number()) out = v->get<double>(); else bad(key, "a number");
    } else if constexpr (std::is_signed_v<T>) {
      if (v->is_number_integer()) out = v->get<T>(); else bad(key, "an integer");
    } else {
      if (v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0)) {
        out = v->get<T>();
      } else {
        bad(key, "a non-negative integer");
      }
    }
  }

  template <class T>
  void read(const std::string& key, std::optional<T>& out) {
    if (!has(key)) return;
    T tmp{};
    const std::size_t before = issues_.size();
    read(key, tmp);
    if (issues_.size() == before) out = tmp;
  }

  FieldReader sub(const std::string& key) {
    static const nlohmann::json empty = nlohmann::json::object();
    const nlohmann::json* v = take(key);
    return FieldReader(v ? *v : empty, where(key), issues_);
  }

  const nlohmann::json* raw(const std::string& key) { return take(key); }

  void issue(const std::string& key, const std::string& msg) { issues_.push_back(where(key) + ": " + msg); }

  // Flags keys that were never read; catches typos.
  void finish() {
    if (!obj_.is_object()) return;
    for (const auto& [k, _] : obj_.items()) {
      if (!used_.count(k)) issues_.push_back(where(k) + ": unknown field");
    }
  }

  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const nlohmann::json* take(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return nullptr;
    return &obj_.at(key);
  }
  void bad(const std::string& key, const std::string& expected) { issue(key, "expected " + expected); }

  const nlohmann::json& obj_;
  std::string path_;
  std::vector<std::string>& issues_;
  std::set<std::string> used_;
};

inline void read_train(FieldReader r, TrainConfig& t) {
  r.read("learning_rate", t.learning_rate);
  r.read("momentum", t.momentum);
  r.read("epochs", t.epochs);
  r.read("batch_size", t.batch_size);
  r.finish();
}

inline void check_train(const TrainConfig& t, const std::string& where, std::vector<std::string>& issues) {
  if (!(t.learning_rate > 0.0) || !std::isfinite(t.learning_rate)) issues.push_back(where + ".learning_rate: must be > 0");
  if (!(t.momentum >= 0.0 && t.momentum < 1.0)) issues.push_back(where + ".momentum: must be in [0, 1)");
  if (t.batch_size < 1) issues.push_back(where + ".batch_size: must be >= 1");
}

}  // namespace detail

/// Normalized form: every field present, defaults resolved.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json ds = {{"kind", c.dataset.kind}};
  if (c.dataset.kind == "csv") {
    ds["path"] = c.dataset.path;
    ds["shuffle"] = c.dataset.shuffle;
    ds["ratios"] = {{"validation", c.dataset.ratios.validation}, {"test", c.dataset.ratios.test}};
  } else {
    ds["classes"] = c.dataset.classes;
    ds["dims"] = c.dataset.dims;
    ds["n_per_class"] = c.dataset.n_per_class;
    ds["spread"] = c.dataset.spread;
  }
  nlohmann::json forget = {
      {"mode", c.forget.mode == ForgetSpec::Mode::Selective ? "selective" : "class"},
      {"class", c.forget.target_class}};
  if (c.forget.mode == ForgetSpec::Mode::Selective) forget["count"] = c.forget.count;

  nlohmann::json refine = {{"tol", c.unlearn.refine.tol}, {"max_iters", c.unlearn.refine.max_iters}};
  if (c.unlearn.refine.eta) refine["eta"] = *c.unlearn.refine.eta;
  nlohmann::json unlearn = {{"scheme", detail::scheme_name(resolved_scheme(c))},
                            {"lambda", c.unlearn.lambda},
                            {"finetune", detail::train_json(c.unlearn.finetune)},
                            {"refine", refine},
                            {"selection", detail::selection_name(c.unlearn.selection)},
                            {"adaptive_base", c.unlearn.adaptive_base == UnlearnMode::Privacy ? "privacy" : "bias"},
                            {"predecessor", to_string(c.unlearn.predecessor)}};
  const BaselineKind bk = c.method.kind == MethodKind::Baseline ? c.method.baseline : c.unlearn.predecessor;
  nlohmann::json baseline = {{"train", detail::train_json(resolved_baseline_train(c, bk))},
                             {"neggrad_iters", c.baseline.neggrad_iters},
                             {"ascent_weight", c.baseline.ascent_weight}};
  nlohmann::json j = {
      {"schema_version", c.schema_version},
      {"dataset", ds},
      {"seeds", {{"data", c.seeds.data}, {"model", c.seeds.model}, {"protocol", c.seeds.protocol}}},
      {"model", {{"hidden", c.model.hidden}, {"train", detail::train_json(c.model.train)}}},
      {"forget", forget},
      {"method", to_string(c.method)},
      {"unlearn", unlearn},
      {"baseline", baseline},
      {"evaluations", {{"errors", c.evaluations.errors}, {"mia", c.evaluations.mia}, {"timing", c.evaluations.timing}}},
      {"mia", {{"repetitions", c.mia_repetitions}}},
      {"output_dir", c.output_dir}};
  if (c.sweep) {
    j["sweep"] = {{"axis", c.sweep->axis == SweepSpec::Axis::Lambda ? "lambda" : "seed"}, {"values", c.sweep->values}};
  }
  return j;
}

/// Semantic checks on an already-typed config; appends one line per problem.
inline void collect_issues(const ExperimentConfig& c, std::vector<std::string>& issues) {
  if (c.schema_version != kConfigSchemaVersion) {
    issues.push_back("schema_version: expected " + std::to_string(kConfigSchemaVersion) + ", found " +
                     std::to_string(c.schema_version));
  }
  std::optional<std::size_t> classes;
  if (c.dataset.kind == "blobs") {
    if (c.dataset.classes < 2) issues.push_back("dataset.classes: must be >= 2");
    if (c.dataset.dims < 1) issues.push_back("dataset.dims: must be >= 1");
    if (c.dataset.n_per_class < 10) issues.push_back("dataset.n_per_class: must be >= 10");
    if (!(c.dataset.spread > 0.0)) issues.push_back("dataset.spread: must be > 0");
    classes = c.dataset.classes;
  } else if (c.dataset.kind == "csv") {
    if (c.dataset.path.empty()) {
      issues.push_back("dataset.path: required for csv datasets");
    } else if (!std::filesystem::is_regular_file(c.dataset.path)) {
      issues.push_back("dataset.path: no such file: " + c.dataset.path);
    }
    const auto& r = c.dataset.ratios;
    if (!(r.validation >= 0.0 && r.test >= 0.0 && r.validation + r.test < 1.0)) {
      issues.push_back("dataset.ratios: need validation, test >= 0 and validation + test < 1");
    }
  } else {
    issues.push_back("dataset.kind: expected 'blobs' or 'csv', found '" + c.dataset.kind + "'");
  }
  if (c.model.hidden < 1) issues.push_back("model.hidden: must be >= 1");
  detail::check_train(c.model.train, "model.train", issues);
  if (c.forget.target_class < 0 || (classes && static_cast<std::size_t>(c.forget.target_class) >= *classes)) {
    issues.push_back("forget.class: outside [0, K)");
  }
  if (c.forget.mode == ForgetSpec::Mode::Selective && c.forget.count < 1) {
    issues.push_back("forget.count: selective mode needs count >= 1");
  }
  if (!(c.unlearn.lambda > 0.0) || !std::isfinite(c.unlearn.lambda)) issues.push_back("unlearn.lambda: must be > 0");
  detail::check_train(c.unlearn.finetune, "unlearn.finetune", issues);
  if (!(c.unlearn.refine.tol > 0.0)) issues.push_back("unlearn.refine.tol: must be > 0");
  if (c.unlearn.refine.max_iters < 1) issues.push_back("unlearn.refine.max_iters: must be >= 1");
  if (c.unlearn.refine.eta && !(*c.unlearn.refine.eta > 0.0)) issues.push_back("unlearn.refine.eta: must be > 0");
  if (c.unlearn.adaptive_base == UnlearnMode::Adaptive) {
    issues.push_back("unlearn.adaptive_base: must be 'bias' or 'privacy'");
  }
  if (c.method.kind == MethodKind::Adaptive && c.unlearn.predecessor == BaselineKind::Original) {
    issues.push_back("unlearn.predecessor: adaptive mode needs an unlearning method, not the original model");
  }
  if (c.baseline.train) detail::check_train(*c.baseline.train, "baseline.train", issues);
  if (c.method.kind == MethodKind::Baseline && c.method.baseline == BaselineKind::NegGradPlus &&
      c.baseline.neggrad_iters < 1) {
    issues.push_back("baseline.neggrad_iters: must be >= 1");
  }
  if (!(c.baseline.ascent_weight >= 0.0)) issues.push_back("baseline.ascent_weight: must be >= 0");
  if (c.mia_repetitions < 1) issues.push_back("mia.repetitions: must be >= 1");
  if (c.sweep) {
    if (c.sweep->values.empty()) issues.push_back("sweep.values: must be non-empty");
    for (double v : c.sweep->values) {
      if (c.sweep->axis == SweepSpec::Axis::Lambda && !(v > 0.0)) {
        issues.push_back("sweep.values: lambda values must be > 0");
        break;
      }
      if (c.sweep->axis == SweepSpec::Axis::Seed && !(v >= 0.0 && v == std::floor(v))) {
        issues.push_back("sweep.values: seeds must be non-negative integers");
        break;
      }
    }
    if (c.sweep->axis == SweepSpec::Axis::Lambda && c.method.kind != MethodKind::PpuBias &&
        c.method.kind != MethodKind::PpuPrivacy) {
      issues.push_back("sweep.axis: a lambda sweep needs method ppu-bias or ppu-privacy");
    }
  }
  if (c.output_dir.empty()) issues.push_back("output_dir: required");
}

inline void validate(const ExperimentConfig& c) {
  std::vector<std::string> issues;
  collect_issues(c, issues);
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

/// Parses and validates; throws ValidationError listing every problem found.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::FieldReader;
  std::vector<std::string> issues;
  ExperimentConfig c;
  FieldReader root(j, "", issues);
  if (!root.has("schema_version")) issues.push_back("schema_version: required");
  root.read("schema_version", c.schema_version);

  {
    auto d = root.sub("dataset");
    d.read("kind", c.dataset.kind);
    d.read("classes", c.dataset.classes);
    d.read("dims", c.dataset.dims);
    d.read("n_per_class", c.dataset.n_per_class);
    d.read("spread", c.dataset.spread);
    d.read("path", c.dataset.path);
    d.read("shuffle", c.dataset.shuffle);
    auto r = d.sub("ratios");
    r.read("validation", c.dataset.ratios.validation);
    r.read("test", c.dataset.ratios.test);
    r.finish();
    d.finish();
  }
  {
    auto s = root.sub("seeds");
    s.read("data", c.seeds.data);
    s.read("model", c.seeds.model);
    s.read("protocol", c.seeds.protocol);
    s.finish();
  }
  {
    auto m = root.sub("model");
    m.read("hidden", c.model.hidden);
    detail::read_train(m.sub("train"), c.model.train);
    m.finish();
  }
  {
    auto f = root.sub("forget");
    std::string mode = "selective";
    f.read("mode", mode);
    if (mode == "selective") c.forget.mode = ForgetSpec::Mode::Selective;
    else if (mode == "class") c.forget.mode = ForgetSpec::Mode::ClassUnlearning;
    else f.issue("mode", "expected 'selective' or 'class', found '" + mode + "'");
    f.read("class", c.forget.target_class);
    f.read("count", c.forget.count);
    f.finish();
  }
  {
    std::string method;
    if (!root.has("method")) issues.push_back("method: required (exactly one of ppu-bias, ppu-privacy, adaptive, "
                                              "baseline:{retrain,original,finetune,neggrad-plus})");
    root.read("method", method);
    if (root.has("method") && root.raw("method")->is_string()) {
      if (auto m = parse_method(method)) c.method = *m;
      else root.issue("method", "unknown method '" + method + "'");
    }
  }
  {
    auto u = root.sub("unlearn");
    std::optional<std::string> scheme;
    u.read("scheme", scheme);
    if (scheme) {
      if (*scheme == "uniform") c.unlearn.scheme = PseudoScheme::Kind::Uniform;
      else if (*scheme == "random-softmax") c.unlearn.scheme = PseudoScheme::Kind::RandomSoftmax;
      else u.issue("scheme", "expected 'uniform' or 'random-softmax', found '" + *scheme + "'");
    }
    u.read("lambda", c.unlearn.lambda);
    detail::read_train(u.sub("finetune"), c.unlearn.finetune);
    {
      auto r = u.sub("refine");
      r.read("tol", c.unlearn.refine.tol);
      r.read("max_iters", c.unlearn.refine.max_iters);
      r.read("eta", c.unlearn.refine.eta);
      r.finish();
    }
    std::string sel = detail::selection_name(c.unlearn.selection);
    u.read("selection", sel);
    if (sel == "forget-error-proxy") c.unlearn.selection = SelectionKind::ForgetErrorProxy;
    else if (sel == "output-distance") c.unlearn.selection = SelectionKind::OutputDistance;
    else u.issue("selection", "expected 'forget-error-proxy' or 'output-distance', found '" + sel + "'");
    std::string base = "bias";
    u.read("adaptive_base", base);
    if (base == "bias") c.unlearn.adaptive_base = UnlearnMode::Bias;
    else if (base == "privacy") c.unlearn.adaptive_base = UnlearnMode::Privacy;
    else u.issue("adaptive_base", "expected 'bias' or 'privacy', found '" + base + "'");
    std::string pred = to_string(c.unlearn.predecessor);
    u.read("predecessor", pred);
    if (auto m = parse_method("baseline:" + pred)) c.unlearn.predecessor = m->baseline;
    else u.issue("predecessor", "unknown baseline '" + pred + "'");
    u.finish();
  }
  {
    auto b = root.sub("baseline");
    if (b.has("train")) {
      TrainConfig t{0.05, 0.9, 10, 32, 0, LossKind::CrossEntropy};
      detail::read_train(b.sub("train"), t);
      c.baseline.train = t;
    }
    b.read("neggrad_iters", c.baseline.neggrad_iters);
    b.read("ascent_weight", c.baseline.ascent_weight);
    b.finish();
  }
  {
    auto e = root.sub("evaluations");
    e.read("errors", c.evaluations.errors);
    e.read("mia", c.evaluations.mia);
    e.read("timing", c.evaluations.timing);
    e.finish();
  }
  {
    auto m = root.sub("mia");
    m.read("repetitions", c.mia_repetitions);
    m.finish();
  }
  if (root.has("sweep")) {
    auto s = root.sub("sweep");
    SweepSpec sw;
    std::string axis;
    s.read("axis", axis);
    if (axis == "lambda") sw.axis = SweepSpec::Axis::Lambda;
    else if (axis == "seed") sw.axis = SweepSpec::Axis::Seed;
    else s.issue("axis", "expected 'lambda' or 'seed'");
    if (const auto* v = s.raw("values")) {
      if (!v->is_array()) {
        s.issue("values", "expected an array of numbers");
      } else {
        for (const auto& x : *v) {
          if (x.is_number()) sw.values.push_back(x.get<double>());
          else s.issue("values", "expected an array of numbers");
        }
      }
    }
    s.finish();
    c.sweep = sw;
  }
  root.read("output_dir", c.output_dir);
  root.finish();

  collect_issues(c, issues);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return c;
}

/// JSON without the output location: two configs that would produce the same
/// results map to the same document. Object keys are sorted, so field order in
/// the source file has no effect.
inline nlohmann::json canonical_json(const ExperimentConfig& c) {
  auto j = to_json(c);
  j.erase("output_dir");
  return j;
}

inline std::string config_hash(const ExperimentConfig& c) { return sha256_hex(canonical_json(c).dump()); }

inline ExperimentConfig load_config(const std::string& path) {
  const std::string text = read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError({path + ": not valid JSON: " + e.what()});
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Building library inputs from a config

inline Dataset build_dataset(const ExperimentConfig& c) {
  if (c.dataset.kind == "csv") {
    CsvOptions opts{c.dataset.ratios, std::nullopt};
    if (c.dataset.shuffle) opts.shuffle_seed = c.seeds.data;
    return load_csv(c.dataset.path, opts);
  }
  return gen_blobs({c.dataset.classes, c.dataset.dims, c.dataset.n_per_class, c.dataset.spread, c.seeds.data});
}

inline ForgetSpec forget_spec(const ExperimentConfig& c) {
  return {c.forget.mode, c.forget.target_class, c.forget.count, stream_seed(c.seeds, SeedStream::Forget)};
}

inline Layout model_layout(const ExperimentConfig& c, const Dataset& ds) {
  return {ds.dims(), c.model.hidden, ds.classes};
}

inline TrainConfig original_train_config(const ExperimentConfig& c) {
  TrainConfig t = c.model.train;
  t.seed = derive_seed(c.seeds.model, 1);
  t.loss = LossKind::CrossEntropy;
  return t;
}

inline ModelParams train_original(const ExperimentConfig& c, const Dataset& ds) {
  const auto tr = make_subset(ds, "train", ds.splits.train);
  return train_ce(init_model(model_layout(c, ds), c.seeds.model), tr.inputs, tr.labels, original_train_config(c));
}

inline UnlearnTask unlearn_task(const ExperimentConfig& c, const SplitResult& split) {
  UnlearnTask t;
  t.split = split;
  switch (c.method.kind) {
    case MethodKind::PpuPrivacy: t.mode = UnlearnMode::Privacy; break;
    case MethodKind::Adaptive: t.mode = UnlearnMode::Adaptive; break;
    default: t.mode = UnlearnMode::Bias; break;
  }
  t.adaptive_base = c.unlearn.adaptive_base;
  t.scheme = resolved_scheme(c) == PseudoScheme::Kind::Uniform
                 ? PseudoScheme::uniform()
                 : PseudoScheme::random_softmax(stream_seed(c.seeds, SeedStream::Pseudo));
  t.lambda = c.unlearn.lambda;
  t.finetune = c.unlearn.finetune;
  t.finetune.seed = stream_seed(c.seeds, SeedStream::Finetune);
  t.finetune.loss = LossKind::KlToTarget;
  if (t.effective_mode() == UnlearnMode::Privacy) {
    t.refine = RefineConfig{c.unlearn.refine.tol, c.unlearn.refine.max_iters, c.unlearn.refine.eta, std::nullopt};
  }
  t.selection = c.unlearn.selection;
  return t;
}

inline BaselineSpec baseline_spec(const ExperimentConfig& c, BaselineKind kind) {
  BaselineSpec b;
  b.kind = kind;
  b.train = resolved_baseline_train(c, kind);
  b.train.seed = stream_seed(c.seeds, SeedStream::Baseline);
  b.train.loss = LossKind::CrossEntropy;
  b.neggrad_iters = c.baseline.neggrad_iters;
  b.ascent_weight = c.baseline.ascent_weight;
  return b;
}

inline MiaConfig mia_config(const ExperimentConfig& c) {
  MiaConfig m;
  m.repetitions = c.mia_repetitions;
  m.seed = stream_seed(c.seeds, SeedStream::Mia);
  return m;
}

}  // namespace ppu

#endif  // PPU_CONFIG_HPP
