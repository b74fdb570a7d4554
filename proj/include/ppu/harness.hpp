#ifndef PPU_HARNESS_HPP
#define PPU_HARNESS_HPP

#include <array>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppu/baselines.hpp"
#include "ppu/binio.hpp"
#include "ppu/config.hpp"
#include "ppu/data.hpp"
#include "ppu/errors.hpp"
#include "ppu/eval.hpp"
#include "ppu/hash.hpp"
#include "ppu/model_io.hpp"
#include "ppu/pipeline.hpp"
#include "ppu/probmatrix.hpp"

namespace ppu {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;

struct RunSummary {
  std::string config_hash;
  std::string method;
  Seeds seeds;
  std::optional<EvalReport> eval;
  std::optional<MiaReport> mia;
  std::vector<TimingRecord> timings;
  std::optional<nlohmann::json> refinement;
  std::size_t selected_epoch = 0;
  std::vector<std::string> flags;
  std::string provenance;
};

/// `with_timings = false` drops wall-clock samples, which are the only
/// fields that legitimately differ between two executions of one config.
inline nlohmann::json to_json(const RunSummary& s, bool with_timings = true) {
  nlohmann::json j = {{"config_hash", s.config_hash},
                      {"method", s.method},
                      {"seeds", {{"data", s.seeds.data}, {"model", s.seeds.model}, {"protocol", s.seeds.protocol}}},
                      {"selected_epoch", s.selected_epoch},
                      {"flags", s.flags},
                      {"provenance", s.provenance}};
  if (s.eval) j["eval"] = to_json(*s.eval);
  if (s.mia) j["mia"] = to_json(*s.mia);
  if (s.refinement) j["refinement"] = *s.refinement;
  if (with_timings) {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& r : s.timings) t.push_back(to_json(r));
    j["timings"] = t;
  }
  return j;
}

namespace detail {

inline MiaReport mia_report_from_json(const nlohmann::json& j) {
  MiaReport r;
  r.mean_accuracy = j.at("mean_accuracy").get<double>();
  r.std_accuracy = j.at("std_accuracy").get<double>();
  r.accuracies = j.at("accuracies").get<std::vector<double>>();
  r.repetitions = j.at("repetitions").get<std::size_t>();
  r.per_side = j.at("per_side").get<std::size_t>();
  r.attacker = j.at("attacker").get<std::string>();
  r.split_seed = j.at("split_seed").get<std::uint64_t>();
  return r;
}

inline TimingRecord timing_from_json(const nlohmann::json& j) {
  TimingRecord r;
  r.label = j.at("label").get<std::string>();
  r.samples = j.at("samples").get<std::vector<double>>();
  r.mean = j.at("mean").get<double>();
  r.std_error = j.at("std_error").get<double>();
  r.host = j.at("host").get<std::string>();
  return r;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const fs::path& path) {
  if (!fs::exists(path)) throw IncompleteRun("missing " + path.string());
  try {
    return nlohmann::json::parse(read_file_bytes(path.string()));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// SHA-256 over the inputs, labels and split assignment of a dataset.
inline std::string dataset_fingerprint(const Dataset& ds) {
  std::ostringstream out;
  binio::write_u64(out, ds.size());
  binio::write_u64(out, ds.dims());
  binio::write_u64(out, ds.classes);
  binio::write_f64s(out, ds.inputs.data);
  for (int l : ds.labels) binio::write_u32(out, static_cast<std::uint32_t>(l));
  for (const auto* part : {&ds.splits.train, &ds.splits.validation, &ds.splits.test}) {
    binio::write_u64(out, part->size());
    for (std::size_t i : *part) binio::write_u64(out, i);
  }
  return sha256_hex(out.str());
}

/// Output of one method applied to the original model.
struct MethodRun {
  UnlearnReport report;
  std::optional<ModelParams> predecessor;  // adaptive only
};

/// Dispatches on the configured method. No persistence.
inline MethodRun run_method(const ExperimentConfig& cfg, const ModelParams& original, const Dataset& ds,
                            const SplitResult& split) {
  MethodRun out;
  switch (cfg.method.kind) {
    case MethodKind::PpuBias:
      out.report = ppu_bias(original, ds, unlearn_task(cfg, split));
      break;
    case MethodKind::PpuPrivacy:
      out.report = ppu_privacy(original, ds, unlearn_task(cfg, split));
      break;
    case MethodKind::Adaptive: {
      const auto pred = run_baseline(baseline_spec(cfg, cfg.unlearn.predecessor), original, ds, split);
      out.report = adaptive_post(pred.model, ds, unlearn_task(cfg, split));
      auto& t = out.report.timings;
      for (auto it = pred.timings.rbegin(); it != pred.timings.rend(); ++it) {
        t.insert(t.begin(), {"predecessor:" + it->first, it->second});
      }
      out.predecessor = pred.model;
      break;
    }
    case MethodKind::Baseline:
      out.report = run_baseline(baseline_spec(cfg, cfg.method.baseline), original, ds, split);
      break;
  }
  return out;
}

inline MiaReport run_mia(const ExperimentConfig& cfg, const ModelParams& model, const Dataset& ds,
                         const SplitResult& split) {
  return mia_attack(model, make_subset(ds, "forget", split.forget), make_subset(ds, "test", ds.splits.test),
                    mia_config(cfg));
}

/// Callbacks for observing a run. `after_stage` fires once a stage's
/// artifacts are on disk; throwing from it simulates an interruption.
struct RunHooks {
  std::function<void(std::string_view)> after_stage;
};

/// One run directory. Stages record a marker under `stages/` once their
/// artifacts are written; a present `INCOMPLETE` file means the run has not
/// reached its summary yet.
class RunDirectory {
 public:
  static constexpr std::array<std::string_view, 6> kStages = {"dataset", "original", "method", "eval", "mia", "timing"};

  explicit RunDirectory(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const { return root_; }
  fs::path operator/(std::string_view name) const { return root_ / name; }

  bool done(std::string_view stage) const { return fs::exists(root_ / "stages" / (std::string(stage) + ".done")); }
  void mark(std::string_view stage) const {
    fs::create_directories(root_ / "stages");
    std::ofstream(root_ / "stages" / (std::string(stage) + ".done")) << stage << '\n';
  }
  bool incomplete() const { return fs::exists(root_ / "INCOMPLETE"); }
  void set_incomplete() const {
    std::ofstream(root_ / "INCOMPLETE") << "run in progress or interrupted; re-run the same config to resume\n";
  }
  void clear_incomplete() const { fs::remove(root_ / "INCOMPLETE"); }

  std::vector<std::string> missing_stages(const nlohmann::json& config) const {
    std::vector<std::string> out;
    const auto& ev = config.at("evaluations");
    for (auto s : kStages) {
      if (s == "eval" && !ev.at("errors").get<bool>()) continue;
      if (s == "mia" && !ev.at("mia").get<bool>()) continue;
      if (s == "timing" && !ev.at("timing").get<bool>()) continue;
      if (!done(s)) out.emplace_back(s);
    }
    return out;
  }

 private:
  fs::path root_;
};

/// Creates the directory and probes it with a test write.
inline void ensure_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path probe = dir / ".write-probe";
  {
    std::ofstream out(probe);
    if (ec || !out) throw ValidationError({"output_dir: not writable: " + dir.string()});
  }
  fs::remove(probe, ec);
}

/// Rebuilds the summary purely from a run directory's files.
inline RunSummary load_summary(const fs::path& dir) {
  const RunDirectory run(dir);
  const auto config_json = detail::read_json(run / "config.json");
  const auto missing = run.missing_stages(config_json);
  if (!missing.empty()) {
    std::string msg = dir.string() + ": run is incomplete; missing stage(s):";
    for (const auto& s : missing) msg += " " + s;
    throw IncompleteRun(msg);
  }
  const ExperimentConfig cfg = config_from_json(config_json);
  const auto manifest = detail::read_json(run / "dataset_manifest.json");
  const auto report = detail::read_json(run / "report.json");

  RunSummary s;
  s.config_hash = config_hash(cfg);
  s.method = to_string(cfg.method);
  s.seeds = cfg.seeds;
  s.selected_epoch = report.at("selected_epoch").get<std::size_t>();
  s.flags = report.at("flags").get<std::vector<std::string>>();
  if (report.contains("refinement")) s.refinement = report.at("refinement");
  if (cfg.evaluations.errors) s.eval = eval_report_from_json(detail::read_json(run / "eval.json"));
  if (cfg.evaluations.mia) s.mia = detail::mia_report_from_json(detail::read_json(run / "mia.json"));
  if (cfg.evaluations.timing) {
    for (const auto& t : detail::read_json(run / "timing.json")) s.timings.push_back(detail::timing_from_json(t));
  }
  s.provenance = std::string("ppu ") + kVersion + " config:" + s.config_hash.substr(0, 12) +
                 " data:" + manifest.at("fingerprint").get<std::string>().substr(0, 12) + " method:" + s.method;
  return s;
}

/// Executes (or resumes) one experiment and persists every artifact under
/// cfg.output_dir. A directory holding a finished run of the same config is
/// returned as-is.
inline RunSummary run_experiment(const ExperimentConfig& cfg, const RunHooks& hooks = {}) {
  validate(cfg);
  if (cfg.sweep) throw UsageError("config declares a sweep; use run_sweep");
  const fs::path dir(cfg.output_dir);
  ensure_writable(dir);
  const RunDirectory run(dir);
  const std::string hash = config_hash(cfg);

  if (fs::exists(run / "config.json")) {
    const auto previous = config_from_json(detail::read_json(run / "config.json"));
    if (config_hash(previous) != hash) {
      throw UsageError(dir.string() + " holds a run of a different config (hash " + config_hash(previous) + ")");
    }
    if (fs::exists(run / "summary.json") && !run.incomplete()) return load_summary(dir);
  }
  run.set_incomplete();
  detail::write_json(run / "config.json", to_json(cfg));
  auto finished = [&](std::string_view stage) {
    run.mark(stage);
    if (hooks.after_stage) hooks.after_stage(stage);
  };

  const Dataset ds = build_dataset(cfg);
  const std::string fingerprint = dataset_fingerprint(ds);
  if (run.done("dataset")) {
    const auto m = detail::read_json(run / "dataset_manifest.json");
    if (m.at("fingerprint").get<std::string>() != fingerprint) {
      throw FormatError(dir.string() + ": dataset differs from the one recorded by the interrupted run");
    }
  } else {
    auto m = dataset_manifest(ds);
    m["fingerprint"] = fingerprint;
    detail::write_json(run / "dataset_manifest.json", m);
    finished("dataset");
  }
  const SplitResult split = make_forget_split(ds, forget_spec(cfg));

  ModelParams original;
  if (run.done("original")) {
    original = load_model((run / "original.ckpt").string());
  } else {
    original = train_original(cfg, ds);
    save_model((run / "original.ckpt").string(), original);
    finished("original");
  }

  ModelParams model;
  if (run.done("method")) {
    model = load_model((run / "unlearned.ckpt").string());
  } else {
    MethodRun m = run_method(cfg, original, ds, split);
    const auto& rep = m.report;
    if (m.predecessor) save_model((run / "predecessor.ckpt").string(), *m.predecessor);
    if (!rep.checkpoints.entries.empty()) {
      fs::create_directories(run / "checkpoints");
      for (const auto& c : rep.checkpoints.entries) {
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%03zu.ckpt", c.epoch);
        save_checkpoint((run / "checkpoints" / name).string(), c.params, c.epoch, c.errors);
      }
    }
    if (rep.refinement) {
      write_matrix_dump((run / "refined.ppum").string(), *rep.targets);
      detail::write_json(run / "refine.json", rep.refinement->record);
    }
    save_model((run / "unlearned.ckpt").string(), rep.model);
    detail::write_json(run / "report.json", to_json(rep));
    model = rep.model;
    finished("method");
  }

  if (cfg.evaluations.errors && !run.done("eval")) {
    detail::write_json(run / "eval.json", to_json(evaluate(model, ds, split)));
    finished("eval");
  }
  if (cfg.evaluations.mia && !run.done("mia")) {
    detail::write_json(run / "mia.json", to_json(run_mia(cfg, model, ds, split)));
    finished("mia");
  }
  if (cfg.evaluations.timing && !run.done("timing")) {
    const auto report = detail::read_json(run / "report.json");
    nlohmann::json records = nlohmann::json::array();
    double total = 0.0;
    for (const auto& t : report.at("timings")) {
      TimingRecord r{t.at("stage").get<std::string>(), {t.at("seconds").get<double>()}, 0.0, 0.0, host_descriptor()};
      summarize(r);
      total += r.mean;
      records.push_back(to_json(r));
    }
    TimingRecord all{"total", {total}, 0.0, 0.0, host_descriptor()};
    summarize(all);
    records.push_back(to_json(all));
    detail::write_json(run / "timing.json", records);
    finished("timing");
  }

  RunSummary summary = load_summary(dir);
  detail::write_json(run / "summary.json", to_json(summary));
  run.clear_incomplete();
  return summary;
}

/// Trains and persists only the original model (the first two stages).
inline ModelParams prepare_original(const ExperimentConfig& cfg) {
  validate(cfg);
  const fs::path dir(cfg.output_dir);
  ensure_writable(dir);
  const RunDirectory run(dir);
  const Dataset ds = build_dataset(cfg);
  if (run.done("original")) return load_model((run / "original.ckpt").string());
  if (!fs::exists(run / "config.json")) {
    run.set_incomplete();
    detail::write_json(run / "config.json", to_json(cfg));
  }
  auto m = dataset_manifest(ds);
  m["fingerprint"] = dataset_fingerprint(ds);
  detail::write_json(run / "dataset_manifest.json", m);
  run.mark("dataset");
  ModelParams original = train_original(cfg, ds);
  save_model((run / "original.ckpt").string(), original);
  run.mark("original");
  return original;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  double value = 0.0;
  std::string dir;
  RunSummary summary;
};

struct SweepTable {
  std::string axis;
  std::vector<SweepRow> rows;
};

inline std::size_t env_threads() {
  if (const char* v = std::getenv("PPU_THREADS")) {
    const long n = std::strtol(v, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  return 1;
}

inline std::string sweep_csv(const SweepTable& t) {
  std::string out = t.axis + ",retain_error,forget_error,test_error,mia_accuracy\n";
  for (const auto& r : t.rows) {
    out += detail::fmt_double(r.value);
    if (r.summary.eval) {
      out += "," + detail::fmt_double(r.summary.eval->retain_error) + "," +
             detail::fmt_double(r.summary.eval->forget_error) + "," + detail::fmt_double(r.summary.eval->test_error);
    } else {
      out += ",,,";
    }
    out += "," + (r.summary.mia ? detail::fmt_double(r.summary.mia->mean_accuracy) : std::string()) + "\n";
  }
  return out;
}

/// Runs one child per sweep value, each in its own subdirectory, on up to
/// `threads` workers; the parent writes sweep.json and sweep.csv afterwards.
inline SweepTable run_sweep(const ExperimentConfig& cfg, std::size_t threads = 1) {
  validate(cfg);
  if (!cfg.sweep) throw UsageError("config has no sweep axis");
  const fs::path dir(cfg.output_dir);
  ensure_writable(dir);
  const bool lambda_axis = cfg.sweep->axis == SweepSpec::Axis::Lambda;

  SweepTable table;
  table.axis = lambda_axis ? "lambda" : "seed";
  std::vector<ExperimentConfig> children;
  for (double v : cfg.sweep->values) {
    ExperimentConfig child = cfg;
    child.sweep.reset();
    std::string name;
    if (lambda_axis) {
      child.unlearn.lambda = v;
      name = "lambda-" + detail::fmt_double(v);
    } else {
      const auto s = static_cast<std::uint64_t>(v);
      child.seeds = {s, s, s};
      name = "seed-" + std::to_string(s);
    }
    child.output_dir = (dir / name).string();
    children.push_back(std::move(child));
    table.rows.push_back({v, name, {}});
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(children.size());
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < children.size();) {
      try {
        table.rows[i].summary = run_experiment(children[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(threads, children.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  nlohmann::json j = {{"axis", table.axis}, {"config_hash", config_hash(cfg)}, {"rows", nlohmann::json::array()}};
  for (const auto& r : table.rows) j["rows"].push_back({{"value", r.value}, {"dir", r.dir}, {"summary", to_json(r.summary)}});
  detail::write_json(dir / "sweep.json", j);
  std::ofstream(dir / "sweep.csv", std::ios::binary) << sweep_csv(table);
  return table;
}

inline SweepTable sweep_lambda(ExperimentConfig cfg, const std::vector<double>& lambdas, std::size_t threads = 1) {
  if (cfg.method.kind != MethodKind::PpuBias && cfg.method.kind != MethodKind::PpuPrivacy) {
    throw ValidationError({"method: a lambda sweep needs ppu-bias or ppu-privacy"});
  }
  cfg.sweep = SweepSpec{SweepSpec::Axis::Lambda, lambdas};
  return run_sweep(cfg, threads);
}

// ---------------------------------------------------------------------------
// Timing bench

/// Trains the original once (untimed), then times each method with `warmup`
/// discarded runs followed by `repetitions` timed ones. Writes bench.json to
/// cfg.output_dir when it is set.
inline std::vector<TimingRecord> bench(const ExperimentConfig& cfg, const std::vector<Method>& methods,
                                       std::size_t repetitions = 5, std::size_t warmup = 1) {
  validate(cfg);
  if (methods.empty()) throw UsageError("bench: no methods given");
  if (repetitions < 1) throw UsageError("bench: need at least one repetition");
  const Dataset ds = build_dataset(cfg);
  const SplitResult split = make_forget_split(ds, forget_spec(cfg));
  const ModelParams original = train_original(cfg, ds);
  std::vector<TimingRecord> out;
  for (const auto& m : methods) {
    ExperimentConfig c = cfg;
    c.method = m;
    out.push_back(time_stage(to_string(m), [&] { (void)run_method(c, original, ds, split); }, repetitions, warmup));
  }
  if (!cfg.output_dir.empty()) {
    ensure_writable(cfg.output_dir);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : out) j.push_back(to_json(r));
    detail::write_json(fs::path(cfg.output_dir) / "bench.json", j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plot data

/// Writes plot/forget_error.csv and plot/retain_error.csv from the per-epoch
/// trajectory, and plot/timing.csv when the directory holds a bench.json.
/// Output depends only on the persisted files.
inline std::vector<fs::path> emit_plot_data(const fs::path& dir) {
  const RunDirectory run(dir);
  std::vector<fs::path> written;
  fs::create_directories(dir / "plot");
  const bool bench_only = !fs::exists(run / "config.json") && fs::exists(run / "bench.json");
  if (!bench_only) {
    const auto config_json = detail::read_json(run / "config.json");
    const auto missing = run.missing_stages(config_json);
    if (run.incomplete() || !missing.empty()) {
      std::string msg = dir.string() + ": run is incomplete";
      if (!missing.empty()) {
        msg += "; missing stage(s):";
        for (const auto& s : missing) msg += " " + s;
      }
      msg += ". Re-run the same config to resume.";
      throw IncompleteRun(msg);
    }
    const auto report = detail::read_json(run / "report.json");
    for (const std::string series : {"forget", "retain"}) {
      std::string csv = "epoch," + series + "_error\n";
      for (const auto& e : report.at("trajectory")) {
        csv += std::to_string(e.at("epoch").get<std::size_t>()) + "," +
               detail::fmt_double(e.at("errors").at(series).get<double>()) + "\n";
      }
      const fs::path p = dir / "plot" / (series + "_error.csv");
      std::ofstream(p, std::ios::binary) << csv;
      written.push_back(p);
    }
  }
  if (fs::exists(run / "bench.json")) {
    std::string csv = "method,mean_seconds,std_error\n";
    for (const auto& r : detail::read_json(run / "bench.json")) {
      csv += r.at("label").get<std::string>() + "," + detail::fmt_double(r.at("mean").get<double>()) + "," +
             detail::fmt_double(r.at("std_error").get<double>()) + "\n";
    }
    const fs::path p = dir / "plot" / "timing.csv";
    std::ofstream(p, std::ios::binary) << csv;
    written.push_back(p);
  }
  return written;
}

/// Relative output paths are placed under $PPU_OUTPUT_ROOT when it is set.
inline std::string resolve_output_dir(const std::string& dir) {
  const char* root = std::getenv("PPU_OUTPUT_ROOT");
  if (!root || !*root || dir.empty() || fs::path(dir).is_absolute()) return dir;
  return (fs::path(root) / dir).string();
}

}  // namespace ppu

#endif  // PPU_HARNESS_HPP
