// Command-line front end for the unlearning harness.
//
// Exit codes: 0 success, 2 invalid input or configuration, 3 runtime failure,
// 4 refinement did not converge (artifacts are still written).

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ppu/ppu.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitNotConverged = 4;

struct Overrides {
  std::optional<std::string> method, scheme, selection, output;
  std::optional<double> lambda;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> data_seed, model_seed, protocol_seed;
  bool mia = false, timing = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--method", method, "ppu-bias | ppu-privacy | adaptive | baseline:<kind>");
    cmd->add_option("--scheme", scheme, "uniform | random-softmax");
    cmd->add_option("--selection", selection, "forget-error-proxy | output-distance");
    cmd->add_option("--lambda", lambda, "retain-row weight");
    cmd->add_option("--epochs", epochs, "fine-tuning epochs");
    cmd->add_option("--data-seed", data_seed);
    cmd->add_option("--model-seed", model_seed);
    cmd->add_option("--protocol-seed", protocol_seed);
    cmd->add_option("-o,--output", output, "run directory");
    cmd->add_flag("--mia", mia, "enable the membership-inference evaluation");
    cmd->add_flag("--timing", timing, "record stage timings");
  }

  void apply(nlohmann::json& j) const {
    if (method) j["method"] = *method;
    if (scheme) j["unlearn"]["scheme"] = *scheme;
    if (selection) j["unlearn"]["selection"] = *selection;
    if (lambda) j["unlearn"]["lambda"] = *lambda;
    if (epochs) j["unlearn"]["finetune"]["epochs"] = *epochs;
    if (data_seed) j["seeds"]["data"] = *data_seed;
    if (model_seed) j["seeds"]["model"] = *model_seed;
    if (protocol_seed) j["seeds"]["protocol"] = *protocol_seed;
    if (output) j["output_dir"] = *output;
    if (mia) j["evaluations"]["mia"] = true;
    if (timing) j["evaluations"]["timing"] = true;
  }
};

nlohmann::json read_config_json(const std::string& path) {
  try {
    return nlohmann::json::parse(ppu::read_file_bytes(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ppu::ValidationError({path + ": not valid JSON: " + e.what()});
  }
}

ppu::ExperimentConfig load(const std::string& path, const Overrides& o) {
  auto j = read_config_json(path);
  o.apply(j);
  auto cfg = ppu::config_from_json(j);
  cfg.output_dir = ppu::resolve_output_dir(cfg.output_dir);
  return cfg;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

int converged_code(const std::vector<std::string>& flags) {
  return std::count(flags.begin(), flags.end(), "refinement-not-converged") ? kExitNotConverged : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-probability unlearning harness"};
  app.require_subcommand(1);

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "write a seeded Gaussian-blob dataset as CSV");
  ppu::BlobConfig blobs{5, 1024, 125, 0.45, 1};
  std::string gen_out;
  gen->add_option("--classes", blobs.classes)->capture_default_str();
  gen->add_option("--dims", blobs.dims)->capture_default_str();
  gen->add_option("--n-per-class", blobs.n_per_class)->capture_default_str();
  gen->add_option("--spread", blobs.spread)->capture_default_str();
  gen->add_option("--seed", blobs.seed)->capture_default_str();
  gen->add_option("-o,--out", gen_out, "CSV path")->required();

  // train
  auto* train = app.add_subcommand("train", "train the original model of a config");
  std::string train_cfg;
  std::optional<std::string> train_out;
  train->add_option("-c,--config", train_cfg)->required()->check(CLI::ExistingFile);
  train->add_option("-o,--output", train_out, "run directory");

  // unlearn
  auto* unlearn = app.add_subcommand("unlearn", "run (or resume) one experiment");
  std::string unlearn_cfg;
  Overrides unlearn_ov;
  unlearn->add_option("-c,--config", unlearn_cfg)->required()->check(CLI::ExistingFile);
  unlearn_ov.add_to(unlearn);

  // eval
  auto* eval = app.add_subcommand("eval", "error rates of a model on a config's splits");
  std::string eval_cfg, eval_model, eval_run;
  eval->add_option("-c,--config", eval_cfg)->check(CLI::ExistingFile);
  eval->add_option("-m,--model", eval_model, "checkpoint file")->check(CLI::ExistingFile);
  eval->add_option("-r,--run", eval_run, "completed run directory")->check(CLI::ExistingDirectory);

  // mia
  auto* mia = app.add_subcommand("mia", "membership-inference attack: forget set vs test split");
  std::string mia_cfg, mia_model, mia_run;
  std::size_t mia_reps = 5;
  mia->add_option("-c,--config", mia_cfg)->check(CLI::ExistingFile);
  mia->add_option("-m,--model", mia_model, "checkpoint file")->check(CLI::ExistingFile);
  mia->add_option("-r,--run", mia_run, "run directory (uses its unlearned model)")->check(CLI::ExistingDirectory);
  mia->add_option("--repetitions", mia_reps)->capture_default_str();

  // bench
  auto* bnch = app.add_subcommand("bench", "time methods: warm-up run, then timed repetitions");
  std::string bench_cfg, bench_methods = "ppu-bias,baseline:retrain,baseline:finetune";
  std::size_t bench_reps = 5, bench_warmup = 1;
  Overrides bench_ov;
  bnch->add_option("-c,--config", bench_cfg)->required()->check(CLI::ExistingFile);
  bnch->add_option("--methods", bench_methods, "comma-separated")->capture_default_str();
  bnch->add_option("--reps", bench_reps)->capture_default_str();
  bnch->add_option("--warmup", bench_warmup)->capture_default_str();
  bench_ov.add_to(bnch);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "lambda or seed sweep; one child run per value");
  std::string sweep_cfg, sweep_lambdas, sweep_seeds;
  std::optional<std::size_t> sweep_threads;
  Overrides sweep_ov;
  sweep->add_option("-c,--config", sweep_cfg)->required()->check(CLI::ExistingFile);
  auto* lam_opt = sweep->add_option("--lambdas", sweep_lambdas, "e.g. 1,2,3,4");
  sweep->add_option("--seeds", sweep_seeds, "e.g. 1,2,3,4,5")->excludes(lam_opt);
  sweep->add_option("--threads", sweep_threads, "concurrent children (default $PPU_THREADS or 1)");
  sweep_ov.add_to(sweep);

  // report
  auto* report = app.add_subcommand("report", "rebuild a run's summary and write plot series");
  std::string report_run;
  report->add_option("-r,--run", report_run)->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*gen) {
      const auto ds = ppu::gen_blobs(blobs);
      ppu::write_csv(gen_out, ds);
      auto manifest = ppu::dataset_manifest(ds);
      manifest["fingerprint"] = ppu::dataset_fingerprint(ds);
      std::ofstream(gen_out + ".manifest.json") << manifest.dump(2) << '\n';
      std::cout << gen_out << ": " << ds.size() << " rows, " << ds.dims() << " features, " << ds.classes
                << " classes\n";
      return kExitOk;
    }

    if (*train) {
      Overrides o;
      o.output = train_out;
      const auto cfg = load(train_cfg, o);
      ppu::prepare_original(cfg);
      std::cout << (std::filesystem::path(cfg.output_dir) / "original.ckpt").string() << '\n';
      return kExitOk;
    }

    if (*unlearn) {
      const auto cfg = load(unlearn_cfg, unlearn_ov);
      if (cfg.sweep) throw ppu::UsageError("config declares a sweep; use the sweep subcommand");
      const auto summary = ppu::run_experiment(cfg);
      print(ppu::to_json(summary));
      return converged_code(summary.flags);
    }

    if (*eval) {
      if (!eval_run.empty()) {
        const auto s = ppu::load_summary(eval_run);
        if (!s.eval) throw ppu::UsageError("run was configured without the error evaluation");
        print(ppu::to_json(*s.eval));
        return kExitOk;
      }
      if (eval_cfg.empty() || eval_model.empty()) throw ppu::UsageError("eval needs --run, or --config with --model");
      const auto cfg = load(eval_cfg, {});
      const auto ds = ppu::build_dataset(cfg);
      const auto split = ppu::make_forget_split(ds, ppu::forget_spec(cfg));
      print(ppu::to_json(ppu::evaluate(ppu::load_model(eval_model), ds, split)));
      return kExitOk;
    }

    if (*mia) {
      std::string cfg_path = mia_cfg, model_path = mia_model;
      if (!mia_run.empty()) {
        if (cfg_path.empty()) cfg_path = (std::filesystem::path(mia_run) / "config.json").string();
        if (model_path.empty()) model_path = (std::filesystem::path(mia_run) / "unlearned.ckpt").string();
      }
      if (cfg_path.empty() || model_path.empty()) throw ppu::UsageError("mia needs --run, or --config with --model");
      auto cfg = load(cfg_path, {});
      cfg.mia_repetitions = mia_reps;
      const auto ds = ppu::build_dataset(cfg);
      const auto split = ppu::make_forget_split(ds, ppu::forget_spec(cfg));
      print(ppu::to_json(ppu::run_mia(cfg, ppu::load_model(model_path), ds, split)));
      return kExitOk;
    }

    if (*bnch) {
      const auto cfg = load(bench_cfg, bench_ov);
      std::vector<ppu::Method> methods;
      std::vector<std::string> bad;
      for (const auto& m : split_list(bench_methods)) {
        if (auto parsed = ppu::parse_method(m)) methods.push_back(*parsed);
        else bad.push_back("--methods: unknown method '" + m + "'");
      }
      if (!bad.empty()) throw ppu::ValidationError(bad);
      nlohmann::json out = nlohmann::json::array();
      for (const auto& r : ppu::bench(cfg, methods, bench_reps, bench_warmup)) out.push_back(ppu::to_json(r));
      print(out);
      return kExitOk;
    }

    if (*sweep) {
      auto j = read_config_json(sweep_cfg);
      sweep_ov.apply(j);
      std::vector<double> values;
      std::vector<std::string> bad;
      const std::string list = sweep_lambdas.empty() ? sweep_seeds : sweep_lambdas;
      for (const auto& v : split_list(list)) {
        try {
          std::size_t used = 0;
          values.push_back(std::stod(v, &used));
          if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
          bad.push_back("sweep value is not a number: '" + v + "'");
        }
      }
      if (!bad.empty()) throw ppu::ValidationError(bad);
      if (!list.empty()) j["sweep"] = {{"axis", sweep_lambdas.empty() ? "seed" : "lambda"}, {"values", values}};
      auto cfg = ppu::config_from_json(j);
      cfg.output_dir = ppu::resolve_output_dir(cfg.output_dir);
      if (!cfg.sweep) throw ppu::UsageError("no sweep values: pass --lambdas or --seeds, or set sweep in the config");
      const auto table = ppu::run_sweep(cfg, sweep_threads.value_or(ppu::env_threads()));
      std::cout << ppu::sweep_csv(table);
      for (const auto& r : table.rows) {
        if (converged_code(r.summary.flags) != kExitOk) return kExitNotConverged;
      }
      return kExitOk;
    }

    if (*report) {
      const auto s = ppu::load_summary(report_run);
      const auto files = ppu::emit_plot_data(report_run);
      auto j = ppu::to_json(s);
      j["plot_files"] = nlohmann::json::array();
      for (const auto& f : files) j["plot_files"].push_back(f.string());
      print(j);
      return kExitOk;
    }
  } catch (const ppu::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return kExitValidation;
  } catch (const ppu::SpecError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ppu::UsageError& e) {
    std::cerr << "usage: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ppu::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ppu::LabelMappingError& e) {
    std::cerr << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
