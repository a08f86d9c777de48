// Command-line entry point: generate / train / eval / gradcheck / ablation /
// export-embeddings. Exit codes: 0 success, 1 usage or IO error, 2 numeric
// failure, 3 verification failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xtl/data.hpp"
#include "xtl/errors.hpp"
#include "xtl/eval.hpp"
#include "xtl/model.hpp"
#include "xtl/run_config.hpp"
#include "xtl/trainer.hpp"
#include "xtl/verify.hpp"

namespace fs = std::filesystem;
using namespace xtl;

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%S", &tm);
  return buf;
}

fs::path make_run_dir(const std::string& out_dir, std::uint64_t seed) {
  const std::string base = utc_timestamp() + "-s" + std::to_string(seed);
  fs::path dir = fs::path(out_dir) / base;
  for (int suffix = 2; fs::exists(dir); ++suffix) {
    dir = fs::path(out_dir) / (base + "-" + std::to_string(suffix));
  }
  fs::create_directories(dir);
  return dir;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << text;
  if (!text.empty() && text.back() != '\n') os << "\n";
}

PairedDataset load_config_dataset(const RunConfig& cfg) {
  if (!cfg.dataset.configured()) {
    throw std::invalid_argument("config: no dataset given (dataset.dir or dataset.*_csv)");
  }
  if (cfg.dataset.from_csv()) {
    return load_csv(cfg.dataset.audio_csv, cfg.dataset.visual_csv, cfg.dataset.labels_csv);
  }
  return load_binary(cfg.dataset.dir);
}

std::vector<std::size_t> default_ks(std::size_t gallery) {
  std::vector<std::size_t> ks;
  for (std::size_t k : {std::size_t{10}, std::size_t{50}, std::size_t{100},
                        std::size_t{200}, std::size_t{500}, std::size_t{1000}}) {
    if (k <= gallery) ks.push_back(k);
  }
  if (ks.empty()) ks.push_back(gallery);
  return ks;
}

void check_checkpoint_dataset(const Checkpoint& ckpt, const PairedDataset& ds) {
  if (ckpt.config.audio_dim != ds.audio.cols() ||
      ckpt.config.visual_dim != ds.visual.cols() ||
      ckpt.config.label_dim != ds.num_classes()) {
    throw std::invalid_argument(
        "checkpoint dims " + std::to_string(ckpt.config.audio_dim) + "/" +
        std::to_string(ckpt.config.visual_dim) + "/" + std::to_string(ckpt.config.label_dim) +
        " do not match dataset dims " + std::to_string(ds.audio.cols()) + "/" +
        std::to_string(ds.visual.cols()) + "/" + std::to_string(ds.num_classes()));
  }
}

// --- subcommand bodies ---

int cmd_generate(const std::string& config_path, const std::string& out,
                 const RunOverrides& overrides) {
  RunConfig cfg = load_run_config(config_path, overrides);
  if (!cfg.synth.has_value()) {
    throw std::invalid_argument("config: generate needs a synth section");
  }
  const PairedDataset ds = synth_generate(*cfg.synth);
  save_binary(ds, out);
  // The dataset directory holds exactly the four format files; the resolved
  // config lands next to it.
  write_text_file(out + ".config.json", effective_config_json(cfg));
  std::printf("wrote %s: n=%zu audio_dim=%zu visual_dim=%zu classes=%zu\n", out.c_str(),
              ds.size(), ds.audio.cols(), ds.visual.cols(), ds.num_classes());
  return 0;
}

int cmd_train(const std::string& config_path, const RunOverrides& overrides) {
  RunConfig cfg = load_run_config(config_path, overrides);
  const PairedDataset full = load_config_dataset(cfg);
  const SplitResult parts = split(full, cfg.dataset.train_fraction, cfg.dataset.split_seed);
  resolve_encoder_dims(cfg, full);

  const fs::path run_dir = make_run_dir(cfg.out_dir, cfg.seed);
  write_text_file(run_dir / "effective_config.json", effective_config_json(cfg));

  const CheckpointSink sink = [&](std::size_t epoch, const DualParams& params) {
    char name[64];
    std::snprintf(name, sizeof(name), "checkpoint_epoch%04zu.xtlc", epoch);
    save_checkpoint(run_dir / name, cfg.encoder, params);
  };
  const EvalHook progress = [&](std::size_t epoch, const DualParams&,
                                const EpochRecord& rec) {
    std::printf("epoch %zu/%zu label=%.6f cross=%.6f total=%.6f active=%.3f (%.2fs)\n",
                epoch, cfg.train.epochs, rec.label_loss, rec.cross_loss, rec.total,
                rec.active_frac, rec.wall_seconds);
    std::fflush(stdout);
  };

  const TrainResult result = train(parts.train, cfg.encoder, cfg.train, progress, sink);
  save_checkpoint(run_dir / "checkpoint.xtlc", cfg.encoder, result.params);
  write_history_csv(result.history, run_dir / "history.csv");
  std::printf("run dir: %s\n", run_dir.string().c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_dir,
             const std::vector<std::size_t>& ks_flag, const std::string& distance_flag,
             const std::string& out_dir) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const PairedDataset ds = load_binary(dataset_dir);
  check_checkpoint_dataset(ckpt, ds);

  const Distance distance = distance_from_string(distance_flag);
  const std::vector<std::size_t> ks = ks_flag.empty() ? default_ks(ds.size()) : ks_flag;

  const Matrix emb_a = forward(ckpt.params.audio, ds.audio, ckpt.config.activation);
  const Matrix emb_v = forward(ckpt.params.visual, ds.visual, ckpt.config.activation);
  EvalReport report = evaluate_retrieval(emb_a, emb_v, ds.labels, ks, distance);
  report.dataset = ds.name;
  report.checkpoint = checkpoint_path;

  fs::create_directories(out_dir);
  write_eval_json(report, fs::path(out_dir) / "eval.json");
  write_scope_csv(report, fs::path(out_dir) / "precision_scope.csv");
  std::printf("map_a2v %.4f\n", report.map_a2v);
  std::printf("map_v2a %.4f\n", report.map_v2a);
  std::printf("map_avg %.4f\n", report.map_avg);
  return 0;
}

int cmd_export(const std::string& checkpoint_path, const std::string& dataset_dir,
               const std::string& out_file) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const PairedDataset ds = load_binary(dataset_dir);
  check_checkpoint_dataset(ckpt, ds);
  export_embeddings(ckpt.config, ckpt.params, ds, out_file);
  std::printf("wrote %s (%zu rows)\n", out_file.c_str(), 2 * ds.size());
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, const std::vector<std::size_t>& widths, bool corrupt) {
  GradCheckOptions opts;
  if (!widths.empty()) opts.widths = widths;
  opts.seeds = {seed, seed + 1, seed + 2};
  opts.corrupt = corrupt;
  const auto rows = run_gradcheck(opts);

  std::printf("%-28s %6s %12s %-6s %s\n", "case", "seed", "max_rel_err", "status",
              "worst_param");
  for (const auto& row : rows) {
    std::printf("%-28s %6llu %12.3e %-6s %s\n", row.case_name.c_str(),
                static_cast<unsigned long long>(row.seed), row.max_rel_err,
                row.pass ? "PASS" : "FAIL", row.worst_param.c_str());
  }
  if (!gradcheck_passed(rows)) {
    for (const auto& row : rows) {
      if (!row.pass) {
        std::fprintf(stderr, "gradcheck failed: %s seed %llu rel err %.3e at %s\n",
                     row.case_name.c_str(), static_cast<unsigned long long>(row.seed),
                     row.max_rel_err, row.worst_param.c_str());
      }
    }
    return 3;
  }
  return 0;
}

int cmd_ablation(const std::string& config_path, const RunOverrides& overrides) {
  RunConfig cfg = load_run_config(config_path, overrides);
  const PairedDataset full = load_config_dataset(cfg);
  const SplitResult parts = split(full, cfg.dataset.train_fraction, cfg.dataset.split_seed);
  resolve_encoder_dims(cfg, full);

  const fs::path run_dir = make_run_dir(cfg.out_dir, cfg.seed);
  write_text_file(run_dir / "effective_config.json", effective_config_json(cfg));

  std::string csv = "preset,map_a2v,map_v2a,map_avg\n";
  std::string md = "| preset | map_a2v | map_v2a | map_avg |\n|---|---|---|---|\n";
  for (const PresetName name : all_presets()) {
    TrainConfig tc = cfg.train;
    tc.combo = name;
    const TrainResult result = train(parts.train, cfg.encoder, tc);
    const Matrix emb_a =
        forward(result.params.audio, parts.test.audio, cfg.encoder.activation);
    const Matrix emb_v =
        forward(result.params.visual, parts.test.visual, cfg.encoder.activation);
    const EvalReport report = map_bidirectional(emb_a, emb_v, parts.test.labels,
                                                parts.test.labels, cfg.eval.distance);
    char line[160];
    std::snprintf(line, sizeof(line), "%s,%.17g,%.17g,%.17g\n", to_string(name).c_str(),
                  report.map_a2v, report.map_v2a, report.map_avg);
    csv += line;
    std::snprintf(line, sizeof(line), "| %s | %.4f | %.4f | %.4f |\n",
                  to_string(name).c_str(), report.map_a2v, report.map_v2a, report.map_avg);
    md += line;
    std::printf("%s map_avg=%.4f\n", to_string(name).c_str(), report.map_avg);
    std::fflush(stdout);
  }
  write_text_file(run_dir / "ablation.csv", csv);
  write_text_file(run_dir / "ablation.md", md);
  std::printf("%s", md.c_str());
  std::printf("run dir: %s\n", run_dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-modal triplet metric-learning lab"};
  app.require_subcommand(1);

  std::string config_path, out, checkpoint_path, dataset_dir;
  std::string distance_flag = "squared_euclidean";
  std::vector<std::size_t> ks, widths;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> out_flag, combo_flag;
  std::uint64_t gradcheck_seed = 1;
  bool corrupt = false;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& v) { seed_flag = v; }, "global seed override");
  };
  auto add_out_override = [&](CLI::App* cmd) {
    cmd->add_option_function<std::string>(
        "--out", [&](const std::string& v) { out_flag = v; }, "output directory override");
  };

  CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset directory");
  generate->add_option("--config", config_path, "run config JSON")->required();
  generate->add_option("--out", out, "dataset directory to create")->required();
  add_seed(generate);

  CLI::App* train_cmd = app.add_subcommand("train", "train on a dataset, write a run directory");
  train_cmd->add_option("--config", config_path, "run config JSON")->required();
  add_seed(train_cmd);
  add_out_override(train_cmd);
  train_cmd->add_option_function<std::string>(
      "--combo", [&](const std::string& v) { combo_flag = v; },
      "combination set override (baseline1..baseline5, full)");

  CLI::App* eval_cmd = app.add_subcommand("eval", "rank a dataset with a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval_cmd->add_option("--dataset", dataset_dir, "dataset directory")->required();
  eval_cmd->add_option("--ks", ks, "precision-scope cutoffs")->delimiter(',');
  eval_cmd->add_option("--distance", distance_flag, "squared_euclidean or cosine");
  eval_cmd->add_option("--out", out, "report directory")->default_val(".");

  CLI::App* export_cmd =
      app.add_subcommand("export-embeddings", "write label-space embeddings as CSV");
  export_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  export_cmd->add_option("--dataset", dataset_dir, "dataset directory")->required();
  export_cmd->add_option("--out", out, "output CSV path")->required();

  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "verify analytic gradients against finite differences");
  gradcheck_cmd->add_option("--seed", gradcheck_seed, "first of three seeds");
  gradcheck_cmd->add_option("--widths", widths, "hidden widths")->delimiter(',');
  gradcheck_cmd->add_flag("--corrupt", corrupt)->group("");  // test hook, hidden

  CLI::App* ablation_cmd =
      app.add_subcommand("ablation", "train and evaluate every combination set");
  ablation_cmd->add_option("--config", config_path, "run config JSON")->required();
  add_seed(ablation_cmd);
  add_out_override(ablation_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }

  RunOverrides overrides;
  overrides.seed = seed_flag;
  overrides.out_dir = out_flag;
  overrides.combo = combo_flag;

  try {
    if (generate->parsed()) return cmd_generate(config_path, out, overrides);
    if (train_cmd->parsed()) return cmd_train(config_path, overrides);
    if (eval_cmd->parsed()) return cmd_eval(checkpoint_path, dataset_dir, ks, distance_flag, out);
    if (export_cmd->parsed()) return cmd_export(checkpoint_path, dataset_dir, out);
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(gradcheck_seed, widths, corrupt);
    if (ablation_cmd->parsed()) return cmd_ablation(config_path, overrides);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
