#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xtl/data.hpp"
#include "xtl/model.hpp"
#include "xtl/trainer.hpp"

namespace xtl {

/// Where a run's samples come from: a binary dataset directory or a CSV
/// triple, plus the train/test split applied by train and ablation.
struct DatasetConfig {
  std::string dir;
  std::string audio_csv;
  std::string visual_csv;
  std::string labels_csv;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;

  bool from_csv() const { return !audio_csv.empty(); }
  bool configured() const { return !dir.empty() || from_csv(); }
};

struct EvalConfig {
  std::vector<std::size_t> ks;  // empty: defaults chosen from the gallery size
  Distance distance = Distance::squared_euclidean;
};

/// One JSON document describing a whole run. Unknown keys are rejected
/// everywhere; every omitted field lands on its default and is echoed back
/// into the effective config saved with the run. Seeds left out derive from
/// the global seed.
struct RunConfig {
  std::string name = "run";
  std::uint64_t seed = 1;
  std::string out_dir = "runs";
  DatasetConfig dataset;
  std::optional<SynthConfig> synth;
  EncoderConfig encoder;
  bool encoder_dims_explicit = false;  // audio_dim/visual_dim/label_dim given
  TrainConfig train;
  EvalConfig eval;
};

/// CLI flag overrides; flags win over the config file.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> combo;
};

RunConfig load_run_config(const std::filesystem::path& path, const RunOverrides& overrides);

/// Parses from a JSON string (the file loader's core; exposed for tests).
RunConfig parse_run_config(const std::string& text, const RunOverrides& overrides);

/// Fills encoder dims from a dataset when they were not given explicitly;
/// mismatch with explicit dims is an error.
void resolve_encoder_dims(RunConfig& cfg, const PairedDataset& ds);

/// Complete effective configuration, every default resolved.
std::string effective_config_json(const RunConfig& cfg);

}  // namespace xtl
