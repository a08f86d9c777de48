#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "xtl/data.hpp"
#include "xtl/losses.hpp"
#include "xtl/model.hpp"

namespace xtl {

enum class Optimizer { adam, sgd };

std::string to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& s);

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 512;
  std::size_t epochs = 100;
  double margin = 1.0;
  Optimizer optimizer = Optimizer::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  PresetName combo = PresetName::full;
  TripletStrategy strategy = TripletStrategy::all();
  std::uint64_t shuffle_seed = 0;
  bool eq3_literal = false;
  Distance distance = Distance::squared_euclidean;
  Reduction reduction = Reduction::mean;
  double label_loss_weight = 1.0;
  double cross_loss_weight = 1.0;
  std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints

  void validate() const;
  TotalLossOptions loss_options() const;
};

/// Moment accumulators mirroring every parameter, plus the shared step count.
struct AdamState {
  DualGrads m;
  DualGrads v;
  std::uint64_t t = 0;

  static AdamState init(const DualParams& params);
};

/// Bias-corrected Adam update applied in place.
void adam_step(DualParams& params, const DualGrads& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps);

void sgd_step(DualParams& params, const DualGrads& grads, double lr);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double label_loss = 0.0;
  double cross_loss = 0.0;
  double total = 0.0;
  double active_frac = 0.0;
  double wall_seconds = 0.0;  // measured; excluded from canonical artifacts
  std::size_t degenerate_batches = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

using EvalHook = std::function<void(std::size_t epoch, const DualParams& params,
                                    const EpochRecord& record)>;
using CheckpointSink = std::function<void(std::size_t epoch, const DualParams& params)>;

struct TrainResult {
  DualParams params;
  TrainHistory history;
};

/// Full training loop: per epoch, shuffle (seeded), walk batches (the last
/// partial batch included), forward both branches, backpropagate the total
/// objective, apply the optimizer. Deterministic given the config seeds.
/// Throws NumericError with epoch/batch coordinates if the loss goes
/// non-finite.
TrainResult train(const PairedDataset& ds_train, const EncoderConfig& enc_cfg,
                  const TrainConfig& cfg, const EvalHook& eval_hook = {},
                  const CheckpointSink& checkpoint_sink = {});

/// History CSV (header epoch,label_loss,cross_loss,total,active_frac,seconds).
/// By default the seconds column is redacted to 0.000: training outputs are
/// bit-reproducible artifacts and wall time is not. Pass redact_timing=false
/// for the measured values.
void write_history_csv(const TrainHistory& history, const std::filesystem::path& path,
                       bool redact_timing = true);

}  // namespace xtl
