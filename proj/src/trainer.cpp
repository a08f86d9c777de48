#include "xtl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "xtl/errors.hpp"
#include "xtl/rng.hpp"

namespace xtl {

std::string to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "adam") return Optimizer::adam;
  if (s == "sgd") return Optimizer::sgd;
  throw std::invalid_argument("unknown optimizer: " + s);
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be > 0");
  if (batch_size < 2) throw std::invalid_argument("train: batch_size must be >= 2");
  if (!(margin >= 0.0)) throw std::invalid_argument("train: margin must be >= 0");
  if (!(label_loss_weight >= 0.0) || !(cross_loss_weight >= 0.0)) {
    throw std::invalid_argument("train: loss weights must be >= 0");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("train: adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("train: adam_eps must be > 0");
  if (strategy.kind == TripletStrategy::Kind::sampled && strategy.per_anchor == 0) {
    throw std::invalid_argument("train: sampled strategy needs per_anchor >= 1");
  }
}

TotalLossOptions TrainConfig::loss_options() const {
  TotalLossOptions opts;
  opts.cross.margin = margin;
  opts.cross.distance = distance;
  opts.cross.reduction = reduction;
  opts.cross.eq3_literal = eq3_literal;
  opts.cross.strategy = strategy;
  opts.label_weight = label_loss_weight;
  opts.cross_weight = cross_loss_weight;
  return opts;
}

AdamState AdamState::init(const DualParams& params) {
  return {zero_grads_like(params), zero_grads_like(params), 0};
}

namespace {

void check_grad_shapes(const DualParams& params, const DualGrads& grads) {
  auto check_branch = [](const BranchParams& p, const BranchGrads& g, const char* name) {
    if (p.layers.size() != g.layers.size()) {
      throw std::invalid_argument(std::string("optimizer: ") + name +
                                  " gradient layer count mismatch");
    }
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
      if (!p.layers[i].weight.same_shape(g.layers[i].weight) ||
          !p.layers[i].bias.same_shape(g.layers[i].bias)) {
        throw std::invalid_argument(std::string("optimizer: ") + name +
                                    " gradient shape mismatch at layer " +
                                    std::to_string(i));
      }
    }
  };
  check_branch(params.audio, grads.audio, "audio");
  check_branch(params.visual, grads.visual, "visual");
}

template <class Fn>
void for_each_tensor(DualParams& params, const DualGrads& grads, AdamState* state, Fn&& fn) {
  auto walk = [&](BranchParams& p, const BranchGrads& g, BranchGrads* m, BranchGrads* v) {
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
      fn(p.layers[i].weight.data(), g.layers[i].weight.data(),
         m ? &m->layers[i].weight.data() : nullptr,
         v ? &v->layers[i].weight.data() : nullptr);
      fn(p.layers[i].bias.data(), g.layers[i].bias.data(),
         m ? &m->layers[i].bias.data() : nullptr, v ? &v->layers[i].bias.data() : nullptr);
    }
  };
  walk(params.audio, grads.audio, state ? &state->m.audio : nullptr,
       state ? &state->v.audio : nullptr);
  walk(params.visual, grads.visual, state ? &state->m.visual : nullptr,
       state ? &state->v.visual : nullptr);
}

}  // namespace

void adam_step(DualParams& params, const DualGrads& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  check_grad_shapes(params, grads);
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for_each_tensor(params, grads, &state,
                  [&](std::vector<double>& theta, const std::vector<double>& g,
                      std::vector<double>* m, std::vector<double>* v) {
                    for (std::size_t k = 0; k < theta.size(); ++k) {
                      (*m)[k] = beta1 * (*m)[k] + (1.0 - beta1) * g[k];
                      (*v)[k] = beta2 * (*v)[k] + (1.0 - beta2) * g[k] * g[k];
                      const double m_hat = (*m)[k] / bc1;
                      const double v_hat = (*v)[k] / bc2;
                      theta[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
                    }
                  });
}

void sgd_step(DualParams& params, const DualGrads& grads, double lr) {
  check_grad_shapes(params, grads);
  for_each_tensor(params, grads, nullptr,
                  [&](std::vector<double>& theta, const std::vector<double>& g,
                      std::vector<double>*, std::vector<double>*) {
                    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= lr * g[k];
                  });
}

TrainResult train(const PairedDataset& ds_train, const EncoderConfig& enc_cfg,
                  const TrainConfig& cfg, const EvalHook& eval_hook,
                  const CheckpointSink& checkpoint_sink) {
  ds_train.validate();
  enc_cfg.validate();
  cfg.validate();
  if (enc_cfg.label_dim != ds_train.num_classes()) {
    throw std::invalid_argument("train: encoder label_dim " +
                                std::to_string(enc_cfg.label_dim) +
                                " does not match dataset classes " +
                                std::to_string(ds_train.num_classes()));
  }
  if (enc_cfg.audio_dim != ds_train.audio.cols() ||
      enc_cfg.visual_dim != ds_train.visual.cols()) {
    throw std::invalid_argument("train: encoder dims " + std::to_string(enc_cfg.audio_dim) +
                                "/" + std::to_string(enc_cfg.visual_dim) +
                                " do not match dataset dims " +
                                std::to_string(ds_train.audio.cols()) + "/" +
                                std::to_string(ds_train.visual.cols()));
  }

  TrainResult result;
  result.params = init_params(enc_cfg);
  AdamState adam = AdamState::init(result.params);
  const CombinationSet combos = preset(cfg.combo);
  const TotalLossOptions loss_opts = cfg.loss_options();
  const std::size_t n = ds_train.size();
  const std::size_t c = ds_train.num_classes();

  Rng shuffle_rng(cfg.shuffle_seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);

    double sum_label = 0.0, sum_cross = 0.0, sum_total = 0.0;
    std::size_t sum_samples = 0, sum_active = 0, sum_triplets = 0, degenerate = 0;

    for (std::size_t start = 0, batch_idx = 0; start < n; start += cfg.batch_size, ++batch_idx) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const std::size_t bn = end - start;

      Matrix batch_audio(bn, ds_train.audio.cols());
      Matrix batch_visual(bn, ds_train.visual.cols());
      std::vector<std::uint32_t> batch_labels(bn);
      for (std::size_t i = 0; i < bn; ++i) {
        const std::size_t src = order[start + i];
        std::copy(ds_train.audio.row(src).begin(), ds_train.audio.row(src).end(),
                  batch_audio.row(i).begin());
        std::copy(ds_train.visual.row(src).begin(), ds_train.visual.row(src).end(),
                  batch_visual.row(i).begin());
        batch_labels[i] = ds_train.labels[src];
      }
      const Matrix onehot = one_hot_rows(batch_labels, c);

      ForwardCache cache_a, cache_v;
      const Matrix emb_a =
          forward(result.params.audio, batch_audio, enc_cfg.activation, &cache_a);
      const Matrix emb_v =
          forward(result.params.visual, batch_visual, enc_cfg.activation, &cache_v);

      const TotalLossGrad loss =
          total_loss_with_grad(emb_a, emb_v, batch_labels, onehot, combos, loss_opts);
      if (!std::isfinite(loss.breakdown.total)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_idx));
      }

      DualGrads grads;
      grads.audio = backward(result.params.audio, cache_a, loss.grad_audio);
      grads.visual = backward(result.params.visual, cache_v, loss.grad_visual);

      if (cfg.optimizer == Optimizer::adam) {
        adam_step(result.params, grads, adam, cfg.lr, cfg.adam_beta1, cfg.adam_beta2,
                  cfg.adam_eps);
      } else {
        sgd_step(result.params, grads, cfg.lr);
      }

      const double w = static_cast<double>(bn);
      sum_label += w * loss.breakdown.label_loss;
      sum_cross += w * loss.breakdown.cross_triplet_loss;
      sum_total += w * loss.breakdown.total;
      sum_samples += bn;
      sum_active += loss.breakdown.active_triplet_count;
      sum_triplets += loss.breakdown.triplet_count;
      if (loss.breakdown.cross_degenerate) ++degenerate;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.label_loss = sum_label / static_cast<double>(sum_samples);
    rec.cross_loss = sum_cross / static_cast<double>(sum_samples);
    rec.total = sum_total / static_cast<double>(sum_samples);
    rec.active_frac = sum_triplets > 0 ? static_cast<double>(sum_active) /
                                             static_cast<double>(sum_triplets)
                                       : 0.0;
    rec.degenerate_batches = degenerate;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.epochs.push_back(rec);

    if (checkpoint_sink && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
      checkpoint_sink(epoch, result.params);
    }
    if (eval_hook) eval_hook(epoch, result.params, rec);
  }
  return result;
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path,
                       bool redact_timing) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << "epoch,label_loss,cross_loss,total,active_frac,seconds\n";
  char buf[512];
  for (const EpochRecord& rec : history.epochs) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.3f\n", rec.epoch,
                  rec.label_loss, rec.cross_loss, rec.total, rec.active_frac,
                  redact_timing ? 0.0 : rec.wall_seconds);
    os << buf;
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace xtl
