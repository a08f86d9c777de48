#include "xtl/run_config.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace xtl {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::string& section,
                         std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) {
      if (key == k) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw std::invalid_argument("config: unknown key '" + key + "' in " + section);
    }
  }
}

template <class T>
void read_field(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) {
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: bad value for '" + std::string(key) +
                                  "': " + e.what());
    }
  }
}

void parse_dataset(const json& obj, DatasetConfig& out, std::uint64_t global_seed) {
  reject_unknown_keys(obj, "dataset",
                      {"dir", "audio_csv", "visual_csv", "labels_csv", "train_fraction",
                       "split_seed"});
  read_field(obj, "dir", out.dir);
  read_field(obj, "audio_csv", out.audio_csv);
  read_field(obj, "visual_csv", out.visual_csv);
  read_field(obj, "labels_csv", out.labels_csv);
  read_field(obj, "train_fraction", out.train_fraction);
  out.split_seed = global_seed;
  read_field(obj, "split_seed", out.split_seed);
  if (out.from_csv() && (out.visual_csv.empty() || out.labels_csv.empty())) {
    throw std::invalid_argument(
        "config: csv datasets need audio_csv, visual_csv and labels_csv");
  }
}

void parse_synth(const json& obj, SynthConfig& out, std::uint64_t global_seed) {
  reject_unknown_keys(obj, "synth",
                      {"n_per_class", "classes", "latent_dim", "audio_dim", "visual_dim",
                       "noise_sigma", "class_sep", "seed"});
  read_field(obj, "n_per_class", out.n_per_class);
  read_field(obj, "classes", out.classes);
  read_field(obj, "latent_dim", out.latent_dim);
  read_field(obj, "audio_dim", out.audio_dim);
  read_field(obj, "visual_dim", out.visual_dim);
  read_field(obj, "noise_sigma", out.noise_sigma);
  read_field(obj, "class_sep", out.class_sep);
  out.seed = global_seed;
  read_field(obj, "seed", out.seed);
}

void parse_encoder(const json& obj, RunConfig& cfg) {
  reject_unknown_keys(obj, "encoder",
                      {"audio_dim", "visual_dim", "hidden", "label_dim", "activation",
                       "init_seed"});
  EncoderConfig& out = cfg.encoder;
  if (obj.contains("audio_dim") || obj.contains("visual_dim") || obj.contains("label_dim")) {
    cfg.encoder_dims_explicit = true;
  }
  read_field(obj, "audio_dim", out.audio_dim);
  read_field(obj, "visual_dim", out.visual_dim);
  read_field(obj, "hidden", out.hidden);
  read_field(obj, "label_dim", out.label_dim);
  if (obj.contains("activation")) {
    out.activation = activation_from_string(obj.at("activation").get<std::string>());
  }
  out.init_seed = cfg.seed;
  read_field(obj, "init_seed", out.init_seed);
}

void parse_train(const json& obj, TrainConfig& out, std::uint64_t global_seed) {
  reject_unknown_keys(
      obj, "train",
      {"lr", "batch_size", "epochs", "margin", "optimizer", "adam_beta1", "adam_beta2",
       "adam_eps", "combo", "triplet_strategy", "sampled_per_anchor", "sampled_seed",
       "shuffle_seed", "eq3_literal", "distance", "reduction", "label_loss_weight",
       "cross_loss_weight", "checkpoint_every"});
  read_field(obj, "lr", out.lr);
  read_field(obj, "batch_size", out.batch_size);
  read_field(obj, "epochs", out.epochs);
  read_field(obj, "margin", out.margin);
  if (obj.contains("optimizer")) {
    out.optimizer = optimizer_from_string(obj.at("optimizer").get<std::string>());
  }
  read_field(obj, "adam_beta1", out.adam_beta1);
  read_field(obj, "adam_beta2", out.adam_beta2);
  read_field(obj, "adam_eps", out.adam_eps);
  if (obj.contains("combo")) {
    out.combo = preset_from_string(obj.at("combo").get<std::string>());
  }
  std::string strategy = "all";
  read_field(obj, "triplet_strategy", strategy);
  if (strategy == "all") {
    out.strategy = TripletStrategy::all();
  } else if (strategy == "sampled") {
    std::size_t per_anchor = 16;
    std::uint64_t sample_seed = global_seed;
    read_field(obj, "sampled_per_anchor", per_anchor);
    read_field(obj, "sampled_seed", sample_seed);
    out.strategy = TripletStrategy::sampled(per_anchor, sample_seed);
  } else {
    throw std::invalid_argument("config: triplet_strategy must be 'all' or 'sampled'");
  }
  out.shuffle_seed = global_seed;
  read_field(obj, "shuffle_seed", out.shuffle_seed);
  read_field(obj, "eq3_literal", out.eq3_literal);
  if (obj.contains("distance")) {
    out.distance = distance_from_string(obj.at("distance").get<std::string>());
  }
  if (obj.contains("reduction")) {
    out.reduction = reduction_from_string(obj.at("reduction").get<std::string>());
  }
  read_field(obj, "label_loss_weight", out.label_loss_weight);
  read_field(obj, "cross_loss_weight", out.cross_loss_weight);
  read_field(obj, "checkpoint_every", out.checkpoint_every);
}

void parse_eval(const json& obj, EvalConfig& out) {
  reject_unknown_keys(obj, "eval", {"ks", "distance"});
  read_field(obj, "ks", out.ks);
  if (obj.contains("distance")) {
    out.distance = distance_from_string(obj.at("distance").get<std::string>());
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const RunOverrides& overrides) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw std::invalid_argument("config: top level must be an object");
  reject_unknown_keys(root, "top level",
                      {"name", "seed", "out_dir", "dataset", "synth", "encoder", "train",
                       "eval"});

  RunConfig cfg;
  read_field(root, "name", cfg.name);
  read_field(root, "seed", cfg.seed);
  if (overrides.seed.has_value()) cfg.seed = *overrides.seed;
  read_field(root, "out_dir", cfg.out_dir);
  if (overrides.out_dir.has_value()) cfg.out_dir = *overrides.out_dir;

  if (root.contains("dataset")) parse_dataset(root.at("dataset"), cfg.dataset, cfg.seed);
  if (!root.contains("dataset")) cfg.dataset.split_seed = cfg.seed;
  if (root.contains("synth")) {
    SynthConfig synth;
    synth.seed = cfg.seed;
    parse_synth(root.at("synth"), synth, cfg.seed);
    synth.validate();
    cfg.synth = synth;
  }
  cfg.encoder.init_seed = cfg.seed;
  if (root.contains("encoder")) parse_encoder(root.at("encoder"), cfg);
  cfg.train.shuffle_seed = cfg.seed;
  if (root.contains("train")) parse_train(root.at("train"), cfg.train, cfg.seed);
  if (overrides.combo.has_value()) cfg.train.combo = preset_from_string(*overrides.combo);
  if (root.contains("eval")) parse_eval(root.at("eval"), cfg.eval);

  cfg.train.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, const RunOverrides& overrides) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_run_config(text, overrides);
}

void resolve_encoder_dims(RunConfig& cfg, const PairedDataset& ds) {
  if (!cfg.encoder_dims_explicit) {
    cfg.encoder.audio_dim = ds.audio.cols();
    cfg.encoder.visual_dim = ds.visual.cols();
    cfg.encoder.label_dim = ds.num_classes();
    return;
  }
  if (cfg.encoder.audio_dim != ds.audio.cols() ||
      cfg.encoder.visual_dim != ds.visual.cols() ||
      cfg.encoder.label_dim != ds.num_classes()) {
    throw std::invalid_argument(
        "config: encoder dims " + std::to_string(cfg.encoder.audio_dim) + "/" +
        std::to_string(cfg.encoder.visual_dim) + "/" + std::to_string(cfg.encoder.label_dim) +
        " do not match dataset " + std::to_string(ds.audio.cols()) + "/" +
        std::to_string(ds.visual.cols()) + "/" + std::to_string(ds.num_classes()));
  }
}

std::string effective_config_json(const RunConfig& cfg) {
  json dataset = {{"dir", cfg.dataset.dir},
                  {"audio_csv", cfg.dataset.audio_csv},
                  {"visual_csv", cfg.dataset.visual_csv},
                  {"labels_csv", cfg.dataset.labels_csv},
                  {"train_fraction", cfg.dataset.train_fraction},
                  {"split_seed", cfg.dataset.split_seed}};
  json encoder = {{"audio_dim", cfg.encoder.audio_dim},
                  {"visual_dim", cfg.encoder.visual_dim},
                  {"hidden", cfg.encoder.hidden},
                  {"label_dim", cfg.encoder.label_dim},
                  {"activation", to_string(cfg.encoder.activation)},
                  {"init_seed", cfg.encoder.init_seed}};
  json train = {{"lr", cfg.train.lr},
                {"batch_size", cfg.train.batch_size},
                {"epochs", cfg.train.epochs},
                {"margin", cfg.train.margin},
                {"optimizer", to_string(cfg.train.optimizer)},
                {"adam_beta1", cfg.train.adam_beta1},
                {"adam_beta2", cfg.train.adam_beta2},
                {"adam_eps", cfg.train.adam_eps},
                {"combo", to_string(cfg.train.combo)},
                {"triplet_strategy",
                 cfg.train.strategy.kind == TripletStrategy::Kind::all ? "all" : "sampled"},
                {"sampled_per_anchor", cfg.train.strategy.per_anchor},
                {"sampled_seed", cfg.train.strategy.seed},
                {"shuffle_seed", cfg.train.shuffle_seed},
                {"eq3_literal", cfg.train.eq3_literal},
                {"distance", to_string(cfg.train.distance)},
                {"reduction", to_string(cfg.train.reduction)},
                {"label_loss_weight", cfg.train.label_loss_weight},
                {"cross_loss_weight", cfg.train.cross_loss_weight},
                {"checkpoint_every", cfg.train.checkpoint_every}};
  json eval = {{"ks", cfg.eval.ks}, {"distance", to_string(cfg.eval.distance)}};
  json root = {{"name", cfg.name},    {"seed", cfg.seed}, {"out_dir", cfg.out_dir},
               {"dataset", dataset},  {"encoder", encoder}, {"train", train},
               {"eval", eval}};
  if (cfg.synth.has_value()) {
    root["synth"] = {{"n_per_class", cfg.synth->n_per_class},
                     {"classes", cfg.synth->classes},
                     {"latent_dim", cfg.synth->latent_dim},
                     {"audio_dim", cfg.synth->audio_dim},
                     {"visual_dim", cfg.synth->visual_dim},
                     {"noise_sigma", cfg.synth->noise_sigma},
                     {"class_sep", cfg.synth->class_sep},
                     {"seed", cfg.synth->seed}};
  }
  return root.dump(2);
}

}  // namespace xtl
