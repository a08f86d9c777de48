#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xtl/matrix.hpp"

namespace xtl {

/// Index-aligned audio/visual feature rows with one label per pair. Features
/// live on the f32 grid (they are stored as 32-bit floats on disk) promoted
/// to f64 in memory.
struct PairedDataset {
  std::string name;
  Matrix audio;   // n x d_a
  Matrix visual;  // n x d_v
  std::vector<std::uint32_t> labels;
  std::vector<std::string> class_names;

  std::size_t size() const { return labels.size(); }
  std::size_t num_classes() const { return class_names.size(); }

  /// Enforces the pairing and label invariants (rows aligned, every label in
  /// range, every class present at least once). Throws std::invalid_argument.
  void validate() const;
};

/// Row vector with a single 1 at `label`.
Matrix one_hot(std::uint32_t label, std::size_t num_classes);

/// n x c matrix of one-hot rows.
Matrix one_hot_rows(std::span<const std::uint32_t> labels, std::size_t num_classes);

struct SplitResult {
  PairedDataset train;
  PairedDataset test;
};

/// Stratified split: per-class proportions preserved to within one sample,
/// both halves keep at least one sample of every class, deterministic under
/// the seed. Classes with fewer than 2 samples are an error.
SplitResult split(const PairedDataset& ds, double train_fraction, std::uint64_t seed);

/// Binary dataset directory: meta.json + audio.f32 + visual.f32 + labels.u32
/// (row-major little-endian f32 features, little-endian u32 labels).
PairedDataset load_binary(const std::filesystem::path& dir);
void save_binary(const PairedDataset& ds, const std::filesystem::path& dir);

/// Headerless comma-separated features, one sample per row; labels one
/// integer per line. Cells are parsed at f32 precision to match the binary
/// format.
PairedDataset load_csv(const std::filesystem::path& audio_csv,
                       const std::filesystem::path& visual_csv,
                       const std::filesystem::path& labels_csv,
                       const std::string& name = "csv");

/// Correlated synthetic pairs: one latent per pair drawn around a per-class
/// center, pushed through fixed random projections into each modality and
/// jittered with isotropic noise. Stands in for pretrained feature dumps.
struct SynthConfig {
  std::size_t n_per_class = 200;
  std::size_t classes = 10;
  std::size_t latent_dim = 16;
  std::size_t audio_dim = 128;
  std::size_t visual_dim = 1024;
  double noise_sigma = 0.5;
  double class_sep = 3.0;
  std::uint64_t seed = 0;

  void validate() const;
};

PairedDataset synth_generate(const SynthConfig& cfg);

}  // namespace xtl
