#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "xtl/matrix.hpp"

namespace xtl {

enum class Activation { relu, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Shape of the two projection branches. Each branch runs its input through
/// the hidden stack (affine + activation) and a final affine classifier layer
/// into the label space; the classifier output is raw, with no activation or
/// normalization.
struct EncoderConfig {
  std::size_t audio_dim = 128;
  std::size_t visual_dim = 1024;
  std::vector<std::size_t> hidden = {1024, 1024, 100};
  std::size_t label_dim = 10;
  Activation activation = Activation::relu;
  std::uint64_t init_seed = 0;

  void validate() const;  // throws std::invalid_argument
};

struct LayerParams {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
};

/// One branch: hidden layers followed by the classifier layer (always last).
struct BranchParams {
  std::vector<LayerParams> layers;

  std::size_t input_dim() const { return layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.back().weight.cols(); }
  bool all_finite() const;
};

struct DualParams {
  BranchParams audio;
  BranchParams visual;

  bool operator==(const DualParams&) const;
};

struct LayerGrads {
  Matrix weight;
  Matrix bias;
};

struct BranchGrads {
  std::vector<LayerGrads> layers;
};

struct DualGrads {
  BranchGrads audio;
  BranchGrads visual;
};

/// Glorot-uniform weights (bound sqrt(6/(in+out)) per layer), zero biases.
/// The draw order is fixed (audio branch first, weights row-major), so equal
/// seeds give bit-identical parameters.
DualParams init_params(const EncoderConfig& cfg);

DualGrads zero_grads_like(const DualParams& params);

/// Per-layer values kept for the backward pass: inputs[i] feeds layer i, and
/// inputs.back() feeds the classifier. post_hidden[i] is the activated output
/// of hidden layer i (enough to recover both relu and tanh derivatives).
struct ForwardCache {
  std::vector<Matrix> inputs;
  Activation activation = Activation::relu;
};

Matrix forward(const BranchParams& params, const Matrix& x, Activation activation,
               ForwardCache* cache = nullptr);

/// Exact gradients of sum(grad_out .* embeddings) w.r.t. every weight and
/// bias. The cache must come from a forward call on the same parameters;
/// shape drift is detected and thrown.
BranchGrads backward(const BranchParams& params, const ForwardCache& cache,
                     const Matrix& grad_out);

// --- checkpoint file ("XTLC", little-endian) ---

struct Checkpoint {
  EncoderConfig config;
  DualParams params;
};

void save_checkpoint(const std::filesystem::path& path, const EncoderConfig& cfg,
                     const DualParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace xtl
