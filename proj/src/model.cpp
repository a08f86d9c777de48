#include "xtl/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "xtl/rng.hpp"

namespace xtl {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation: " + s);
}

void EncoderConfig::validate() const {
  if (hidden.empty()) throw std::invalid_argument("EncoderConfig: hidden stack is empty");
  if (audio_dim < 1 || visual_dim < 1 || label_dim < 1) {
    throw std::invalid_argument("EncoderConfig: all dimensions must be >= 1");
  }
  for (std::size_t h : hidden) {
    if (h < 1) throw std::invalid_argument("EncoderConfig: hidden width must be >= 1");
  }
}

bool BranchParams::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.all_finite() || !l.bias.all_finite()) return false;
  }
  return true;
}

bool DualParams::operator==(const DualParams& other) const {
  auto branch_eq = [](const BranchParams& a, const BranchParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      if (!(a.layers[i].weight == b.layers[i].weight) ||
          !(a.layers[i].bias == b.layers[i].bias))
        return false;
    }
    return true;
  };
  return branch_eq(audio, other.audio) && branch_eq(visual, other.visual);
}

namespace {

BranchParams init_branch(std::size_t in_dim, const std::vector<std::size_t>& hidden,
                         std::size_t out_dim, Rng& rng) {
  std::vector<std::size_t> dims;
  dims.push_back(in_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out_dim);
  BranchParams branch;
  branch.layers.reserve(dims.size() - 1);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::size_t fan_in = dims[i], fan_out = dims[i + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    LayerParams layer{Matrix(fan_in, fan_out), Matrix(1, fan_out)};
    for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
    branch.layers.push_back(std::move(layer));
  }
  return branch;
}

}  // namespace

DualParams init_params(const EncoderConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.init_seed);
  DualParams params;
  params.audio = init_branch(cfg.audio_dim, cfg.hidden, cfg.label_dim, rng);
  params.visual = init_branch(cfg.visual_dim, cfg.hidden, cfg.label_dim, rng);
  return params;
}

DualGrads zero_grads_like(const DualParams& params) {
  auto zero_branch = [](const BranchParams& b) {
    BranchGrads g;
    g.layers.reserve(b.layers.size());
    for (const auto& l : b.layers) {
      g.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()),
                          Matrix(l.bias.rows(), l.bias.cols())});
    }
    return g;
  };
  return {zero_branch(params.audio), zero_branch(params.visual)};
}

namespace {

Matrix affine(const Matrix& x, const LayerParams& layer) {
  Matrix z = matmul(x, layer.weight);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) += layer.bias(0, j);
  }
  return z;
}

}  // namespace

Matrix forward(const BranchParams& params, const Matrix& x, Activation activation,
               ForwardCache* cache) {
  if (params.layers.empty()) throw std::invalid_argument("forward: branch has no layers");
  if (x.cols() != params.input_dim()) {
    throw std::invalid_argument("forward: input has " + std::to_string(x.cols()) +
                                " columns, branch expects " +
                                std::to_string(params.input_dim()));
  }
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->activation = activation;
  }
  Matrix h = x;
  for (std::size_t i = 0; i + 1 < params.layers.size(); ++i) {
    if (cache != nullptr) cache->inputs.push_back(h);
    const Matrix z = affine(h, params.layers[i]);
    h = activation == Activation::relu ? relu(z) : tanh_map(z);
  }
  if (cache != nullptr) cache->inputs.push_back(h);
  return affine(h, params.layers.back());  // raw label-space scores
}

BranchGrads backward(const BranchParams& params, const ForwardCache& cache,
                     const Matrix& grad_out) {
  const std::size_t num_layers = params.layers.size();
  if (cache.inputs.size() != num_layers) {
    throw std::invalid_argument("backward: cache holds " +
                                std::to_string(cache.inputs.size()) +
                                " layer inputs, branch has " + std::to_string(num_layers));
  }
  const std::size_t n = cache.inputs.front().rows();
  for (std::size_t i = 0; i < num_layers; ++i) {
    if (cache.inputs[i].rows() != n ||
        cache.inputs[i].cols() != params.layers[i].weight.rows()) {
      throw std::invalid_argument("backward: cache mismatches branch at layer " +
                                  std::to_string(i) + " (" +
                                  shape_string(cache.inputs[i]) + " into " +
                                  shape_string(params.layers[i].weight) + ")");
    }
  }
  if (grad_out.rows() != n || grad_out.cols() != params.output_dim()) {
    throw std::invalid_argument("backward: upstream gradient is " +
                                shape_string(grad_out) + ", expected " +
                                std::to_string(n) + "x" +
                                std::to_string(params.output_dim()));
  }

  BranchGrads grads;
  grads.layers.resize(num_layers);
  Matrix up = grad_out;  // d(loss)/d(output of layer i)
  for (std::size_t i = num_layers; i-- > 0;) {
    grads.layers[i].weight = matmul(transpose(cache.inputs[i]), up);
    grads.layers[i].bias = column_sums(up);
    if (i == 0) break;
    up = matmul(up, transpose(params.layers[i].weight));
    // Chain through the activation of hidden layer i-1. Its output is
    // cache.inputs[i]; both derivatives are recoverable from the output alone.
    const Matrix& post = cache.inputs[i];
    if (cache.activation == Activation::relu) {
      for (std::size_t k = 0; k < up.size(); ++k) {
        if (!(post.data()[k] > 0.0)) up.data()[k] = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < up.size(); ++k) {
        const double t = post.data()[k];
        up.data()[k] *= 1.0 - t * t;
      }
    }
  }
  return grads;
}

// --- checkpoint format ---

namespace {

constexpr char kMagic[4] = {'X', 'T', 'L', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

void put_branch(std::ostream& os, const BranchParams& branch) {
  put_u32(os, static_cast<std::uint32_t>(branch.layers.size()));
  for (const auto& layer : branch.layers) {
    put_u32(os, static_cast<std::uint32_t>(layer.weight.rows()));
    put_u32(os, static_cast<std::uint32_t>(layer.weight.cols()));
    for (double v : layer.weight.data()) put_f64(os, v);
    for (double v : layer.bias.data()) put_f64(os, v);
  }
}

BranchParams get_branch(std::istream& is) {
  BranchParams branch;
  const std::uint32_t layers = get_u32(is);
  branch.layers.reserve(layers);
  for (std::uint32_t l = 0; l < layers; ++l) {
    const std::uint32_t in = get_u32(is);
    const std::uint32_t out = get_u32(is);
    LayerParams layer{Matrix(in, out), Matrix(1, out)};
    for (double& v : layer.weight.data()) v = get_f64(is);
    for (double& v : layer.bias.data()) v = get_f64(is);
    branch.layers.push_back(std::move(layer));
  }
  return branch;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const EncoderConfig& cfg,
                     const DualParams& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(cfg.audio_dim));
  put_u32(os, static_cast<std::uint32_t>(cfg.visual_dim));
  put_u32(os, static_cast<std::uint32_t>(cfg.hidden.size()));
  for (std::size_t h : cfg.hidden) put_u32(os, static_cast<std::uint32_t>(h));
  put_u32(os, static_cast<std::uint32_t>(cfg.label_dim));
  put_u32(os, cfg.activation == Activation::relu ? 0u : 1u);
  put_u64(os, cfg.init_seed);
  put_branch(os, params.audio);
  put_branch(os, params.visual);
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  const std::uint32_t version = get_u32(is);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config.audio_dim = get_u32(is);
  ckpt.config.visual_dim = get_u32(is);
  const std::uint32_t hidden_count = get_u32(is);
  ckpt.config.hidden.resize(hidden_count);
  for (auto& h : ckpt.config.hidden) h = get_u32(is);
  ckpt.config.label_dim = get_u32(is);
  ckpt.config.activation = get_u32(is) == 0 ? Activation::relu : Activation::tanh;
  ckpt.config.init_seed = get_u64(is);
  ckpt.params.audio = get_branch(is);
  ckpt.params.visual = get_branch(is);

  ckpt.config.validate();
  auto check_branch = [&](const BranchParams& b, std::size_t in_dim, const char* name) {
    if (b.layers.size() != ckpt.config.hidden.size() + 1) {
      throw std::runtime_error(std::string("checkpoint: ") + name + " layer count mismatch");
    }
    std::size_t expect = in_dim;
    for (std::size_t i = 0; i < b.layers.size(); ++i) {
      const std::size_t out =
          i < ckpt.config.hidden.size() ? ckpt.config.hidden[i] : ckpt.config.label_dim;
      if (b.layers[i].weight.rows() != expect || b.layers[i].weight.cols() != out) {
        throw std::runtime_error(std::string("checkpoint: ") + name +
                                 " layer shape mismatch at layer " + std::to_string(i));
      }
      expect = out;
    }
    if (!b.all_finite()) {
      throw std::runtime_error(std::string("checkpoint: ") + name +
                               " holds non-finite parameters");
    }
  };
  check_branch(ckpt.params.audio, ckpt.config.audio_dim, "audio branch");
  check_branch(ckpt.params.visual, ckpt.config.visual_dim, "visual branch");
  return ckpt;
}

}  // namespace xtl
