#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "xtl/gradcheck.hpp"
#include "xtl/model.hpp"
#include "xtl/rng.hpp"

#include "helpers.hpp"

using namespace xtl;

namespace {

EncoderConfig small_config(std::uint64_t seed) {
  EncoderConfig cfg;
  cfg.audio_dim = 6;
  cfg.visual_dim = 7;
  cfg.hidden = {8, 8, 8};
  cfg.label_dim = 4;
  cfg.init_seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("init_params determinism and initialization rules") {
  const EncoderConfig cfg = small_config(42);
  const DualParams p1 = init_params(cfg);
  const DualParams p2 = init_params(cfg);
  CHECK(p1 == p2);

  const DualParams p3 = init_params(small_config(43));
  CHECK_FALSE(p1 == p3);

  for (const BranchParams* b : {&p1.audio, &p1.visual}) {
    for (const LayerParams& l : b->layers) {
      for (double v : l.bias.data()) CHECK(v == 0.0);
      const double bound =
          std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
      for (double v : l.weight.data()) {
        CHECK(std::abs(v) <= bound);
      }
    }
  }
}

TEST_CASE("forward output shape is n x label_dim with the default config") {
  EncoderConfig cfg;  // 128 / 1024 inputs, hidden 1024,1024,100, c = 10
  cfg.init_seed = 7;
  const DualParams params = init_params(cfg);
  Rng rng(1);
  Matrix audio(2, cfg.audio_dim);
  for (double& v : audio.data()) v = rng.gaussian();
  const Matrix emb = forward(params.audio, audio, cfg.activation);
  CHECK(emb.rows() == 2);
  CHECK(emb.cols() == cfg.label_dim);

  Matrix visual(3, cfg.visual_dim);
  for (double& v : visual.data()) v = rng.gaussian();
  CHECK(forward(params.visual, visual, cfg.activation).cols() == cfg.label_dim);
}

TEST_CASE("all-zero parameters map everything to zero") {
  EncoderConfig cfg = small_config(1);
  DualParams params = init_params(cfg);
  for (auto& l : params.audio.layers) {
    for (double& v : l.weight.data()) v = 0.0;
  }
  Rng rng(2);
  Matrix x(4, cfg.audio_dim);
  for (double& v : x.data()) v = rng.gaussian();
  const Matrix emb = forward(params.audio, x, cfg.activation);
  for (double v : emb.data()) CHECK(v == 0.0);
}

TEST_CASE("forward is pure: repeated calls bit-identical") {
  const EncoderConfig cfg = small_config(5);
  const DualParams params = init_params(cfg);
  Rng rng(3);
  Matrix x(5, cfg.audio_dim);
  for (double& v : x.data()) v = rng.gaussian();
  CHECK(forward(params.audio, x, cfg.activation) == forward(params.audio, x, cfg.activation));
}

TEST_CASE("duplicating the batch leaves per-row embeddings unchanged") {
  const EncoderConfig cfg = small_config(8);
  const DualParams params = init_params(cfg);
  Rng rng(4);
  Matrix x(3, cfg.audio_dim);
  for (double& v : x.data()) v = rng.gaussian();
  Matrix doubled(6, cfg.audio_dim);
  for (std::size_t i = 0; i < 6; ++i) {
    std::copy(x.row(i % 3).begin(), x.row(i % 3).end(), doubled.row(i).begin());
  }
  const Matrix e1 = forward(params.audio, x, cfg.activation);
  const Matrix e2 = forward(params.audio, doubled, cfg.activation);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < e1.cols(); ++j) CHECK(e2(i, j) == e1(i % 3, j));
  }
}

TEST_CASE("forward rejects inputs of the wrong width") {
  const EncoderConfig cfg = small_config(6);
  const DualParams params = init_params(cfg);
  CHECK_THROWS_AS(forward(params.audio, Matrix(2, cfg.audio_dim + 1), cfg.activation),
                  std::invalid_argument);
}

TEST_CASE("backward with zero upstream gradient gives zero parameter gradients") {
  const EncoderConfig cfg = small_config(9);
  const DualParams params = init_params(cfg);
  Rng rng(5);
  Matrix x(4, cfg.audio_dim);
  for (double& v : x.data()) v = rng.gaussian();
  ForwardCache cache;
  forward(params.audio, x, cfg.activation, &cache);
  const BranchGrads grads = backward(params.audio, cache, Matrix(4, cfg.label_dim));
  for (const LayerGrads& l : grads.layers) {
    for (double v : l.weight.data()) CHECK(v == 0.0);
    for (double v : l.bias.data()) CHECK(v == 0.0);
  }
}

TEST_CASE("single linear layer: weight gradient equals x^T g") {
  // A branch whose only layer is the classifier.
  BranchParams branch;
  branch.layers.push_back({Matrix::from_rows({{0.5, -1.0}, {2.0, 0.25}}), Matrix(1, 2)});
  const Matrix x = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  ForwardCache cache;
  const Matrix emb = forward(branch, x, Activation::relu, &cache);
  const Matrix g = Matrix::from_rows({{1, 0}, {0, 1}, {1, 1}});
  const BranchGrads grads = backward(branch, cache, g);
  const Matrix expect = matmul(transpose(x), g);
  CHECK(grads.layers[0].weight == expect);
  CHECK(grads.layers[0].bias == column_sums(g));
}

TEST_CASE("3-hidden-layer gradients match finite differences (tanh, 5 samples)") {
  EncoderConfig cfg = small_config(11);
  cfg.activation = Activation::tanh;
  const DualParams params = init_params(cfg);
  Rng rng(6);
  Matrix x(5, cfg.audio_dim);
  for (double& v : x.data()) v = rng.gaussian();

  // Scalar probe: weighted sum of the embedding entries.
  Matrix probe(5, cfg.label_dim);
  for (double& v : probe.data()) v = rng.uniform(-1.0, 1.0);

  ForwardCache cache;
  const Matrix emb = forward(params.audio, x, cfg.activation, &cache);
  const BranchGrads analytic = backward(params.audio, cache, probe);

  std::vector<double> theta;
  for (const LayerParams& l : params.audio.layers) {
    theta.insert(theta.end(), l.weight.data().begin(), l.weight.data().end());
    theta.insert(theta.end(), l.bias.data().begin(), l.bias.data().end());
  }
  BranchParams scratch = params.audio;
  const auto f = [&](const std::vector<double>& point) {
    std::size_t pos = 0;
    for (LayerParams& l : scratch.layers) {
      std::copy(point.begin() + pos, point.begin() + pos + l.weight.size(),
                l.weight.data().begin());
      pos += l.weight.size();
      std::copy(point.begin() + pos, point.begin() + pos + l.bias.size(),
                l.bias.data().begin());
      pos += l.bias.size();
    }
    const Matrix e = forward(scratch, x, cfg.activation);
    double s = 0.0;
    for (std::size_t k = 0; k < e.size(); ++k) s += e.data()[k] * probe.data()[k];
    return s;
  };
  const std::vector<double> numeric = finite_diff_gradient(f, theta, 1e-6);

  std::vector<double> flat;
  for (const LayerGrads& l : analytic.layers) {
    flat.insert(flat.end(), l.weight.data().begin(), l.weight.data().end());
    flat.insert(flat.end(), l.bias.data().begin(), l.bias.data().end());
  }
  REQUIRE(flat.size() == numeric.size());
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const double denom = std::abs(flat[k]) + std::abs(numeric[k]);
    if (denom < 1e-8) continue;
    CHECK(std::abs(flat[k] - numeric[k]) / denom < 1e-5);
  }
}

TEST_CASE("backward rejects a cache from different shapes") {
  const EncoderConfig cfg = small_config(12);
  const DualParams params = init_params(cfg);
  Rng rng(7);
  Matrix x(3, cfg.audio_dim);
  for (double& v : x.data()) v = rng.gaussian();
  ForwardCache cache;
  forward(params.audio, x, cfg.activation, &cache);

  CHECK_THROWS_AS(backward(params.visual, cache, Matrix(3, cfg.label_dim)),
                  std::invalid_argument);
  CHECK_THROWS_AS(backward(params.audio, cache, Matrix(2, cfg.label_dim)),
                  std::invalid_argument);
  CHECK_THROWS_AS(backward(params.audio, ForwardCache{}, Matrix(3, cfg.label_dim)),
                  std::invalid_argument);
}

TEST_CASE("checkpoint round-trip preserves config and parameters") {
  testutil::TempDir tmp;
  EncoderConfig cfg = small_config(21);
  cfg.activation = Activation::tanh;
  const DualParams params = init_params(cfg);
  const auto path = tmp.path() / "model.xtlc";
  save_checkpoint(path, cfg, params);
  const Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.params == params);
  CHECK(loaded.config.audio_dim == cfg.audio_dim);
  CHECK(loaded.config.visual_dim == cfg.visual_dim);
  CHECK(loaded.config.hidden == cfg.hidden);
  CHECK(loaded.config.label_dim == cfg.label_dim);
  CHECK(loaded.config.activation == cfg.activation);
  CHECK(loaded.config.init_seed == cfg.init_seed);

  // Same save twice is byte-identical.
  const auto path2 = tmp.path() / "model2.xtlc";
  save_checkpoint(path2, cfg, params);
  CHECK(testutil::same_bytes(path, path2));
}

TEST_CASE("checkpoint loader rejects garbage") {
  testutil::TempDir tmp;
  const auto path = tmp.path() / "bogus.xtlc";
  testutil::write_text(path, "not a checkpoint");
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("magic"),
                       std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint(tmp.path() / "missing.xtlc"), std::runtime_error);
}
