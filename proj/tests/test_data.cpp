#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <fstream>
#include <set>

#include "xtl/data.hpp"
#include "xtl/rng.hpp"

#include "helpers.hpp"

using namespace xtl;

namespace {

SynthConfig small_synth(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_per_class = 12;
  cfg.classes = 4;
  cfg.latent_dim = 6;
  cfg.audio_dim = 8;
  cfg.visual_dim = 10;
  cfg.noise_sigma = 0.4;
  cfg.class_sep = 3.0;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("one_hot definition") {
  const Matrix r = one_hot(2, 10);
  CHECK(r.rows() == 1);
  CHECK(r.cols() == 10);
  for (std::size_t j = 0; j < 10; ++j) CHECK(r(0, j) == (j == 2 ? 1.0 : 0.0));

  CHECK(one_hot(0, 2) == Matrix::from_rows({{1, 0}}));
  CHECK_THROWS_AS(one_hot(2, 2), std::invalid_argument);

  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t c = 1 + rng.below(12);
    const auto label = static_cast<std::uint32_t>(rng.below(c));
    const Matrix row = one_hot(label, c);
    double sum = 0.0;
    for (double v : row.data()) sum += v;
    CHECK(sum == 1.0);
  }
}

TEST_CASE("one_hot_rows stacks rows and validates") {
  const std::vector<std::uint32_t> labels = {1, 0, 2};
  const Matrix m = one_hot_rows(labels, 3);
  CHECK(m == Matrix::from_rows({{0, 1, 0}, {1, 0, 0}, {0, 0, 1}}));
  const std::vector<std::uint32_t> bad = {0, 3};
  CHECK_THROWS_AS(one_hot_rows(bad, 3), std::invalid_argument);
}

TEST_CASE("split 100 per class at 0.8 gives exact 80/20 per class") {
  SynthConfig cfg = small_synth(5);
  cfg.n_per_class = 100;
  cfg.classes = 10;
  const PairedDataset ds = synth_generate(cfg);
  const SplitResult sr = split(ds, 0.8, 7);
  CHECK(sr.train.size() == 800);
  CHECK(sr.test.size() == 200);
  std::vector<std::size_t> train_counts(10, 0), test_counts(10, 0);
  for (auto l : sr.train.labels) ++train_counts[l];
  for (auto l : sr.test.labels) ++test_counts[l];
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(train_counts[k] == 80);
    CHECK(test_counts[k] == 20);
  }
}

TEST_CASE("split is deterministic and a partition") {
  const PairedDataset ds = synth_generate(small_synth(9));
  const SplitResult a = split(ds, 0.7, 42);
  const SplitResult b = split(ds, 0.7, 42);
  CHECK(a.train.audio == b.train.audio);
  CHECK(a.train.labels == b.train.labels);
  CHECK(a.test.visual == b.test.visual);

  // Partition: every original row in exactly one half (features identify rows
  // here because the generator makes collisions vanishingly unlikely).
  CHECK(a.train.size() + a.test.size() == ds.size());
  std::set<std::vector<double>> seen;
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    seen.insert(std::vector<double>(a.train.audio.row(i).begin(), a.train.audio.row(i).end()));
  }
  for (std::size_t i = 0; i < a.test.size(); ++i) {
    seen.insert(std::vector<double>(a.test.audio.row(i).begin(), a.test.audio.row(i).end()));
  }
  CHECK(seen.size() == ds.size());

  const SplitResult c = split(ds, 0.7, 43);
  CHECK_FALSE(c.train.audio == a.train.audio);
}

TEST_CASE("split at VEGAS-like scale stays within c of the exact fraction") {
  // 28,103 rows over 10 classes with uneven counts.
  Rng rng(77);
  const std::size_t n = 28103, c = 10;
  PairedDataset ds;
  ds.name = "vegas-sized";
  ds.audio = Matrix(n, 1);
  ds.visual = Matrix(n, 1);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = static_cast<std::uint32_t>(rng.below(c));
    ds.audio(i, 0) = static_cast<double>(i);
    ds.visual(i, 0) = static_cast<double>(i);
  }
  for (std::uint32_t k = 0; k < c; ++k) ds.labels[k] = k;  // every class present
  for (std::uint32_t k = 0; k < c; ++k) ds.class_names.push_back("c" + std::to_string(k));
  const SplitResult sr = split(ds, 0.8, 3);
  CHECK(sr.train.size() + sr.test.size() == n);
  CHECK(std::llabs(static_cast<long long>(sr.train.size()) - 22482) <=
        static_cast<long long>(c));
}

TEST_CASE("split rejects classes with fewer than 2 samples") {
  PairedDataset ds;
  ds.name = "tiny";
  ds.audio = Matrix(3, 2);
  ds.visual = Matrix(3, 2);
  ds.labels = {0, 0, 1};
  ds.class_names = {"a", "b"};
  CHECK_THROWS_WITH_AS(split(ds, 0.5, 1), doctest::Contains("class 1"),
                       std::invalid_argument);
  CHECK_THROWS_AS(split(ds, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(ds, 1.0, 1), std::invalid_argument);
}

TEST_CASE("binary round-trip is bit-identical") {
  testutil::TempDir tmp;
  const PairedDataset ds = synth_generate(small_synth(11));
  const auto dir = tmp.path() / "ds";
  save_binary(ds, dir);
  const PairedDataset loaded = load_binary(dir);
  CHECK(loaded.audio == ds.audio);
  CHECK(loaded.visual == ds.visual);
  CHECK(loaded.labels == ds.labels);
  CHECK(loaded.class_names == ds.class_names);
  CHECK(loaded.name == ds.name);

  // Saving the loaded dataset again writes identical bytes.
  const auto dir2 = tmp.path() / "ds2";
  save_binary(loaded, dir2);
  for (const char* file : {"meta.json", "audio.f32", "visual.f32", "labels.u32"}) {
    CHECK(testutil::same_bytes(dir / file, dir2 / file));
  }
}

TEST_CASE("binary loader rejects corrupted directories") {
  testutil::TempDir tmp;
  const PairedDataset ds = synth_generate(small_synth(13));
  const auto dir = tmp.path() / "ds";
  save_binary(ds, dir);

  SUBCASE("truncated features") {
    std::filesystem::resize_file(dir / "audio.f32", 10);
    CHECK_THROWS_WITH_AS(load_binary(dir), doctest::Contains("audio.f32"),
                         std::runtime_error);
  }
  SUBCASE("missing file") {
    std::filesystem::remove(dir / "labels.u32");
    CHECK_THROWS_AS(load_binary(dir), std::runtime_error);
  }
  SUBCASE("label out of range") {
    // Patch one label to num_classes.
    std::fstream f(dir / "labels.u32", std::ios::binary | std::ios::in | std::ios::out);
    const std::uint32_t bad = static_cast<std::uint32_t>(ds.num_classes());
    f.write(reinterpret_cast<const char*>(&bad), 4);
    f.close();
    CHECK_THROWS_WITH_AS(load_binary(dir), doctest::Contains("out of range"),
                         std::invalid_argument);
  }
  SUBCASE("unknown meta key") {
    testutil::write_text(dir / "meta.json",
                         R"({"name":"x","n":1,"audio_dim":1,"visual_dim":1,)"
                         R"("num_classes":1,"class_names":["a"],"extra":1})");
    CHECK_THROWS_WITH_AS(load_binary(dir), doctest::Contains("extra"), std::runtime_error);
  }
}

TEST_CASE("csv loader smoke and error cases") {
  testutil::TempDir tmp;
  testutil::write_text(tmp.path() / "a.csv", "1,2\n3,4\n5,6\n");
  testutil::write_text(tmp.path() / "v.csv", "0.5,0.25,0.125\n-1,2.5,0\n7,8,9\n");
  testutil::write_text(tmp.path() / "l.csv", "0\n1\n0\n");
  const PairedDataset ds =
      load_csv(tmp.path() / "a.csv", tmp.path() / "v.csv", tmp.path() / "l.csv", "toy");
  CHECK(ds.size() == 3);
  CHECK(ds.audio == Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}}));
  CHECK(ds.visual(0, 2) == 0.125);
  CHECK(ds.num_classes() == 2);

  SUBCASE("mismatched row counts") {
    testutil::write_text(tmp.path() / "l.csv", "0\n1\n");
    CHECK_THROWS_WITH_AS(
        load_csv(tmp.path() / "a.csv", tmp.path() / "v.csv", tmp.path() / "l.csv"),
        doctest::Contains("pairing"), std::runtime_error);
  }
  SUBCASE("ragged row reported with its number") {
    testutil::write_text(tmp.path() / "a.csv", "1,2\n3\n5,6\n");
    CHECK_THROWS_WITH_AS(
        load_csv(tmp.path() / "a.csv", tmp.path() / "v.csv", tmp.path() / "l.csv"),
        doctest::Contains("row 2"), std::runtime_error);
  }
  SUBCASE("non-numeric cell reported with its row") {
    testutil::write_text(tmp.path() / "v.csv", "0.5,0.25,0.125\n-1,x,0\n7,8,9\n");
    CHECK_THROWS_WITH_AS(
        load_csv(tmp.path() / "a.csv", tmp.path() / "v.csv", tmp.path() / "l.csv"),
        doctest::Contains("row 2"), std::runtime_error);
  }
}

TEST_CASE("csv and binary encodings of the same data agree") {
  testutil::TempDir tmp;
  SynthConfig cfg = small_synth(17);
  cfg.n_per_class = 4;
  cfg.classes = 3;
  const PairedDataset ds = synth_generate(cfg);

  auto to_csv = [](const Matrix& m) {
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) {
        // 9 significant digits round-trips any f32 value exactly.
        std::snprintf(buf, sizeof(buf), "%s%.9g", j == 0 ? "" : ",", m(i, j));
        out += buf;
      }
      out += "\n";
    }
    return out;
  };
  testutil::write_text(tmp.path() / "a.csv", to_csv(ds.audio));
  testutil::write_text(tmp.path() / "v.csv", to_csv(ds.visual));
  std::string labels_text;
  for (auto l : ds.labels) labels_text += std::to_string(l) + "\n";
  testutil::write_text(tmp.path() / "l.csv", labels_text);

  const PairedDataset from_csv =
      load_csv(tmp.path() / "a.csv", tmp.path() / "v.csv", tmp.path() / "l.csv");
  save_binary(ds, tmp.path() / "bin");
  const PairedDataset from_bin = load_binary(tmp.path() / "bin");
  CHECK(from_csv.audio == from_bin.audio);
  CHECK(from_csv.visual == from_bin.visual);
  CHECK(from_csv.labels == from_bin.labels);
}

TEST_CASE("synth_generate determinism") {
  const PairedDataset a = synth_generate(small_synth(21));
  const PairedDataset b = synth_generate(small_synth(21));
  CHECK(a.audio == b.audio);
  CHECK(a.visual == b.visual);
  CHECK(a.labels == b.labels);
  const PairedDataset c = synth_generate(small_synth(22));
  CHECK_FALSE(a.audio == c.audio);
}

TEST_CASE("synth class-conditional audio means differ across classes") {
  const PairedDataset ds = synth_generate(small_synth(23));
  const std::size_t c = ds.num_classes(), d = ds.audio.cols();
  Matrix means(c, d);
  std::vector<std::size_t> counts(c, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) means(ds.labels[i], j) += ds.audio(i, j);
    ++counts[ds.labels[i]];
  }
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t j = 0; j < d; ++j) means(k, j) /= static_cast<double>(counts[k]);
  }
  const Matrix dist = pairwise_sq_dist(means, means);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t l = 0; l < c; ++l) {
      if (k != l) CHECK(dist(k, l) > 0.0);
    }
  }
}

TEST_CASE("nearest-centroid on raw audio features beats 90% on the separable config") {
  SynthConfig cfg;
  cfg.n_per_class = 200;
  cfg.classes = 10;
  cfg.latent_dim = 16;
  cfg.audio_dim = 32;
  cfg.visual_dim = 48;
  cfg.class_sep = 3.0;
  cfg.noise_sigma = 0.5;
  cfg.seed = 123;
  const PairedDataset ds = synth_generate(cfg);

  Matrix centroids(cfg.classes, cfg.audio_dim);
  std::vector<std::size_t> counts(cfg.classes, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < cfg.audio_dim; ++j) {
      centroids(ds.labels[i], j) += ds.audio(i, j);
    }
    ++counts[ds.labels[i]];
  }
  for (std::size_t k = 0; k < cfg.classes; ++k) {
    for (std::size_t j = 0; j < cfg.audio_dim; ++j) {
      centroids(k, j) /= static_cast<double>(counts[k]);
    }
  }
  const Matrix dist = pairwise_sq_dist(ds.audio, centroids);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < cfg.classes; ++k) {
      if (dist(i, k) < dist(i, best)) best = k;
    }
    if (best == ds.labels[i]) ++correct;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(ds.size()) > 0.9);
}

TEST_CASE("dataset validation catches corrupted structures") {
  PairedDataset ds = synth_generate(small_synth(29));
  SUBCASE("label out of range") {
    ds.labels[0] = static_cast<std::uint32_t>(ds.num_classes());
    CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
  }
  SUBCASE("class with no samples") {
    for (auto& l : ds.labels) {
      if (l == 2) l = 1;
    }
    CHECK_THROWS_WITH_AS(ds.validate(), doctest::Contains("class 2"),
                         std::invalid_argument);
  }
  SUBCASE("row misalignment") {
    ds.visual = Matrix(ds.size() - 1, ds.visual.cols());
    CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
  }
  SUBCASE("non-finite features") {
    ds.audio(0, 0) = std::nan("");
    CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
  }
}

TEST_CASE("synth config validation") {
  SynthConfig cfg = small_synth(1);
  cfg.classes = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_synth(1);
  cfg.noise_sigma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
