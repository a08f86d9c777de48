#include "xtl/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "xtl/rng.hpp"

namespace xtl {

void PairedDataset::validate() const {
  const std::size_t n = labels.size();
  if (audio.rows() != n || visual.rows() != n) {
    throw std::invalid_argument("dataset '" + name + "': audio rows " +
                                std::to_string(audio.rows()) + ", visual rows " +
                                std::to_string(visual.rows()) + ", labels " +
                                std::to_string(n) + " are not aligned");
  }
  if (n == 0) throw std::invalid_argument("dataset '" + name + "' is empty");
  const std::size_t c = class_names.size();
  if (c == 0) throw std::invalid_argument("dataset '" + name + "' declares no classes");
  std::vector<std::size_t> counts(c, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c) {
      throw std::invalid_argument("dataset '" + name + "': label " +
                                  std::to_string(labels[i]) + " at row " +
                                  std::to_string(i) + " out of range (classes: " +
                                  std::to_string(c) + ")");
    }
    ++counts[labels[i]];
  }
  for (std::size_t k = 0; k < c; ++k) {
    if (counts[k] == 0) {
      throw std::invalid_argument("dataset '" + name + "': class " + std::to_string(k) +
                                  " (" + class_names[k] + ") has no samples");
    }
  }
  if (!audio.all_finite() || !visual.all_finite()) {
    throw std::invalid_argument("dataset '" + name + "' holds non-finite features");
  }
}

Matrix one_hot(std::uint32_t label, std::size_t num_classes) {
  if (label >= num_classes) {
    throw std::invalid_argument("one_hot: label " + std::to_string(label) +
                                " out of range for " + std::to_string(num_classes) +
                                " classes");
  }
  Matrix row(1, num_classes);
  row(0, label) = 1.0;
  return row;
}

Matrix one_hot_rows(std::span<const std::uint32_t> labels, std::size_t num_classes) {
  Matrix out(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw std::invalid_argument("one_hot_rows: label " + std::to_string(labels[i]) +
                                  " at row " + std::to_string(i) + " out of range for " +
                                  std::to_string(num_classes) + " classes");
    }
    out(i, labels[i]) = 1.0;
  }
  return out;
}

namespace {

PairedDataset gather_rows(const PairedDataset& ds, const std::vector<std::size_t>& rows) {
  PairedDataset out;
  out.name = ds.name;
  out.class_names = ds.class_names;
  out.audio = Matrix(rows.size(), ds.audio.cols());
  out.visual = Matrix(rows.size(), ds.visual.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t src = rows[i];
    std::copy(ds.audio.row(src).begin(), ds.audio.row(src).end(), out.audio.row(i).begin());
    std::copy(ds.visual.row(src).begin(), ds.visual.row(src).end(),
              out.visual.row(i).begin());
    out.labels.push_back(ds.labels[src]);
  }
  return out;
}

}  // namespace

SplitResult split(const PairedDataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split: train_fraction must lie strictly in (0, 1)");
  }
  ds.validate();
  const std::size_t c = ds.num_classes();
  std::vector<std::vector<std::size_t>> by_class(c);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
  for (std::size_t k = 0; k < c; ++k) {
    if (by_class[k].size() < 2) {
      throw std::invalid_argument("split: class " + std::to_string(k) + " has only " +
                                  std::to_string(by_class[k].size()) +
                                  " sample(s); need at least 2");
    }
  }
  Rng rng(seed);
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t k = 0; k < c; ++k) {
    auto& rows = by_class[k];
    rng.shuffle(rows);
    const auto n_k = rows.size();
    const auto want = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(n_k)));
    const std::size_t take = std::clamp<std::size_t>(want, 1, n_k - 1);
    train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + take);
    test_rows.insert(test_rows.end(), rows.begin() + take, rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {gather_rows(ds, train_rows), gather_rows(ds, test_rows)};
}

// --- binary directory format ---

namespace {

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("missing or unreadable file: " + path.string());
  is.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(is.tellg());
  is.seekg(0, std::ios::beg);
  std::vector<unsigned char> bytes(size);
  if (size > 0) is.read(reinterpret_cast<char*>(bytes.data()), static_cast<long>(size));
  if (!is) throw std::runtime_error("failed reading " + path.string());
  return bytes;
}

float f32_from_le(const unsigned char* b) {
  const std::uint32_t u = static_cast<std::uint32_t>(b[0]) |
                          (static_cast<std::uint32_t>(b[1]) << 8) |
                          (static_cast<std::uint32_t>(b[2]) << 16) |
                          (static_cast<std::uint32_t>(b[3]) << 24);
  return std::bit_cast<float>(u);
}

std::uint32_t u32_from_le(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

Matrix read_f32_matrix(const std::filesystem::path& path, std::size_t rows,
                       std::size_t cols) {
  const auto bytes = read_file_bytes(path);
  const std::size_t expected = rows * cols * 4;
  if (bytes.size() != expected) {
    throw std::runtime_error(path.string() + ": expected " + std::to_string(expected) +
                             " bytes for " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " f32, found " +
                             std::to_string(bytes.size()));
  }
  Matrix m(rows, cols);
  for (std::size_t k = 0; k < rows * cols; ++k) {
    m.data()[k] = static_cast<double>(f32_from_le(bytes.data() + 4 * k));
  }
  return m;
}

void write_f32_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  for (double v : m.data()) {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    const unsigned char b[4] = {
        static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
        static_cast<unsigned char>(u >> 16), static_cast<unsigned char>(u >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

PairedDataset load_binary(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw std::runtime_error("missing or unreadable file: " + meta_path.string());
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(meta_path.string() + ": " + e.what());
  }
  static const std::vector<std::string> known = {"name",       "n",           "audio_dim",
                                                 "visual_dim", "num_classes", "class_names"};
  for (const auto& [key, value] : meta.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw std::runtime_error(meta_path.string() + ": unknown key '" + key + "'");
    }
  }
  for (const auto& key : known) {
    if (!meta.contains(key)) {
      throw std::runtime_error(meta_path.string() + ": missing key '" + key + "'");
    }
  }

  PairedDataset ds;
  ds.name = meta.at("name").get<std::string>();
  const auto n = meta.at("n").get<std::size_t>();
  const auto audio_dim = meta.at("audio_dim").get<std::size_t>();
  const auto visual_dim = meta.at("visual_dim").get<std::size_t>();
  const auto num_classes = meta.at("num_classes").get<std::size_t>();
  ds.class_names = meta.at("class_names").get<std::vector<std::string>>();
  if (ds.class_names.size() != num_classes) {
    throw std::runtime_error(meta_path.string() + ": class_names lists " +
                             std::to_string(ds.class_names.size()) + " names but num_classes is " +
                             std::to_string(num_classes));
  }

  ds.audio = read_f32_matrix(dir / "audio.f32", n, audio_dim);
  ds.visual = read_f32_matrix(dir / "visual.f32", n, visual_dim);

  const auto label_bytes = read_file_bytes(dir / "labels.u32");
  if (label_bytes.size() != n * 4) {
    throw std::runtime_error((dir / "labels.u32").string() + ": expected " +
                             std::to_string(n * 4) + " bytes, found " +
                             std::to_string(label_bytes.size()));
  }
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = u32_from_le(label_bytes.data() + 4 * i);

  ds.validate();
  return ds;
}

void save_binary(const PairedDataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  nlohmann::json meta = {{"name", ds.name},
                         {"n", ds.size()},
                         {"audio_dim", ds.audio.cols()},
                         {"visual_dim", ds.visual.cols()},
                         {"num_classes", ds.num_classes()},
                         {"class_names", ds.class_names}};
  std::ofstream meta_out(dir / "meta.json", std::ios::trunc);
  if (!meta_out) throw std::runtime_error("cannot open for writing: " + (dir / "meta.json").string());
  meta_out << meta.dump(2) << "\n";
  write_f32_matrix(dir / "audio.f32", ds.audio);
  write_f32_matrix(dir / "visual.f32", ds.visual);
  std::ofstream labels_out(dir / "labels.u32", std::ios::binary | std::ios::trunc);
  if (!labels_out) {
    throw std::runtime_error("cannot open for writing: " + (dir / "labels.u32").string());
  }
  for (std::uint32_t l : ds.labels) {
    const unsigned char b[4] = {
        static_cast<unsigned char>(l), static_cast<unsigned char>(l >> 8),
        static_cast<unsigned char>(l >> 16), static_cast<unsigned char>(l >> 24)};
    labels_out.write(reinterpret_cast<const char*>(b), 4);
  }
  if (!labels_out) throw std::runtime_error("write failed: " + (dir / "labels.u32").string());
}

// --- CSV ingestion ---

namespace {

Matrix read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("missing or unreadable file: " + path.string());
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t row_cols = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      const std::string cell = line.substr(pos, comma - pos);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        throw std::runtime_error(path.string() + ": non-numeric cell '" + cell +
                                 "' at row " + std::to_string(line_no));
      }
      // Features are f32 on disk in the binary format; CSV ingestion snaps to
      // the same grid so both encodings of one dataset agree.
      values.push_back(static_cast<double>(static_cast<float>(v)));
      ++row_cols;
      pos = comma + 1;
    }
    if (rows == 0) {
      cols = row_cols;
    } else if (row_cols != cols) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(line_no) +
                               " has " + std::to_string(row_cols) + " cells, expected " +
                               std::to_string(cols));
    }
    ++rows;
  }
  return Matrix(rows, cols, std::move(values));
}

std::vector<std::uint32_t> read_label_lines(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("missing or unreadable file: " + path.string());
  std::vector<std::uint32_t> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    char* end = nullptr;
    const unsigned long v = std::strtoul(line.c_str(), &end, 10);
    if (end == line.c_str() || *end != '\0') {
      throw std::runtime_error(path.string() + ": non-integer label '" + line +
                               "' at row " + std::to_string(line_no));
    }
    labels.push_back(static_cast<std::uint32_t>(v));
  }
  return labels;
}

}  // namespace

PairedDataset load_csv(const std::filesystem::path& audio_csv,
                       const std::filesystem::path& visual_csv,
                       const std::filesystem::path& labels_csv, const std::string& name) {
  PairedDataset ds;
  ds.name = name;
  ds.audio = read_csv_matrix(audio_csv);
  ds.visual = read_csv_matrix(visual_csv);
  ds.labels = read_label_lines(labels_csv);
  if (ds.audio.rows() != ds.visual.rows() || ds.audio.rows() != ds.labels.size()) {
    throw std::runtime_error("pairing error: audio has " + std::to_string(ds.audio.rows()) +
                             " rows, visual " + std::to_string(ds.visual.rows()) +
                             ", labels " + std::to_string(ds.labels.size()));
  }
  std::uint32_t max_label = 0;
  for (std::uint32_t l : ds.labels) max_label = std::max(max_label, l);
  for (std::uint32_t k = 0; k <= max_label; ++k) {
    ds.class_names.push_back("class_" + std::to_string(k));
  }
  ds.validate();
  return ds;
}

// --- synthetic generator ---

void SynthConfig::validate() const {
  if (classes < 2) throw std::invalid_argument("synth: need at least 2 classes");
  if (n_per_class < 1 || latent_dim < 1 || audio_dim < 1 || visual_dim < 1) {
    throw std::invalid_argument("synth: all counts must be >= 1");
  }
  if (!(noise_sigma > 0.0)) throw std::invalid_argument("synth: noise_sigma must be > 0");
  if (!(class_sep > 0.0)) throw std::invalid_argument("synth: class_sep must be > 0");
}

PairedDataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  // Class centers ~ N(0, class_sep^2 I), so the RMS pairwise separation is
  // class_sep * sqrt(2 * latent_dim), clear of the within-class unit noise.
  Matrix centers(cfg.classes, cfg.latent_dim);
  for (double& v : centers.data()) v = cfg.class_sep * rng.gaussian();

  const double proj_scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  Matrix proj_audio(cfg.latent_dim, cfg.audio_dim);
  for (double& v : proj_audio.data()) v = proj_scale * rng.gaussian();
  Matrix proj_visual(cfg.latent_dim, cfg.visual_dim);
  for (double& v : proj_visual.data()) v = proj_scale * rng.gaussian();

  const std::size_t n = cfg.classes * cfg.n_per_class;
  Matrix latents(n, cfg.latent_dim);
  PairedDataset ds;
  ds.name = "synthetic";
  ds.labels.reserve(n);
  for (std::size_t k = 0; k < cfg.classes; ++k) {
    for (std::size_t i = 0; i < cfg.n_per_class; ++i) {
      const std::size_t row = k * cfg.n_per_class + i;
      for (std::size_t d = 0; d < cfg.latent_dim; ++d) {
        latents(row, d) = centers(k, d) + rng.gaussian();
      }
      ds.labels.push_back(static_cast<std::uint32_t>(k));
    }
  }

  ds.audio = matmul(latents, proj_audio);
  for (double& v : ds.audio.data()) v += cfg.noise_sigma * rng.gaussian();
  ds.visual = matmul(latents, proj_visual);
  for (double& v : ds.visual.data()) v += cfg.noise_sigma * rng.gaussian();

  // Snap to the f32 grid used on disk so save -> load round-trips exactly.
  for (double& v : ds.audio.data()) v = static_cast<double>(static_cast<float>(v));
  for (double& v : ds.visual.data()) v = static_cast<double>(static_cast<float>(v));

  ds.class_names.reserve(cfg.classes);
  for (std::size_t k = 0; k < cfg.classes; ++k) {
    ds.class_names.push_back("class_" + std::to_string(k));
  }
  ds.validate();
  return ds;
}

}  // namespace xtl
