#include "xtl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "xtl/parallel.hpp"

namespace xtl {

namespace {

double ranking_distance(std::span<const double> q, std::span<const double> g,
                        Distance distance) {
  switch (distance) {
    case Distance::squared_euclidean:
    case Distance::euclidean:
      // Ranking is monotone in the squared distance; skip the sqrt.
      return squared_distance(q, g);
    case Distance::cosine: {
      double dot = 0.0, nq = 0.0, ng = 0.0;
      for (std::size_t k = 0; k < q.size(); ++k) {
        dot += q[k] * g[k];
        nq += q[k] * q[k];
        ng += g[k] * g[k];
      }
      const double denom = std::sqrt(nq) * std::sqrt(ng);
      const double sim = denom > 0.0 ? dot / denom : 0.0;
      return 1.0 - sim;
    }
  }
  return 0.0;
}

}  // namespace

std::vector<std::size_t> rank_gallery(std::span<const double> query, const Matrix& gallery,
                                      Distance distance) {
  if (gallery.rows() == 0) throw std::invalid_argument("rank_gallery: empty gallery");
  if (gallery.cols() != query.size()) {
    throw std::invalid_argument("rank_gallery: query dim " + std::to_string(query.size()) +
                                " vs gallery dim " + std::to_string(gallery.cols()));
  }
  std::vector<double> dist(gallery.rows());
  for (std::size_t j = 0; j < gallery.rows(); ++j) {
    dist[j] = ranking_distance(query, gallery.row(j), distance);
  }
  std::vector<std::size_t> order(gallery.rows());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return a < b;
  });
  return order;
}

double average_precision(std::span<const int> relevance, std::size_t k) {
  if (relevance.empty()) throw std::invalid_argument("average_precision: empty list");
  const std::size_t cutoff = k == 0 ? relevance.size() : std::min(k, relevance.size());
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < cutoff; ++i) {
    if (relevance[i] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

namespace {

struct DirectionResult {
  std::vector<double> ap;
  std::vector<std::vector<double>> scope_precision;  // per K, per query
};

// One ranking pass per query serves both AP and every precision@K.
DirectionResult rank_direction(const Matrix& queries,
                               std::span<const std::uint32_t> labels_q,
                               const Matrix& gallery,
                               std::span<const std::uint32_t> labels_g,
                               const std::vector<std::size_t>& ks, Distance distance) {
  if (gallery.rows() == 0) throw std::invalid_argument("retrieval: empty gallery");
  DirectionResult out;
  out.ap.assign(queries.rows(), 0.0);
  out.scope_precision.assign(ks.size(), std::vector<double>(queries.rows(), 0.0));
  parallel_for(queries.rows(), [&](std::size_t begin, std::size_t end) {
    std::vector<int> relevance(gallery.rows());
    for (std::size_t q = begin; q < end; ++q) {
      const auto order = rank_gallery(queries.row(q), gallery, distance);
      for (std::size_t r = 0; r < order.size(); ++r) {
        relevance[r] = labels_g[order[r]] == labels_q[q] ? 1 : 0;
      }
      out.ap[q] = average_precision(relevance);
      for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        const std::size_t k = ks[ki];
        std::size_t hits = 0;
        for (std::size_t r = 0; r < k; ++r) hits += relevance[r] != 0 ? 1 : 0;
        out.scope_precision[ki][q] =
            static_cast<double>(hits) / static_cast<double>(k);
      }
    }
  });
  return out;
}

double mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

}  // namespace

EvalReport map_bidirectional(const Matrix& audio_emb, const Matrix& visual_emb,
                             std::span<const std::uint32_t> labels_audio,
                             std::span<const std::uint32_t> labels_visual,
                             Distance distance) {
  if (audio_emb.rows() != labels_audio.size() || visual_emb.rows() != labels_visual.size()) {
    throw std::invalid_argument("map_bidirectional: labels do not match embedding rows");
  }
  if (audio_emb.cols() != visual_emb.cols()) {
    throw std::invalid_argument("map_bidirectional: embedding dims disagree: " +
                                shape_string(audio_emb) + " vs " + shape_string(visual_emb));
  }
  EvalReport report;
  report.distance = to_string(distance);
  const auto a2v =
      rank_direction(audio_emb, labels_audio, visual_emb, labels_visual, {}, distance);
  const auto v2a =
      rank_direction(visual_emb, labels_visual, audio_emb, labels_audio, {}, distance);
  report.per_query_ap_a2v = a2v.ap;
  report.per_query_ap_v2a = v2a.ap;
  report.map_a2v = mean(a2v.ap);
  report.map_v2a = mean(v2a.ap);
  report.map_avg = (report.map_a2v + report.map_v2a) / 2.0;
  return report;
}

namespace {

void check_ks(const std::vector<std::size_t>& ks, std::size_t gallery_size) {
  for (std::size_t k : ks) {
    if (k < 1 || k > gallery_size) {
      throw std::invalid_argument("precision_scope: K=" + std::to_string(k) +
                                  " outside [1, " + std::to_string(gallery_size) + "]");
    }
  }
}

}  // namespace

std::vector<ScopePoint> precision_scope(const Matrix& audio_emb, const Matrix& visual_emb,
                                        std::span<const std::uint32_t> labels,
                                        const std::vector<std::size_t>& ks,
                                        Distance distance) {
  check_ks(ks, visual_emb.rows());
  check_ks(ks, audio_emb.rows());
  const auto a2v = rank_direction(audio_emb, labels, visual_emb, labels, ks, distance);
  const auto v2a = rank_direction(visual_emb, labels, audio_emb, labels, ks, distance);
  std::vector<ScopePoint> out;
  out.reserve(ks.size());
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    out.push_back({ks[ki], mean(a2v.scope_precision[ki]), mean(v2a.scope_precision[ki])});
  }
  return out;
}

EvalReport evaluate_retrieval(const Matrix& audio_emb, const Matrix& visual_emb,
                              std::span<const std::uint32_t> labels,
                              const std::vector<std::size_t>& ks, Distance distance) {
  check_ks(ks, visual_emb.rows());
  check_ks(ks, audio_emb.rows());
  EvalReport report;
  report.distance = to_string(distance);
  const auto a2v = rank_direction(audio_emb, labels, visual_emb, labels, ks, distance);
  const auto v2a = rank_direction(visual_emb, labels, audio_emb, labels, ks, distance);
  report.per_query_ap_a2v = a2v.ap;
  report.per_query_ap_v2a = v2a.ap;
  report.map_a2v = mean(a2v.ap);
  report.map_v2a = mean(v2a.ap);
  report.map_avg = (report.map_a2v + report.map_v2a) / 2.0;
  report.precision_scope.reserve(ks.size());
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    report.precision_scope.push_back(
        {ks[ki], mean(a2v.scope_precision[ki]), mean(v2a.scope_precision[ki])});
  }
  return report;
}

void export_embeddings(const EncoderConfig& cfg, const DualParams& params,
                       const PairedDataset& ds, const std::filesystem::path& out_path) {
  ds.validate();
  const Matrix emb_a = forward(params.audio, ds.audio, cfg.activation);
  const Matrix emb_v = forward(params.visual, ds.visual, cfg.activation);
  std::ofstream os(out_path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + out_path.string());
  os << "modality,label";
  for (std::size_t j = 0; j < emb_a.cols(); ++j) os << ",e_" << (j + 1);
  os << "\n";
  char buf[64];
  auto write_block = [&](const char* modality, const Matrix& emb) {
    for (std::size_t i = 0; i < emb.rows(); ++i) {
      os << modality << "," << ds.labels[i];
      for (std::size_t j = 0; j < emb.cols(); ++j) {
        std::snprintf(buf, sizeof(buf), ",%.17g", emb(i, j));
        os << buf;
      }
      os << "\n";
    }
  };
  write_block("audio", emb_a);
  write_block("visual", emb_v);
  if (!os) throw std::runtime_error("write failed: " + out_path.string());
}

std::string eval_report_to_json(const EvalReport& report) {
  nlohmann::json scope = nlohmann::json::array();
  for (const ScopePoint& p : report.precision_scope) {
    scope.push_back({{"k", p.k}, {"a2v", p.a2v}, {"v2a", p.v2a}});
  }
  const nlohmann::json j = {{"map_a2v", report.map_a2v},
                            {"map_v2a", report.map_v2a},
                            {"map_avg", report.map_avg},
                            {"precision_scope", scope},
                            {"distance", report.distance},
                            {"dataset", report.dataset},
                            {"checkpoint", report.checkpoint}};
  return j.dump(2);
}

void write_eval_json(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << eval_report_to_json(report) << "\n";
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_scope_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << "k,a2v,v2a\n";
  char buf[128];
  for (const ScopePoint& p : report.precision_scope) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", p.k, p.a2v, p.v2a);
    os << buf;
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace xtl
