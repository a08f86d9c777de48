#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xtl/data.hpp"
#include "xtl/matrix.hpp"
#include "xtl/model.hpp"

namespace xtl {

struct ScopePoint {
  std::size_t k = 0;
  double a2v = 0.0;
  double v2a = 0.0;
};

struct EvalReport {
  double map_a2v = 0.0;
  double map_v2a = 0.0;
  double map_avg = 0.0;
  std::vector<double> per_query_ap_a2v;
  std::vector<double> per_query_ap_v2a;
  std::vector<ScopePoint> precision_scope;
  std::string distance;
  std::string dataset;
  std::string checkpoint;
};

/// Gallery indices sorted by ascending distance to the query; ties broken by
/// ascending index. Cosine ranks by 1 - cosine similarity (zero vectors get
/// similarity 0).
std::vector<std::size_t> rank_gallery(std::span<const double> query, const Matrix& gallery,
                                      Distance distance);

/// AP of a binary relevance list in rank order, optionally truncated to the
/// first k entries (k = 0 means the full list). The divisor is the number of
/// relevant items within the cutoff; no relevant items gives 0.
double average_precision(std::span<const int> relevance, std::size_t k = 0);

/// Full-list MAP in both directions: every audio row queries the complete
/// visual gallery and vice versa, relevance = exact label match, no
/// self-exclusion (the modalities are disjoint sets).
EvalReport map_bidirectional(const Matrix& audio_emb, const Matrix& visual_emb,
                             std::span<const std::uint32_t> labels_audio,
                             std::span<const std::uint32_t> labels_visual,
                             Distance distance);

/// precision-scope@K per direction: mean over queries of (relevant in
/// top-K)/K. Every K must satisfy 1 <= K <= gallery size.
std::vector<ScopePoint> precision_scope(const Matrix& audio_emb, const Matrix& visual_emb,
                                        std::span<const std::uint32_t> labels,
                                        const std::vector<std::size_t>& ks,
                                        Distance distance);

/// MAP and precision-scope computed from one ranking pass per query.
EvalReport evaluate_retrieval(const Matrix& audio_emb, const Matrix& visual_emb,
                              std::span<const std::uint32_t> labels,
                              const std::vector<std::size_t>& ks, Distance distance);

/// CSV of label-space embeddings: header modality,label,e_1..e_c, audio block
/// first then visual, dataset order, f64 round-trip precision.
void export_embeddings(const EncoderConfig& cfg, const DualParams& params,
                       const PairedDataset& ds, const std::filesystem::path& out_path);

std::string eval_report_to_json(const EvalReport& report);
void write_eval_json(const EvalReport& report, const std::filesystem::path& path);

/// Curve CSV: header k,a2v,v2a.
void write_scope_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace xtl
