#pragma once

#include <cstdint>
#include <span>

#include "xtl/matrix.hpp"
#include "xtl/triplets.hpp"

namespace xtl {

enum class Reduction { mean, sum };

std::string to_string(Reduction r);
Reduction reduction_from_string(const std::string& s);

/// Per-triplet hinge: max(0, d_ap - d_an + margin). The hinge is exactly zero
/// on the negative boundary d_an == d_ap + margin.
double triplet_hinge(double d_ap, double d_an, double margin);

/// Discriminative label-space term: (1/n)||audio - onehot||_F +
/// (1/n)||visual - onehot||_F with the un-squared Frobenius norm taken over
/// the whole n x c residual.
double label_loss(const Matrix& audio_emb, const Matrix& visual_emb, const Matrix& onehot);

struct LabelLossGrad {
  double value = 0.0;
  Matrix grad_audio;
  Matrix grad_visual;
};

/// Value plus d/d(embeddings). At an exactly-zero residual the gradient is
/// the zero subgradient.
LabelLossGrad label_loss_with_grad(const Matrix& audio_emb, const Matrix& visual_emb,
                                   const Matrix& onehot);

struct CrossTripletOptions {
  double margin = 1.0;
  Distance distance = Distance::squared_euclidean;  // cosine rejected
  Reduction reduction = Reduction::mean;
  /// Literal one-max reading: a single max(0, .) wrapped around the reduced
  /// sum of raw triplet terms, instead of one hinge per triplet.
  bool eq3_literal = false;
  TripletStrategy strategy = TripletStrategy::all();
};

struct CrossTripletResult {
  double value = 0.0;
  /// Triplets whose raw term d_ap - d_an + margin is strictly positive.
  std::size_t active_count = 0;
  std::size_t triplet_count = 0;
  /// Set when the batch admits no triplets at all (single class, or no
  /// admissible positives anywhere). The value is 0 in that case, not an
  /// error.
  bool no_triplets = false;
};

/// Ranking term over every pattern in `combos`, triplets built per the
/// strategy, hinge applied per triplet (or once around the sum under
/// eq3_literal) and reduced by mean (default) or sum over all enumerated
/// triplets across the whole set.
CrossTripletResult cross_triplet_loss(const Matrix& audio_emb, const Matrix& visual_emb,
                                      std::span<const std::uint32_t> labels,
                                      const CombinationSet& combos,
                                      const CrossTripletOptions& opts);

struct CrossTripletGrad : CrossTripletResult {
  Matrix grad_audio;
  Matrix grad_visual;
};

CrossTripletGrad cross_triplet_loss_with_grad(const Matrix& audio_emb,
                                              const Matrix& visual_emb,
                                              std::span<const std::uint32_t> labels,
                                              const CombinationSet& combos,
                                              const CrossTripletOptions& opts);

struct LossBreakdown {
  double label_loss = 0.0;
  double cross_triplet_loss = 0.0;
  double total = 0.0;  // exact sum of the two components
  std::size_t active_triplet_count = 0;
  std::size_t triplet_count = 0;
  bool cross_degenerate = false;
};

struct TotalLossOptions {
  CrossTripletOptions cross;
  double label_weight = 1.0;
  double cross_weight = 1.0;
};

/// Full objective. Components are stored after weighting so that
/// total == label_loss + cross_triplet_loss holds exactly. A zero
/// cross_weight skips triplet work entirely.
LossBreakdown total_loss(const Matrix& audio_emb, const Matrix& visual_emb,
                         std::span<const std::uint32_t> labels, const Matrix& onehot,
                         const CombinationSet& combos, const TotalLossOptions& opts);

struct TotalLossGrad {
  LossBreakdown breakdown;
  Matrix grad_audio;
  Matrix grad_visual;
};

TotalLossGrad total_loss_with_grad(const Matrix& audio_emb, const Matrix& visual_emb,
                                   std::span<const std::uint32_t> labels,
                                   const Matrix& onehot, const CombinationSet& combos,
                                   const TotalLossOptions& opts);

}  // namespace xtl
