#include "xtl/losses.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace xtl {

std::string to_string(Reduction r) { return r == Reduction::mean ? "mean" : "sum"; }

Reduction reduction_from_string(const std::string& s) {
  if (s == "mean") return Reduction::mean;
  if (s == "sum") return Reduction::sum;
  throw std::invalid_argument("unknown reduction: " + s);
}

double triplet_hinge(double d_ap, double d_an, double margin) {
  const double raw = d_ap - d_an + margin;
  return raw > 0.0 ? raw : 0.0;
}

namespace {

void check_embedding_shapes(const Matrix& audio_emb, const Matrix& visual_emb,
                            std::size_t n_labels) {
  if (audio_emb.rows() != visual_emb.rows() || audio_emb.cols() != visual_emb.cols()) {
    throw std::invalid_argument("embedding shapes disagree: " + shape_string(audio_emb) +
                                " vs " + shape_string(visual_emb));
  }
  if (audio_emb.rows() != n_labels) {
    throw std::invalid_argument("labels length " + std::to_string(n_labels) +
                                " does not match embedding rows " +
                                std::to_string(audio_emb.rows()));
  }
}

}  // namespace

double label_loss(const Matrix& audio_emb, const Matrix& visual_emb, const Matrix& onehot) {
  if (!audio_emb.same_shape(onehot) || !visual_emb.same_shape(onehot)) {
    throw std::invalid_argument("label_loss: shapes disagree: " + shape_string(audio_emb) +
                                ", " + shape_string(visual_emb) + ", onehot " +
                                shape_string(onehot));
  }
  const double n = static_cast<double>(onehot.rows());
  Matrix res_a = audio_emb;
  Matrix res_v = visual_emb;
  for (std::size_t k = 0; k < onehot.size(); ++k) {
    res_a.data()[k] -= onehot.data()[k];
    res_v.data()[k] -= onehot.data()[k];
  }
  return frobenius_norm(res_a) / n + frobenius_norm(res_v) / n;
}

LabelLossGrad label_loss_with_grad(const Matrix& audio_emb, const Matrix& visual_emb,
                                   const Matrix& onehot) {
  if (!audio_emb.same_shape(onehot) || !visual_emb.same_shape(onehot)) {
    throw std::invalid_argument("label_loss: shapes disagree: " + shape_string(audio_emb) +
                                ", " + shape_string(visual_emb) + ", onehot " +
                                shape_string(onehot));
  }
  const double n = static_cast<double>(onehot.rows());
  LabelLossGrad out;
  out.grad_audio = Matrix(onehot.rows(), onehot.cols());
  out.grad_visual = Matrix(onehot.rows(), onehot.cols());
  Matrix res_a = audio_emb;
  Matrix res_v = visual_emb;
  for (std::size_t k = 0; k < onehot.size(); ++k) {
    res_a.data()[k] -= onehot.data()[k];
    res_v.data()[k] -= onehot.data()[k];
  }
  const double norm_a = frobenius_norm(res_a);
  const double norm_v = frobenius_norm(res_v);
  out.value = norm_a / n + norm_v / n;
  // d/dA of (1/n)||A - Y||_F is (A - Y) / (n ||A - Y||_F); zero subgradient
  // at a zero residual.
  if (norm_a > 0.0) {
    const double inv = 1.0 / (n * norm_a);
    for (std::size_t k = 0; k < res_a.size(); ++k)
      out.grad_audio.data()[k] = res_a.data()[k] * inv;
  }
  if (norm_v > 0.0) {
    const double inv = 1.0 / (n * norm_v);
    for (std::size_t k = 0; k < res_v.size(); ++k)
      out.grad_visual.data()[k] = res_v.data()[k] * inv;
  }
  return out;
}

namespace {

// Shared machinery for the value-only and value+gradient cross-triplet paths.
// Distance tables and the index buckets are built once per call; the actual
// triplet walk accumulates either just the hinge sum or additionally the
// pairwise coefficient matrices that the gradient assembly needs.
class CrossTripletEval {
 public:
  CrossTripletEval(const Matrix& audio_emb, const Matrix& visual_emb,
                   std::span<const std::uint32_t> labels, const CombinationSet& combos,
                   const CrossTripletOptions& opts)
      : audio_(audio_emb),
        visual_(visual_emb),
        labels_(labels),
        combos_(combos),
        opts_(opts),
        buckets_(labels) {
    check_embedding_shapes(audio_emb, visual_emb, labels.size());
    if (!(opts.margin >= 0.0)) {
      throw std::invalid_argument("cross_triplet_loss: margin must be >= 0");
    }
    if (opts.distance == Distance::cosine) {
      throw std::invalid_argument("cross_triplet_loss: cosine distance is not a valid "
                                  "training metric here (use squared_euclidean or "
                                  "euclidean)");
    }
    if (combos.patterns.empty()) {
      throw std::invalid_argument("cross_triplet_loss: empty combination set");
    }
  }

  CrossTripletResult run(Matrix* grad_audio, Matrix* grad_visual) {
    CrossTripletResult result;
    result.triplet_count = count_triplets();
    if (result.triplet_count == 0) {
      result.no_triplets = true;
      return result;
    }
    const bool want_grad = grad_audio != nullptr;
    const double scale =
        opts_.reduction == Reduction::mean
            ? 1.0 / static_cast<double>(result.triplet_count)
            : 1.0;

    double accum = 0.0;  // hinge sum (per-triplet) or raw sum (literal)
    for (const TripletPattern& pattern : combos_.patterns) {
      const Matrix& d_pos = table(pattern.anchor, pattern.positive);
      const Matrix& d_neg = table(pattern.anchor, pattern.negative);
      Matrix* pos_coeff =
          want_grad ? &coeff(pos_coeff_, pattern.anchor, pattern.positive) : nullptr;
      Matrix* neg_coeff =
          want_grad ? &coeff(neg_coeff_, pattern.anchor, pattern.negative) : nullptr;
      for_each_triplet(
          buckets_, labels_, pattern, opts_.strategy,
          [&](std::size_t a, std::size_t p, std::size_t n) {
            const double d_ap = d_pos(a, p);
            const double d_an = d_neg(a, n);
            const double raw = d_ap - d_an + opts_.margin;
            if (raw > 0.0) ++result.active_count;
            if (opts_.eq3_literal) {
              accum += raw;
            } else if (raw > 0.0) {
              accum += raw;
            } else {
              return;  // inactive triplet: no loss, no gradient
            }
            if (want_grad) {
              (*pos_coeff)(a, p) += pair_weight(d_ap);
              (*neg_coeff)(a, n) += pair_weight(d_an);
            }
          });
    }

    if (opts_.eq3_literal) {
      result.value = std::max(0.0, accum * scale);
    } else {
      result.value = accum * scale;
    }
    if (want_grad) {
      // Under the literal reading the single hinge gates every contribution.
      const bool gate_open = !opts_.eq3_literal || result.value > 0.0;
      if (gate_open) assemble_gradients(scale, *grad_audio, *grad_visual);
    }
    return result;
  }

 private:
  const Matrix& emb(Modality m) const { return m == Modality::audio ? audio_ : visual_; }

  static std::size_t idx(Modality m) { return m == Modality::audio ? 0 : 1; }

  const Matrix& table(Modality m1, Modality m2) {
    auto& slot = tables_[idx(m1)][idx(m2)];
    if (!slot.has_value()) {
      Matrix t = pairwise_sq_dist(emb(m1), emb(m2));
      if (opts_.distance == Distance::euclidean) {
        for (double& v : t.data()) v = std::sqrt(v);
      }
      slot = std::move(t);
    }
    return *slot;
  }

  using CoeffGrid = std::array<std::array<std::optional<Matrix>, 2>, 2>;

  Matrix& coeff(CoeffGrid& grid, Modality m1, Modality m2) {
    auto& slot = grid[idx(m1)][idx(m2)];
    if (!slot.has_value()) slot = Matrix(labels_.size(), labels_.size());
    return *slot;
  }

  // d(sq_dist)/dx carries a factor 2 with unit pair weight; plain euclidean
  // folds the 1/d into the weight instead (zero at coincident points).
  double pair_weight(double d) const {
    if (opts_.distance == Distance::squared_euclidean) return 1.0;
    return d > 0.0 ? 1.0 / d : 0.0;
  }
  double grad_factor() const {
    return opts_.distance == Distance::squared_euclidean ? 2.0 : 1.0;
  }

  std::size_t count_triplets() const {
    std::size_t total = 0;
    for (const TripletPattern& pattern : combos_.patterns) {
      const bool same_modality = pattern.anchor == pattern.positive;
      for (std::size_t a = 0; a < labels_.size(); ++a) {
        const std::size_t pos =
            buckets_.by_class[labels_[a]].size() - (same_modality ? 1 : 0);
        const std::size_t neg = buckets_.not_class[labels_[a]].size();
        const std::size_t pairs = pos * neg;
        total += opts_.strategy.kind == TripletStrategy::Kind::all
                     ? pairs
                     : std::min(opts_.strategy.per_anchor, pairs);
      }
    }
    return total;
  }

  // Turns the accumulated pair coefficients into embedding gradients:
  //   anchor row a: +- f*s*(rowsum * x_a - (C*other)_a)
  //   other row j:  -+ f*s*((C^T * x)_j - colsum * other_j)
  // with C the positive (sign +) or negative (sign -) coefficient matrix.
  void assemble_gradients(double scale, Matrix& grad_audio, Matrix& grad_visual) {
    const double f = grad_factor() * scale;
    for (int side = 0; side < 2; ++side) {
      const CoeffGrid& grid = side == 0 ? pos_coeff_ : neg_coeff_;
      const double sign = side == 0 ? 1.0 : -1.0;
      for (int m1 = 0; m1 < 2; ++m1) {
        for (int m2 = 0; m2 < 2; ++m2) {
          const auto& slot = grid[m1][m2];
          if (!slot.has_value()) continue;
          const Matrix& c = *slot;
          const Matrix& x = m1 == 0 ? audio_ : visual_;
          const Matrix& y = m2 == 0 ? audio_ : visual_;
          Matrix& gx = m1 == 0 ? grad_audio : grad_visual;
          Matrix& gy = m2 == 0 ? grad_audio : grad_visual;

          const Matrix cy = matmul(c, y);
          const Matrix ct = transpose(c);
          const Matrix ctx = matmul(ct, x);
          for (std::size_t a = 0; a < c.rows(); ++a) {
            double rowsum = 0.0;
            for (std::size_t j = 0; j < c.cols(); ++j) rowsum += c(a, j);
            if (rowsum == 0.0) continue;
            for (std::size_t k = 0; k < x.cols(); ++k) {
              gx(a, k) += sign * f * (rowsum * x(a, k) - cy(a, k));
            }
          }
          for (std::size_t j = 0; j < c.cols(); ++j) {
            double colsum = 0.0;
            for (std::size_t a = 0; a < c.rows(); ++a) colsum += c(a, j);
            if (colsum == 0.0) continue;
            for (std::size_t k = 0; k < y.cols(); ++k) {
              gy(j, k) -= sign * f * (ctx(j, k) - colsum * y(j, k));
            }
          }
        }
      }
    }
  }

  const Matrix& audio_;
  const Matrix& visual_;
  std::span<const std::uint32_t> labels_;
  const CombinationSet& combos_;
  const CrossTripletOptions& opts_;
  detail::LabelBuckets buckets_;
  std::array<std::array<std::optional<Matrix>, 2>, 2> tables_;
  CoeffGrid pos_coeff_;
  CoeffGrid neg_coeff_;
};

}  // namespace

CrossTripletResult cross_triplet_loss(const Matrix& audio_emb, const Matrix& visual_emb,
                                      std::span<const std::uint32_t> labels,
                                      const CombinationSet& combos,
                                      const CrossTripletOptions& opts) {
  CrossTripletEval eval(audio_emb, visual_emb, labels, combos, opts);
  return eval.run(nullptr, nullptr);
}

CrossTripletGrad cross_triplet_loss_with_grad(const Matrix& audio_emb,
                                              const Matrix& visual_emb,
                                              std::span<const std::uint32_t> labels,
                                              const CombinationSet& combos,
                                              const CrossTripletOptions& opts) {
  CrossTripletGrad out;
  out.grad_audio = Matrix(audio_emb.rows(), audio_emb.cols());
  out.grad_visual = Matrix(visual_emb.rows(), visual_emb.cols());
  CrossTripletEval eval(audio_emb, visual_emb, labels, combos, opts);
  static_cast<CrossTripletResult&>(out) = eval.run(&out.grad_audio, &out.grad_visual);
  return out;
}

namespace {

void check_weights(const TotalLossOptions& opts) {
  if (!(opts.label_weight >= 0.0) || !(opts.cross_weight >= 0.0)) {
    throw std::invalid_argument("total_loss: component weights must be >= 0");
  }
}

}  // namespace

LossBreakdown total_loss(const Matrix& audio_emb, const Matrix& visual_emb,
                         std::span<const std::uint32_t> labels, const Matrix& onehot,
                         const CombinationSet& combos, const TotalLossOptions& opts) {
  check_weights(opts);
  LossBreakdown out;
  out.label_loss = opts.label_weight * label_loss(audio_emb, visual_emb, onehot);
  if (opts.cross_weight > 0.0) {
    const CrossTripletResult cross =
        cross_triplet_loss(audio_emb, visual_emb, labels, combos, opts.cross);
    out.cross_triplet_loss = opts.cross_weight * cross.value;
    out.active_triplet_count = cross.active_count;
    out.triplet_count = cross.triplet_count;
    out.cross_degenerate = cross.no_triplets;
  }
  out.total = out.label_loss + out.cross_triplet_loss;
  return out;
}

TotalLossGrad total_loss_with_grad(const Matrix& audio_emb, const Matrix& visual_emb,
                                   std::span<const std::uint32_t> labels,
                                   const Matrix& onehot, const CombinationSet& combos,
                                   const TotalLossOptions& opts) {
  check_weights(opts);
  TotalLossGrad out;
  out.grad_audio = Matrix(audio_emb.rows(), audio_emb.cols());
  out.grad_visual = Matrix(visual_emb.rows(), visual_emb.cols());

  if (opts.label_weight > 0.0) {
    const LabelLossGrad lab = label_loss_with_grad(audio_emb, visual_emb, onehot);
    out.breakdown.label_loss = opts.label_weight * lab.value;
    for (std::size_t k = 0; k < out.grad_audio.size(); ++k) {
      out.grad_audio.data()[k] += opts.label_weight * lab.grad_audio.data()[k];
      out.grad_visual.data()[k] += opts.label_weight * lab.grad_visual.data()[k];
    }
  } else {
    // Value still reported (weighted by zero it is exactly 0).
    out.breakdown.label_loss = 0.0;
  }

  if (opts.cross_weight > 0.0) {
    const CrossTripletGrad cross =
        cross_triplet_loss_with_grad(audio_emb, visual_emb, labels, combos, opts.cross);
    out.breakdown.cross_triplet_loss = opts.cross_weight * cross.value;
    out.breakdown.active_triplet_count = cross.active_count;
    out.breakdown.triplet_count = cross.triplet_count;
    out.breakdown.cross_degenerate = cross.no_triplets;
    for (std::size_t k = 0; k < out.grad_audio.size(); ++k) {
      out.grad_audio.data()[k] += opts.cross_weight * cross.grad_audio.data()[k];
      out.grad_visual.data()[k] += opts.cross_weight * cross.grad_visual.data()[k];
    }
  }

  out.breakdown.total = out.breakdown.label_loss + out.breakdown.cross_triplet_loss;
  return out;
}

}  // namespace xtl
