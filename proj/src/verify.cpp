#include "xtl/verify.hpp"

#include <cmath>
#include <stdexcept>

#include "xtl/data.hpp"
#include "xtl/gradcheck.hpp"
#include "xtl/losses.hpp"
#include "xtl/model.hpp"
#include "xtl/rng.hpp"

namespace xtl {

namespace {

constexpr double kFiniteDiffEps = 1e-5;
// Rejection radii for the difference stencil. A parameter step of
// kFiniteDiffEps moves pre-activations and triplet margins by a few times
// that, so points closer than these to a kink are redrawn.
constexpr double kReluKinkRadius = 1e-4;
constexpr double kHingeKinkRadius = 1e-3;

std::vector<double> flatten(const DualParams& params) {
  std::vector<double> out;
  for (const BranchParams* b : {&params.audio, &params.visual}) {
    for (const LayerParams& l : b->layers) {
      out.insert(out.end(), l.weight.data().begin(), l.weight.data().end());
      out.insert(out.end(), l.bias.data().begin(), l.bias.data().end());
    }
  }
  return out;
}

void unflatten(const std::vector<double>& theta, DualParams& params) {
  std::size_t pos = 0;
  for (BranchParams* b : {&params.audio, &params.visual}) {
    for (LayerParams& l : b->layers) {
      std::copy(theta.begin() + pos, theta.begin() + pos + l.weight.size(),
                l.weight.data().begin());
      pos += l.weight.size();
      std::copy(theta.begin() + pos, theta.begin() + pos + l.bias.size(),
                l.bias.data().begin());
      pos += l.bias.size();
    }
  }
}

std::vector<double> flatten(const DualGrads& grads) {
  std::vector<double> out;
  for (const BranchGrads* b : {&grads.audio, &grads.visual}) {
    for (const LayerGrads& l : b->layers) {
      out.insert(out.end(), l.weight.data().begin(), l.weight.data().end());
      out.insert(out.end(), l.bias.data().begin(), l.bias.data().end());
    }
  }
  return out;
}

std::string param_name(const DualParams& params, std::size_t flat_index) {
  std::size_t pos = 0;
  const char* branch_names[] = {"audio", "visual"};
  int bi = 0;
  for (const BranchParams* b : {&params.audio, &params.visual}) {
    for (std::size_t li = 0; li < b->layers.size(); ++li) {
      const LayerParams& l = b->layers[li];
      if (flat_index < pos + l.weight.size()) {
        const std::size_t off = flat_index - pos;
        return std::string(branch_names[bi]) + ".layer" + std::to_string(li) + ".W[" +
               std::to_string(off / l.weight.cols()) + "," +
               std::to_string(off % l.weight.cols()) + "]";
      }
      pos += l.weight.size();
      if (flat_index < pos + l.bias.size()) {
        return std::string(branch_names[bi]) + ".layer" + std::to_string(li) + ".b[" +
               std::to_string(flat_index - pos) + "]";
      }
      pos += l.bias.size();
    }
    ++bi;
  }
  return "param[" + std::to_string(flat_index) + "]";
}

struct CheckPoint {
  EncoderConfig cfg;
  DualParams params;
  Matrix audio_x;
  Matrix visual_x;
  std::vector<std::uint32_t> labels;
  Matrix onehot;
};

double min_abs_preactivation(const BranchParams& branch, const Matrix& x) {
  double min_abs = std::numeric_limits<double>::infinity();
  Matrix h = x;
  for (std::size_t i = 0; i + 1 < branch.layers.size(); ++i) {
    Matrix z = matmul(h, branch.layers[i].weight);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      for (std::size_t c = 0; c < z.cols(); ++c) {
        z(r, c) += branch.layers[i].bias(0, c);
        min_abs = std::min(min_abs, std::abs(z(r, c)));
      }
    }
    h = relu(z);
  }
  return min_abs;
}

// Distance of the closest triplet raw term (and their reduced sum) to the
// hinge kink, over all six patterns of the full set.
double min_abs_hinge_raw(const Matrix& emb_a, const Matrix& emb_v,
                         const std::vector<std::uint32_t>& labels, double margin,
                         double* reduced_sum_out) {
  const CombinationSet combos = preset(PresetName::full);
  const Matrix tables[2][2] = {{pairwise_sq_dist(emb_a, emb_a), pairwise_sq_dist(emb_a, emb_v)},
                               {pairwise_sq_dist(emb_v, emb_a), pairwise_sq_dist(emb_v, emb_v)}};
  auto idx = [](Modality m) { return m == Modality::audio ? 0 : 1; };
  double min_abs = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  std::size_t count = 0;
  for (const TripletPattern& pattern : combos.patterns) {
    const Matrix& d_pos = tables[idx(pattern.anchor)][idx(pattern.positive)];
    const Matrix& d_neg = tables[idx(pattern.anchor)][idx(pattern.negative)];
    for (const IndexTriplet& t :
         enumerate_triplets(labels, pattern, TripletStrategy::all())) {
      const double raw = d_pos(t.anchor, t.positive) - d_neg(t.anchor, t.negative) + margin;
      min_abs = std::min(min_abs, std::abs(raw));
      sum += raw;
      ++count;
    }
  }
  if (reduced_sum_out != nullptr) {
    *reduced_sum_out = count > 0 ? sum / static_cast<double>(count) : 0.0;
  }
  return min_abs;
}

CheckPoint draw_check_point(const std::vector<std::size_t>& widths, std::uint64_t seed) {
  CheckPoint pt;
  pt.cfg.audio_dim = 6;
  pt.cfg.visual_dim = 7;
  pt.cfg.hidden = widths;
  pt.cfg.label_dim = 4;
  pt.cfg.activation = Activation::relu;
  pt.labels = {0, 0, 1, 1, 2, 2};
  pt.onehot = one_hot_rows(pt.labels, pt.cfg.label_dim);

  for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
    pt.cfg.init_seed = seed * 1000003 + attempt;
    pt.params = init_params(pt.cfg);
    Rng rng(pt.cfg.init_seed ^ 0x9e3779b97f4a7c15ULL);
    pt.audio_x = Matrix(pt.labels.size(), pt.cfg.audio_dim);
    for (double& v : pt.audio_x.data()) v = rng.gaussian();
    pt.visual_x = Matrix(pt.labels.size(), pt.cfg.visual_dim);
    for (double& v : pt.visual_x.data()) v = rng.gaussian();

    if (min_abs_preactivation(pt.params.audio, pt.audio_x) < kReluKinkRadius) continue;
    if (min_abs_preactivation(pt.params.visual, pt.visual_x) < kReluKinkRadius) continue;
    const Matrix emb_a = forward(pt.params.audio, pt.audio_x, pt.cfg.activation);
    const Matrix emb_v = forward(pt.params.visual, pt.visual_x, pt.cfg.activation);
    double reduced = 0.0;
    if (min_abs_hinge_raw(emb_a, emb_v, pt.labels, 1.0, &reduced) < kHingeKinkRadius) {
      continue;
    }
    if (std::abs(reduced) < kHingeKinkRadius) continue;
    return pt;
  }
  throw std::runtime_error("gradcheck: could not find a kink-free evaluation point");
}

enum class CheckCase { label, cross, cross_literal, total };

const char* case_name(CheckCase c) {
  switch (c) {
    case CheckCase::label: return "label_loss";
    case CheckCase::cross: return "cross_triplet(full)";
    case CheckCase::cross_literal: return "cross_triplet(full,literal)";
    case CheckCase::total: return "total_loss";
  }
  return "?";
}

GradCheckRow check_case(CheckCase which, const CheckPoint& pt, double tolerance,
                        bool corrupt) {
  const CombinationSet combos = preset(PresetName::full);
  CrossTripletOptions cross_opts;
  cross_opts.eq3_literal = which == CheckCase::cross_literal;
  TotalLossOptions total_opts;
  total_opts.cross = cross_opts;

  auto loss_value = [&](const Matrix& emb_a, const Matrix& emb_v) {
    switch (which) {
      case CheckCase::label:
        return label_loss(emb_a, emb_v, pt.onehot);
      case CheckCase::cross:
      case CheckCase::cross_literal:
        return cross_triplet_loss(emb_a, emb_v, pt.labels, combos, cross_opts).value;
      case CheckCase::total:
        return total_loss(emb_a, emb_v, pt.labels, pt.onehot, combos, total_opts).total;
    }
    return 0.0;
  };

  // Analytic route: loss gradient w.r.t. embeddings, chained through backward.
  ForwardCache cache_a, cache_v;
  const Matrix emb_a = forward(pt.params.audio, pt.audio_x, pt.cfg.activation, &cache_a);
  const Matrix emb_v = forward(pt.params.visual, pt.visual_x, pt.cfg.activation, &cache_v);
  Matrix g_emb_a, g_emb_v;
  switch (which) {
    case CheckCase::label: {
      const LabelLossGrad g = label_loss_with_grad(emb_a, emb_v, pt.onehot);
      g_emb_a = g.grad_audio;
      g_emb_v = g.grad_visual;
      break;
    }
    case CheckCase::cross:
    case CheckCase::cross_literal: {
      const CrossTripletGrad g =
          cross_triplet_loss_with_grad(emb_a, emb_v, pt.labels, combos, cross_opts);
      g_emb_a = g.grad_audio;
      g_emb_v = g.grad_visual;
      break;
    }
    case CheckCase::total: {
      const TotalLossGrad g =
          total_loss_with_grad(emb_a, emb_v, pt.labels, pt.onehot, combos, total_opts);
      g_emb_a = g.grad_audio;
      g_emb_v = g.grad_visual;
      break;
    }
  }
  DualGrads analytic_grads;
  analytic_grads.audio = backward(pt.params.audio, cache_a, g_emb_a);
  analytic_grads.visual = backward(pt.params.visual, cache_v, g_emb_v);
  std::vector<double> analytic = flatten(analytic_grads);
  if (corrupt && !analytic.empty()) analytic[0] += 1e-2;

  // Numeric route: central differences through the whole composition.
  const std::vector<double> theta = flatten(pt.params);
  DualParams scratch = pt.params;
  const auto f = [&](const std::vector<double>& point) {
    unflatten(point, scratch);
    const Matrix a = forward(scratch.audio, pt.audio_x, pt.cfg.activation);
    const Matrix v = forward(scratch.visual, pt.visual_x, pt.cfg.activation);
    return loss_value(a, v);
  };
  const std::vector<double> numeric = finite_diff_gradient(f, theta, kFiniteDiffEps);

  GradCheckRow row;
  row.case_name = case_name(which);
  row.max_rel_err = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double denom = std::abs(analytic[k]) + std::abs(numeric[k]);
    if (denom < 1e-8) continue;  // both effectively zero
    const double rel = std::abs(analytic[k] - numeric[k]) / denom;
    if (rel > row.max_rel_err) {
      row.max_rel_err = rel;
      row.worst_param = param_name(pt.params, k);
    }
  }
  row.pass = row.max_rel_err < tolerance;
  return row;
}

}  // namespace

std::vector<GradCheckRow> run_gradcheck(const GradCheckOptions& opts) {
  std::vector<GradCheckRow> rows;
  for (const std::uint64_t seed : opts.seeds) {
    const CheckPoint pt = draw_check_point(opts.widths, seed);
    for (const CheckCase which :
         {CheckCase::label, CheckCase::cross, CheckCase::cross_literal, CheckCase::total}) {
      GradCheckRow row = check_case(which, pt, opts.tolerance, opts.corrupt);
      row.seed = seed;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

bool gradcheck_passed(const std::vector<GradCheckRow>& rows) {
  for (const GradCheckRow& row : rows) {
    if (!row.pass) return false;
  }
  return true;
}

}  // namespace xtl
