#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xtl/rng.hpp"

namespace xtl {

enum class Modality : std::uint8_t { audio, visual };

std::string to_string(Modality m);

/// Modality assignment for the (anchor, positive, negative) slots of a
/// triplet. A "cross" pattern is one where the three slots are not all the
/// same modality.
struct TripletPattern {
  Modality anchor;
  Modality positive;
  Modality negative;

  bool operator==(const TripletPattern&) const = default;
  bool is_cross() const {
    return !(anchor == positive && positive == negative);
  }
};

std::string to_string(const TripletPattern& p);

/// Named, ordered collection of patterns that together define which triplets
/// enter the loss.
struct CombinationSet {
  std::string name;
  std::vector<TripletPattern> patterns;
};

enum class PresetName { baseline1, baseline2, baseline3, baseline4, baseline5, full };

/// The ablation presets. baseline1 keeps every slot in one modality,
/// baseline2/3 each hold two cross patterns, baseline4 is their union,
/// baseline5 adds the same-modality pair on top of all eight orderings, and
/// full is the six-pattern cross set.
CombinationSet preset(PresetName name);
PresetName preset_from_string(const std::string& s);
std::string to_string(PresetName name);
const std::vector<PresetName>& all_presets();

struct IndexTriplet {
  std::size_t anchor;
  std::size_t positive;
  std::size_t negative;

  bool operator==(const IndexTriplet&) const = default;
  auto operator<=>(const IndexTriplet&) const = default;
};

/// Within-batch triplet construction. `all` walks every admissible triple in
/// lexicographic (anchor, positive, negative) index order; `sampled` draws at
/// most per_anchor admissible (positive, negative) pairs per anchor without
/// replacement, seeded, and emits them as a sorted subset of the `all` order.
struct TripletStrategy {
  enum class Kind { all, sampled } kind = Kind::all;
  std::size_t per_anchor = 16;
  std::uint64_t seed = 0;

  static TripletStrategy all() { return {}; }
  static TripletStrategy sampled(std::size_t per_anchor, std::uint64_t seed) {
    return {Kind::sampled, per_anchor, seed};
  }
};

namespace detail {

/// Index lists per class plus the complement list used for negatives; shared
/// by every pattern over one batch.
struct LabelBuckets {
  std::size_t num_classes = 0;
  std::vector<std::vector<std::size_t>> by_class;   // ascending indices
  std::vector<std::vector<std::size_t>> not_class;  // ascending indices

  explicit LabelBuckets(std::span<const std::uint32_t> labels);
};

}  // namespace detail

/// Calls fn(anchor, positive, negative) for every emitted triple. Every triple
/// satisfies label[anchor] == label[positive] and label[anchor] !=
/// label[negative]; when anchor and positive share a modality the indices must
/// differ, when they do not the paired sample (positive == anchor) is
/// admitted.
template <class Fn>
void for_each_triplet(const detail::LabelBuckets& buckets,
                      std::span<const std::uint32_t> labels, TripletPattern pattern,
                      const TripletStrategy& strategy, Fn&& fn) {
  const bool same_modality = pattern.anchor == pattern.positive;
  if (strategy.kind == TripletStrategy::Kind::all) {
    for (std::size_t a = 0; a < labels.size(); ++a) {
      const auto& positives = buckets.by_class[labels[a]];
      const auto& negatives = buckets.not_class[labels[a]];
      if (negatives.empty()) continue;
      for (std::size_t p : positives) {
        if (same_modality && p == a) continue;
        for (std::size_t n : negatives) fn(a, p, n);
      }
    }
    return;
  }
  Rng rng(strategy.seed);
  std::vector<std::size_t> picked;
  for (std::size_t a = 0; a < labels.size(); ++a) {
    const auto& positives = buckets.by_class[labels[a]];
    const auto& negatives = buckets.not_class[labels[a]];
    if (negatives.empty()) continue;
    // Admissible (positive, negative) pairs in lexicographic order, with the
    // anchor itself skipped for same-modality positives.
    std::vector<std::size_t> pos;
    pos.reserve(positives.size());
    for (std::size_t p : positives) {
      if (same_modality && p == a) continue;
      pos.push_back(p);
    }
    const std::size_t total = pos.size() * negatives.size();
    if (total == 0) continue;
    const std::size_t k = std::min(strategy.per_anchor, total);
    picked.clear();
    if (k == total) {
      for (std::size_t r = 0; r < total; ++r) picked.push_back(r);
    } else {
      // Floyd's sampling: k distinct ranks out of [0, total).
      for (std::size_t j = total - k; j < total; ++j) {
        const std::size_t t = rng.below(j + 1);
        bool seen = false;
        for (std::size_t v : picked) {
          if (v == t) {
            seen = true;
            break;
          }
        }
        picked.push_back(seen ? j : t);
      }
      std::sort(picked.begin(), picked.end());
    }
    for (std::size_t rank : picked) {
      fn(a, pos[rank / negatives.size()], negatives[rank % negatives.size()]);
    }
  }
}

/// Materialized form of for_each_triplet.
std::vector<IndexTriplet> enumerate_triplets(std::span<const std::uint32_t> labels,
                                             TripletPattern pattern,
                                             const TripletStrategy& strategy);

}  // namespace xtl
