#include "xtl/triplets.hpp"

#include <algorithm>
#include <stdexcept>

namespace xtl {

namespace {
constexpr Modality A = Modality::audio;
constexpr Modality V = Modality::visual;
}  // namespace

std::string to_string(Modality m) { return m == A ? "audio" : "visual"; }

std::string to_string(const TripletPattern& p) {
  return "(" + to_string(p.anchor) + "," + to_string(p.positive) + "," +
         to_string(p.negative) + ")";
}

CombinationSet preset(PresetName name) {
  switch (name) {
    case PresetName::baseline1:
      return {"baseline1", {{A, A, A}, {V, V, V}}};
    case PresetName::baseline2:
      return {"baseline2", {{A, A, V}, {V, V, A}}};
    case PresetName::baseline3:
      return {"baseline3", {{A, V, V}, {V, A, A}}};
    case PresetName::baseline4:
      return {"baseline4", {{A, A, V}, {V, V, A}, {A, V, V}, {V, A, A}}};
    case PresetName::baseline5:
      return {"baseline5",
              {{A, A, A},
               {V, V, V},
               {A, A, V},
               {V, V, A},
               {A, V, V},
               {V, A, A},
               {A, V, A},
               {V, A, V}}};
    case PresetName::full:
      return {"full", {{A, A, V}, {V, V, A}, {A, V, V}, {V, A, A}, {A, V, A}, {V, A, V}}};
  }
  throw std::invalid_argument("unknown combination set preset");
}

PresetName preset_from_string(const std::string& s) {
  if (s == "baseline1") return PresetName::baseline1;
  if (s == "baseline2") return PresetName::baseline2;
  if (s == "baseline3") return PresetName::baseline3;
  if (s == "baseline4") return PresetName::baseline4;
  if (s == "baseline5") return PresetName::baseline5;
  if (s == "full") return PresetName::full;
  throw std::invalid_argument("unknown combination set: " + s);
}

std::string to_string(PresetName name) { return preset(name).name; }

const std::vector<PresetName>& all_presets() {
  static const std::vector<PresetName> names = {
      PresetName::baseline1, PresetName::baseline2, PresetName::baseline3,
      PresetName::baseline4, PresetName::baseline5, PresetName::full};
  return names;
}

namespace detail {

LabelBuckets::LabelBuckets(std::span<const std::uint32_t> labels) {
  std::uint32_t max_label = 0;
  for (std::uint32_t l : labels) max_label = std::max(max_label, l);
  num_classes = labels.empty() ? 0 : static_cast<std::size_t>(max_label) + 1;
  by_class.assign(num_classes, {});
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  not_class.assign(num_classes, {});
  for (std::size_t c = 0; c < num_classes; ++c) {
    not_class[c].reserve(labels.size() - by_class[c].size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != c) not_class[c].push_back(i);
    }
  }
}

}  // namespace detail

std::vector<IndexTriplet> enumerate_triplets(std::span<const std::uint32_t> labels,
                                             TripletPattern pattern,
                                             const TripletStrategy& strategy) {
  detail::LabelBuckets buckets(labels);
  std::vector<IndexTriplet> out;
  for_each_triplet(buckets, labels, pattern, strategy,
                   [&](std::size_t a, std::size_t p, std::size_t n) {
                     out.push_back({a, p, n});
                   });
  return out;
}

}  // namespace xtl
