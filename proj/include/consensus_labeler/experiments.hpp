#pragma once

// Builds the composition and strategy experiment inputs from a synthetic
// world whose samples carry ground truth.

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "agreement.hpp"
#include "evaluation.hpp"
#include "sampling.hpp"
#include "synth_world.hpp"

namespace consensus {

struct CompositionInputs {
  std::vector<Example> certain;            // votes 0 or 4-5, consensus labels
  std::vector<Example> uncertain_labeled;  // votes 2-3, true labels
  std::vector<Example> eval;               // held-out samples in uncertain grids, true labels
  std::set<std::string> uncertain_grids;
};

inline std::vector<std::string> uncertain_grid_ids(const SyntheticWorld& world, double threshold = 0.3,
                                                   double min_valid = 0.10) {
  std::vector<std::string> out;
  for (const auto& g : classify_grids(world.agreement(), GridSpec(5.0), threshold, min_valid)) {
    if (g.label == GridCertainty::uncertain) out.push_back(g.grid_id.str());
  }
  return out;
}

/// 40% of the samples in uncertain grids are held out for evaluation; the
/// training pools never touch them.
inline CompositionInputs composition_inputs(const SyntheticWorld& world, const SyntheticWorld::SampleDraw& draw,
                                            std::uint64_t seed, double eval_fraction = 0.4) {
  CompositionInputs in;
  const auto grids = uncertain_grid_ids(world);
  in.uncertain_grids = {grids.begin(), grids.end()};

  std::vector<LabeledId> region;
  std::unordered_map<SampleId, const SamplePoint*> by_id;
  for (const auto& s : draw.samples) {
    by_id[s.id] = &s;
    const auto truth = binary_projection(draw.truth.at(s.id));
    if (truth && in.uncertain_grids.count(s.grid_id)) region.push_back({s.id, *truth});
  }
  require(region.size() >= 10, ErrorKind::experiment, "composition: too few samples in uncertain grids");
  const auto split = split_train_val(region, 1.0 - eval_fraction, derive_seed(seed, 31));
  const std::set<SampleId> held_out(split.validation.begin(), split.validation.end());

  auto with_label = [](const SamplePoint& s, BinaryLabel label) {
    auto e = example_from(s);
    e.label = label;
    return e;
  };
  for (auto id : split.validation) {
    const auto& s = *by_id.at(id);
    in.eval.push_back(with_label(s, *binary_projection(draw.truth.at(id))));
  }
  for (const auto& s : draw.samples) {
    if (held_out.count(s.id)) continue;
    const auto truth = binary_projection(draw.truth.at(s.id));
    if (!truth) continue;
    switch (vote_certainty(s.product_votes)) {
      case VoteCertainty::certain_forest: in.certain.push_back(with_label(s, BinaryLabel::forest)); break;
      case VoteCertainty::certain_nonforest: in.certain.push_back(with_label(s, BinaryLabel::non_forest)); break;
      case VoteCertainty::uncertain: in.uncertain_labeled.push_back(with_label(s, *truth)); break;
      case VoteCertainty::marginal: break;
    }
  }
  return in;
}

/// Every labelable sample with its true label.
inline std::vector<Example> truth_examples(const SyntheticWorld::SampleDraw& draw) {
  std::vector<Example> out;
  for (const auto& s : draw.samples) {
    const auto truth = binary_projection(draw.truth.at(s.id));
    if (!truth) continue;
    auto e = example_from(s);
    e.label = *truth;
    out.push_back(std::move(e));
  }
  return out;
}

/// Up to `count` grids with at least `min_samples` examples and both classes,
/// spread evenly over the sorted grid list.
inline std::vector<std::string> strategy_target_grids(std::span<const Example> examples, std::size_t count,
                                                      std::size_t min_samples = 60) {
  std::map<GridId, std::array<std::size_t, 2>> tally;
  for (const auto& e : examples) ++tally[GridId::parse(e.grid_id)][static_cast<std::size_t>(e.label)];
  std::vector<std::string> eligible;
  for (const auto& [id, c] : tally) {
    // need both classes in the 30% training share and in the evaluation share
    if (c[0] + c[1] >= min_samples && c[0] >= 10 && c[1] >= 10) eligible.push_back(id.str());
  }
  if (count == 0 || eligible.size() <= count) return eligible;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(eligible[i * eligible.size() / count]);
  return out;
}

}  // namespace consensus
