#pragma once

// Sampling and descriptive statistics over the sample catalog: NDVI
// stratified point selection, certainty partitioning by product votes, type
// certainty, misclassification ratio and the stratified train/validation
// split.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "random.hpp"
#include "raster.hpp"
#include "samples.hpp"

namespace consensus {

struct StratifiedPoint {
  std::size_t row = 0;
  std::size_t col = 0;
  double lon = 0.0;
  double lat = 0.0;
  double ndvi = 0.0;
  int stratum = 0;
};

struct StratumSummary {
  double lo = 0.0;
  double hi = 0.0;
  bool closed_above = false;
  std::size_t available = 0;
  std::size_t selected = 0;
};

struct StratifiedSample {
  std::vector<StratifiedPoint> points;
  std::vector<StratumSummary> strata;
  std::vector<std::string> warnings;  // shortfall notes for under-populated strata
};

/// Equal-width NDVI strata over [-1, 1]. Stratum k is [lo_k, hi_k), the last
/// one is closed above so NDVI == 1 is covered.
class NdviStrata {
 public:
  explicit NdviStrata(int count) : count_(count) {
    require(count >= 1, ErrorKind::argument, "strata must be >= 1");
  }

  int count() const { return count_; }
  double lower(int k) const { return -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(count_); }
  double upper(int k) const { return k + 1 == count_ ? 1.0 : lower(k + 1); }

  std::optional<int> stratum_of(double v) const {
    if (!(v >= -1.0 && v <= 1.0)) return std::nullopt;
    int k = static_cast<int>(std::floor((v + 1.0) * static_cast<double>(count_) / 2.0));
    k = std::clamp(k, 0, count_ - 1);
    while (k > 0 && v < lower(k)) --k;
    while (k + 1 < count_ && v >= lower(k + 1)) ++k;
    return k;
  }

  bool contains(int k, double v) const {
    return v >= lower(k) && (k + 1 == count_ ? v <= upper(k) : v < upper(k));
  }

 private:
  int count_;
};

/// Picks up to `per_stratum` distinct pixels from each NDVI stratum inside the
/// region (mask value 1; no mask means the whole raster).
inline StratifiedSample stratified_sample(const Raster& ndvi, const Raster* region_mask, int strata,
                                          std::size_t per_stratum, std::uint64_t seed) {
  ndvi.validate();
  if (region_mask) require_aligned(ndvi, *region_mask, "stratified_sample");
  const NdviStrata bins(strata);
  std::vector<std::vector<std::size_t>> candidates(static_cast<std::size_t>(strata));
  for (std::size_t i = 0; i < ndvi.size(); ++i) {
    if (region_mask && (region_mask->is_nodata_at(i) || region_mask->values[i] != 1.0)) continue;
    const double v = ndvi.values[i];
    if (ndvi.is_nodata(v)) continue;
    if (auto k = bins.stratum_of(v)) candidates[static_cast<std::size_t>(*k)].push_back(i);
  }
  std::size_t total = 0;
  for (const auto& c : candidates) total += c.size();
  if (total == 0) fail(ErrorKind::empty_region, "stratified_sample: region has no valid NDVI pixel");

  StratifiedSample out;
  for (int k = 0; k < strata; ++k) {
    auto& pool = candidates[static_cast<std::size_t>(k)];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    const auto chosen = rng.choose(pool, per_stratum);
    StratumSummary summary{bins.lower(k), bins.upper(k), k + 1 == strata, pool.size(), chosen.size()};
    if (chosen.size() < per_stratum) {
      out.warnings.push_back("stratum " + std::to_string(k) + " [" + format_double(summary.lo) + ", " +
                             format_double(summary.hi) + ") has " + std::to_string(pool.size()) +
                             " pixels, fewer than " + std::to_string(per_stratum));
    }
    out.strata.push_back(summary);
    for (std::size_t i : chosen) {
      const std::size_t row = i / ndvi.ncols, col = i % ndvi.ncols;
      const auto c = ndvi.cell_center(row, col);
      out.points.push_back({row, col, c.lon, c.lat, ndvi.values[i], k});
    }
  }
  return out;
}

struct CertaintyPartition {
  std::vector<SampleId> certain_forest;     // votes 4 or 5
  std::vector<SampleId> certain_nonforest;  // votes 0
  std::vector<SampleId> uncertain;          // votes 2 or 3
  std::vector<SampleId> marginal;           // votes 1, never auto-labeled
};

enum class VoteCertainty { certain_forest, certain_nonforest, uncertain, marginal };

inline VoteCertainty vote_certainty(int product_votes) {
  if (product_votes < 0 || product_votes > kPriorProducts) fail(ErrorKind::data, "product votes out of range");
  if (product_votes >= 4) return VoteCertainty::certain_forest;
  if (product_votes == 0) return VoteCertainty::certain_nonforest;
  if (product_votes == 1) return VoteCertainty::marginal;
  return VoteCertainty::uncertain;
}

/// Splits samples by product votes and gives the certain ones their consensus
/// label. Human-confirmed samples keep their labels.
inline CertaintyPartition partition_by_certainty(std::span<SamplePoint> samples) {
  for (const auto& s : samples) vote_certainty(s.product_votes);
  CertaintyPartition p;
  for (auto& s : samples) {
    switch (vote_certainty(s.product_votes)) {
      case VoteCertainty::certain_forest:
        p.certain_forest.push_back(s.id);
        if (!s.confirmed) {
          s.current_label = BinaryLabel::forest;
          s.label_source = LabelSource::product_consensus;
        }
        break;
      case VoteCertainty::certain_nonforest:
        p.certain_nonforest.push_back(s.id);
        if (!s.confirmed) {
          s.current_label = BinaryLabel::non_forest;
          s.label_source = LabelSource::product_consensus;
        }
        break;
      case VoteCertainty::uncertain: p.uncertain.push_back(s.id); break;
      case VoteCertainty::marginal: p.marginal.push_back(s.id); break;
    }
  }
  return p;
}

/// Share of human-confirmed samples with the given product vote whose human
/// label is `cls`. `ecoregion` narrows the scope; absent means global.
inline double type_certainty(std::span<const SamplePoint> samples, int vote, BinaryLabel cls,
                             std::optional<int> ecoregion = std::nullopt) {
  std::size_t with_vote = 0, matching = 0;
  for (const auto& s : samples) {
    if (!s.confirmed || s.excluded || s.product_votes != vote) continue;
    if (ecoregion && s.ecoregion_id != *ecoregion) continue;
    ++with_vote;
    matching += s.current_label == cls;
  }
  if (with_vote == 0) fail(ErrorKind::undefined, "type_certainty: no confirmed sample with that vote in scope");
  return static_cast<double>(matching) / static_cast<double>(with_vote);
}

/// Share of samples of one true class that were predicted forest.
inline double ratio_mis_class(std::span<const LandCoverClass> true_classes, std::span<const BinaryLabel> predictions) {
  if (true_classes.empty()) fail(ErrorKind::undefined, "ratio_mis_class: empty class set");
  require(true_classes.size() == predictions.size(), ErrorKind::argument,
          "ratio_mis_class: predictions do not cover the samples");
  for (auto c : true_classes) {
    require(c == true_classes.front(), ErrorKind::argument, "ratio_mis_class: samples of more than one class");
  }
  const auto forest = std::count(predictions.begin(), predictions.end(), BinaryLabel::forest);
  return static_cast<double>(forest) / static_cast<double>(predictions.size());
}

struct LabeledId {
  SampleId id = 0;
  BinaryLabel label = BinaryLabel::non_forest;
};

struct TrainValSplit {
  std::vector<SampleId> train;
  std::vector<SampleId> validation;
};

/// Class-stratified split with |train| = round(train_fraction * n). Per-class
/// quotas come from largest-remainder rounding so each class is within one
/// sample of its exact share.
inline TrainValSplit split_train_val(std::span<const LabeledId> samples, double train_fraction, std::uint64_t seed) {
  require(samples.size() >= 10, ErrorKind::argument, "split_train_val: need at least 10 samples");
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorKind::argument, "train fraction must be in (0,1)");
  std::vector<SampleId> by_class[2];
  for (const auto& s : samples) by_class[static_cast<int>(s.label)].push_back(s.id);
  const auto n = static_cast<double>(samples.size());
  const auto target = static_cast<std::size_t>(std::llround(train_fraction * n));
  std::size_t quota[2];
  double remainder[2];
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double exact = train_fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  while (assigned < target) {
    const int c = remainder[1] > remainder[0] ? 1 : 0;
    ++quota[c];
    remainder[c] = -1.0;
    ++assigned;
  }
  TrainValSplit split;
  Rng rng(seed);
  for (int c = 0; c < 2; ++c) {
    auto ids = by_class[c];
    rng.shuffle(ids);
    split.train.insert(split.train.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(quota[c]));
    split.validation.insert(split.validation.end(), ids.begin() + static_cast<std::ptrdiff_t>(quota[c]), ids.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

}  // namespace consensus
