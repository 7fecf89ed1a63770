#pragma once

// K-fold classifier ensemble and the pooled vote over classifiers and prior
// products.

#include <algorithm>
#include <array>
#include <numeric>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "forest.hpp"
#include "land_cover.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "samples.hpp"

namespace consensus {

/// What one classifier sees for a sample: the tabular feature vector and the
/// summary of its image patch.
struct ClassifierInput {
  std::span<const double> tabular;
  std::span<const double> patch;
};

enum class ClassifierFamily { patch, tabular };

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual BinaryLabel predict(const ClassifierInput& input) const = 0;
  virtual ClassifierFamily family() const = 0;
  virtual std::string architecture_id() const = 0;
};

class ForestClassifier final : public Classifier {
 public:
  ForestClassifier(DecisionForest forest, ClassifierFamily family, std::string architecture)
      : forest_(std::move(forest)), family_(family), architecture_(std::move(architecture)) {}

  BinaryLabel predict(const ClassifierInput& input) const override {
    const auto x = family_ == ClassifierFamily::tabular ? input.tabular : input.patch;
    return forest_.predict(x) == 1 ? BinaryLabel::forest : BinaryLabel::non_forest;
  }
  ClassifierFamily family() const override { return family_; }
  std::string architecture_id() const override { return architecture_; }
  const DecisionForest& forest() const { return forest_; }

 private:
  DecisionForest forest_;
  ClassifierFamily family_;
  std::string architecture_;
};

/// A patch-classifier family. Different ids may disagree; the same spec,
/// data and seed always give the same model.
struct PatchClassifierSpec {
  std::string architecture_id;
  ForestParams params;
};

/// Trains one patch classifier from patch summaries. The default trainer fits
/// a decision forest with the spec's hyperparameters.
using PatchTrainer = std::function<std::shared_ptr<const Classifier>(
    const PatchClassifierSpec&, const FeatureTable& patch_features, std::span<const int> labels, std::uint64_t seed)>;

inline std::shared_ptr<const Classifier> train_summary_patch_classifier(const PatchClassifierSpec& spec,
                                                                        const FeatureTable& patch_features,
                                                                        std::span<const int> labels,
                                                                        std::uint64_t seed) {
  return std::make_shared<ForestClassifier>(DecisionForest::train(patch_features, labels, spec.params, seed),
                                            ClassifierFamily::patch, spec.architecture_id);
}

/// Two reference architectures: a deep forest on few features per split and
/// a shallow one looking at more features per split.
inline std::vector<PatchClassifierSpec> reference_patch_architectures(int n_trees = 100) {
  return {
      {"summary-forest-deep", ForestParams{n_trees, 12, 2, 0}},
      {"summary-forest-shallow", ForestParams{n_trees, 6, 4, 8}},
  };
}

struct EnsembleSpec {
  int folds = 8;              // K
  int tabular_models = 8;     // M
  int n_products = 5;
  std::vector<PatchClassifierSpec> architectures = reference_patch_architectures();
  ForestParams tabular_params{};
  int max_fold_retries = 16;

  static constexpr int kPatchModelsPerFold = 2;

  int n_classifiers() const { return kPatchModelsPerFold * folds + tabular_models; }
  int v_num() const { return n_classifiers() + n_products; }

  void validate() const {
    require(folds >= 2, ErrorKind::argument, "ensemble needs K >= 2");
    require(tabular_models >= 0 && n_products >= 0, ErrorKind::argument, "ensemble counts must be non-negative");
    require(!architectures.empty(), ErrorKind::argument, "ensemble needs at least one patch architecture");
  }
};

struct TrainedEnsemble {
  EnsembleSpec spec;
  std::vector<std::shared_ptr<const Classifier>> classifiers;  // 2K patch models, then M tabular
  std::vector<int> classifier_fold;                              // held-out fold of each classifier
  std::vector<int> sample_fold;                                  // fold of each training row
};

/// Trains 2 patch models per fold and M tabular models on out-of-fold rows.
/// Patch slots cycle through `spec.architectures`; tabular model m uses fold
/// m mod K. Every model draws from its own seed stream.
inline TrainedEnsemble train_kfold_ensemble(const FeatureTable& tabular, const FeatureTable& patch,
                                            std::span<const int> labels, const EnsembleSpec& spec,
                                            std::uint64_t seed, std::size_t jobs = 1,
                                            const PatchTrainer& patch_trainer = train_summary_patch_classifier) {
  spec.validate();
  const std::size_t n = labels.size();
  require(tabular.rows() == n && patch.rows() == n, ErrorKind::argument, "ensemble: feature rows do not match labels");
  const auto k_folds = static_cast<std::size_t>(spec.folds);
  if (n < k_folds) fail(ErrorKind::ensemble, "ensemble: fewer samples than folds");

  std::size_t class_total[2] = {0, 0};
  for (int l : labels) {
    require(l == 0 || l == 1, ErrorKind::argument, "ensemble: labels must be binary");
    ++class_total[l];
  }

  TrainedEnsemble out;
  out.spec = spec;
  Rng fold_rng(derive_seed(seed, 0xf01d));
  bool ok = false;
  for (int attempt = 0; attempt < spec.max_fold_retries && !ok; ++attempt) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    fold_rng.shuffle(order);
    out.sample_fold.assign(n, 0);
    std::vector<std::array<std::size_t, 2>> in_fold(k_folds, {0, 0});
    for (std::size_t i = 0; i < n; ++i) {
      const auto fold = i % k_folds;
      out.sample_fold[order[i]] = static_cast<int>(fold);
      ++in_fold[fold][static_cast<std::size_t>(labels[order[i]])];
    }
    ok = std::all_of(in_fold.begin(), in_fold.end(), [&](const auto& c) {
      return class_total[0] > c[0] && class_total[1] > c[1];
    });
  }
  if (!ok) fail(ErrorKind::ensemble, "ensemble: could not find folds with both classes in every training portion");

  struct Job {
    ClassifierFamily family;
    int fold;
    std::size_t architecture;
    std::uint64_t seed;
  };
  std::vector<Job> jobs_list;
  for (int k = 0; k < spec.folds; ++k) {
    for (int s = 0; s < EnsembleSpec::kPatchModelsPerFold; ++s) {
      const auto slot = static_cast<std::uint64_t>(k * EnsembleSpec::kPatchModelsPerFold + s);
      jobs_list.push_back({ClassifierFamily::patch, k, static_cast<std::size_t>(s) % spec.architectures.size(),
                           derive_seed(seed, 1000 + slot)});
    }
  }
  for (int m = 0; m < spec.tabular_models; ++m) {
    jobs_list.push_back({ClassifierFamily::tabular, m % spec.folds, 0, derive_seed(seed, 2000 + static_cast<std::uint64_t>(m))});
  }

  out.classifiers.resize(jobs_list.size());
  out.classifier_fold.resize(jobs_list.size());
  parallel_for(jobs_list.size(), jobs, [&](std::size_t j) {
    const Job& job = jobs_list[j];
    const FeatureTable& source = job.family == ClassifierFamily::tabular ? tabular : patch;
    FeatureTable train(source.n_features);
    std::vector<int> train_labels;
    for (std::size_t i = 0; i < n; ++i) {
      if (out.sample_fold[i] == job.fold) continue;
      train.add_row(source.row(i));
      train_labels.push_back(labels[i]);
    }
    if (job.family == ClassifierFamily::tabular) {
      out.classifiers[j] = std::make_shared<ForestClassifier>(
          DecisionForest::train(train, train_labels, spec.tabular_params, job.seed), ClassifierFamily::tabular,
          "tabular-forest");
    } else {
      out.classifiers[j] = patch_trainer(spec.architectures[job.architecture], train, train_labels, job.seed);
    }
    out.classifier_fold[j] = job.fold;
  });
  return out;
}

struct VoteRecord {
  SampleId sample_id = 0;
  std::vector<BinaryLabel> classifier_votes;
  int product_votes = 0;
  int v_forest = 0;
  int v_nonforest = 0;
  int v_num = 0;
  int v_max = 0;
  BinaryLabel voted_class = BinaryLabel::non_forest;
};

/// Pools classifier votes with the product votes. Ties go to non-forest.
inline VoteRecord tally_votes(SampleId id, std::span<const BinaryLabel> classifier_votes, int product_votes,
                              const EnsembleSpec& spec) {
  if (static_cast<int>(classifier_votes.size()) != spec.n_classifiers()) {
    fail(ErrorKind::spec_mismatch, "ensemble_votes: expected " + std::to_string(spec.n_classifiers()) +
                                       " classifiers, got " + std::to_string(classifier_votes.size()));
  }
  require(product_votes >= 0 && product_votes <= spec.n_products, ErrorKind::argument,
          "ensemble_votes: product votes out of range");
  VoteRecord v;
  v.sample_id = id;
  v.classifier_votes.assign(classifier_votes.begin(), classifier_votes.end());
  v.product_votes = product_votes;
  v.v_num = spec.v_num();
  v.v_forest = static_cast<int>(std::count(classifier_votes.begin(), classifier_votes.end(), BinaryLabel::forest)) +
               product_votes;
  v.v_nonforest = v.v_num - v.v_forest;
  v.voted_class = v.v_forest > v.v_nonforest ? BinaryLabel::forest : BinaryLabel::non_forest;
  v.v_max = std::max(v.v_forest, v.v_nonforest);
  return v;
}

inline VoteRecord ensemble_votes(std::span<const std::shared_ptr<const Classifier>> classifiers,
                                 const EnsembleSpec& spec, SampleId id, const ClassifierInput& input,
                                 int product_votes) {
  std::vector<BinaryLabel> votes;
  votes.reserve(classifiers.size());
  for (const auto& c : classifiers) votes.push_back(c->predict(input));
  return tally_votes(id, votes, product_votes, spec);
}

inline VoteRecord ensemble_votes(const TrainedEnsemble& ensemble, SampleId id, const ClassifierInput& input,
                                 int product_votes) {
  return ensemble_votes(ensemble.classifiers, ensemble.spec, id, input, product_votes);
}

}  // namespace consensus
