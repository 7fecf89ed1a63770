#pragma once

// Iterative semi-automatic labeling: batch selection, ensemble training,
// pooled voting, consistency routing, annotation resolution, correction and
// retraining, with labor accounting against the label-everything-three-times
// baseline.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ensemble.hpp"
#include "error.hpp"
#include "features.hpp"
#include "land_cover.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "samples.hpp"
#include "sampling.hpp"
#include "text.hpp"

namespace consensus {

enum class Consistency { consistent, inconsistent };

inline const char* to_string(Consistency c) { return c == Consistency::consistent ? "consistent" : "inconsistent"; }

/// Consistent iff v_max / v_num > lambda.
inline Consistency split_consistency(int v_max, int v_num, double lambda) {
  if (v_num <= 0) fail(ErrorKind::spec_mismatch, "split_consistency: v_num must be positive");
  require(v_max >= 0 && v_max <= v_num, ErrorKind::argument, "split_consistency: v_max out of range");
  return static_cast<double>(v_max) / static_cast<double>(v_num) > lambda ? Consistency::consistent
                                                                          : Consistency::inconsistent;
}

inline Consistency split_consistency(const VoteRecord& votes, double lambda) {
  return split_consistency(votes.v_max, votes.v_num, lambda);
}

inline int required_decisions(Consistency c) { return c == Consistency::consistent ? 1 : 3; }

using TaskId = std::uint64_t;

struct AnnotationTask {
  TaskId task_id = 0;
  SampleId sample_id = 0;
  BinaryLabel proposed_label = BinaryLabel::non_forest;
  std::string patch_ref;
  Consistency consistency = Consistency::consistent;
  int required_decisions = 1;
  std::vector<AnnotationRecord> decisions;
  std::optional<BinaryLabel> resolved_label;
  bool unlabelable = false;

  bool resolved() const { return resolved_label.has_value() || unlabelable; }

  bool decided_by(const std::string& annotator) const {
    return std::any_of(decisions.begin(), decisions.end(),
                       [&](const AnnotationRecord& r) { return r.annotator_id == annotator; });
  }
};

/// Appends one decision. A complete single task takes the binary projection
/// of its decision; a complete triple task takes the majority of the three
/// projections. Unlabelable wins when it is the single decision or at least
/// two of three; otherwise a 1-1 forest/non-forest split goes to non-forest.
inline AnnotationTask resolve_task(AnnotationTask task, const AnnotationRecord& decision) {
  if (task.resolved()) fail(ErrorKind::state, "task " + std::to_string(task.task_id) + " is already resolved");
  if (task.decided_by(decision.annotator_id)) {
    fail(ErrorKind::routing, "annotator " + decision.annotator_id + " already decided task " +
                                 std::to_string(task.task_id));
  }
  task.decisions.push_back(decision);
  if (static_cast<int>(task.decisions.size()) < task.required_decisions) return task;

  int forest = 0, non_forest = 0, unlabelable = 0;
  for (const auto& d : task.decisions) {
    const auto b = binary_projection(d.decided_class);
    if (!b) ++unlabelable;
    else if (*b == BinaryLabel::forest) ++forest;
    else ++non_forest;
  }
  if (unlabelable * 2 > static_cast<int>(task.decisions.size()) || (forest == 0 && non_forest == 0)) {
    task.unlabelable = true;
  } else {
    task.resolved_label = forest > non_forest ? BinaryLabel::forest : BinaryLabel::non_forest;
  }
  return task;
}

enum class IterationStatus { training, awaiting_annotation, complete };

inline const char* to_string(IterationStatus s) {
  switch (s) {
    case IterationStatus::training: return "training";
    case IterationStatus::awaiting_annotation: return "awaiting_annotation";
    case IterationStatus::complete: return "complete";
  }
  return "?";
}

struct IterationState {
  int iteration_index = 0;
  std::vector<SampleId> batch;
  std::vector<SampleId> consistent_set;
  std::vector<SampleId> inconsistent_set;
  double lambda = 0.9;
  std::vector<AnnotationTask> tasks;  // inconsistent tasks first, then consistent
  std::vector<VoteRecord> votes;
  IterationStatus status = IterationStatus::complete;
  bool applied = false;

  std::size_t open_tasks() const {
    return static_cast<std::size_t>(std::count_if(tasks.begin(), tasks.end(), [](const auto& t) { return !t.resolved(); }));
  }
};

struct LaborLedger {
  std::size_t n_samples = 0;
  std::size_t n_consistent_total = 0;
  std::size_t n_inconsistent_total = 0;
  std::size_t annotations_performed = 0;
  std::size_t n_unlabelable = 0;

  std::size_t baseline() const { return 3 * n_samples; }
};

struct LaborReport {
  double saved_fraction_strict = 0.0;
  double saved_fraction_relaxed = 0.0;
};

/// Strict: every consistent sample checked once, inconsistent three times.
/// Relaxed: consistent samples taken without review.
inline LaborReport labor_report(std::size_t n_samples, std::size_t n_consistent, std::size_t n_inconsistent) {
  if (n_samples == 0) return {};
  const double baseline = 3.0 * static_cast<double>(n_samples);
  return {1.0 - (static_cast<double>(n_consistent) + 3.0 * static_cast<double>(n_inconsistent)) / baseline,
          1.0 - 3.0 * static_cast<double>(n_inconsistent) / baseline};
}

inline LaborReport labor_report(const LaborLedger& ledger) {
  return labor_report(ledger.n_samples, ledger.n_consistent_total, ledger.n_inconsistent_total);
}

struct IterationRecord {
  int iteration = 0;
  std::size_t batch_size = 0;
  std::size_t n_consistent = 0;
  std::size_t n_inconsistent = 0;
  std::size_t annotations = 0;
  std::size_t labels_flipped = 0;  // resolved label differs from the proposal
  std::size_t unlabelable = 0;
  std::size_t training_size = 0;

  double consistency_fraction() const {
    return batch_size == 0 ? 0.0 : static_cast<double>(n_consistent) / static_cast<double>(batch_size);
  }
};

inline void write_ledger_csv(std::ostream& out, std::span<const IterationRecord> records) {
  out << "iteration,batch_size,n_consistent,n_inconsistent,annotations,labels_flipped,unlabelable,training_size,"
         "consistency_fraction,cum_samples,cum_annotations,saved_fraction_strict,saved_fraction_relaxed\n";
  std::size_t samples = 0, cons = 0, incons = 0, annotations = 0;
  for (const auto& r : records) {
    samples += r.batch_size;
    cons += r.n_consistent;
    incons += r.n_inconsistent;
    annotations += r.annotations;
    const auto report = labor_report(samples, cons, incons);
    out << r.iteration << ',' << r.batch_size << ',' << r.n_consistent << ',' << r.n_inconsistent << ','
        << r.annotations << ',' << r.labels_flipped << ',' << r.unlabelable << ',' << r.training_size << ','
        << format_double(r.consistency_fraction()) << ',' << samples << ',' << annotations << ','
        << format_double(report.saved_fraction_strict) << ',' << format_double(report.saved_fraction_relaxed) << '\n';
  }
}

/// Decision source for one (sample, annotator) pair.
using AnnotatorFn = std::function<LandCoverClass(SampleId sample, const std::string& annotator_id)>;

/// Desk-scale stand-in for a human: answers the ground truth with probability
/// 1 - error_rate, otherwise a uniformly drawn other labelable class. Each
/// (sample, annotator) pair has its own stream, so answers do not depend on
/// call order.
inline AnnotatorFn simulated_annotator(std::unordered_map<SampleId, LandCoverClass> ground_truth, double error_rate,
                                       std::uint64_t seed) {
  require(error_rate >= 0.0 && error_rate < 1.0, ErrorKind::argument, "error rate must be in [0, 1)");
  auto truth = std::make_shared<const std::unordered_map<SampleId, LandCoverClass>>(std::move(ground_truth));
  return [truth, error_rate, seed](SampleId sample, const std::string& annotator) {
    auto it = truth->find(sample);
    if (it == truth->end()) fail(ErrorKind::not_found, "annotator has no ground truth for sample " + std::to_string(sample));
    const LandCoverClass correct = it->second;
    Rng rng(derive_seed(derive_seed(seed, sample), hash_string(annotator)));
    if (error_rate == 0.0 || !rng.bernoulli(error_rate)) return correct;
    std::vector<LandCoverClass> wrong;
    for (auto c : kAllClasses) {
      if (c != correct && c != LandCoverClass::unlabelable) wrong.push_back(c);
    }
    return wrong[rng.below(wrong.size())];
  };
}

struct LoopConfig {
  std::size_t batch_size = 10000;
  double lambda = 0.9;
  EnsembleSpec ensemble{};
  int max_iterations = 20;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;

  void validate() const {
    require(batch_size >= 1, ErrorKind::config, "batch_size must be >= 1");
    require(lambda >= 0.0 && lambda < 1.0, ErrorKind::config, "lambda must be in [0, 1)");
    require(max_iterations >= 1, ErrorKind::config, "max_iterations must be >= 1");
    ensemble.validate();
  }
};

struct SubmitResult {
  bool resolved = false;
  std::optional<BinaryLabel> resolved_label;
  bool unlabelable = false;
};

struct RunResult {
  LaborLedger ledger;
  std::vector<IterationRecord> iterations;
  bool complete = false;  // false when max_iterations stopped the run early
};

/// Computes the patch summary for a sample (usually by rendering its patch).
using PatchSummaryFn = std::function<std::vector<double>(const SamplePoint&)>;

/// Drives the labeling cycle over a sample store. Not thread-safe on its own;
/// callers serialise access (the store itself serialises its writes).
class LabelingLoop {
 public:
  LabelingLoop(SampleStore& store, const PatchSummaryFn& patch_summary, LoopConfig config,
               PatchTrainer patch_trainer = train_summary_patch_classifier)
      : store_(store), config_(std::move(config)), patch_trainer_(std::move(patch_trainer)) {
    config_.validate();
    state_.lambda = config_.lambda;
    // Patch summaries are fixed per sample; compute them once.
    const auto samples = store_.snapshot();
    std::vector<std::vector<double>> summaries(samples.size());
    parallel_for(samples.size(), config_.jobs, [&](std::size_t i) { summaries[i] = patch_summary(samples[i]); });
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      const auto tab = s.features.as_array();
      inputs_.emplace(s.id, Inputs{std::vector<double>(tab.begin(), tab.end()), std::move(summaries[i])});
    }
    initialize_labels();
  }

  const LoopConfig& config() const { return config_; }
  const IterationState& state() const { return state_; }
  const LaborLedger& ledger() const { return ledger_; }
  const std::vector<IterationRecord>& history() const { return history_; }
  bool ensemble_stale() const { return ensemble_stale_; }
  bool active() const { return state_.status == IterationStatus::awaiting_annotation; }
  bool started() const { return state_.iteration_index > 0; }

  /// True when every usable sample has been confirmed.
  bool pool_exhausted() const {
    return store_.read([](std::span<const SamplePoint> all) {
      return std::all_of(all.begin(), all.end(), [](const SamplePoint& s) { return s.confirmed || s.excluded; });
    });
  }

  void set_clock(std::function<std::int64_t()> clock) { clock_ = std::move(clock); }

  /// Starts the next iteration: draws a batch of unconfirmed samples, trains
  /// the ensemble on the current labels, votes, routes and emits tasks.
  const IterationState& run_iteration() {
    if (active()) fail(ErrorKind::state, "run_iteration: current iteration still awaits annotation");
    if (state_.status == IterationStatus::complete && !state_.tasks.empty() && !state_.applied) {
      fail(ErrorKind::state, "run_iteration: corrections of the previous iteration not applied");
    }
    IterationState next;
    next.lambda = config_.lambda;
    next.iteration_index = state_.iteration_index + 1;

    std::vector<SampleId> pool;
    TrainingSet train;
    store_.read([&](std::span<const SamplePoint> all) {
      for (const auto& s : all) {
        if (!s.confirmed && !s.excluded) pool.push_back(s.id);
      }
      train = training_set(all);
    });
    if (pool.empty()) {
      next.status = IterationStatus::complete;
      next.applied = true;
      state_ = std::move(next);
      return state_;
    }
    std::sort(pool.begin(), pool.end());
    Rng rng(derive_seed(config_.seed, 0xba7c4000ULL + static_cast<std::uint64_t>(next.iteration_index)));
    next.batch = rng.choose(std::move(pool), config_.batch_size);
    std::sort(next.batch.begin(), next.batch.end());

    next.status = IterationStatus::training;
    int labels_present[2] = {0, 0};
    for (int l : train.labels) labels_present[l] = 1;
    if (!labels_present[0] || !labels_present[1]) {
      fail(ErrorKind::iteration, "run_iteration: training labels contain a single class");
    }
    TrainedEnsemble ensemble;
    try {
      ensemble = train_kfold_ensemble(train.tabular, train.patch, train.labels, config_.ensemble,
                                      derive_seed(config_.seed, 0xe25e0000ULL + static_cast<std::uint64_t>(next.iteration_index)),
                                      config_.jobs, patch_trainer_);
    } catch (const Error& e) {
      fail(ErrorKind::iteration, std::string("run_iteration: ensemble training failed: ") + e.what());
    }
    ensemble_stale_ = false;
    last_training_size_ = train.labels.size();

    next.votes.resize(next.batch.size());
    std::vector<int> product_votes(next.batch.size());
    for (std::size_t i = 0; i < next.batch.size(); ++i) product_votes[i] = store_.get(next.batch[i]).product_votes;
    parallel_for(next.batch.size(), config_.jobs, [&](std::size_t i) {
      const auto& in = inputs_.at(next.batch[i]);
      next.votes[i] = ensemble_votes(ensemble, next.batch[i], {in.tabular, in.patch}, product_votes[i]);
    });

    std::vector<AnnotationTask> consistent_tasks, inconsistent_tasks;
    for (const auto& v : next.votes) {
      const auto route = split_consistency(v, config_.lambda);
      AnnotationTask task;
      task.sample_id = v.sample_id;
      task.proposed_label = v.voted_class;
      task.patch_ref = store_.get(v.sample_id).patch_ref;
      task.consistency = route;
      task.required_decisions = required_decisions(route);
      if (route == Consistency::consistent) {
        next.consistent_set.push_back(v.sample_id);
        consistent_tasks.push_back(std::move(task));
      } else {
        next.inconsistent_set.push_back(v.sample_id);
        inconsistent_tasks.push_back(std::move(task));
      }
      store_.commit(v.sample_id, [&](SamplePoint& s) {
        s.current_label = v.voted_class;
        s.label_source = LabelSource::classifier;
      });
    }
    for (auto* group : {&inconsistent_tasks, &consistent_tasks}) {
      for (auto& t : *group) {
        t.task_id = next_task_id_++;
        next.tasks.push_back(std::move(t));
      }
    }
    next.status = IterationStatus::awaiting_annotation;
    state_ = std::move(next);
    task_index_.clear();
    for (std::size_t i = 0; i < state_.tasks.size(); ++i) task_index_[state_.tasks[i].task_id] = i;
    return state_;
  }

  const AnnotationTask& task(TaskId id) const { return state_.tasks[task_position(id)]; }

  /// Records one decision on the task and in the store's annotation history.
  SubmitResult submit(TaskId id, const std::string& annotator_id, LandCoverClass decided_class) {
    if (!active()) fail(ErrorKind::state, "submit: no iteration awaiting annotation");
    auto& slot = state_.tasks[task_position(id)];
    AnnotationRecord record{annotator_id, decided_class, clock_(), state_.iteration_index};
    AnnotationTask updated = resolve_task(slot, record);
    store_.commit(slot.sample_id, [&](SamplePoint& s) { s.annotations.push_back(record); });
    slot = std::move(updated);
    if (state_.open_tasks() == 0) state_.status = IterationStatus::complete;
    return {slot.resolved(), slot.resolved_label, slot.unlabelable};
  }

  /// Writes resolved labels back to the store and closes the iteration.
  IterationRecord apply_corrections() {
    if (state_.applied) fail(ErrorKind::state, "apply_corrections: iteration already applied");
    if (state_.open_tasks() != 0 || state_.status != IterationStatus::complete) {
      fail(ErrorKind::state, "apply_corrections: unresolved tasks remain");
    }
    IterationRecord record;
    record.iteration = state_.iteration_index;
    record.batch_size = state_.batch.size();
    record.n_consistent = state_.consistent_set.size();
    record.n_inconsistent = state_.inconsistent_set.size();
    record.training_size = last_training_size_;
    for (const auto& t : state_.tasks) {
      record.annotations += t.decisions.size();
      if (t.unlabelable) ++record.unlabelable;
      else if (*t.resolved_label != t.proposed_label) ++record.labels_flipped;
      store_.commit(t.sample_id, [&](SamplePoint& s) {
        s.confirmed = true;
        s.label_source = LabelSource::human;
        if (t.unlabelable) s.excluded = true;
        else s.current_label = *t.resolved_label;
      });
    }
    ledger_.n_samples += record.batch_size;
    ledger_.n_consistent_total += record.n_consistent;
    ledger_.n_inconsistent_total += record.n_inconsistent;
    ledger_.annotations_performed += record.annotations;
    ledger_.n_unlabelable += record.unlabelable;
    history_.push_back(record);
    state_.applied = true;
    ensemble_stale_ = true;
    return record;
  }

  /// Iterates until every sample is confirmed or max_iterations is reached.
  /// Consistent tasks go to the first annotator, inconsistent ones to three.
  RunResult run_until_complete(const AnnotatorFn& annotator,
                               const std::vector<std::string>& annotators = {"oracle-1", "oracle-2", "oracle-3"}) {
    require(annotators.size() >= 3, ErrorKind::argument, "run_until_complete: need three annotator ids");
    RunResult result;
    for (int it = 0; it < config_.max_iterations; ++it) {
      run_iteration();
      if (state_.batch.empty()) break;
      for (const auto& t : std::vector<AnnotationTask>(state_.tasks)) {
        for (int d = 0; d < t.required_decisions; ++d) {
          const auto& who = annotators[static_cast<std::size_t>(d)];
          submit(t.task_id, who, annotator(t.sample_id, who));
        }
      }
      apply_corrections();
    }
    result.ledger = ledger_;
    result.iterations = history_;
    result.complete = pool_exhausted();
    return result;
  }

 private:
  struct Inputs {
    std::vector<double> tabular;
    std::vector<double> patch;
  };

  struct TrainingSet {
    FeatureTable tabular{FeatureVector::kSize};
    FeatureTable patch;
    std::vector<int> labels;
  };

  /// Confirmed labels plus the certain product-consensus sets.
  TrainingSet training_set(std::span<const SamplePoint> all) const {
    TrainingSet t;
    bool patch_width_set = false;
    for (const auto& s : all) {
      if (s.excluded) continue;
      std::optional<BinaryLabel> label;
      if (s.confirmed) {
        label = s.current_label;
      } else {
        const auto certainty = vote_certainty(s.product_votes);
        if (certainty == VoteCertainty::certain_forest) label = BinaryLabel::forest;
        else if (certainty == VoteCertainty::certain_nonforest) label = BinaryLabel::non_forest;
      }
      if (!label) continue;
      const auto& in = inputs_.at(s.id);
      if (!patch_width_set) {
        t.patch = FeatureTable(in.patch.size());
        patch_width_set = true;
      }
      t.tabular.add_row(in.tabular);
      t.patch.add_row(in.patch);
      t.labels.push_back(static_cast<int>(*label));
    }
    return t;
  }

  /// Initial labels: consensus for the certain sets, product majority for the
  /// rest. Confirmed samples are left alone.
  void initialize_labels() {
    const int n_products = config_.ensemble.n_products;
    store_.commit_all([&](std::vector<SamplePoint>& all) {
      partition_by_certainty(all);
      for (auto& s : all) {
        if (s.confirmed) continue;
        if (vote_certainty(s.product_votes) == VoteCertainty::uncertain ||
            vote_certainty(s.product_votes) == VoteCertainty::marginal) {
          s.current_label = s.product_votes * 2 > n_products ? BinaryLabel::forest : BinaryLabel::non_forest;
          s.label_source = LabelSource::product_consensus;
        }
        if (!s.init_label) s.init_label = s.current_label;
      }
    });
  }

  std::size_t task_position(TaskId id) const {
    auto it = task_index_.find(id);
    if (it == task_index_.end()) fail(ErrorKind::not_found, "unknown task " + std::to_string(id));
    return it->second;
  }

  SampleStore& store_;
  LoopConfig config_;
  PatchTrainer patch_trainer_;
  std::unordered_map<SampleId, Inputs> inputs_;
  IterationState state_;
  std::unordered_map<TaskId, std::size_t> task_index_;
  LaborLedger ledger_;
  std::vector<IterationRecord> history_;
  TaskId next_task_id_ = 1;
  std::size_t last_training_size_ = 0;
  bool ensemble_stale_ = true;
  std::int64_t logical_time_ = 0;
  std::function<std::int64_t()> clock_ = [this] { return ++logical_time_; };
};

}  // namespace consensus
