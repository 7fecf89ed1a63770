#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "forest.hpp"
#include "land_cover.hpp"
#include "random.hpp"
#include "raster.hpp"
#include "samples.hpp"
#include "sampling.hpp"
#include "text.hpp"

namespace consensus {

// a: predicted forest, true forest     b: predicted non-forest, true forest
// c: predicted forest, true non-forest d: predicted non-forest, true non-forest
struct ErrorMatrix {
  std::uint64_t a = 0, b = 0, c = 0, d = 0;

  std::uint64_t total() const { return a + b + c + d; }

  ErrorMatrix& operator+=(const ErrorMatrix& o) {
    a += o.a;
    b += o.b;
    c += o.c;
    d += o.d;
    return *this;
  }
  bool operator==(const ErrorMatrix&) const = default;
};

inline void tally(ErrorMatrix& m, BinaryLabel predicted, BinaryLabel truth) {
  const bool pf = predicted == BinaryLabel::forest, tf = truth == BinaryLabel::forest;
  if (pf && tf) ++m.a;
  else if (!pf && tf) ++m.b;
  else if (pf) ++m.c;
  else ++m.d;
}

inline ErrorMatrix error_matrix(std::span<const BinaryLabel> predictions, std::span<const BinaryLabel> truths) {
  require(predictions.size() == truths.size(), ErrorKind::argument, "error_matrix: length mismatch");
  require(!predictions.empty(), ErrorKind::argument, "error_matrix: no pairs");
  ErrorMatrix m;
  for (std::size_t i = 0; i < predictions.size(); ++i) tally(m, predictions[i], truths[i]);
  return m;
}

struct MetricSet {
  double ua = 0.0;
  double pa = 0.0;
  double oa = 0.0;
  double pe = 0.0;
  double kappa = 0.0;
};

inline MetricSet metrics(const ErrorMatrix& m) {
  if (m.total() == 0) fail(ErrorKind::argument, "metrics: empty error matrix");
  if (m.a + m.c == 0) fail(ErrorKind::undefined, "metrics: no forest predictions, UA undefined");
  if (m.a + m.b == 0) fail(ErrorKind::undefined, "metrics: no true forest, PA undefined");
  const auto a = static_cast<double>(m.a), b = static_cast<double>(m.b), c = static_cast<double>(m.c),
             d = static_cast<double>(m.d), n = static_cast<double>(m.total());
  MetricSet s;
  s.ua = a / (a + c);
  s.pa = a / (a + b);
  s.oa = (a + d) / n;
  s.pe = ((a + b) * (a + c) + (b + d) * (c + d)) / (n * n);
  if (s.pe >= 1.0) fail(ErrorKind::undefined, "metrics: chance agreement is 1, kappa undefined");
  s.kappa = (s.oa - s.pe) / (1.0 - s.pe);
  return s;
}

struct GridObservation {
  std::string grid_id;
  BinaryLabel predicted = BinaryLabel::non_forest;
  BinaryLabel truth = BinaryLabel::non_forest;
};

struct GridMetrics {
  std::string grid_id;
  ErrorMatrix matrix;
  MetricSet metrics;
};

struct OmittedGrid {
  std::string grid_id;
  std::uint64_t n = 0;
  std::string reason;
};

struct PerGridReport {
  std::vector<GridMetrics> grids;    // sorted by grid id
  std::vector<OmittedGrid> omitted;  // below the floor or undefined metrics
  ErrorMatrix pooled;                // every observation, scored or not
  bool empty = false;                // no grid met the floor
};

inline PerGridReport per_grid_metrics(std::span<const GridObservation> observations, std::size_t min_samples = 10) {
  std::map<GridId, std::pair<std::string, ErrorMatrix>> by_grid;
  PerGridReport report;
  for (const auto& o : observations) {
    auto& slot = by_grid[GridId::parse(o.grid_id)];
    slot.first = o.grid_id;
    tally(slot.second, o.predicted, o.truth);
    tally(report.pooled, o.predicted, o.truth);
  }
  for (const auto& [key, entry] : by_grid) {
    const auto& [id, m] = entry;
    if (m.total() < min_samples) {
      report.omitted.push_back({id, m.total(), "fewer than " + std::to_string(min_samples) + " samples"});
      continue;
    }
    try {
      report.grids.push_back({id, m, metrics(m)});
    } catch (const Error& e) {
      report.omitted.push_back({id, m.total(), e.what()});
    }
  }
  report.empty = report.grids.empty();
  return report;
}

struct TruthPoint {
  double lon = 0.0;
  double lat = 0.0;
  BinaryLabel truth = BinaryLabel::non_forest;
};

/// Scores a binary forest raster (1 = forest) against truth points. Points
/// outside the raster or on nodata are skipped.
inline PerGridReport per_grid_metrics(const Raster& predicted, std::span<const TruthPoint> truths, const GridSpec& grids,
                                      std::size_t min_samples = 10) {
  std::vector<GridObservation> obs;
  for (const auto& t : truths) {
    const auto cell = predicted.locate(t.lon, t.lat);
    if (!cell) continue;
    const double v = predicted.at(cell->row, cell->col);
    if (predicted.is_nodata(v)) continue;
    obs.push_back({grids.id_at(t.lon, t.lat).str(), v >= 0.5 ? BinaryLabel::forest : BinaryLabel::non_forest, t.truth});
  }
  return per_grid_metrics(obs, min_samples);
}

/// One labelled example for the experiment harnesses.
struct Example {
  SampleId id = 0;
  std::vector<double> x;
  BinaryLabel label = BinaryLabel::non_forest;
  std::string grid_id;
  int ecoregion_id = 0;
};

inline Example example_from(const SamplePoint& s) {
  const auto f = s.features.as_array();
  return {s.id, std::vector<double>(f.begin(), f.end()), s.current_label, s.grid_id, s.ecoregion_id};
}

struct Prediction {
  SampleId id = 0;
  std::string grid_id;
  BinaryLabel predicted = BinaryLabel::non_forest;
  BinaryLabel truth = BinaryLabel::non_forest;
};

struct ExperimentReport {
  std::string experiment_id;
  std::string mode;  // CSRF | USRF | CUSRF | strategy-1..5
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_train_certain = 0;
  std::size_t n_train_uncertain = 0;
  std::size_t n_eval = 0;
  ErrorMatrix pooled_matrix;
  MetricSet pooled;
  PerGridReport per_grid;
  std::vector<Prediction> predictions;
};

namespace detail {

inline DecisionForest fit(std::span<const Example> train, const ForestParams& params, std::uint64_t seed) {
  require(!train.empty(), ErrorKind::experiment, "experiment: empty training set");
  FeatureTable table(train.front().x.size());
  std::vector<int> labels;
  for (const auto& e : train) {
    table.add_row(e.x);
    labels.push_back(static_cast<int>(e.label));
  }
  try {
    return DecisionForest::train(table, labels, params, seed);
  } catch (const Error& e) {
    fail(ErrorKind::experiment, std::string("experiment: training failed: ") + e.what());
  }
}

inline ExperimentReport score(ExperimentReport report, const DecisionForest& model, std::span<const Example> eval,
                              std::size_t min_grid_samples) {
  require(!eval.empty(), ErrorKind::experiment, "experiment: empty evaluation set");
  std::vector<GridObservation> obs;
  for (const auto& e : eval) {
    const auto p = model.predict(e.x) == 1 ? BinaryLabel::forest : BinaryLabel::non_forest;
    report.predictions.push_back({e.id, e.grid_id, p, e.label});
    tally(report.pooled_matrix, p, e.label);
    obs.push_back({e.grid_id, p, e.label});
  }
  report.n_eval = eval.size();
  report.pooled = metrics(report.pooled_matrix);
  report.per_grid = per_grid_metrics(obs, min_grid_samples);
  return report;
}

inline std::vector<Example> take(std::span<const Example> pool, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  idx = rng.choose(std::move(idx), k);
  std::sort(idx.begin(), idx.end());
  std::vector<Example> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(pool[i]);
  return out;
}

}  // namespace detail

enum class Composition { csrf, usrf, cusrf };

inline const char* to_string(Composition c) {
  switch (c) {
    case Composition::csrf: return "CSRF";
    case Composition::usrf: return "USRF";
    case Composition::cusrf: return "CUSRF";
  }
  return "?";
}

inline Composition parse_composition(std::string_view s) {
  const auto t = to_lower(s);
  if (t == "csrf") return Composition::csrf;
  if (t == "usrf") return Composition::usrf;
  if (t == "cusrf") return Composition::cusrf;
  fail(ErrorKind::argument, "unknown composition '" + std::string(s) + "'");
}

struct CompositionConfig {
  std::size_t certain_size = 5000;
  std::size_t uncertain_size = 1000;
  ForestParams forest{};
  std::size_t min_grid_samples = 10;
};

/// CSRF: `certain_size` certain samples. USRF: `uncertain_size` uncertain
/// samples. CUSRF: the same uncertain draw plus certain samples thinned so the
/// total equals CSRF's.
inline ExperimentReport composition_experiment(std::span<const Example> certain, std::span<const Example> uncertain_labeled,
                                               Composition mode, std::span<const Example> eval_set,
                                               const CompositionConfig& config, std::uint64_t seed) {
  require(config.uncertain_size < config.certain_size, ErrorKind::experiment,
          "composition: uncertain size must be below the certain size");
  if (certain.size() < config.certain_size) fail(ErrorKind::experiment, "composition: not enough certain samples");
  if (mode != Composition::csrf && uncertain_labeled.size() < config.uncertain_size) {
    fail(ErrorKind::experiment, "composition: not enough labelled uncertain samples");
  }
  Rng certain_rng(derive_seed(seed, 1)), uncertain_rng(derive_seed(seed, 2));
  std::vector<Example> train;
  ExperimentReport report;
  if (mode == Composition::csrf) {
    train = detail::take(certain, config.certain_size, certain_rng);
    report.n_train_certain = train.size();
  } else {
    train = detail::take(uncertain_labeled, config.uncertain_size, uncertain_rng);
    report.n_train_uncertain = train.size();
    if (mode == Composition::cusrf) {
      auto extra = detail::take(certain, config.certain_size - train.size(), certain_rng);
      report.n_train_certain = extra.size();
      train.insert(train.end(), extra.begin(), extra.end());
    }
  }
  report.experiment_id = std::string("composition-") + to_lower(to_string(mode));
  report.mode = to_string(mode);
  report.seed = seed;
  report.n_train = train.size();
  const auto model = detail::fit(train, config.forest, derive_seed(seed, 3));
  return detail::score(std::move(report), model, eval_set, config.min_grid_samples);
}

struct StrategyConfig {
  double grid_train_fraction = 0.3;
  std::size_t external_pool_size = 800;  // cap on the global and ecoregion pools; 0 = no cap
  ForestParams forest{};
  std::size_t min_grid_samples = 10;
};

struct StrategyPools {
  std::vector<Example> grid_train;
  std::vector<Example> grid_eval;
  std::vector<Example> global;
  std::vector<Example> ecoregion;
  int target_ecoregion = 0;

  /// Training pool for strategy 1..5.
  std::vector<Example> pool(int strategy) const {
    std::vector<Example> out;
    auto add = [&](const std::vector<Example>& v) { out.insert(out.end(), v.begin(), v.end()); };
    switch (strategy) {
      case 1: add(global); break;
      case 2: add(grid_train); break;
      case 3: add(global); add(grid_train); break;
      case 4: add(ecoregion); add(grid_train); break;
      case 5: add(ecoregion); break;
      default: fail(ErrorKind::argument, "strategy must be 1..5");
    }
    return out;
  }
};

/// Grid samples are split into train/eval; the external pools come from
/// outside the grid, everywhere (global) or in the grid's dominant ecoregion.
inline StrategyPools strategy_pools(std::span<const Example> examples, const std::string& target_grid,
                                    const StrategyConfig& config, std::uint64_t seed) {
  StrategyPools pools;
  std::vector<LabeledId> in_grid;
  std::map<SampleId, const Example*> by_id;
  std::map<int, std::size_t> eco_count;
  for (const auto& e : examples) {
    if (e.grid_id != target_grid) continue;
    in_grid.push_back({e.id, e.label});
    by_id[e.id] = &e;
    ++eco_count[e.ecoregion_id];
  }
  if (in_grid.size() < 10) fail(ErrorKind::experiment, "strategy: grid " + target_grid + " has fewer than 10 samples");
  const auto split = split_train_val(in_grid, config.grid_train_fraction, derive_seed(seed, 11));
  for (auto id : split.train) pools.grid_train.push_back(*by_id.at(id));
  for (auto id : split.validation) pools.grid_eval.push_back(*by_id.at(id));
  pools.target_ecoregion =
      std::max_element(eco_count.begin(), eco_count.end(), [](const auto& l, const auto& r) { return l.second < r.second; })
          ->first;

  std::vector<Example> outside, same_eco;
  for (const auto& e : examples) {
    if (e.grid_id == target_grid) continue;
    outside.push_back(e);
    if (e.ecoregion_id == pools.target_ecoregion) same_eco.push_back(e);
  }
  auto cap = [&](std::vector<Example> v, std::uint64_t stream) {
    if (config.external_pool_size == 0 || v.size() <= config.external_pool_size) return v;
    Rng rng(derive_seed(seed, stream));
    return detail::take(v, config.external_pool_size, rng);
  };
  pools.global = cap(std::move(outside), 12);
  pools.ecoregion = cap(std::move(same_eco), 13);
  return pools;
}

inline ExperimentReport strategy_experiment(int strategy, const StrategyPools& pools, const std::string& target_grid,
                                            const StrategyConfig& config, std::uint64_t seed) {
  const auto train = pools.pool(strategy);
  if (train.empty()) fail(ErrorKind::experiment, "strategy " + std::to_string(strategy) + ": empty training pool");
  ExperimentReport report;
  report.experiment_id = "strategy-" + std::to_string(strategy) + "-" + target_grid;
  report.mode = "strategy-" + std::to_string(strategy);
  report.seed = seed;
  report.n_train = train.size();
  const auto model = detail::fit(train, config.forest, derive_seed(seed, 20 + static_cast<std::uint64_t>(strategy)));
  return detail::score(std::move(report), model, pools.grid_eval, config.min_grid_samples);
}

inline ExperimentReport strategy_experiment(int strategy, const std::string& target_grid, std::span<const Example> examples,
                                            const StrategyConfig& config, std::uint64_t seed) {
  return strategy_experiment(strategy, strategy_pools(examples, target_grid, config, seed), target_grid, config, seed);
}

/// Runs one strategy on each grid and pools the predictions.
inline ExperimentReport strategy_sweep(int strategy, std::span<const std::string> grids,
                                       std::span<const Example> examples, const StrategyConfig& config,
                                       std::uint64_t seed) {
  require(!grids.empty(), ErrorKind::experiment, "strategy sweep: no grids");
  ExperimentReport out;
  out.experiment_id = "strategy-" + std::to_string(strategy) + "-sweep";
  out.mode = "strategy-" + std::to_string(strategy);
  out.seed = seed;
  std::vector<GridObservation> obs;
  for (const auto& g : grids) {
    const auto r = strategy_experiment(strategy, g, examples, config, derive_seed(seed, hash_string(g)));
    out.n_train += r.n_train;
    out.n_eval += r.n_eval;
    out.pooled_matrix += r.pooled_matrix;
    for (const auto& p : r.predictions) {
      out.predictions.push_back(p);
      obs.push_back({p.grid_id, p.predicted, p.truth});
    }
  }
  out.pooled = metrics(out.pooled_matrix);
  out.per_grid = per_grid_metrics(obs, config.min_grid_samples);
  return out;
}

inline std::string report_basename(const ExperimentReport& r) {
  return r.experiment_id + "_seed" + std::to_string(r.seed);
}

/// One row for the pooled result, then one per scored grid.
inline void write_report_csv(std::ostream& out, std::span<const ExperimentReport> reports) {
  out << "id,ua,pa,oa,kappa,n\n";
  auto row = [&](const std::string& id, const MetricSet& m, std::uint64_t n) {
    out << id << ',' << format_double(m.ua) << ',' << format_double(m.pa) << ',' << format_double(m.oa) << ','
        << format_double(m.kappa) << ',' << n << '\n';
  };
  for (const auto& r : reports) {
    row(r.experiment_id, r.pooled, r.pooled_matrix.total());
    for (const auto& g : r.per_grid.grids) row(r.experiment_id + "/" + g.grid_id, g.metrics, g.matrix.total());
  }
}

inline nlohmann::ordered_json to_json(const MetricSet& m) {
  return {{"ua", m.ua}, {"pa", m.pa}, {"oa", m.oa}, {"pe", m.pe}, {"kappa", m.kappa}};
}

inline nlohmann::ordered_json to_json(const ErrorMatrix& m) {
  return {{"a", m.a}, {"b", m.b}, {"c", m.c}, {"d", m.d}};
}

inline nlohmann::ordered_json to_json(const ExperimentReport& r) {
  nlohmann::ordered_json grids = nlohmann::ordered_json::array();
  for (const auto& g : r.per_grid.grids) {
    grids.push_back({{"grid_id", g.grid_id}, {"matrix", to_json(g.matrix)}, {"metrics", to_json(g.metrics)}});
  }
  nlohmann::ordered_json omitted = nlohmann::ordered_json::array();
  for (const auto& o : r.per_grid.omitted) omitted.push_back({{"grid_id", o.grid_id}, {"n", o.n}, {"reason", o.reason}});
  return {{"experiment_id", r.experiment_id},
          {"mode", r.mode},
          {"seed", r.seed},
          {"n_train", r.n_train},
          {"n_train_certain", r.n_train_certain},
          {"n_train_uncertain", r.n_train_uncertain},
          {"n_eval", r.n_eval},
          {"matrix", to_json(r.pooled_matrix)},
          {"metrics", to_json(r.pooled)},
          {"grids", grids},
          {"omitted_grids", omitted}};
}

}  // namespace consensus
