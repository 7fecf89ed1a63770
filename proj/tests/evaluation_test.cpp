#include <random>
#include <set>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>
#include <gtest/gtest.h>

#include <consensus_labeler/evaluation.hpp>

using namespace consensus;
using Rational = boost::multiprecision::cpp_rational;

namespace {

constexpr auto F = BinaryLabel::forest;
constexpr auto N = BinaryLabel::non_forest;

double exact(const Rational& r) { return static_cast<double>(r); }

Example example(SampleId id, double x, BinaryLabel label, const std::string& grid, int eco) {
  return {id, {x, 0.5 * x}, label, grid, eco};
}

// Four grids in a row, two ecoregions; label is x > threshold, threshold
// shifted per ecoregion so local data matters.
std::vector<Example> toy_examples() {
  std::vector<Example> out;
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SampleId id = 1;
  for (int g = 0; g < 4; ++g) {
    const int eco = g < 2 ? 1 : 2;
    const double threshold = eco == 1 ? 0.3 : 0.7;
    for (int i = 0; i < 80; ++i) {
      const double x = u(gen);
      out.push_back(example(id++, x, x > threshold ? F : N, "c" + std::to_string(g) + "_r0", eco));
    }
  }
  return out;
}

}  // namespace

TEST(ErrorMatrix, CellsFollowPredictionAndTruth) {
  std::vector<BinaryLabel> truth(20), pred(20);
  for (int i = 0; i < 20; ++i) truth[i] = pred[i] = i < 10 ? F : N;
  EXPECT_EQ(error_matrix(pred, truth), (ErrorMatrix{10, 0, 0, 10}));
  std::fill(pred.begin(), pred.end(), F);
  EXPECT_EQ(error_matrix(pred, truth), (ErrorMatrix{10, 0, 10, 0}));
  EXPECT_THROW(error_matrix(std::span(pred).first(3), truth), Error);
  EXPECT_THROW(error_matrix({}, {}), Error);
}

TEST(ErrorMatrix, RandomPairsMatchManualTally) {
  std::mt19937_64 gen(50);
  std::bernoulli_distribution coin(0.5);
  std::vector<BinaryLabel> pred(50), truth(50);
  std::uint64_t cells[2][2] = {};
  for (int i = 0; i < 50; ++i) {
    pred[i] = coin(gen) ? F : N;
    truth[i] = coin(gen) ? F : N;
    ++cells[pred[i] == F][truth[i] == F];
  }
  const auto m = error_matrix(pred, truth);
  EXPECT_EQ(m.a, cells[1][1]);
  EXPECT_EQ(m.b, cells[0][1]);
  EXPECT_EQ(m.c, cells[1][0]);
  EXPECT_EQ(m.d, cells[0][0]);
  EXPECT_EQ(m.total(), 50u);
}

TEST(Metrics, HandEvaluatedMatrix) {
  const auto s = metrics({40, 10, 5, 45});
  EXPECT_NEAR(s.oa, 0.85, 1e-15);
  EXPECT_NEAR(s.pe, 0.50, 1e-15);
  EXPECT_NEAR(s.kappa, 0.70, 1e-15);
  EXPECT_NEAR(s.ua, 40.0 / 45.0, 1e-15);
  EXPECT_NEAR(s.pa, 0.8, 1e-15);
  const auto perfect = metrics({7, 0, 0, 3});
  EXPECT_EQ(perfect.ua, 1.0);
  EXPECT_EQ(perfect.pa, 1.0);
  EXPECT_EQ(perfect.oa, 1.0);
  EXPECT_EQ(perfect.kappa, 1.0);
}

TEST(Metrics, UndefinedCases) {
  auto kind = [](const ErrorMatrix& m) {
    try {
      metrics(m);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::state;  // no error at all
  };
  EXPECT_EQ(kind({0, 5, 0, 5}), ErrorKind::undefined);  // nothing predicted forest
  EXPECT_EQ(kind({0, 0, 5, 5}), ErrorKind::undefined);  // no true forest
  EXPECT_EQ(kind({5, 0, 0, 0}), ErrorKind::undefined);  // pe == 1
  EXPECT_EQ(kind({0, 0, 0, 0}), ErrorKind::argument);
}

TEST(Metrics, AgreesWithExactRationalEvaluation) {
  std::mt19937_64 gen(20220607);
  int checked = 0;
  while (checked < 1000) {
    const ErrorMatrix m{gen() % 500, gen() % 500, gen() % 500, gen() % 500};
    if (m.a + m.c == 0 || m.a + m.b == 0) continue;
    const Rational a(m.a), b(m.b), c(m.c), d(m.d), n = a + b + c + d;
    const Rational oa = (a + d) / n;
    const Rational pe = ((a + b) * (a + c) + (b + d) * (c + d)) / (n * n);
    if (pe == 1) continue;
    const Rational kappa = (oa - pe) / (1 - pe);
    const auto s = metrics(m);
    EXPECT_NEAR(s.ua, exact(a / (a + c)), 1e-12);
    EXPECT_NEAR(s.pa, exact(a / (a + b)), 1e-12);
    EXPECT_NEAR(s.oa, exact(oa), 1e-12);
    EXPECT_NEAR(s.pe, exact(pe), 1e-12);
    EXPECT_NEAR(s.kappa, exact(kappa), 1e-12);
    // properties
    EXPECT_LE(s.kappa, s.oa + 1e-15);
    EXPECT_EQ(s.kappa == 1.0, m.b == 0 && m.c == 0);
    ++checked;
  }
}

TEST(Metrics, ClassSwapSymmetry) {
  std::mt19937_64 gen(8);
  for (int i = 0; i < 200; ++i) {
    const ErrorMatrix m{1 + gen() % 100, 1 + gen() % 100, 1 + gen() % 100, 1 + gen() % 100};
    const ErrorMatrix swapped{m.d, m.c, m.b, m.a};
    const auto s = metrics(m), t = metrics(swapped);
    EXPECT_NEAR(t.ua, static_cast<double>(m.d) / static_cast<double>(m.b + m.d), 1e-15);
    EXPECT_NEAR(t.pa, static_cast<double>(m.d) / static_cast<double>(m.c + m.d), 1e-15);
    EXPECT_NEAR(t.oa, s.oa, 1e-15);
    EXPECT_NEAR(t.kappa, s.kappa, 1e-12);
  }
}

TEST(PerGridMetrics, SingleGridEqualsPooled) {
  std::vector<GridObservation> obs;
  std::mt19937_64 gen(4);
  for (int i = 0; i < 60; ++i) obs.push_back({"c1_r1", gen() % 3 ? F : N, gen() % 2 ? F : N});
  const auto r = per_grid_metrics(obs);
  ASSERT_EQ(r.grids.size(), 1u);
  EXPECT_EQ(r.grids[0].matrix, r.pooled);
  EXPECT_EQ(r.grids[0].metrics.kappa, metrics(r.pooled).kappa);
}

TEST(PerGridMetrics, PerfectAndImperfectGridsAndFloor) {
  std::vector<GridObservation> obs;
  for (int i = 0; i < 20; ++i) obs.push_back({"c0_r0", i % 2 ? F : N, i % 2 ? F : N});
  for (int i = 0; i < 20; ++i) obs.push_back({"c1_r0", i % 3 ? F : N, i % 2 ? F : N});
  for (int i = 0; i < 9; ++i) obs.push_back({"c2_r0", F, F});
  const auto r = per_grid_metrics(obs);
  ASSERT_EQ(r.grids.size(), 2u);
  EXPECT_EQ(r.grids[0].metrics.oa, 1.0);
  EXPECT_LT(r.grids[1].metrics.oa, 1.0);
  ASSERT_EQ(r.omitted.size(), 1u);
  EXPECT_EQ(r.omitted[0].grid_id, "c2_r0");
  EXPECT_EQ(r.omitted[0].n, 9u);
  EXPECT_FALSE(r.empty);
  EXPECT_TRUE(per_grid_metrics(std::span(obs).last(9)).empty);
}

TEST(PerGridMetrics, RecombinedCountsEqualGlobalMatrix) {
  std::mt19937_64 gen(12);
  std::vector<GridObservation> obs;
  std::vector<BinaryLabel> pred, truth;
  for (int i = 0; i < 3000; ++i) {
    const std::string grid = "c" + std::to_string(gen() % 7) + "_r" + std::to_string(gen() % 5);
    obs.push_back({grid, gen() % 2 ? F : N, gen() % 2 ? F : N});
    pred.push_back(obs.back().predicted);
    truth.push_back(obs.back().truth);
  }
  const auto r = per_grid_metrics(obs, 1);
  ErrorMatrix sum;
  for (const auto& g : r.grids) sum += g.matrix;
  for (const auto& o : r.omitted) ADD_FAILURE() << o.grid_id << " " << o.reason;
  EXPECT_EQ(sum, error_matrix(pred, truth));
  EXPECT_EQ(r.pooled, sum);
}

TEST(PerGridMetrics, RasterOverloadScoresLocatedPoints) {
  Raster predicted(20, 10, 0.0, 0.0, 0.5, -1.0, 1.0);
  for (std::size_t r = 0; r < 10; ++r) {
    for (std::size_t c = 10; c < 20; ++c) predicted.at(r, c) = 0.0;
  }
  predicted.at(0, 0) = predicted.nodata;
  std::vector<TruthPoint> truths;
  for (int i = 0; i < 12; ++i) truths.push_back({1.25 + 0.25 * i, 2.0, F});  // c0_r0
  for (int i = 0; i < 12; ++i) truths.push_back({5.25 + 0.25 * i, 2.0, F});  // c1_r0
  truths.push_back({0.1, 4.9, F});                                           // nodata cell
  truths.push_back({50.0, 2.0, F});                                          // outside
  const auto r = per_grid_metrics(predicted, truths, GridSpec(5.0));
  EXPECT_EQ(r.pooled.total(), 24u);
  EXPECT_EQ(r.pooled.a, 12u);
  EXPECT_EQ(r.pooled.b, 12u);
}

TEST(Composition, ParsesModes) {
  EXPECT_EQ(parse_composition("CSRF"), Composition::csrf);
  EXPECT_EQ(parse_composition("cusrf"), Composition::cusrf);
  EXPECT_THROW(parse_composition("csrfb"), Error);
}

TEST(Composition, PoolSizesAndReproducibility) {
  auto all = toy_examples();
  const std::vector<Example> certain(all.begin(), all.begin() + 200);
  const std::vector<Example> uncertain(all.begin() + 200, all.begin() + 260);
  const std::vector<Example> eval(all.begin() + 260, all.end());
  CompositionConfig cfg;
  cfg.certain_size = 120;
  cfg.uncertain_size = 50;
  cfg.forest = ForestParams{10, 6, 2, 0, 1};
  const auto cs = composition_experiment(certain, uncertain, Composition::csrf, eval, cfg, 5);
  const auto us = composition_experiment(certain, uncertain, Composition::usrf, eval, cfg, 5);
  const auto cus = composition_experiment(certain, uncertain, Composition::cusrf, eval, cfg, 5);
  EXPECT_EQ(cs.n_train, 120u);
  EXPECT_EQ(cs.n_train_uncertain, 0u);
  EXPECT_EQ(us.n_train, 50u);
  EXPECT_EQ(us.n_train_certain, 0u);
  EXPECT_EQ(cus.n_train, cs.n_train);
  EXPECT_EQ(cus.n_train_uncertain, 50u);
  EXPECT_EQ(cus.n_train_certain, 70u);
  EXPECT_EQ(cs.n_eval, eval.size());
  const auto again = composition_experiment(certain, uncertain, Composition::cusrf, eval, cfg, 5);
  EXPECT_EQ(nlohmann::ordered_json(to_json(again)).dump(), nlohmann::ordered_json(to_json(cus)).dump());

  cfg.uncertain_size = 61;
  try {
    composition_experiment(certain, uncertain, Composition::usrf, eval, cfg, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::experiment);
  }
}

TEST(Strategy, PoolMembership) {
  const auto all = toy_examples();
  StrategyConfig cfg;
  cfg.external_pool_size = 0;
  const auto pools = strategy_pools(all, "c1_r0", cfg, 9);
  EXPECT_EQ(pools.target_ecoregion, 1);
  EXPECT_EQ(pools.grid_train.size(), 24u);
  EXPECT_EQ(pools.grid_eval.size(), 56u);
  EXPECT_EQ(pools.global.size(), 240u);
  EXPECT_EQ(pools.ecoregion.size(), 80u);
  auto ids = [](const std::vector<Example>& v) {
    std::multiset<SampleId> out;
    for (const auto& e : v) out.insert(e.id);
    return out;
  };
  for (const auto& e : pools.ecoregion) {
    EXPECT_EQ(e.ecoregion_id, 1);
    EXPECT_NE(e.grid_id, "c1_r0");
  }
  auto union_of = [&](const std::vector<Example>& x, const std::vector<Example>& y) {
    auto out = ids(x);
    for (auto id : ids(y)) out.insert(id);
    return out;
  };
  EXPECT_EQ(ids(pools.pool(1)), ids(pools.global));
  EXPECT_EQ(ids(pools.pool(2)), ids(pools.grid_train));
  EXPECT_EQ(ids(pools.pool(3)), union_of(pools.global, pools.grid_train));
  EXPECT_EQ(ids(pools.pool(4)), union_of(pools.ecoregion, pools.grid_train));
  EXPECT_EQ(ids(pools.pool(5)), ids(pools.ecoregion));
  for (auto id : ids(pools.grid_eval)) {
    for (int s = 1; s <= 5; ++s) EXPECT_EQ(ids(pools.pool(s)).count(id), 0u);
  }
  EXPECT_THROW(pools.pool(6), Error);
}

TEST(Strategy, PoolCapAndErrors) {
  const auto all = toy_examples();
  StrategyConfig cfg;
  cfg.external_pool_size = 50;
  const auto pools = strategy_pools(all, "c3_r0", cfg, 9);
  EXPECT_EQ(pools.global.size(), 50u);
  EXPECT_EQ(pools.ecoregion.size(), 50u);
  EXPECT_THROW(strategy_pools(all, "c9_r9", cfg, 9), Error);
  StrategyPools empty;
  empty.grid_eval = pools.grid_eval;
  try {
    strategy_experiment(5, empty, "c3_r0", cfg, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::experiment);
  }
}

TEST(Strategy, LocalDataBeatsMismatchedEcoregion) {
  // grid c3_r0 sits in ecoregion 2 (threshold 0.7); global pool is mostly
  // ecoregion 1 data with a different threshold
  const auto all = toy_examples();
  StrategyConfig cfg;
  cfg.forest = ForestParams{20, 6, 2, 0, 1};
  const std::vector<std::string> grids{"c2_r0", "c3_r0"};
  const auto s1 = strategy_sweep(1, grids, all, cfg, 3);
  const auto s4 = strategy_sweep(4, grids, all, cfg, 3);
  EXPECT_GE(s4.pooled.oa, s1.pooled.oa);
  EXPECT_EQ(s1.n_eval, 112u);
  const auto again = strategy_sweep(4, grids, all, cfg, 3);
  EXPECT_EQ(again.pooled_matrix, s4.pooled_matrix);
}

TEST(Reports, CsvRowsAndBasename) {
  ExperimentReport r;
  r.experiment_id = "composition-csrf";
  r.seed = 42;
  r.pooled_matrix = {40, 10, 5, 45};
  r.pooled = metrics(r.pooled_matrix);
  r.per_grid.grids.push_back({"c0_r0", {40, 10, 5, 45}, r.pooled});
  EXPECT_EQ(report_basename(r), "composition-csrf_seed42");
  std::ostringstream out;
  write_report_csv(out, std::vector<ExperimentReport>{r});
  const std::string pooled_row = "composition-csrf," + format_double(40.0 / 45.0) + ",0.8,0.85," +
                                 format_double(r.pooled.kappa) + ",100\n";
  EXPECT_EQ(out.str(), "id,ua,pa,oa,kappa,n\n" + pooled_row + "composition-csrf/c0_r0" +
                           pooled_row.substr(std::string("composition-csrf").size()));
}
