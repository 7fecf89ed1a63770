#include <map>
#include <mutex>
#include <random>

#include <gtest/gtest.h>

#include <consensus_labeler/ensemble.hpp>

using namespace consensus;

namespace {

struct Data {
  FeatureTable tabular{3};
  FeatureTable patch{2};
  std::vector<int> y;
};

Data make_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Data d;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = u(gen), b = u(gen);
    const int label = a > 0.5 ? 1 : 0;
    const std::array<double, 3> t{a, b, u(gen)};
    const std::array<double, 2> p{a + 0.1 * (u(gen) - 0.5), b};
    d.tabular.add_row(t);
    d.patch.add_row(p);
    d.y.push_back(label);
  }
  return d;
}

EnsembleSpec small_spec(int k, int m, int trees = 5) {
  EnsembleSpec s;
  s.folds = k;
  s.tabular_models = m;
  s.architectures = reference_patch_architectures(trees);
  s.tabular_params = ForestParams{trees, 6, 2, 0, 1};
  return s;
}

BinaryLabel f() { return BinaryLabel::forest; }
BinaryLabel nf() { return BinaryLabel::non_forest; }

}  // namespace

TEST(EnsembleSpec, CountsFollowFoldsAndModels) {
  EXPECT_EQ(small_spec(8, 8).n_classifiers(), 24);
  EXPECT_EQ(small_spec(8, 8).v_num(), 29);
  EXPECT_EQ(small_spec(2, 2).n_classifiers(), 6);
  EXPECT_THROW(small_spec(1, 2).validate(), Error);
}

TEST(KFoldEnsemble, BuildsTwoPatchModelsPerFoldThenTabularModels) {
  const auto d = make_data(200, 1);
  const auto e = train_kfold_ensemble(d.tabular, d.patch, d.y, small_spec(4, 3), 9);
  ASSERT_EQ(e.classifiers.size(), 11u);
  for (std::size_t j = 0; j < 8; ++j) {
    EXPECT_EQ(e.classifiers[j]->family(), ClassifierFamily::patch);
    EXPECT_EQ(e.classifier_fold[j], static_cast<int>(j / 2));
    EXPECT_EQ(e.classifiers[j]->architecture_id(),
              j % 2 ? std::string("summary-forest-shallow") : std::string("summary-forest-deep"));
  }
  for (std::size_t j = 8; j < 11; ++j) {
    EXPECT_EQ(e.classifiers[j]->family(), ClassifierFamily::tabular);
    EXPECT_EQ(e.classifier_fold[j], static_cast<int>(j - 8) % 4);
  }
  std::map<int, int> fold_sizes;
  for (int fold : e.sample_fold) ++fold_sizes[fold];
  for (const auto& [fold, size] : fold_sizes) EXPECT_EQ(size, 50);
}

TEST(KFoldEnsemble, SingleArchitectureFillsBothSlots) {
  const auto d = make_data(60, 2);
  auto spec = small_spec(2, 2);
  spec.architectures.resize(1);
  const auto e = train_kfold_ensemble(d.tabular, d.patch, d.y, spec, 3);
  ASSERT_EQ(e.classifiers.size(), 6u);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(e.classifiers[j]->architecture_id(), "summary-forest-deep");
}

TEST(KFoldEnsemble, ModelsNeverSeeTheirHeldOutFold) {
  const auto d = make_data(80, 4);
  std::vector<std::size_t> seen_rows;
  PatchTrainer recorder = [&](const PatchClassifierSpec& spec, const FeatureTable& x, std::span<const int> y,
                              std::uint64_t seed) {
    static std::mutex m;
    std::lock_guard lock(m);
    seen_rows.push_back(x.rows());
    return train_summary_patch_classifier(spec, x, y, seed);
  };
  const auto e = train_kfold_ensemble(d.tabular, d.patch, d.y, small_spec(4, 0), 5, 1, recorder);
  ASSERT_EQ(seen_rows.size(), 8u);
  for (auto rows : seen_rows) EXPECT_EQ(rows, 60u);
}

TEST(KFoldEnsemble, ThreadCountDoesNotChangeVotes) {
  const auto d = make_data(150, 6);
  const auto serial = train_kfold_ensemble(d.tabular, d.patch, d.y, small_spec(3, 3), 21, 1);
  const auto threaded = train_kfold_ensemble(d.tabular, d.patch, d.y, small_spec(3, 3), 21, 4);
  EXPECT_EQ(serial.sample_fold, threaded.sample_fold);
  for (std::size_t j = 0; j < serial.classifiers.size(); ++j) {
    const auto* a = dynamic_cast<const ForestClassifier*>(serial.classifiers[j].get());
    const auto* b = dynamic_cast<const ForestClassifier*>(threaded.classifiers[j].get());
    ASSERT_TRUE(a && b);
    EXPECT_EQ(a->forest(), b->forest());
  }
  const auto probe = make_data(40, 7);
  for (std::size_t i = 0; i < 40; ++i) {
    const ClassifierInput in{probe.tabular.row(i), probe.patch.row(i)};
    EXPECT_EQ(ensemble_votes(serial, i, in, 2).classifier_votes, ensemble_votes(threaded, i, in, 2).classifier_votes);
  }
}

TEST(KFoldEnsemble, ErrorsOnDegenerateData) {
  auto d = make_data(30, 8);
  EXPECT_THROW(train_kfold_ensemble(d.tabular, d.patch, std::span(d.y).first(3), small_spec(2, 2), 1), Error);
  std::vector<int> lopsided(30, 0);
  lopsided[0] = 1;
  try {
    train_kfold_ensemble(d.tabular, d.patch, lopsided, small_spec(4, 2), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ensemble);
  }
}

TEST(TallyVotes, PoolsClassifiersAndProducts) {
  const auto spec = small_spec(2, 2);  // 6 classifiers + 5 products = 11
  const std::vector<BinaryLabel> votes{f(), f(), nf(), f(), nf(), nf()};
  const auto v = tally_votes(42, votes, 4, spec);
  EXPECT_EQ(v.v_num, 11);
  EXPECT_EQ(v.v_forest, 7);
  EXPECT_EQ(v.v_nonforest, 4);
  EXPECT_EQ(v.v_max, 7);
  EXPECT_EQ(v.voted_class, BinaryLabel::forest);

  auto even = spec;
  even.n_products = 4;  // 10 voters, 5-5 tie goes non-forest
  const auto tie = tally_votes(1, votes, 2, even);
  EXPECT_EQ(tie.v_forest, 5);
  EXPECT_EQ(tie.voted_class, BinaryLabel::non_forest);
}

TEST(TallyVotes, RejectsWrongClassifierCount) {
  const std::vector<BinaryLabel> votes(5, BinaryLabel::forest);
  try {
    tally_votes(1, votes, 0, small_spec(2, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::spec_mismatch);
  }
  EXPECT_THROW(tally_votes(1, std::vector<BinaryLabel>(6, f()), 6, small_spec(2, 2)), Error);
}
