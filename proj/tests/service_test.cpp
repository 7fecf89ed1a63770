#include <set>

#include <gtest/gtest.h>

#include <consensus_labeler/service.hpp>
#include <consensus_labeler/synth_world.hpp>

#include "http_driver.hpp"
#include "test_support.hpp"

using namespace consensus;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::argument;
}

std::vector<double> index_summary(const SamplePoint& s) { return {s.features.ndvi, s.features.ndwi}; }

LoopConfig small_loop(std::size_t batch) {
  LoopConfig c;
  c.batch_size = batch;
  c.seed = 11;
  c.ensemble.folds = 2;
  c.ensemble.tabular_models = 2;
  c.ensemble.architectures = reference_patch_architectures(5);
  c.ensemble.tabular_params = ForestParams{5, 8, 2, 0, 1};
  return c;
}

const char* kTokens = "tok-a:ann-a,tok-b:ann-b,tok-c:ann-c,tok-admin:lead:admin";

struct Fixture {
  SyntheticWorld world{testing_support::small_world()};
  SyntheticWorld::SampleDraw draw = world.draw_samples();
  SampleStore store{draw.samples};
  LabelingLoop loop;
  AnnotationService service;

  explicit Fixture(std::size_t batch = 60)
      : loop(store, index_summary, small_loop(batch)),
        service(loop, store, parse_token_list(kTokens),
                [this](const SamplePoint& s) { return world.render_patch(s.lon, s.lat); }) {}

  const SessionToken& a() const { return service.authenticate("tok-a"); }
  const SessionToken& b() const { return service.authenticate("tok-b"); }
  const SessionToken& c() const { return service.authenticate("tok-c"); }
  const SessionToken& admin() const { return service.authenticate("tok-admin"); }

  /// Resolves every open task with the ground truth.
  void finish_iteration() {
    for (const auto* s : {&a(), &b(), &c()}) {
      while (auto t = service.next_task(*s)) service.submit_decision(*s, t->task_id, draw.truth.at(t->sample_id));
    }
  }
};

// Patch classifier whose vote is scripted by the sample id carried in the
// first tabular feature: ids below 77 agree with the products, the rest
// oppose them.
class ScriptedClassifier final : public Classifier {
 public:
  BinaryLabel predict(const ClassifierInput& in) const override {
    const bool products_forest = in.tabular[1] > 0.5;
    const bool agree = in.tabular[0] < 77.0;
    return products_forest == agree ? BinaryLabel::forest : BinaryLabel::non_forest;
  }
  ClassifierFamily family() const override { return ClassifierFamily::patch; }
  std::string architecture_id() const override { return "scripted"; }
};

}  // namespace

TEST(SessionTokens, ParseAndReject) {
  const auto t = parse_token_list(kTokens);
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t[3].capability, Capability::admin);
  EXPECT_EQ(t[0].capability, Capability::annotate);
  EXPECT_THROW(parse_token_list("x"), Error);
  EXPECT_THROW(parse_token_list("x:y:root"), Error);
}

TEST(AnnotationService, ZerosBeforeAnyIteration) {
  Fixture f;
  const auto p = f.service.progress();
  EXPECT_EQ(p.status, "idle");
  EXPECT_EQ(p.iteration_index, 0);
  EXPECT_EQ(p.tasks_total, 0u);
  EXPECT_EQ(p.tasks_resolved, 0u);
  EXPECT_EQ(p.consistent_count, 0u);
  EXPECT_EQ(p.inconsistent_count, 0u);
  EXPECT_EQ(p.labor_saved_so_far, 0.0);
  EXPECT_EQ(p.annotations_performed, 0u);
  EXPECT_EQ(kind_of([&] { f.service.next_task(f.a()); }), ErrorKind::conflict);
  EXPECT_EQ(kind_of([&] { f.service.authenticate("nope"); }), ErrorKind::unauthorized);
  EXPECT_EQ(kind_of([&] { f.service.advance_iteration(f.a()); }), ErrorKind::forbidden);
}

TEST(AnnotationService, DuplicateAnnotatorTokensRejected) {
  Fixture f;
  EXPECT_THROW(AnnotationService(f.loop, f.store, parse_token_list("t1:x,t2:x"), nullptr), Error);
}

TEST(AnnotationService, QueueServesInconsistentFirstAndNeverRepeats) {
  Fixture f;
  f.service.advance_iteration(f.admin());
  const auto& state = f.loop.state();
  ASSERT_FALSE(state.inconsistent_set.empty()) << "fixture needs a triple task";
  const auto first = f.service.next_task(f.a());
  ASSERT_TRUE(first);
  EXPECT_EQ(first->required_decisions, 3);
  EXPECT_EQ(first->remaining, state.tasks.size());
  EXPECT_EQ(first->patch_url, "/api/patches/" + std::to_string(first->sample_id));
  // both annotators get the same triple task
  EXPECT_EQ(f.service.next_task(f.b())->task_id, first->task_id);
  const auto ack = f.service.submit_decision(f.a(), first->task_id, LandCoverClass::forest);
  EXPECT_FALSE(ack.resolved);
  EXPECT_NE(f.service.next_task(f.a())->task_id, first->task_id);
  EXPECT_EQ(f.service.next_task(f.b())->task_id, first->task_id);
  EXPECT_FALSE(f.service.submit_decision(f.b(), first->task_id, LandCoverClass::forest).resolved);
  const auto done = f.service.submit_decision(f.c(), first->task_id, LandCoverClass::water);
  EXPECT_TRUE(done.resolved);
  EXPECT_EQ(done.resolved_label, BinaryLabel::forest);
  EXPECT_EQ(f.loop.task(first->task_id).decisions.size(), 3u);
}

TEST(AnnotationService, SubmitSemantics) {
  Fixture f;
  f.service.advance_iteration(f.admin());
  const auto& tasks = f.loop.state().tasks;
  const auto single = std::find_if(tasks.begin(), tasks.end(), [](const auto& t) { return t.required_decisions == 1; });
  ASSERT_NE(single, tasks.end());
  const auto id = single->task_id;
  const auto proposed = single->proposed_label;
  const auto confirm = proposed == BinaryLabel::forest ? LandCoverClass::forest : LandCoverClass::grassland;

  const auto ack = f.service.submit_decision(f.a(), id, confirm);
  EXPECT_TRUE(ack.resolved);
  EXPECT_EQ(ack.resolved_label, proposed);
  const auto before = f.service.progress().annotations_performed;
  EXPECT_EQ(f.service.submit_decision(f.a(), id, confirm), ack);  // identical retry
  EXPECT_EQ(f.service.progress().annotations_performed, before);
  EXPECT_EQ(kind_of([&] { f.service.submit_decision(f.a(), id, LandCoverClass::water); }), ErrorKind::conflict);
  EXPECT_EQ(kind_of([&] { f.service.submit_decision(f.b(), id, confirm); }), ErrorKind::conflict);
  EXPECT_EQ(kind_of([&] { f.service.submit_decision(f.a(), 987654, confirm); }), ErrorKind::not_found);
  EXPECT_EQ(kind_of([&] { f.service.advance_iteration(f.admin()); }), ErrorKind::conflict);
}

TEST(AnnotationService, AdvanceThroughToCompletion) {
  Fixture f(150);
  auto summary = f.service.advance_iteration(f.admin());
  EXPECT_EQ(summary.iteration_index, 1);
  const auto first_task = f.loop.state().tasks.front().task_id;
  f.finish_iteration();
  auto p = f.service.progress();
  EXPECT_EQ(p.tasks_resolved, p.tasks_total);
  EXPECT_EQ(p.status, "complete");
  int guard = 0;
  while (!summary.complete && guard++ < 20) {
    summary = f.service.advance_iteration(f.admin());
    if (!summary.complete) f.finish_iteration();
  }
  ASSERT_TRUE(summary.complete);
  EXPECT_EQ(summary.status, "complete");
  EXPECT_EQ(summary.ledger.n_samples, f.draw.samples.size());
  EXPECT_EQ(summary.ledger.annotations_performed,
            summary.ledger.n_consistent_total + 3 * summary.ledger.n_inconsistent_total);
  // decisions on closed tasks are conflicts, not unknown ids
  EXPECT_EQ(kind_of([&] { f.service.submit_decision(f.b(), first_task, LandCoverClass::forest); }),
            ErrorKind::conflict);
  p = f.service.progress();
  EXPECT_EQ(p.confirmed_count, f.draw.samples.size());
  EXPECT_EQ(p.annotations_performed, summary.ledger.annotations_performed);
  EXPECT_NEAR(p.labor_saved_so_far, labor_report(summary.ledger).saved_fraction_strict, 1e-15);
}

TEST(AnnotationService, ConstructedSplitOfSeventySevenToTwentyThree) {
  std::vector<SamplePoint> samples;
  for (SampleId id = 0; id < 100; ++id) {
    SamplePoint s;
    s.id = id;
    s.grid_id = "c0_r0";
    s.product_votes = id % 2 ? 5 : 0;
    s.features.blue = static_cast<double>(id);
    s.features.green = s.product_votes > 2 ? 1.0 : 0.0;
    samples.push_back(s);
  }
  SampleStore store(samples);
  LoopConfig cfg;
  cfg.batch_size = 100;
  cfg.ensemble.folds = 2;
  cfg.ensemble.tabular_models = 0;  // 4 scripted patch votes + 5 products
  PatchTrainer scripted = [](const PatchClassifierSpec&, const FeatureTable&, std::span<const int>, std::uint64_t) {
    return std::make_shared<ScriptedClassifier>();
  };
  LabelingLoop loop(store, [](const SamplePoint&) { return std::vector<double>{0.0}; }, cfg, scripted);
  AnnotationService service(loop, store, parse_token_list(kTokens), nullptr);
  service.advance_iteration(service.authenticate("tok-admin"));
  const auto p = service.progress();
  EXPECT_EQ(p.consistent_count, 77u);
  EXPECT_EQ(p.inconsistent_count, 23u);
  EXPECT_EQ(p.tasks_total, 100u);
  EXPECT_NEAR(p.labor_saved_so_far, 1.0 - (77.0 + 69.0) / 300.0, 1e-15);
}

TEST(HttpFrontend, EndpointsStatusCodesAndPng) {
  Fixture f;
  HttpFrontend http(f.service);
  const int port = http.start();
  testing_support::ApiClient anon(port, ""), bad(port, "wrong"), a(port, "tok-a"), admin(port, "tok-admin");

  EXPECT_EQ(anon.get("/api/progress").status, 401);
  const auto denied = bad.get("/api/progress");
  EXPECT_EQ(denied.status, 401);
  EXPECT_EQ(denied.body["error"], "unauthorized");
  EXPECT_EQ(a.get("/api/progress").body["status"], "idle");
  EXPECT_EQ(a.get("/api/tasks/next").status, 409);
  EXPECT_EQ(a.post("/api/iteration/advance").status, 403);

  const auto adv = admin.post("/api/iteration/advance");
  ASSERT_EQ(adv.status, 200);
  EXPECT_EQ(adv.body["iteration_index"], 1);
  EXPECT_EQ(admin.post("/api/iteration/advance").status, 409);

  const auto next = a.get("/api/tasks/next");
  ASSERT_EQ(next.status, 200);
  const auto& task = next.body["task"];
  EXPECT_EQ(task["class_menu"].size(), 9u);
  const auto png = a.get(task["patch_url"].get<std::string>());
  ASSERT_EQ(png.status, 200);
  EXPECT_EQ(png.raw.substr(0, 8), std::string("\x89PNG\r\n\x1a\n", 8));
  EXPECT_EQ(a.get("/api/patches/999999").status, 404);

  const auto id = task["task_id"].get<std::uint64_t>();
  EXPECT_EQ(a.post("/api/tasks/" + std::to_string(id) + "/decision", {{"decided_class", "jungle"}}).status, 400);
  EXPECT_EQ(a.post("/api/tasks/" + std::to_string(id) + "/decision", {{"other", 1}}).status, 400);
  const auto ok = a.decide(id, LandCoverClass::forest);
  ASSERT_EQ(ok.status, 200);
  EXPECT_EQ(a.decide(id, LandCoverClass::forest).body, ok.body);
  EXPECT_EQ(a.decide(id, LandCoverClass::water).status, 409);
  EXPECT_EQ(a.decide(424242, LandCoverClass::water).status, 404);
  http.stop();
}

TEST(HttpFrontend, ConcurrentSessionsLoseNoDecision) {
  Fixture f(200);
  HttpFrontend http(f.service);
  const int port = http.start();
  testing_support::ApiClient admin(port, "tok-admin");
  ASSERT_EQ(admin.post("/api/iteration/advance").status, 200);
  const auto stats = testing_support::drive_concurrently(port, {"tok-a", "tok-b", "tok-c"}, f.draw.truth);
  EXPECT_EQ(stats.errors, 0u);
  std::size_t stored = 0;
  for (const auto& s : f.store.snapshot()) stored += s.annotations.size();
  EXPECT_EQ(stored, stats.acks);
  for (const auto& t : f.loop.state().tasks) {
    ASSERT_TRUE(t.resolved());
    EXPECT_EQ(static_cast<int>(t.decisions.size()), t.required_decisions);
    std::set<std::string> who;
    for (const auto& d : t.decisions) who.insert(d.annotator_id);
    EXPECT_EQ(who.size(), t.decisions.size());
  }
  http.stop();
}
