#pragma once

// Command-line front end: synth, agreement, grids, sample, loop, eval, serve.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "agreement.hpp"
#include "config.hpp"
#include "evaluation.hpp"
#include "experiments.hpp"
#include "features.hpp"
#include "labeling.hpp"
#include "parallel.hpp"
#include "raster.hpp"
#include "samples.hpp"
#include "sampling.hpp"
#include "service.hpp"
#include "synth_world.hpp"

namespace consensus::cli {

inline constexpr std::uint64_t kDefaultSeed = 20220607;
inline constexpr const char* kSeedEnv = "CONSENSUS_LABELER_SEED";

inline void log_event(const std::string& event, nlohmann::ordered_json fields = nlohmann::ordered_json::object()) {
  nlohmann::ordered_json line{{"event", event}};
  for (auto it = fields.begin(); it != fields.end(); ++it) line[it.key()] = it.value();
  std::cerr << line.dump() << '\n';
}

/// Merged file + flag values. Every value read is recorded so the run's
/// effective configuration can be written next to its outputs.
class Settings {
 public:
  Settings(Config merged, std::optional<std::uint64_t> seed_flag) : merged_(std::move(merged)), seed_flag_(seed_flag) {}

  double num(const std::string& key, double fallback) {
    const double v = merged_.get_double(key, fallback);
    effective_.set(key, format_double(v));
    return v;
  }

  long long integer(const std::string& key, long long fallback) {
    const long long v = merged_.get_int(key, fallback);
    effective_.set(key, std::to_string(v));
    return v;
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    const long long v = integer(key, static_cast<long long>(fallback));
    if (v < 0) fail(ErrorKind::config, key + " must be non-negative");
    return static_cast<std::size_t>(v);
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const auto v = merged_.get_string(key, fallback);
    effective_.set(key, v);
    return v;
  }

  /// --seed, then the config key, then CONSENSUS_LABELER_SEED, then the default.
  std::uint64_t seed(const std::string& key) {
    std::uint64_t v = kDefaultSeed;
    if (seed_flag_) v = *seed_flag_;
    else if (merged_.has(key)) v = static_cast<std::uint64_t>(merged_.get_int(key, 0));
    else if (const char* env = std::getenv(kSeedEnv); env && *env) {
      try {
        v = static_cast<std::uint64_t>(parse_integer(env));
      } catch (const Error&) {
        fail(ErrorKind::config, std::string(kSeedEnv) + " is not an integer");
      }
    }
    effective_.set(key, std::to_string(v));
    return v;
  }

  const Config& effective() const { return effective_; }

  void echo(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    effective_.write(out);
  }

 private:
  Config merged_;
  Config effective_;
  std::optional<std::uint64_t> seed_flag_;
};

inline WorldConfig world_config(Settings& s) {
  WorldConfig w;
  w.seed = s.seed("world.seed");
  w.ncols = s.count("world.ncols", w.ncols);
  w.nrows = s.count("world.nrows", w.nrows);
  w.x_origin = s.num("world.x_origin", w.x_origin);
  w.y_origin = s.num("world.y_origin", w.y_origin);
  w.cellsize = s.num("world.cellsize", w.cellsize);
  w.n_products = static_cast<int>(s.integer("world.n_products", w.n_products));
  w.base_flip_rate = s.num("world.base_flip_rate", w.base_flip_rate);
  w.belt_flip_rate = s.num("world.belt_flip_rate", w.belt_flip_rate);
  w.belt_row_begin = s.count("world.belt_row_begin", w.belt_row_begin);
  w.belt_row_end = s.count("world.belt_row_end", w.belt_row_end);
  w.flip_smoothing_radius = static_cast<int>(s.integer("world.flip_smoothing_radius", w.flip_smoothing_radius));
  w.forest_share = s.num("world.forest_share", w.forest_share);
  w.cloud_fraction = s.num("world.cloud_fraction", w.cloud_fraction);
  w.ndvi_noise = s.num("world.ndvi_noise", w.ndvi_noise);
  w.grid_ndvi_jitter = s.num("world.grid_ndvi_jitter", w.grid_ndvi_jitter);
  w.strata = static_cast<int>(s.integer("world.strata", w.strata));
  w.per_stratum = s.count("world.per_stratum", w.per_stratum);
  std::string shifts;
  for (double v : w.ecoregion_ndvi_shift) shifts += (shifts.empty() ? "" : ",") + format_double(v);
  shifts = s.text("world.ecoregion_ndvi_shift", shifts);
  w.ecoregion_ndvi_shift.clear();
  for (const auto& part : split(shifts, ',')) w.ecoregion_ndvi_shift.push_back(parse_double(part));
  w.n_ecoregions = static_cast<int>(w.ecoregion_ndvi_shift.size());
  return w;
}

inline LoopConfig loop_config(Settings& s, std::size_t jobs) {
  LoopConfig c;
  c.batch_size = s.count("loop.batch_size", c.batch_size);
  c.lambda = s.num("loop.lambda", c.lambda);
  c.max_iterations = static_cast<int>(s.integer("loop.max_iterations", c.max_iterations));
  c.seed = s.seed("loop.seed");
  c.jobs = jobs;
  c.ensemble.folds = static_cast<int>(s.integer("loop.K", c.ensemble.folds));
  c.ensemble.tabular_models = static_cast<int>(s.integer("loop.M", c.ensemble.tabular_models));
  c.ensemble.n_products = static_cast<int>(s.integer("loop.n_products", c.ensemble.n_products));
  const int patch_trees = static_cast<int>(s.integer("loop.patch_trees", 100));
  c.ensemble.architectures = reference_patch_architectures(patch_trees);
  c.ensemble.tabular_params.n_trees = static_cast<int>(s.integer("loop.tabular_trees", 100));
  c.ensemble.tabular_params.max_depth = static_cast<int>(s.integer("loop.tabular_depth", 12));
  c.validate();
  return c;
}

inline std::filesystem::path prepare_out_dir(const std::string& out) {
  std::filesystem::path dir(out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create " + out + ": " + ec.message());
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << text;
}

/// Samples, truth and patch summaries for a world, shared by loop and serve.
struct WorldSession {
  SyntheticWorld world;
  SyntheticWorld::SampleDraw draw;
  SampleStore store;

  explicit WorldSession(WorldConfig config) : world(std::move(config)), draw(world.draw_samples()), store(draw.samples) {
    for (const auto& w : draw.warnings) log_event("sampling_warning", {{"message", w}});
  }

  PatchSummaryFn patch_summary() const {
    return [this](const SamplePoint& s) { return patch_features(world.render_patch(s.lon, s.lat)); };
  }

  PatchRenderer renderer() const {
    return [this](const SamplePoint& s) { return world.render_patch(s.lon, s.lat); };
  }
};

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string out;
};

inline Settings settings_for(const Common& c, const std::vector<std::pair<std::string, std::string>>& overrides) {
  Config merged = c.config_path.empty() ? Config{} : Config::load(c.config_path);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorKind::argument, "--set expects section.key=value, got " + kv);
    merged.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [k, v] : overrides) merged.set(k, v);
  return Settings(std::move(merged), c.seed);
}

// ---------------------------------------------------------------------------
// Subcommands

inline void run_synth(const Common& c) {
  auto s = settings_for(c, {});
  const auto cfg = world_config(s);
  const auto dir = prepare_out_dir(c.out);
  WorldSession session(cfg);
  const auto& r = session.world.rasters();
  write_ascii_grid((dir / "truth_class.asc").string(), r.truth_class);
  write_ascii_grid((dir / "truth.asc").string(), r.truth);
  for (std::size_t i = 0; i < r.products.size(); ++i) {
    write_ascii_grid((dir / ("product_" + std::to_string(i + 1) + ".asc")).string(), r.products[i]);
  }
  const std::pair<const char*, const Raster*> bands[] = {
      {"blue", &r.blue}, {"green", &r.green}, {"red", &r.red},   {"nir", &r.nir},     {"swir1", &r.swir1},
      {"swir2", &r.swir2}, {"ndvi", &r.ndvi}, {"ndwi", &r.ndwi}, {"dem", &r.dem},     {"slope", &r.slope},
      {"ecoregions", &r.ecoregions}};
  for (const auto& [name, raster] : bands) write_ascii_grid((dir / (std::string(name) + ".asc")).string(), *raster);
  const auto agreement = session.world.agreement();
  write_ascii_grid((dir / "agreement.asc").string(), agreement.raster);
  std::ofstream grids(dir / "grids.csv", std::ios::binary);
  write_grid_report(grids, classify_grids(agreement, GridSpec(5.0)));
  write_samples_jsonl((dir / "samples.jsonl").string(), session.draw.samples);
  std::ofstream truth(dir / "sample_truth.csv", std::ios::binary);
  truth << "id,class\n";
  for (const auto& sp : session.draw.samples) truth << sp.id << ',' << to_string(session.draw.truth.at(sp.id)) << '\n';
  s.echo(dir / "effective_config.ini");
  log_event("synth_done", {{"samples", session.draw.samples.size()}, {"out", c.out}});
}

inline void run_agreement(const Common& c, const std::vector<std::string>& products, const std::string& mask_path) {
  auto s = settings_for(c, {});
  std::vector<Raster> rasters;
  for (const auto& p : products) rasters.push_back(read_ascii_grid(p));
  const auto agreement = overlay_votes(rasters);
  std::optional<Raster> mask;
  if (!mask_path.empty()) mask = read_ascii_grid(mask_path);
  write_ascii_grid(c.out, agreement.raster);
  s.text("agreement.products", [&] {
    std::string joined;
    for (const auto& p : products) joined += (joined.empty() ? "" : ",") + p;
    return joined;
  }());
  s.text("agreement.mask", mask_path);
  s.echo(c.out + ".config.ini");
  nlohmann::ordered_json summary{{"histogram", agreement_histogram(agreement)}};
  try {
    summary["uncertainty_23"] = uncertainty_23(agreement, mask ? &*mask : nullptr);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::undefined) throw;
    summary["uncertainty_23"] = nullptr;
  }
  std::cout << summary.dump() << '\n';
}

inline void run_grids(const Common& c, const std::string& agreement_path, std::optional<double> cell,
                      std::optional<double> threshold, std::optional<double> min_valid) {
  std::vector<std::pair<std::string, std::string>> overrides;
  if (cell) overrides.emplace_back("grids.cell_degrees", format_double(*cell));
  if (threshold) overrides.emplace_back("grids.threshold", format_double(*threshold));
  if (min_valid) overrides.emplace_back("grids.min_valid", format_double(*min_valid));
  auto s = settings_for(c, overrides);
  const Raster raster = read_ascii_grid(agreement_path);
  int max_vote = 0;
  for (double v : raster.values) {
    if (!raster.is_nodata(v)) max_vote = std::max(max_vote, static_cast<int>(v));
  }
  const AgreementRaster agreement{raster, static_cast<int>(s.integer("grids.n_products", std::max(max_vote, 1)))};
  const auto labels = classify_grids(agreement, GridSpec(s.num("grids.cell_degrees", 5.0)), s.num("grids.threshold", 0.3),
                                     s.num("grids.min_valid", 0.10));
  std::ofstream out(c.out, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + c.out);
  write_grid_report(out, labels);
  s.echo(c.out + ".config.ini");
  log_event("grids_done", {{"grids", labels.size()}});
}

inline void run_sample(const Common& c, const std::string& ndvi_path, const std::string& mask_path,
                       std::optional<int> strata, std::optional<std::size_t> per_stratum) {
  std::vector<std::pair<std::string, std::string>> overrides;
  if (strata) overrides.emplace_back("sample.strata", std::to_string(*strata));
  if (per_stratum) overrides.emplace_back("sample.per_stratum", std::to_string(*per_stratum));
  auto s = settings_for(c, overrides);
  const Raster ndvi_raster = read_ascii_grid(ndvi_path);
  std::optional<Raster> mask;
  if (!mask_path.empty()) mask = read_ascii_grid(mask_path);
  const auto result = stratified_sample(ndvi_raster, mask ? &*mask : nullptr,
                                        static_cast<int>(s.integer("sample.strata", 10)),
                                        s.count("sample.per_stratum", 500), s.seed("sample.seed"));
  for (const auto& w : result.warnings) log_event("sampling_warning", {{"message", w}});
  std::ofstream out(c.out, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + c.out);
  out << "row,col,lon,lat,ndvi,stratum\n";
  char buf[160];
  for (const auto& p : result.points) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f,%.6f,%s,%d\n", p.row, p.col, p.lon, p.lat, format_double(p.ndvi).c_str(),
                  p.stratum);
    out << buf;
  }
  s.echo(c.out + ".config.ini");
  log_event("sample_done", {{"points", result.points.size()}});
}

inline void serve_session(Settings& s, WorldSession& session, LabelingLoop& loop, const std::string& static_dir,
                          std::optional<int> port_flag) {
  const auto tokens = parse_token_list(s.text("service.tokens", "admin-token:admin:admin"));
  const auto host = s.text("service.host", "127.0.0.1");
  const int port = port_flag ? *port_flag : static_cast<int>(s.integer("service.port", 8080));
  AnnotationService service(loop, session.store, tokens, session.renderer());
  HttpFrontend http(service, static_dir);
  log_event("serve_listening", {{"host", host}, {"port", port}});
  http.run(host, port);
}

inline void run_loop(const Common& c, const std::string& annotator, std::optional<double> error_rate,
                     std::optional<std::size_t> batch, std::optional<int> max_iterations, std::optional<double> lambda,
                     std::optional<int> port) {
  std::vector<std::pair<std::string, std::string>> overrides;
  if (!annotator.empty()) overrides.emplace_back("loop.annotator", annotator);
  if (error_rate) overrides.emplace_back("loop.error_rate", format_double(*error_rate));
  if (batch) overrides.emplace_back("loop.batch_size", std::to_string(*batch));
  if (max_iterations) overrides.emplace_back("loop.max_iterations", std::to_string(*max_iterations));
  if (lambda) overrides.emplace_back("loop.lambda", format_double(*lambda));
  auto s = settings_for(c, overrides);
  const auto world_cfg = world_config(s);
  const auto loop_cfg = loop_config(s, c.jobs);
  const auto mode = s.text("loop.annotator", "oracle");
  if (mode != "oracle" && mode != "service") fail(ErrorKind::config, "loop.annotator must be oracle or service");
  const double rate = s.num("loop.error_rate", 0.0);
  const auto annotator_seed = s.seed("loop.annotator_seed");
  const auto dir = prepare_out_dir(c.out);
  s.echo(dir / "effective_config.ini");

  WorldSession session(world_cfg);
  log_event("loop_start", {{"samples", session.store.size()}, {"mode", mode}});
  LabelingLoop loop(session.store, session.patch_summary(), loop_cfg);
  if (mode == "service") {
    serve_session(s, session, loop, "", port);
    return;
  }
  const auto result = loop.run_until_complete(simulated_annotator(session.draw.truth, rate, annotator_seed));
  {
    std::ofstream ledger(dir / "ledger.csv", std::ios::binary);
    write_ledger_csv(ledger, result.iterations);
  }
  const auto samples = session.store.snapshot();
  write_samples_jsonl((dir / "samples.jsonl").string(), samples);
  std::size_t agree = 0, scored = 0;
  for (const auto& sp : samples) {
    const auto truth = binary_projection(session.draw.truth.at(sp.id));
    if (!truth || sp.excluded) continue;
    ++scored;
    agree += sp.current_label == *truth;
  }
  nlohmann::ordered_json summary = to_json(result.ledger);
  summary["complete"] = result.complete;
  summary["iterations"] = result.iterations.size();
  summary["label_agreement"] = scored ? static_cast<double>(agree) / static_cast<double>(scored) : 0.0;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  log_event("loop_done", summary);
}

inline void run_eval(const Common& c, const std::string& mode_flag, const std::string& composition,
                     std::optional<int> strategy, const std::string& grid) {
  std::vector<std::pair<std::string, std::string>> overrides;
  if (!mode_flag.empty()) overrides.emplace_back("eval.mode", mode_flag);
  auto s = settings_for(c, overrides);
  const auto world_cfg = world_config(s);
  const auto mode = s.text("eval.mode", "composition");
  const auto seed = s.seed("eval.seed");
  ForestParams forest;
  forest.n_trees = static_cast<int>(s.integer("eval.trees", 100));
  forest.max_depth = static_cast<int>(s.integer("eval.depth", 12));
  forest.jobs = c.jobs;
  const auto dir = prepare_out_dir(c.out);

  SyntheticWorld world(world_cfg);
  const auto draw = world.draw_samples();
  std::vector<ExperimentReport> reports;
  if (mode == "composition") {
    CompositionConfig cfg;
    cfg.certain_size = s.count("eval.certain_size", cfg.certain_size);
    cfg.uncertain_size = s.count("eval.uncertain_size", cfg.uncertain_size);
    cfg.forest = forest;
    const auto inputs = composition_inputs(world, draw, seed);
    std::vector<Composition> modes{Composition::csrf, Composition::usrf, Composition::cusrf};
    if (!composition.empty() && to_lower(composition) != "all") modes = {parse_composition(composition)};
    for (auto m : modes) reports.push_back(composition_experiment(inputs.certain, inputs.uncertain_labeled, m, inputs.eval, cfg, seed));
  } else if (mode == "strategy") {
    StrategyConfig cfg;
    cfg.external_pool_size = s.count("eval.external_pool_size", cfg.external_pool_size);
    cfg.grid_train_fraction = s.num("eval.grid_train_fraction", cfg.grid_train_fraction);
    cfg.forest = forest;
    const auto examples = truth_examples(draw);
    std::vector<int> strategies{1, 2, 3, 4, 5};
    if (strategy) strategies = {*strategy};
    for (int k : strategies) require(k >= 1 && k <= 5, ErrorKind::argument, "--strategy must be 1..5");
    if (!grid.empty()) {
      for (int k : strategies) reports.push_back(strategy_experiment(k, grid, examples, cfg, seed));
    } else {
      const auto grids = strategy_target_grids(examples, s.count("eval.strategy_grids", 16));
      for (int k : strategies) reports.push_back(strategy_sweep(k, grids, examples, cfg, seed));
    }
  } else {
    fail(ErrorKind::config, "eval.mode must be composition or strategy");
  }
  for (const auto& r : reports) {
    std::ofstream csv(dir / (report_basename(r) + ".csv"), std::ios::binary);
    write_report_csv(csv, std::span<const ExperimentReport>(&r, 1));
    write_text(dir / (report_basename(r) + ".json"), to_json(r).dump(2) + "\n");
    log_event("eval_report", {{"experiment_id", r.experiment_id}, {"oa", r.pooled.oa}, {"kappa", r.pooled.kappa}});
  }
  s.echo(dir / "effective_config.ini");
}

inline void run_serve(const Common& c, const std::string& static_dir, std::optional<int> port) {
  auto s = settings_for(c, {});
  const auto world_cfg = world_config(s);
  const auto loop_cfg = loop_config(s, c.jobs);
  if (!c.out.empty()) s.echo(prepare_out_dir(c.out) / "effective_config.ini");
  WorldSession session(world_cfg);
  LabelingLoop loop(session.store, session.patch_summary(), loop_cfg);
  serve_session(s, session, loop, static_dir, port);
}

// ---------------------------------------------------------------------------

inline void error_record(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::ordered_json{{"error", kind}, {"message", message}}.dump() << '\n';
}

inline int main(int argc, char** argv) {
  CLI::App app{"Consensus labeling toolkit"};
  app.require_subcommand(1);
  Common common;
  long long seed_value = 0;
  long long jobs_value = 1;

  auto add_common = [&](CLI::App* sub, bool out_required) {
    sub->add_option("--config", common.config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", common.sets, "override a config value: section.key=value (repeatable)");
    sub->add_option("--seed", seed_value, "root seed (else config, else $CONSENSUS_LABELER_SEED)");
    sub->add_option("--jobs", jobs_value, "worker threads")->check(CLI::PositiveNumber);
    auto* out = sub->add_option("--out", common.out, "output file or directory");
    if (out_required) out->required();
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic world");
  add_common(synth, true);

  std::vector<std::string> products;
  std::string mask;
  auto* agreement = app.add_subcommand("agreement", "overlay binary forest products into an agreement raster");
  add_common(agreement, true);
  agreement->add_option("--products", products, "binary product rasters (ESRI ASCII)")->required()->check(CLI::ExistingFile);
  agreement->add_option("--mask", mask, "region mask raster")->check(CLI::ExistingFile);

  std::string agreement_path;
  std::optional<double> cell, threshold, min_valid;
  auto* grids = app.add_subcommand("grids", "classify grids as certain, uncertain or excluded");
  add_common(grids, true);
  grids->add_option("--agreement", agreement_path, "agreement raster")->required()->check(CLI::ExistingFile);
  grids->add_option("--cell", cell, "grid size in degrees");
  grids->add_option("--threshold", threshold, "uncertainty threshold");
  grids->add_option("--min-valid", min_valid, "minimum valid fraction");

  std::string ndvi_path;
  std::optional<int> strata;
  std::optional<std::size_t> per_stratum;
  auto* sample = app.add_subcommand("sample", "NDVI-stratified random sampling");
  add_common(sample, true);
  sample->add_option("--ndvi", ndvi_path, "NDVI raster")->required()->check(CLI::ExistingFile);
  sample->add_option("--mask", mask, "region mask raster")->check(CLI::ExistingFile);
  sample->add_option("--strata", strata, "number of NDVI strata");
  sample->add_option("--per-stratum", per_stratum, "points per stratum");

  std::string annotator;
  std::optional<double> error_rate, lambda;
  std::optional<std::size_t> batch;
  std::optional<int> max_iterations, port;
  auto* loop = app.add_subcommand("loop", "run the labeling loop");
  add_common(loop, true);
  loop->add_option("--annotator", annotator, "oracle or service")->check(CLI::IsMember({"oracle", "service"}));
  loop->add_option("--error-rate", error_rate, "oracle error rate in [0,1)");
  loop->add_option("--batch-size", batch, "samples per iteration");
  loop->add_option("--max-iterations", max_iterations, "iteration cap");
  loop->add_option("--lambda", lambda, "consistency threshold");
  loop->add_option("--port", port, "HTTP port in service mode");

  std::string eval_mode, composition, grid;
  std::optional<int> strategy;
  auto* eval = app.add_subcommand("eval", "composition and strategy experiments");
  add_common(eval, true);
  eval->add_option("--mode", eval_mode, "composition or strategy")->check(CLI::IsMember({"composition", "strategy"}));
  eval->add_option("--composition", composition, "CSRF, USRF, CUSRF or all");
  eval->add_option("--strategy", strategy, "strategy 1..5")->check(CLI::Range(1, 5));
  eval->add_option("--grid", grid, "target grid id, e.g. c2_r3");

  std::string static_dir;
  auto* serve = app.add_subcommand("serve", "serve the annotation API");
  add_common(serve, false);
  serve->add_option("--static", static_dir, "directory of static UI assets")->check(CLI::ExistingDirectory);
  serve->add_option("--port", port, "HTTP port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    error_record("usage", e.what());
    return 2;
  }
  if (synth->count("--seed") + agreement->count("--seed") + grids->count("--seed") + sample->count("--seed") +
          loop->count("--seed") + eval->count("--seed") + serve->count("--seed") > 0) {
    if (seed_value < 0) {
      error_record("usage", "--seed must be non-negative");
      return 2;
    }
    common.seed = static_cast<std::uint64_t>(seed_value);
  }
  common.jobs = static_cast<std::size_t>(jobs_value);

  try {
    if (*synth) run_synth(common);
    else if (*agreement) run_agreement(common, products, mask);
    else if (*grids) run_grids(common, agreement_path, cell, threshold, min_valid);
    else if (*sample) run_sample(common, ndvi_path, mask, strata, per_stratum);
    else if (*loop) run_loop(common, annotator, error_rate, batch, max_iterations, lambda, port);
    else if (*eval) run_eval(common, eval_mode, composition, strategy, grid);
    else if (*serve) run_serve(common, static_dir, port);
  } catch (const Error& e) {
    error_record(to_string(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    error_record("internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace consensus::cli
