#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "land_cover.hpp"
#include "text.hpp"

namespace consensus {

using SampleId = std::uint64_t;

/// Yearly-median spectral bands plus derived indices and terrain slope.
struct FeatureVector {
  double blue = 0.0;
  double green = 0.0;
  double red = 0.0;
  double nir = 0.0;
  double swir1 = 0.0;
  double swir2 = 0.0;
  double ndvi = 0.0;
  double ndwi = 0.0;
  double slope = 0.0;

  static constexpr std::size_t kSize = 9;

  std::array<double, kSize> as_array() const { return {blue, green, red, nir, swir1, swir2, ndvi, ndwi, slope}; }

  bool operator==(const FeatureVector&) const = default;
};

struct AnnotationRecord {
  std::string annotator_id;
  LandCoverClass decided_class = LandCoverClass::other;
  std::int64_t timestamp = 0;
  int iteration = 0;

  bool operator==(const AnnotationRecord&) const = default;
};

enum class LabelSource { product_consensus, classifier, human };

inline const char* to_string(LabelSource s) {
  switch (s) {
    case LabelSource::product_consensus: return "product-consensus";
    case LabelSource::classifier: return "classifier";
    case LabelSource::human: return "human";
  }
  return "?";
}

inline LabelSource parse_label_source(std::string_view text) {
  if (text == "product-consensus") return LabelSource::product_consensus;
  if (text == "classifier") return LabelSource::classifier;
  if (text == "human") return LabelSource::human;
  fail(ErrorKind::format, "unknown label source '" + std::string(text) + "'");
}

inline constexpr int kPriorProducts = 5;

struct SamplePoint {
  SampleId id = 0;
  double lon = 0.0;
  double lat = 0.0;
  std::string grid_id;
  int ecoregion_id = 1;
  int product_votes = 0;
  FeatureVector features;
  std::string patch_ref;
  std::optional<BinaryLabel> init_label;
  BinaryLabel current_label = BinaryLabel::non_forest;
  LabelSource label_source = LabelSource::product_consensus;
  bool confirmed = false;
  bool excluded = false;  // flagged unlabelable; kept out of training and evaluation
  std::vector<AnnotationRecord> annotations;

  /// Usable as a training or evaluation example.
  bool usable() const { return !excluded; }

  bool operator==(const SamplePoint&) const = default;
};

inline void check_invariants(const SamplePoint& s) {
  if (s.confirmed && (s.label_source != LabelSource::human || s.annotations.empty())) {
    fail(ErrorKind::data, "sample " + std::to_string(s.id) + ": confirmed without human annotation");
  }
  if (s.product_votes < 0 || s.product_votes > kPriorProducts) {
    fail(ErrorKind::data, "sample " + std::to_string(s.id) + ": product votes out of range");
  }
}

// ---------------------------------------------------------------------------
// JSON Lines persistence

inline constexpr const char* kSampleFormat = "consensus-labeler-samples";
inline constexpr int kSampleFormatVersion = 1;

inline nlohmann::ordered_json to_json(const SamplePoint& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["lon"] = s.lon;
  j["lat"] = s.lat;
  j["grid_id"] = s.grid_id;
  j["ecoregion_id"] = s.ecoregion_id;
  j["product_votes"] = s.product_votes;
  const auto& f = s.features;
  j["features"] = {{"blue", f.blue},   {"green", f.green}, {"red", f.red},   {"nir", f.nir},    {"swir1", f.swir1},
                   {"swir2", f.swir2}, {"ndvi", f.ndvi},   {"ndwi", f.ndwi}, {"slope", f.slope}};
  j["patch_ref"] = s.patch_ref;
  j["init_label"] = s.init_label ? nlohmann::ordered_json(to_string(*s.init_label)) : nlohmann::ordered_json(nullptr);
  j["current_label"] = to_string(s.current_label);
  j["label_source"] = to_string(s.label_source);
  j["confirmed"] = s.confirmed;
  j["excluded"] = s.excluded;
  auto annotations = nlohmann::ordered_json::array();
  for (const auto& a : s.annotations) {
    annotations.push_back({{"annotator_id", a.annotator_id},
                           {"decided_class", to_string(a.decided_class)},
                           {"timestamp", a.timestamp},
                           {"iteration", a.iteration}});
  }
  j["annotations"] = std::move(annotations);
  return j;
}

inline SamplePoint sample_from_json(const nlohmann::json& j) {
  try {
    SamplePoint s;
    s.id = j.at("id").get<SampleId>();
    s.lon = j.at("lon").get<double>();
    s.lat = j.at("lat").get<double>();
    s.grid_id = j.at("grid_id").get<std::string>();
    s.ecoregion_id = j.at("ecoregion_id").get<int>();
    s.product_votes = j.at("product_votes").get<int>();
    const auto& f = j.at("features");
    s.features = {f.at("blue").get<double>(),  f.at("green").get<double>(), f.at("red").get<double>(),
                  f.at("nir").get<double>(),   f.at("swir1").get<double>(), f.at("swir2").get<double>(),
                  f.at("ndvi").get<double>(),  f.at("ndwi").get<double>(),  f.at("slope").get<double>()};
    s.patch_ref = j.at("patch_ref").get<std::string>();
    if (!j.at("init_label").is_null()) s.init_label = parse_binary_label(j.at("init_label").get<std::string>());
    s.current_label = parse_binary_label(j.at("current_label").get<std::string>());
    s.label_source = parse_label_source(j.at("label_source").get<std::string>());
    s.confirmed = j.at("confirmed").get<bool>();
    s.excluded = j.value("excluded", false);
    for (const auto& a : j.at("annotations")) {
      s.annotations.push_back({a.at("annotator_id").get<std::string>(),
                               parse_land_cover(a.at("decided_class").get<std::string>()),
                               a.at("timestamp").get<std::int64_t>(), a.value("iteration", 0)});
    }
    check_invariants(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("bad sample record: ") + e.what());
  }
}

/// Sample catalog. Reads may run concurrently; every mutation goes through
/// `commit`, which holds the single writer lock.
class SampleStore {
 public:
  SampleStore() = default;
  explicit SampleStore(std::vector<SamplePoint> samples) { reset(std::move(samples)); }

  SampleStore(const SampleStore& other) { reset(other.snapshot()); }
  SampleStore& operator=(const SampleStore& other) {
    if (this != &other) reset(other.snapshot());
    return *this;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return samples_.size();
  }

  std::vector<SamplePoint> snapshot() const {
    std::shared_lock lock(mutex_);
    return samples_;
  }

  /// Read access under the shared lock.
  template <typename Fn>
  decltype(auto) read(Fn&& fn) const {
    std::shared_lock lock(mutex_);
    return fn(std::span<const SamplePoint>(samples_));
  }

  bool contains(SampleId id) const {
    std::shared_lock lock(mutex_);
    return index_.count(id) != 0;
  }

  SamplePoint get(SampleId id) const {
    std::shared_lock lock(mutex_);
    return samples_[position(id)];
  }

  /// Applies `fn` to one sample under the writer lock and re-checks invariants.
  template <typename Fn>
  void commit(SampleId id, Fn&& fn) {
    std::unique_lock lock(mutex_);
    SamplePoint updated = samples_[position(id)];
    fn(updated);
    check_invariants(updated);
    require(updated.id == id, ErrorKind::state, "commit may not change a sample id");
    samples_[position(id)] = std::move(updated);
  }

  /// Whole-catalog update under the writer lock.
  template <typename Fn>
  void commit_all(Fn&& fn) {
    std::unique_lock lock(mutex_);
    std::vector<SamplePoint> updated = samples_;
    fn(updated);
    require(updated.size() == samples_.size(), ErrorKind::state, "commit_all may not add or drop samples");
    for (std::size_t i = 0; i < updated.size(); ++i) {
      check_invariants(updated[i]);
      require(updated[i].id == samples_[i].id, ErrorKind::state, "commit_all may not reorder samples");
    }
    samples_ = std::move(updated);
  }

 private:
  void reset(std::vector<SamplePoint> samples) {
    std::unique_lock lock(mutex_);
    index_.clear();
    for (std::size_t i = 0; i < samples.size(); ++i) {
      check_invariants(samples[i]);
      if (!index_.emplace(samples[i].id, i).second) {
        fail(ErrorKind::data, "duplicate sample id " + std::to_string(samples[i].id));
      }
    }
    samples_ = std::move(samples);
  }

  std::size_t position(SampleId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) fail(ErrorKind::not_found, "unknown sample id " + std::to_string(id));
    return it->second;
  }

  mutable std::shared_mutex mutex_;
  std::vector<SamplePoint> samples_;
  std::unordered_map<SampleId, std::size_t> index_;
};

inline void write_samples_jsonl(std::ostream& out, std::span<const SamplePoint> samples) {
  nlohmann::ordered_json header;
  header["format"] = kSampleFormat;
  header["version"] = kSampleFormatVersion;
  header["count"] = samples.size();
  out << header.dump() << '\n';
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
}

inline std::vector<SamplePoint> read_samples_jsonl(std::istream& in) {
  std::string line;
  bool have_header = false;
  std::vector<SamplePoint> samples;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::format, std::string("bad JSON line: ") + e.what());
    }
    if (!have_header) {
      require(j.value("format", std::string()) == kSampleFormat, ErrorKind::format, "missing sample file header");
      require(j.value("version", 0) == kSampleFormatVersion, ErrorKind::format, "unsupported sample file version");
      have_header = true;
      continue;
    }
    samples.push_back(sample_from_json(j));
  }
  require(have_header, ErrorKind::format, "empty sample file");
  return samples;
}

inline void write_samples_jsonl(const std::string& path, std::span<const SamplePoint> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  write_samples_jsonl(out, samples);
}

inline std::vector<SamplePoint> read_samples_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  return read_samples_jsonl(in);
}

/// id,lon,lat,class export. Class is the binary label; excluded samples are
/// written as "unlabelable".
inline void write_samples_csv(std::ostream& out, std::span<const SamplePoint> samples) {
  out << "id,lon,lat,class\n";
  char buf[32];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof(buf), "%.6f", s.lon);
    out << s.id << ',' << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.6f", s.lat);
    out << buf << ',' << (s.excluded ? "unlabelable" : to_string(s.current_label)) << '\n';
  }
}

}  // namespace consensus
