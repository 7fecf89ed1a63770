#pragma once

// Annotation service: task queue, decisions, progress and iteration control
// over a LabelingLoop, plus an HTTP/JSON binding. Requires Threads and ZLIB.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "error.hpp"
#include "labeling.hpp"
#include "land_cover.hpp"
#include "png.hpp"
#include "samples.hpp"
#include "text.hpp"

namespace consensus {

enum class Capability { annotate, admin };

struct SessionToken {
  std::string token;
  std::string annotator_id;
  Capability capability = Capability::annotate;
  std::int64_t issued_at = 0;
};

/// Parses "token:annotator[:admin|annotate]" entries separated by commas.
inline std::vector<SessionToken> parse_token_list(const std::string& text) {
  std::vector<SessionToken> out;
  for (const auto& entry : split(text, ',')) {
    if (entry.empty()) continue;
    const auto parts = split(entry, ':');
    if (parts.size() < 2 || parts.size() > 3 || parts[0].empty() || parts[1].empty()) {
      fail(ErrorKind::config, "bad token entry '" + entry + "'");
    }
    SessionToken t{parts[0], parts[1], Capability::annotate, 0};
    if (parts.size() == 3) {
      if (parts[2] == "admin") t.capability = Capability::admin;
      else if (parts[2] != "annotate") fail(ErrorKind::config, "unknown capability '" + parts[2] + "'");
    }
    out.push_back(std::move(t));
  }
  return out;
}

struct TaskView {
  TaskId task_id = 0;
  SampleId sample_id = 0;
  std::string patch_url;
  BinaryLabel proposed_label = BinaryLabel::non_forest;
  int required_decisions = 1;
  std::string guideline_id;
  std::size_t remaining = 0;  // tasks this annotator could still take, this one included
};

struct DecisionAck {
  TaskId task_id = 0;
  bool resolved = false;
  std::optional<BinaryLabel> resolved_label;
  bool unlabelable = false;

  bool operator==(const DecisionAck&) const = default;
};

struct Progress {
  int iteration_index = 0;
  std::string status = "idle";
  std::size_t tasks_total = 0;
  std::size_t tasks_resolved = 0;
  std::size_t consistent_count = 0;
  std::size_t inconsistent_count = 0;
  double labor_saved_so_far = 0.0;  // strict, over every routed sample so far
  std::size_t excluded_count = 0;
  std::size_t confirmed_count = 0;
  std::size_t annotations_performed = 0;
};

struct AdvanceSummary {
  int iteration_index = 0;
  std::string status;
  std::size_t batch_size = 0;
  std::size_t consistent_count = 0;
  std::size_t inconsistent_count = 0;
  bool complete = false;
  LaborLedger ledger;
};

using PatchRenderer = std::function<Patch(const SamplePoint&)>;

class AnnotationService {
 public:
  AnnotationService(LabelingLoop& loop, SampleStore& store, std::vector<SessionToken> tokens, PatchRenderer renderer)
      : loop_(loop), store_(store), renderer_(std::move(renderer)) {
    const auto now = wall_clock();
    for (auto& t : tokens) {
      t.issued_at = now;
      for (const auto& [_, other] : sessions_) {
        require(other.annotator_id != t.annotator_id, ErrorKind::config,
                "annotator id " + t.annotator_id + " has two tokens");
      }
      require(sessions_.emplace(t.token, t).second, ErrorKind::config, "duplicate token");
    }
    loop_.set_clock(wall_clock);
  }

  const SessionToken& authenticate(const std::string& token) const {
    auto it = sessions_.find(token);
    if (it == sessions_.end()) fail(ErrorKind::unauthorized, "unknown token");
    return it->second;
  }

  std::optional<TaskView> next_task(const SessionToken& session) const {
    std::lock_guard lock(mutex_);
    // A finished iteration that has not been advanced yet just has an empty queue.
    if (!loop_.started()) fail(ErrorKind::conflict, "no iteration has been started");
    std::optional<TaskView> view;
    std::size_t remaining = 0;
    for (const auto& t : loop_.state().tasks) {
      if (t.resolved() || t.decided_by(session.annotator_id)) continue;
      ++remaining;
      if (!view) {
        view = TaskView{t.task_id,
                        t.sample_id,
                        "/api/patches/" + std::to_string(t.sample_id),
                        t.proposed_label,
                        t.required_decisions,
                        std::string("guideline-") + to_string(t.proposed_label),
                        0};
      }
    }
    if (view) view->remaining = remaining;
    return view;
  }

  DecisionAck submit_decision(const SessionToken& session, TaskId task_id, LandCoverClass decided_class) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(task_id, session.annotator_id);
    if (auto it = receipts_.find(key); it != receipts_.end()) {
      if (it->second.first != decided_class) {
        fail(ErrorKind::conflict, "annotator already submitted a different class for task " + std::to_string(task_id));
      }
      return it->second.second;
    }
    if (!loop_.active()) {
      if (known_tasks_.count(task_id)) fail(ErrorKind::conflict, "task " + std::to_string(task_id) + " is closed");
      fail(ErrorKind::not_found, "unknown task " + std::to_string(task_id));
    }
    const AnnotationTask* task = nullptr;
    try {
      task = &loop_.task(task_id);
    } catch (const Error&) {
      if (known_tasks_.count(task_id)) fail(ErrorKind::conflict, "task " + std::to_string(task_id) + " is closed");
      throw;
    }
    if (task->resolved()) fail(ErrorKind::conflict, "task " + std::to_string(task_id) + " is already resolved");
    const auto result = loop_.submit(task_id, session.annotator_id, decided_class);
    DecisionAck ack{task_id, result.resolved, result.resolved_label, result.unlabelable};
    receipts_.emplace(key, std::make_pair(decided_class, ack));
    return ack;
  }

  Progress progress() const {
    std::lock_guard lock(mutex_);
    Progress p;
    const auto& state = loop_.state();
    const auto& ledger = loop_.ledger();
    p.iteration_index = state.iteration_index;
    p.status = loop_.started() ? to_string(state.status) : "idle";
    p.tasks_total = state.tasks.size();
    p.tasks_resolved = state.tasks.size() - state.open_tasks();
    p.consistent_count = state.consistent_set.size();
    p.inconsistent_count = state.inconsistent_set.size();
    std::size_t n = ledger.n_samples, cons = ledger.n_consistent_total, incons = ledger.n_inconsistent_total;
    if (!state.applied) {
      n += state.batch.size();
      cons += p.consistent_count;
      incons += p.inconsistent_count;
    }
    p.labor_saved_so_far = labor_report(n, cons, incons).saved_fraction_strict;
    store_.read([&](std::span<const SamplePoint> all) {
      for (const auto& s : all) {
        p.excluded_count += s.excluded;
        p.confirmed_count += s.confirmed;
        p.annotations_performed += s.annotations.size();
      }
    });
    return p;
  }

  AdvanceSummary advance_iteration(const SessionToken& session) {
    if (session.capability != Capability::admin) fail(ErrorKind::forbidden, "advance needs the admin capability");
    std::lock_guard lock(mutex_);
    if (loop_.active()) fail(ErrorKind::conflict, "open tasks remain");
    if (loop_.started() && !loop_.state().applied) loop_.apply_corrections();
    if (!loop_.pool_exhausted()) {
      try {
        loop_.run_iteration();
      } catch (const Error& e) {
        fail(ErrorKind::conflict, e.what());
      }
      for (const auto& t : loop_.state().tasks) known_tasks_.insert(t.task_id);
    }
    const auto& state = loop_.state();
    AdvanceSummary s;
    s.iteration_index = state.iteration_index;
    s.complete = loop_.pool_exhausted();
    s.status = s.complete ? "complete" : to_string(state.status);
    s.batch_size = state.batch.size();
    s.consistent_count = state.consistent_set.size();
    s.inconsistent_count = state.inconsistent_set.size();
    s.ledger = loop_.ledger();
    return s;
  }

  std::string patch_png(SampleId id) const {
    if (!store_.contains(id)) fail(ErrorKind::not_found, "unknown sample " + std::to_string(id));
    return encode_png(renderer_(store_.get(id)));
  }

  static std::int64_t wall_clock() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
  }

 private:
  LabelingLoop& loop_;
  SampleStore& store_;
  PatchRenderer renderer_;
  std::map<std::string, SessionToken> sessions_;
  mutable std::mutex mutex_;
  std::map<std::pair<TaskId, std::string>, std::pair<LandCoverClass, DecisionAck>> receipts_;
  std::set<TaskId> known_tasks_;
};

// ---------------------------------------------------------------------------
// JSON views

inline nlohmann::ordered_json to_json(const TaskView& v) {
  nlohmann::ordered_json menu = nlohmann::ordered_json::array();
  for (auto c : kAllClasses) menu.push_back(to_string(c));
  return {{"task_id", v.task_id},         {"sample_id", v.sample_id},
          {"patch_url", v.patch_url},     {"proposed_label", to_string(v.proposed_label)},
          {"required_decisions", v.required_decisions}, {"class_menu", menu},
          {"guideline_id", v.guideline_id}, {"remaining", v.remaining}};
}

inline nlohmann::ordered_json to_json(const DecisionAck& a) {
  nlohmann::ordered_json j{{"task_id", a.task_id}, {"resolved", a.resolved}};
  j["resolved_label"] = a.resolved_label ? nlohmann::ordered_json(to_string(*a.resolved_label)) : nullptr;
  j["unlabelable"] = a.unlabelable;
  return j;
}

inline nlohmann::ordered_json to_json(const Progress& p) {
  return {{"iteration_index", p.iteration_index},
          {"status", p.status},
          {"tasks_total", p.tasks_total},
          {"tasks_resolved", p.tasks_resolved},
          {"consistent_count", p.consistent_count},
          {"inconsistent_count", p.inconsistent_count},
          {"labor_saved_so_far", p.labor_saved_so_far},
          {"excluded_count", p.excluded_count},
          {"confirmed_count", p.confirmed_count},
          {"annotations_performed", p.annotations_performed}};
}

inline nlohmann::ordered_json to_json(const LaborLedger& l) {
  const auto r = labor_report(l);
  return {{"n_samples", l.n_samples},
          {"n_consistent_total", l.n_consistent_total},
          {"n_inconsistent_total", l.n_inconsistent_total},
          {"annotations_performed", l.annotations_performed},
          {"n_unlabelable", l.n_unlabelable},
          {"baseline", l.baseline()},
          {"saved_fraction_strict", r.saved_fraction_strict},
          {"saved_fraction_relaxed", r.saved_fraction_relaxed}};
}

inline nlohmann::ordered_json to_json(const AdvanceSummary& s) {
  return {{"iteration_index", s.iteration_index},   {"status", s.status},
          {"batch_size", s.batch_size},             {"consistent_count", s.consistent_count},
          {"inconsistent_count", s.inconsistent_count}, {"complete", s.complete},
          {"ledger", to_json(s.ledger)}};
}

// ---------------------------------------------------------------------------
// HTTP binding

inline int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::unauthorized: return 401;
    case ErrorKind::forbidden: return 403;
    case ErrorKind::not_found: return 404;
    case ErrorKind::conflict:
    case ErrorKind::state:
    case ErrorKind::routing: return 409;
    case ErrorKind::argument:
    case ErrorKind::format: return 400;
    default: return 500;
  }
}

class HttpFrontend {
 public:
  explicit HttpFrontend(AnnotationService& service, std::string static_dir = {}) : service_(service) {
    routes();
    if (!static_dir.empty() && !server_.set_mount_point("/", static_dir)) {
      fail(ErrorKind::io, "cannot serve static directory " + static_dir);
    }
  }

  ~HttpFrontend() { stop(); }

  /// Binds and serves on a background thread; port 0 picks a free port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) fail(ErrorKind::io, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /// Serves on the calling thread until stop().
  void run(const std::string& host, int port) {
    if (!server_.listen(host, port)) fail(ErrorKind::io, "cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  using Handler = std::function<void(const SessionToken&, const httplib::Request&, httplib::Response&)>;

  static void send_json(httplib::Response& res, const nlohmann::ordered_json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  httplib::Server::Handler guarded(Handler handler) {
    return [this, handler](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto auth = req.get_header_value("Authorization");
        const std::string prefix = "Bearer ";
        if (auth.rfind(prefix, 0) != 0) fail(ErrorKind::unauthorized, "missing bearer token");
        handler(service_.authenticate(auth.substr(prefix.size())), req, res);
      } catch (const Error& e) {
        send_json(res, {{"error", to_string(e.kind())}, {"message", e.what()}}, http_status(e.kind()));
      } catch (const nlohmann::json::exception& e) {
        send_json(res, {{"error", "format"}, {"message", e.what()}}, 400);
      } catch (const std::exception& e) {
        send_json(res, {{"error", "internal"}, {"message", e.what()}}, 500);
      }
    };
  }

  static std::uint64_t path_id(const httplib::Request& req) {
    return static_cast<std::uint64_t>(parse_integer(req.matches[1].str()));
  }

  void routes() {
    server_.Get("/api/progress", guarded([this](const SessionToken&, const httplib::Request&, httplib::Response& res) {
                  send_json(res, to_json(service_.progress()));
                }));
    server_.Get("/api/tasks/next", guarded([this](const SessionToken& s, const httplib::Request&, httplib::Response& res) {
                  const auto task = service_.next_task(s);
                  send_json(res, {{"task", task ? to_json(*task) : nlohmann::ordered_json(nullptr)}});
                }));
    server_.Post(R"(/api/tasks/(\d+)/decision)",
                 guarded([this](const SessionToken& s, const httplib::Request& req, httplib::Response& res) {
                   const auto body = nlohmann::json::parse(req.body);
                   const auto cls = parse_land_cover(body.at("decided_class").get<std::string>());
                   send_json(res, to_json(service_.submit_decision(s, path_id(req), cls)));
                 }));
    server_.Get(R"(/api/patches/(\d+))",
                guarded([this](const SessionToken&, const httplib::Request& req, httplib::Response& res) {
                  res.set_content(service_.patch_png(path_id(req)), "image/png");
                }));
    server_.Post("/api/iteration/advance",
                 guarded([this](const SessionToken& s, const httplib::Request&, httplib::Response& res) {
                   send_json(res, to_json(service_.advance_iteration(s)));
                 }));
  }

  AnnotationService& service_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace consensus
