#pragma once

// Stateful prediction sessions behind a JSON request/reply interface. The
// HTTP binding lives in http_service.hpp; this part has no transport.

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "wordpred/config.hpp"
#include "wordpred/error.hpp"
#include "wordpred/ngram.hpp"
#include "wordpred/pipeline.hpp"
#include "wordpred/semantic_space.hpp"
#include "wordpred/typing_session.hpp"
#include "wordpred/utf8.hpp"

namespace wordpred {

inline constexpr int kApiVersion = 1;

struct Reply {
  int status = 200;
  nlohmann::json body;
};

inline Reply error_reply(int status, const std::string& message) {
  return {status, {{"v", kApiVersion}, {"error", message}}};
}

inline nlohmann::json to_json(const PredictionList& list) {
  auto out = nlohmann::json::array();
  for (std::size_t i = 0; i < list.size(); ++i) {
    out.push_back({{"word", list[i].word}, {"p", list[i].probability}, {"rank", i + 1}});
  }
  return out;
}

/// Parses {"type": "char"|"select"|"backspace", "value": ...}.
inline KeyEvent parse_key_event(const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("type") || !body["type"].is_string()) {
    throw Error("event needs a string \"type\"");
  }
  const auto type = body["type"].get<std::string>();
  if (type == "backspace") return KeyEvent::backspace();
  if (type == "select") {
    if (!body.contains("value") || !body["value"].is_number_integer() || body["value"].get<long long>() < 1) {
      throw Error("select needs a positive integer \"value\" (rank)");
    }
    return KeyEvent::select(body["value"].get<std::size_t>());
  }
  if (type == "char") {
    if (!body.contains("value") || !body["value"].is_string()) throw Error("char needs a string \"value\"");
    const auto cps = utf8::to_u32(body["value"].get<std::string>());
    if (cps.size() != 1) throw Error("char \"value\" must be exactly one character");
    return KeyEvent::character(cps[0]);
  }
  throw Error("unknown event type '" + type + "'");
}

inline nlohmann::json to_json(const KeyEvent& e) {
  switch (e.type) {
    case KeyEvent::Type::character: {
      std::string s;
      utf8::append(s, e.ch);
      return {{"type", "char"}, {"value", s}};
    }
    case KeyEvent::Type::select:
      return {{"type", "select"}, {"value", e.rank}};
    default:
      return {{"type", "backspace"}};
  }
}

struct ServiceOptions {
  std::chrono::seconds idle_timeout{30 * 60};
};

class PredictionService {
 public:
  using Clock = std::chrono::steady_clock;

  PredictionService(std::shared_ptr<const NGramModel> lm, std::shared_ptr<const SemanticSpace> space,
                    std::map<std::string, CombinerConfig> configs, ServiceOptions options = {})
      : lm_(std::move(lm)), space_(std::move(space)), options_(options), rng_(std::random_device{}()) {
    if (!lm_) throw Error("service needs a language model");
    for (auto& [name, c] : configs) {
      if (uses_space(c.method) && !space_) continue;
      pipelines_[name] = std::make_shared<const Pipeline>(lm_, space_, c);
    }
    if (pipelines_.empty()) throw Error("no usable configuration");
  }

  const ServiceOptions& options() const { return options_; }

  Reply list_configs() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [name, p] : pipelines_) list.push_back(p->config().to_json());
    return {200, {{"v", kApiVersion}, {"configs", list}}};
  }

  /// Body: {"config": "<preset name>"} or {"config": {...inline config...}};
  /// optional "context": [tokens] pre-committed without keystrokes.
  Reply create_session(const nlohmann::json& body, Clock::time_point now = Clock::now()) {
    evict_idle(now);
    std::shared_ptr<const Pipeline> pipeline;
    try {
      const auto& cfg = body.is_object() && body.contains("config") ? body["config"] : nlohmann::json("baseline");
      if (cfg.is_string()) {
        auto it = pipelines_.find(cfg.get<std::string>());
        if (it == pipelines_.end()) return error_reply(404, "unknown config '" + cfg.get<std::string>() + "'");
        pipeline = it->second;
      } else {
        pipeline = std::make_shared<const Pipeline>(lm_, space_, CombinerConfig::from_json(cfg));
      }
    } catch (const Error& e) {
      return error_reply(400, e.what());
    } catch (const nlohmann::json::exception& e) {
      return error_reply(400, e.what());
    }
    auto slot = std::make_shared<Slot>(pipeline, now);
    if (body.is_object() && body.contains("context")) {
      if (!body["context"].is_array()) return error_reply(400, "\"context\" must be an array of tokens");
      for (const auto& t : body["context"]) {
        if (!t.is_string()) return error_reply(400, "\"context\" must be an array of tokens");
        for (auto& tok : tokenize(t.get<std::string>())) {
          if (tok.kind == TokenKind::sentence_boundary) continue;
          slot->session.predictor().commit(tok);
          slot->context.push_back(tok.surface);
        }
      }
    }
    std::string id;
    {
      std::unique_lock lock(map_mutex_);
      do id = new_id(); while (sessions_.contains(id));
      slot->id = id;
      sessions_[id] = slot;
    }
    std::lock_guard g(slot->mutex);
    auto state = snapshot(*slot);
    return {201, state};
  }

  Reply key_event(const std::string& id, const nlohmann::json& body, Clock::time_point now = Clock::now()) {
    auto slot = find(id);
    if (!slot) return error_reply(404, "unknown session '" + id + "'");
    KeyEvent e;
    try {
      e = parse_key_event(body);
    } catch (const Error& err) {
      return error_reply(400, err.what());
    }
    std::lock_guard g(slot->mutex);
    slot->last_used = now;
    try {
      slot->session.apply(e);
    } catch (const Error& err) {
      return error_reply(400, err.what());
    }
    return {200, snapshot(*slot)};
  }

  Reply get_state(const std::string& id, Clock::time_point now = Clock::now()) {
    auto slot = find(id);
    if (!slot) return error_reply(404, "unknown session '" + id + "'");
    std::lock_guard g(slot->mutex);
    slot->last_used = now;
    return {200, snapshot(*slot)};
  }

  Reply delete_session(const std::string& id) {
    std::unique_lock lock(map_mutex_);
    if (sessions_.erase(id) == 0) return error_reply(404, "unknown session '" + id + "'");
    return {200, {{"v", kApiVersion}, {"deleted", id}}};
  }

  /// Drops sessions idle for longer than the timeout; returns how many.
  std::size_t evict_idle(Clock::time_point now = Clock::now()) {
    std::unique_lock lock(map_mutex_);
    return std::erase_if(sessions_, [&](const auto& kv) {
      std::lock_guard g(kv.second->mutex);
      return now - kv.second->last_used > options_.idle_timeout;
    });
  }

  std::size_t session_count() const {
    std::shared_lock lock(map_mutex_);
    return sessions_.size();
  }

 private:
  struct Slot {
    Slot(std::shared_ptr<const Pipeline> p, Clock::time_point t)
        : pipeline(std::move(p)), session(PipelinePredictor(*pipeline), pipeline->config().list_size), last_used(t) {}
    std::string id;
    std::shared_ptr<const Pipeline> pipeline;
    /// Tokens committed at creation; they cost no keystrokes.
    std::vector<std::string> context;
    TypingSession<PipelinePredictor> session;
    Clock::time_point last_used;
    std::mutex mutex;
  };

  std::shared_ptr<Slot> find(const std::string& id) const {
    std::shared_lock lock(map_mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  std::string new_id() {
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng_()),
                  static_cast<unsigned long long>(rng_()));
    return buf;
  }

  static nlohmann::json snapshot(Slot& s) {
    auto& ts = s.session;
    std::string text;
    auto words = nlohmann::json::array();
    for (const auto& t : ts.committed()) {
      if (!text.empty()) text += ' ';
      text += t.surface;
      if (t.is_word()) words.push_back(t.surface);
    }
    std::vector<std::string> offered(ts.offered().begin(), ts.offered().end());
    std::sort(offered.begin(), offered.end());
    return {{"v", kApiVersion},
            {"id", s.id},
            {"config", s.pipeline->config().name},
            {"context", s.context},
            {"text", text},
            {"words", words},
            {"prefix", ts.prefix()},
            {"offered", offered},
            {"predictions", to_json(ts.predictions())},
            {"counters", {{"kp", ts.kp()}, {"ka", ts.ka()}, {"ksr", ts.ksr()}}}};
  }

  std::shared_ptr<const NGramModel> lm_;
  std::shared_ptr<const SemanticSpace> space_;
  ServiceOptions options_;
  std::map<std::string, std::shared_ptr<const Pipeline>> pipelines_;
  mutable std::shared_mutex map_mutex_;
  std::unordered_map<std::string, std::shared_ptr<Slot>> sessions_;
  std::mt19937_64 rng_;
};

}  // namespace wordpred
