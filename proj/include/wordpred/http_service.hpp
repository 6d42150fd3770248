#pragma once

// HTTP routes for PredictionService (cpp-httplib).

// Must come after the Eigen includes.
#include "wordpred/service.hpp"

#include <httplib.h>
#include <json.hpp>

#include <string>

namespace wordpred {

namespace detail {

inline void send(httplib::Response& res, const Reply& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

inline bool parse_body(const httplib::Request& req, httplib::Response& res, nlohmann::json& out) {
  if (req.body.empty()) {
    out = nlohmann::json::object();
    return true;
  }
  try {
    out = nlohmann::json::parse(req.body);
    return true;
  } catch (const nlohmann::json::parse_error& e) {
    send(res, error_reply(400, std::string("malformed JSON: ") + e.what()));
    return false;
  }
}

}  // namespace detail

/// POST /sessions, POST /sessions/{id}/events, GET|DELETE /sessions/{id},
/// GET /configs, GET /health.
inline void mount(httplib::Server& server, PredictionService& service) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    detail::send(res, {200, {{"v", kApiVersion}, {"status", "ok"}}});
  });
  server.Get("/configs", [&service](const httplib::Request&, httplib::Response& res) {
    detail::send(res, service.list_configs());
  });
  server.Post("/sessions", [&service](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    if (detail::parse_body(req, res, body)) detail::send(res, service.create_session(body));
  });
  server.Post(R"(/sessions/([^/]+)/events)", [&service](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    if (detail::parse_body(req, res, body)) detail::send(res, service.key_event(req.matches[1], body));
  });
  server.Get(R"(/sessions/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    detail::send(res, service.get_state(req.matches[1]));
  });
  server.Delete(R"(/sessions/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    detail::send(res, service.delete_session(req.matches[1]));
  });
}

}  // namespace wordpred
