#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "toy.hpp"
#include "wordpred/wordpred.hpp"
#include "wordpred/http_service.hpp"

using namespace wordpred;
using json = nlohmann::json;

namespace {

const char* kArpa = R"(\data\
ngram 1=8
ngram 2=3

\1-grams:
-1.0	<unk>
-99	<s>	-0.3
-1.2	</s>
-0.6	the	-0.2
-0.9	cat
-0.8	car
-1.2	dog
-0.5	.

\2-grams:
-0.2	the cat
-0.5	the dog
-0.4	<s> the

\end\
)";

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::istringstream is(kArpa);
    lm = std::make_shared<const NGramModel>(read_arpa(is));
    std::map<std::string, CombinerConfig> configs;
    for (const auto& n : CombinerConfig::preset_names()) configs[n] = CombinerConfig::preset(n);
    service = std::make_unique<PredictionService>(lm, nullptr, configs, ServiceOptions{std::chrono::seconds(60)});
  }

  std::string create(const json& body = {{"config", "baseline"}}) {
    const auto r = service->create_session(body, t0);
    EXPECT_EQ(r.status, 201) << r.body.dump();
    return r.body["id"].get<std::string>();
  }

  Reply send(const std::string& id, const json& e) { return service->key_event(id, e, t0); }

  std::vector<std::string> words(const json& snap) {
    std::vector<std::string> out;
    for (const auto& p : snap["predictions"]) out.push_back(p["word"].get<std::string>());
    return out;
  }

  std::shared_ptr<const NGramModel> lm;
  std::unique_ptr<PredictionService> service;
  PredictionService::Clock::time_point t0{};
};

}  // namespace

TEST_F(ServiceTest, ListsOnlyUsableConfigs) {
  const auto r = service->list_configs();
  EXPECT_EQ(r.status, 200);
  std::set<std::string> names;
  for (const auto& c : r.body["configs"]) names.insert(c["name"].get<std::string>());
  EXPECT_EQ(names, (std::set<std::string>{"baseline", "cache"}));
}

TEST_F(ServiceTest, CreateReturnsSnapshot) {
  const auto r = service->create_session({{"config", "baseline"}}, t0);
  ASSERT_EQ(r.status, 201);
  const auto& s = r.body;
  EXPECT_EQ(s["v"], 1);
  EXPECT_EQ(s["config"], "baseline");
  EXPECT_EQ(s["prefix"], "");
  EXPECT_EQ(s["text"], "");
  EXPECT_EQ(words(s), (std::vector<std::string>{"the", "car", "cat", "dog"}));
  EXPECT_EQ(s["predictions"][0]["rank"], 1);
  EXPECT_NEAR(s["predictions"][0]["p"].get<double>(), std::pow(10.0, -0.4), 1e-12);
  EXPECT_EQ(s["counters"]["kp"], 0);
  EXPECT_EQ(s["counters"]["ksr"], 0.0);
  EXPECT_NE(create(), create());
  EXPECT_EQ(service->session_count(), 3u);
}

TEST_F(ServiceTest, CreateErrors) {
  EXPECT_EQ(service->create_session({{"config", "cwgi"}}, t0).status, 404);
  EXPECT_EQ(service->create_session({{"config", "nope"}}, t0).status, 404);
  EXPECT_EQ(service->create_session({{"config", {{"method", "li"}}}}, t0).status, 400);
  EXPECT_EQ(service->create_session({{"config", {{"method", "cache"}, {"beta", -1}}}}, t0).status, 400);
  EXPECT_EQ(service->create_session({{"config", 7}}, t0).status, 400);
  EXPECT_EQ(service->create_session({{"config", "baseline"}, {"context", "the"}}, t0).status, 400);
  EXPECT_EQ(service->session_count(), 0u);
}

TEST_F(ServiceTest, InlineConfigAndContext) {
  const auto r = service->create_session(
      {{"config", {{"name", "mine"}, {"method", "cache"}, {"list_size", 2}}}, {"context", {"the"}}}, t0);
  ASSERT_EQ(r.status, 201);
  EXPECT_EQ(r.body["config"], "mine");
  EXPECT_EQ(r.body["context"], json({"the"}));
  EXPECT_EQ(words(r.body), (std::vector<std::string>{"cat", "dog"}));
  EXPECT_EQ(r.body["counters"]["kp"], 0);
}

TEST_F(ServiceTest, TypingSelectingAndBackspace) {
  const auto id = create();
  auto r = send(id, {{"type", "char"}, {"value", "T"}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["prefix"], "t");
  EXPECT_TRUE(r.body["predictions"].empty());
  EXPECT_EQ(r.body["offered"], json({"car", "cat", "dog", "the"}));

  r = send(id, {{"type", "backspace"}});
  EXPECT_EQ(r.body["prefix"], "");
  EXPECT_EQ(r.body["counters"]["kp"], 2);
  EXPECT_TRUE(r.body["predictions"].empty());

  r = send(id, {{"type", "char"}, {"value", " "}});
  r = send(id, {{"type", "char"}, {"value", "t"}});
  r = send(id, {{"type", "char"}, {"value", "h"}});
  r = send(id, {{"type", "char"}, {"value", "e"}});
  r = send(id, {{"type", "char"}, {"value", " "}});
  EXPECT_EQ(r.body["text"], "the");
  EXPECT_EQ(words(r.body), (std::vector<std::string>{"cat", "dog", "the", "car"}));

  r = send(id, {{"type", "select"}, {"value", 1}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["text"], "the cat");
  EXPECT_EQ(r.body["words"], json({"the", "cat"}));
  EXPECT_EQ(r.body["counters"]["kp"], 8);
  EXPECT_EQ(r.body["counters"]["ka"], 7);

  r = send(id, {{"type", "char"}, {"value", "."}});
  EXPECT_EQ(r.body["text"], "the cat .");
  EXPECT_EQ(words(r.body)[0], "the");
}

TEST_F(ServiceTest, BadEvents) {
  const auto id = create();
  EXPECT_EQ(send(id, {{"type", "jump"}}).status, 400);
  EXPECT_EQ(send(id, {{"value", "a"}}).status, 400);
  EXPECT_EQ(send(id, {{"type", "char"}, {"value", "ab"}}).status, 400);
  EXPECT_EQ(send(id, {{"type", "char"}}).status, 400);
  EXPECT_EQ(send(id, {{"type", "select"}, {"value", 0}}).status, 400);
  EXPECT_EQ(send(id, {{"type", "select"}, {"value", 9}}).status, 400);
  EXPECT_EQ(send("missing", {{"type", "backspace"}}).status, 404);
  send(id, {{"type", "char"}, {"value", "x"}});
  const auto r = send(id, {{"type", "select"}, {"value", 1}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["v"], 1);
  EXPECT_TRUE(r.body["error"].is_string());
}

TEST_F(ServiceTest, StateDeleteAndIsolation) {
  const auto a = create(), b = create();
  send(a, {{"type", "char"}, {"value", "d"}});
  EXPECT_EQ(service->get_state(a, t0).body["prefix"], "d");
  EXPECT_EQ(service->get_state(b, t0).body["prefix"], "");
  EXPECT_EQ(service->delete_session(a).status, 200);
  EXPECT_EQ(service->delete_session(a).status, 404);
  EXPECT_EQ(service->get_state(a, t0).status, 404);
  EXPECT_EQ(service->get_state(b, t0).status, 200);
}

TEST_F(ServiceTest, IdleSessionsExpire) {
  const auto a = create(), b = create();
  service->get_state(b, t0 + std::chrono::seconds(50));
  EXPECT_EQ(service->evict_idle(t0 + std::chrono::seconds(61)), 1u);
  EXPECT_EQ(service->get_state(a, t0).status, 404);
  EXPECT_EQ(service->get_state(b, t0).status, 200);
}

TEST(KeyEventJson, RoundTrip) {
  for (const auto& e : {KeyEvent::character(U'é'), KeyEvent::select(3), KeyEvent::backspace()}) {
    EXPECT_EQ(parse_key_event(to_json(e)), e);
  }
}

TEST(Http, Routes) {
  std::istringstream is(kArpa);
  auto lm = std::make_shared<const NGramModel>(read_arpa(is));
  PredictionService service(lm, nullptr, {{"baseline", CombinerConfig::preset("baseline")}});
  httplib::Server server;
  mount(server, service);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  auto res = cli.Get("/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");

  res = cli.Get("/configs");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["configs"].size(), 1u);

  res = cli.Post("/sessions", R"({"config": "baseline"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  const auto id = json::parse(res->body)["id"].get<std::string>();

  res = cli.Post("/sessions/" + id + "/events", R"({"type": "select", "value": 1})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["text"], "the");

  res = cli.Post("/sessions/" + id + "/events", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  res = cli.Get("/sessions/" + id);
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["words"], json({"the"}));

  res = cli.Options("/sessions");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);

  res = cli.Delete("/sessions/" + id);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  res = cli.Get("/sessions/" + id);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);

  res = cli.Post("/sessions", "", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);

  server.stop();
  th.join();
}
