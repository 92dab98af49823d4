#include <doctest.h>

#include <thread>

#include "fixtures.hpp"
#include "iir/baselines.hpp"
#include "iir/service.hpp"

// After Eigen: resolv.h, pulled in here, defines a macro named _res.
#include <httplib.h>

using namespace iir;
using namespace iir::test;
using json = nlohmann::json;

namespace {

/// A simulated user that remembers its answers for replay.
class RecordingUser final : public User {
 public:
  explicit RecordingUser(SimUser inner) : inner_(std::move(inner)) {}
  UserResponse respond(const SessionState& s, const Payload& p) override {
    auto r = inner_.respond(s, p);
    log.push_back(r);
    return r;
  }
  std::vector<UserResponse> log;

 private:
  SimUser inner_;
};

/// Always answers with the scripted action, ignoring features, but reports Q-values.
class FixedPolicy final : public Policy {
 public:
  explicit FixedPolicy(std::vector<Action> script) : script_(std::move(script)) {}
  Action choose(const FeatureVector& fv) override {
    const auto t = static_cast<std::size_t>(fv.turn);
    return t < script_.size() ? script_[t] : Action::ShowList;
  }
  bool needs_features() const override { return false; }
  std::optional<std::array<double, kNumActions>> q_values(const FeatureVector&) const override {
    return std::array<double, kNumActions>{1, 2, 3, 4, 5};
  }

 private:
  std::vector<Action> script_;
};

struct ServiceFixture {
  Experiment exp{small_config()};
  SessionManager sessions{exp.env(), make_policies()};

  static std::map<std::string, PolicyEntry> make_policies() {
    std::map<std::string, PolicyEntry> p;
    p["random"] = {[](std::uint64_t seed) { return std::make_unique<RandomPolicy>(seed); }, nullptr, false};
    p["dqn"] = {[](std::uint64_t) {
                  return std::make_unique<FixedPolicy>(std::vector<Action>{
                      Action::ReturnKeyTerm, Action::ReturnDocuments, Action::ReturnRequest});
                },
                nullptr, true};
    return p;
  }

  const Query& q0() const { return exp.queries()[0]; }
  json create(const std::string& policy, std::uint64_t seed = 1) {
    return sessions.create({{"query", q0().text}, {"policy", policy}, {"qid", q0().qid}, {"seed", seed}});
  }
};

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 200;
}

}  // namespace

TEST_CASE("create returns a session and the first payload") {
  ServiceFixture f;
  const auto r = f.create("dqn");
  CHECK(r.contains("session_id"));
  CHECK(r["action"] == "ReturnKeyTerm");
  CHECK(r["payload"]["type"] == "keyterm");
  CHECK(r["payload"]["term"].is_string());
  REQUIRE(r.contains("q_values"));
  CHECK(r["q_values"].size() == 5);

  const auto g = f.sessions.get(r["session_id"]);
  CHECK(g["transcript"].size() == 1);
  CHECK(g["query"] == f.q0().text);

  const auto rnd = f.create("random");
  CHECK_FALSE(rnd.contains("q_values"));
  CHECK_FALSE(f.sessions.get(rnd["session_id"]).contains("q_values"));
  CHECK(rnd["session_id"] != r["session_id"]);
}

TEST_CASE("error statuses") {
  ServiceFixture f;
  CHECK(status_of([&] { f.sessions.create({{"query", "x"}, {"policy", "nope"}}); }) == 404);
  try {
    f.sessions.create({{"query", "x"}, {"policy", "nope"}});
  } catch (const ServiceError& e) {
    CHECK(std::string(e.what()).find("nope") != std::string::npos);
  }
  CHECK(status_of([&] { f.sessions.create({{"query", "  "}, {"policy", "random"}}); }) == 400);
  CHECK(status_of([&] { f.sessions.create({{"policy", "random"}}); }) == 400);
  CHECK(status_of([&] { f.sessions.get("s999"); }) == 404);
  CHECK(status_of([&] { f.sessions.step("s999", {{"answer", "yes"}}); }) == 404);
  CHECK(status_of([&] { f.sessions.document("zzz"); }) == 404);
  CHECK(f.sessions.document(f.exp.corpus().doc(0).id)["text"] == f.exp.corpus().doc(0).text);
  CHECK(f.sessions.policies()["policies"].size() == 2);

  const auto id = f.create("dqn")["session_id"].get<std::string>();
  try {
    f.sessions.step(id, {{"doc", "d007"}});
    FAIL("expected a type mismatch");
  } catch (const ServiceError& e) {
    CHECK(e.status() == 400);
    CHECK(std::string(e.what()).find("keyterm") != std::string::npos);
  }
  CHECK(status_of([&] { f.sessions.step(id, {{"answer", "maybe"}}); }) == 400);
  auto r = f.sessions.step(id, {{"answer", "yes"}});
  CHECK(r["payload"]["type"] == "documents");
  CHECK(r["payload"]["docs"].size() == 10);
  CHECK(status_of([&] { f.sessions.step(id, {{"doc", "not-a-doc"}}); }) == 400);
  r = f.sessions.step(id, {{"doc", nullptr}});
  CHECK(r["payload"]["type"] == "request");
  r = f.sessions.step(id, {{"term", "anything"}});
  CHECK(r["terminal"] == true);
  CHECK(r["payload"]["type"] == "final");
  CHECK(status_of([&] { f.sessions.step(id, {{"answer", "yes"}}); }) == 409);
  CHECK(f.sessions.get(id)["transcript"].size() == 4);
}

TEST_CASE("a replayed session earns the simulated rewards") {
  ServiceFixture f;
  for (std::uint64_t seed : {3u, 4u, 5u, 6u}) {
    RandomPolicy policy(seed);
    auto sim = f.exp.user();
    sim.reseed(seed * 101);
    RecordingUser user(sim);
    const auto ep = run_episode(f.exp.env(), nullptr, policy, user, f.q0());

    auto r = f.create("random", seed);
    const std::string id = r["session_id"];
    for (std::size_t k = 0; k + 1 < ep.steps.size(); ++k) {
      r = f.sessions.step(id, response_to_json(user.log[k], f.exp.env()));
    }
    CHECK(r["terminal"] == true);
    const auto g = f.sessions.get(id);
    REQUIRE(g["transcript"].size() == ep.steps.size());
    for (std::size_t k = 0; k < ep.steps.size(); ++k) {
      CHECK(g["transcript"][k]["action"] == std::string(action_name(ep.steps[k].action)));
      CHECK(g["transcript"][k]["reward"].get<double>() == ep.steps[k].reward);
    }
    CHECK(g["return"].get<double>() == doctest::Approx(ep.total_return));
  }
}

TEST_CASE("concurrent sessions stay isolated and idle ones expire") {
  ServiceFixture f;
  std::vector<std::string> ids;
  for (int i = 0; i < 4; ++i) ids.push_back(f.create("dqn")["session_id"]);
  std::vector<std::thread> threads;
  std::vector<int> finals(4, 0);
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([&, i] {
      f.sessions.step(ids[i], {{"answer", i % 2 ? "yes" : "no"}});
      f.sessions.step(ids[i], {{"doc", nullptr}});
      finals[i] = f.sessions.step(ids[i], {{"term", nullptr}})["terminal"].get<bool>();
    });
  }
  for (auto& t : threads) t.join();
  for (int i = 0; i < 4; ++i) {
    CHECK(finals[i] == 1);
    const auto g = f.sessions.get(ids[i]);
    CHECK(g["transcript"][0]["response"]["answer"] == (i % 2 ? "yes" : "no"));
  }
  CHECK(f.sessions.size() == 4);
  CHECK(f.sessions.expire(SessionManager::Clock::now()) == 0);
  CHECK(f.sessions.expire(SessionManager::Clock::now() + std::chrono::hours(1)) == 4);
  CHECK(f.sessions.size() == 0);
}

TEST_CASE("HTTP routes") {
  ServiceFixture f;
  HttpService http(f.sessions);
  REQUIRE(http.bind("127.0.0.1", 0));
  REQUIRE(http.port() > 0);
  std::thread server([&] { http.listen(); });
  httplib::Client cli("127.0.0.1", http.port());

  auto res = cli.Get("/policies");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");

  json body{{"query", f.q0().text}, {"policy", "dqn"}, {"qid", f.q0().qid}};
  res = cli.Post("/sessions", body.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto created = json::parse(res->body);
  const std::string id = created["session_id"];

  res = cli.Post("/sessions/" + id + "/step", R"({"doc": "d001"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  CHECK(json::parse(res->body).contains("error"));
  res = cli.Post("/sessions/" + id + "/step", "{not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  res = cli.Post("/sessions/" + id + "/step", R"({"answer": "no"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  res = cli.Get("/sessions/" + id);
  REQUIRE(res);
  CHECK(json::parse(res->body)["transcript"].size() == 2);
  res = cli.Get("/sessions/nope");
  REQUIRE(res);
  CHECK(res->status == 404);
  res = cli.Post("/sessions", R"({"query": "x", "policy": "nope"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 404);
  res = cli.Get("/docs/" + f.exp.corpus().doc(0).id);
  REQUIRE(res);
  CHECK(json::parse(res->body)["id"] == f.exp.corpus().doc(0).id);
  res = cli.Options("/sessions");
  REQUIRE(res);
  CHECK(res->status < 300);

  http.stop();
  server.join();
}

TEST_CASE("payload and response JSON") {
  ServiceFixture f;
  const auto s = f.exp.env().start(f.q0());
  for (Action a : kAllActions) {
    const auto j = payload_to_json(f.exp.env().propose(s, a), f.exp.env());
    CHECK(j["type"] == payload_type(a));
  }
  CHECK(payload_type(Action::ShowList) == "final");
  CHECK(payload_type(Action::ReturnTopic) == "topics");
  const auto topics = payload_to_json(f.exp.env().propose(s, Action::ReturnTopic), f.exp.env());
  CHECK(topics["topics"][0]["top_terms"].size() == 5);
  CHECK(std::holds_alternative<KeyTermResponse>(response_from_json({{"answer", true}}, Action::ReturnKeyTerm)));
  CHECK(std::get<TopicResponse>(response_from_json({{"topic", 2}}, Action::ReturnTopic)).topic == 2);
  CHECK_THROWS_AS(response_from_json({{"topic", "two"}}, Action::ReturnTopic), ServiceError);
  CHECK_THROWS_AS(response_from_json({{"topic", 1}, {"doc", "x"}}, Action::ReturnTopic), ServiceError);
  const auto rt = response_to_json(RequestResponse{"word"}, f.exp.env());
  CHECK(rt == json{{"term", "word"}});
}
