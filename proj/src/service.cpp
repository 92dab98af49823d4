#include "iir/service.hpp"

#include <httplib.h>

namespace iir {

using json = nlohmann::json;

namespace {

constexpr std::size_t kSnippetChars = 160;
constexpr std::size_t kTopicTerms = 5;

std::string snippet(const std::string& text) {
  if (text.size() <= kSnippetChars) return text;
  std::size_t cut = kSnippetChars;
  // Do not split a UTF-8 sequence.
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  return text.substr(0, cut) + "...";
}

json docs_json(const std::vector<ScoredDoc>& docs, const Corpus& corpus) {
  json out = json::array();
  for (const auto& d : docs) {
    const auto& doc = corpus.doc(d.doc);
    out.push_back({{"id", doc.id}, {"snippet", snippet(doc.text)}, {"score", d.score}});
  }
  return out;
}

std::string pending_shape(Action a) {
  switch (a) {
    case Action::ReturnDocuments: return "{\"doc\": id or null}";
    case Action::ReturnKeyTerm: return "{\"answer\": \"yes\", \"no\" or null}";
    case Action::ReturnRequest: return "{\"term\": string or null}";
    case Action::ReturnTopic: return "{\"topic\": id or null}";
    case Action::ShowList: return "no response";
  }
  return "";
}

}  // namespace

std::string payload_type(Action a) {
  switch (a) {
    case Action::ReturnDocuments: return "documents";
    case Action::ReturnKeyTerm: return "keyterm";
    case Action::ReturnRequest: return "request";
    case Action::ReturnTopic: return "topics";
    case Action::ShowList: return "final";
  }
  return "";
}

json payload_to_json(const Payload& p, const Environment& env) {
  const Corpus& corpus = env.corpus();
  json out{{"type", payload_type(p.action)}, {"action", std::string(action_name(p.action))}};
  switch (p.action) {
    case Action::ReturnDocuments:
    case Action::ShowList:
      out["docs"] = docs_json(p.docs, corpus);
      break;
    case Action::ReturnKeyTerm:
      out["term"] = p.term ? json(corpus.vocab().term(*p.term)) : json(nullptr);
      break;
    case Action::ReturnRequest:
      out["prompt"] = p.prompt;
      break;
    case Action::ReturnTopic: {
      json topics = json::array();
      for (int z : p.topics) {
        json terms = json::array();
        for (TermId t : env.topics()->top_terms(z, kTopicTerms)) terms.push_back(corpus.vocab().term(t));
        topics.push_back({{"id", z}, {"top_terms", terms}});
      }
      out["topics"] = topics;
      break;
    }
  }
  if (p.noop) out["noop"] = true;
  return out;
}

UserResponse response_from_json(const json& body, Action pending) {
  if (!body.is_object()) throw ServiceError(400, "response must be a JSON object");
  static const std::array<const char*, 4> keys = {"doc", "answer", "term", "topic"};
  int given = -1;
  for (int i = 0; i < 4; ++i) {
    if (body.contains(keys[i])) {
      if (given >= 0) throw ServiceError(400, "response must carry exactly one answer field");
      given = i;
    }
  }
  const std::string expected = payload_type(pending) + " expects " + pending_shape(pending);
  if (pending == Action::ShowList) throw ServiceError(400, "session has no pending question");
  if (given != action_index(pending)) {
    throw ServiceError(400, "response type mismatch: " + expected);
  }
  const json& v = body.at(keys[given]);
  try {
    switch (pending) {
      case Action::ReturnDocuments:
        if (v.is_null()) return DocResponse{};
        return DocResponse{v.get<std::string>()};
      case Action::ReturnKeyTerm: {
        if (v.is_null()) return KeyTermResponse{};
        if (v.is_boolean()) return KeyTermResponse{v.get<bool>()};
        const auto s = v.get<std::string>();
        if (s == "yes") return KeyTermResponse{true};
        if (s == "no") return KeyTermResponse{false};
        throw ServiceError(400, "answer must be \"yes\", \"no\" or null");
      }
      case Action::ReturnRequest:
        if (v.is_null()) return RequestResponse{};
        return RequestResponse{v.get<std::string>()};
      case Action::ReturnTopic:
        if (v.is_null()) return TopicResponse{};
        return TopicResponse{v.get<int>()};
      case Action::ShowList:
        break;
    }
  } catch (const json::exception&) {
    throw ServiceError(400, "response type mismatch: " + expected);
  }
  return Acknowledge{};
}

json response_to_json(const UserResponse& r, const Environment& env) {
  return std::visit(
      [&](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DocResponse>) {
          return {{"doc", v.doc_id ? json(*v.doc_id) : json(nullptr)}};
        } else if constexpr (std::is_same_v<T, KeyTermResponse>) {
          return {{"answer", v.relevant ? json(*v.relevant ? "yes" : "no") : json(nullptr)}};
        } else if constexpr (std::is_same_v<T, RequestResponse>) {
          return {{"term", v.term ? json(*v.term) : json(nullptr)}};
        } else if constexpr (std::is_same_v<T, TopicResponse>) {
          return {{"topic", v.topic ? json(*v.topic) : json(nullptr)}};
        } else {
          (void)env;
          return json::object();
        }
      },
      r);
}

SessionManager::SessionManager(const Environment& env, std::map<std::string, PolicyEntry> policies,
                               std::chrono::seconds idle_timeout)
    : env_(&env), policies_(std::move(policies)), idle_timeout_(idle_timeout) {}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::size_t SessionManager::expire(Clock::time_point now) {
  std::lock_guard lock(mutex_);
  std::size_t dropped = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    std::unique_lock session_lock(it->second->mutex, std::try_to_lock);
    // A session in use is not idle.
    if (session_lock.owns_lock() && now - it->second->last_access > idle_timeout_) {
      session_lock.unlock();
      it = sessions_.erase(it);
      ++dropped;
    } else {
      ++it;
    }
  }
  return dropped;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) {
  expire(Clock::now());
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + id + "'");
  return it->second;
}

void SessionManager::advance(Session& s) {
  FeatureVector fv;
  if (s.entry->features) fv = s.entry->features->extract(s.state.situation());
  fv.turn = s.state.turn;
  if (s.entry->report_q_values) s.q_values = s.policy->q_values(fv);
  const Action chosen = s.policy->choose(fv);
  s.pending = env_->propose(s.state, chosen);
  Turn t;
  t.k = s.state.turn;
  t.action = s.pending.action;
  t.payload = payload_to_json(s.pending, *env_);
  if (s.pending.action == Action::ShowList) {
    StepResult r = env_->transition(s.state, s.pending, Acknowledge{});
    if (r.judged) t.reward = r.reward;
    t.response = json::object();
    s.state = std::move(r.next);
  }
  s.transcript.push_back(std::move(t));
}

json SessionManager::view(const Session& s, bool full) const {
  json out{{"session_id", s.id},
           {"policy", s.policy_name},
           {"turn", s.state.turn},
           {"terminal", s.state.terminal},
           {"action", std::string(action_name(s.transcript.back().action))},
           {"payload", s.transcript.back().payload}};
  if (s.state.quality) out["ap"] = *s.state.quality;
  if (full) {
    out["query"] = s.query_text;
    out["qid"] = s.state.qid;
    json transcript = json::array();
    double total = 0.0;
    bool judged = true;
    for (const auto& t : s.transcript) {
      json row{{"k", t.k}, {"action", std::string(action_name(t.action))}, {"payload", t.payload}};
      if (t.response) row["response"] = *t.response;
      if (t.reward) {
        row["reward"] = *t.reward;
        total += *t.reward;
      } else if (t.response) {
        judged = false;
      }
      transcript.push_back(std::move(row));
    }
    out["transcript"] = std::move(transcript);
    if (judged) out["return"] = total;
  }
  if (s.q_values) out["q_values"] = std::vector<double>(s.q_values->begin(), s.q_values->end());
  return out;
}

json SessionManager::create(const json& body) {
  expire(Clock::now());
  if (!body.is_object()) throw ServiceError(400, "request body must be a JSON object");
  const std::string policy = body.value("policy", std::string("dqn"));
  auto it = policies_.find(policy);
  if (it == policies_.end()) throw ServiceError(404, "unknown policy '" + policy + "'");
  if (!body.contains("query") || !body["query"].is_string()) {
    throw ServiceError(400, "\"query\" must be a string");
  }
  Query q;
  q.text = body["query"].get<std::string>();
  q.tokens = tokenize(q.text);
  if (q.tokens.empty()) throw ServiceError(400, "query is empty");

  auto s = std::make_shared<Session>();
  std::uint64_t seed = 0;
  {
    std::lock_guard lock(mutex_);
    ++counter_;
    s->id = "s" + std::to_string(counter_);
    seed = counter_;
  }
  if (body.contains("seed")) seed = body["seed"].get<std::uint64_t>();
  q.qid = body.contains("qid") ? body["qid"].get<std::string>() : s->id;
  s->policy_name = policy;
  s->query_text = q.text;
  s->entry = &it->second;
  s->policy = it->second.make(seed);
  try {
    s->state = env_->start(q);
  } catch (const Error& e) {
    throw ServiceError(400, e.what());
  }
  advance(*s);
  s->last_access = Clock::now();
  json out = view(*s, false);
  std::lock_guard lock(mutex_);
  sessions_.emplace(s->id, s);
  return out;
}

json SessionManager::step(const std::string& id, const json& body) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->last_access = Clock::now();
  if (s->state.terminal) throw ServiceError(409, "session '" + id + "' has ended");
  const UserResponse response = response_from_json(body, s->pending.action);
  StepResult r;
  try {
    r = env_->transition(s->state, s->pending, response);
  } catch (const Error& e) {
    throw ServiceError(400, e.what());
  }
  auto& last = s->transcript.back();
  last.response = response_to_json(response, *env_);
  if (r.judged) last.reward = r.reward;
  s->state = std::move(r.next);
  if (!s->state.terminal) advance(*s);
  return view(*s, false);
}

json SessionManager::get(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  s->last_access = Clock::now();
  return view(*s, true);
}

json SessionManager::policies() const {
  json names = json::array();
  for (const auto& [name, _] : policies_) names.push_back(name);
  return {{"policies", names}};
}

json SessionManager::document(const std::string& id) const {
  const auto d = env_->corpus().index_of(id);
  if (!d) throw ServiceError(404, "unknown document '" + id + "'");
  const auto& doc = env_->corpus().doc(*d);
  return {{"id", doc.id}, {"text", doc.text}};
}

// -------------------------------------------------------------------- HTTP

struct HttpService::Impl {
  httplib::Server server;
};

namespace {

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    send(res, 200, f());
  } catch (const ServiceError& e) {
    send(res, e.status(), {{"error", e.what()}});
  } catch (const json::exception& e) {
    send(res, 400, {{"error", std::string("malformed JSON: ") + e.what()}});
  } catch (const std::exception& e) {
    send(res, 500, {{"error", e.what()}});
  }
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

}  // namespace

HttpService::HttpService(SessionManager& sessions) : impl_(std::make_unique<Impl>()) {
  auto& srv = impl_->server;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  srv.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  srv.Post("/sessions", [&sessions](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return sessions.create(parse_body(req)); });
  });
  srv.Post(R"(/sessions/([^/]+)/step)", [&sessions](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return sessions.step(req.matches[1], parse_body(req)); });
  });
  srv.Get(R"(/sessions/([^/]+))", [&sessions](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return sessions.get(req.matches[1]); });
  });
  srv.Get("/policies", [&sessions](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { return sessions.policies(); });
  });
  srv.Get(R"(/docs/(.+))", [&sessions](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return sessions.document(req.matches[1]); });
  });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send(res, res.status, {{"error", "not found"}});
  });
}

HttpService::~HttpService() { stop(); }

bool HttpService::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    return port_ > 0;
  }
  port_ = port;
  return impl_->server.bind_to_port(host, port);
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace iir
