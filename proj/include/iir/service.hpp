#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iir/environment.hpp"
#include "iir/features.hpp"

namespace iir {

/// Error carrying an HTTP status.
class ServiceError : public Error {
 public:
  ServiceError(int status, const std::string& message) : Error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct PolicyEntry {
  std::function<std::unique_ptr<Policy>(std::uint64_t seed)> make;
  std::shared_ptr<const FeatureExtractor> features;  // null when the policy reads none
  bool report_q_values = false;
};

nlohmann::json payload_to_json(const Payload& payload, const Environment& env);
std::string payload_type(Action a);

/// Parses a user answer for the pending action. Throws ServiceError(400)
/// naming the expected shape when the answer has the wrong type.
UserResponse response_from_json(const nlohmann::json& body, Action pending);
nlohmann::json response_to_json(const UserResponse& response, const Environment& env);

/// In-memory interactive sessions. Each session is serialized behind its
/// own mutex; distinct sessions proceed concurrently.
class SessionManager {
 public:
  using Clock = std::chrono::steady_clock;

  SessionManager(const Environment& env, std::map<std::string, PolicyEntry> policies,
                 std::chrono::seconds idle_timeout = std::chrono::minutes(30));

  /// Body: {"query": text, "policy": name, "qid"?: string, "seed"?: int}.
  nlohmann::json create(const nlohmann::json& body);
  nlohmann::json step(const std::string& id, const nlohmann::json& body);
  nlohmann::json get(const std::string& id);
  nlohmann::json policies() const;
  nlohmann::json document(const std::string& id) const;

  /// Drops sessions idle for longer than the timeout; returns how many.
  std::size_t expire(Clock::time_point now);
  std::size_t size() const;

 private:
  struct Turn {
    int k = 0;
    Action action = Action::ShowList;
    nlohmann::json payload;
    std::optional<nlohmann::json> response;
    std::optional<double> reward;
  };
  struct Session {
    std::mutex mutex;
    std::string id;
    std::string policy_name;
    std::string query_text;
    std::unique_ptr<Policy> policy;
    const PolicyEntry* entry = nullptr;
    SessionState state;
    Payload pending;
    std::vector<Turn> transcript;
    std::optional<std::array<double, kNumActions>> q_values;
    Clock::time_point last_access;
  };

  std::shared_ptr<Session> find(const std::string& id);
  /// Picks the next action, applying ShowList at once since it needs no answer.
  void advance(Session& s);
  nlohmann::json view(const Session& s, bool full) const;

  const Environment* env_;
  std::map<std::string, PolicyEntry> policies_;
  std::chrono::seconds idle_timeout_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
};

/// HTTP front end: POST /sessions, POST /sessions/{id}/step, GET /sessions/{id},
/// GET /policies, GET /docs/{id}. Errors are {"error": message}.
class HttpService {
 public:
  explicit HttpService(SessionManager& sessions);
  ~HttpService();

  /// Binds and serves until stop(); port 0 picks a free port.
  bool bind(const std::string& host, int port);
  int port() const { return port_; }
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace iir
