#pragma once

#include <array>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "iir/corpus.hpp"
#include "iir/features.hpp"
#include "iir/retrieval.hpp"
#include "iir/topics.hpp"

namespace iir {

enum class Action : int {
  ReturnDocuments = 0,
  ReturnKeyTerm = 1,
  ReturnRequest = 2,
  ReturnTopic = 3,
  ShowList = 4,
};

inline constexpr int kNumActions = 5;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::ReturnDocuments, Action::ReturnKeyTerm, Action::ReturnRequest, Action::ReturnTopic,
    Action::ShowList};

std::string_view action_name(Action a);
std::optional<Action> parse_action(std::string_view name);
inline int action_index(Action a) { return static_cast<int>(a); }

struct RewardConfig {
  double tau = 1000.0;
  // Indexed by Action; ShowList is always free.
  std::array<double, kNumActions> costs = {30.0, 10.0, 50.0, 20.0, 0.0};
  int max_turns = 5;

  double cost(Action a) const { return a == Action::ShowList ? 0.0 : costs[action_index(a)]; }
};

struct EnvironmentConfig {
  double beta = 0.3;
  FeedbackParams feedback;
  double key_term_weight = 0.3;
  double topic_weight = 0.3;
  int shown_docs = 10;    // documents offered by ReturnDocuments
  int keyterm_docs = 10;  // documents mined for the key term question
  int topic_menu = 5;     // topics offered by ReturnTopic
  int topic_docs = 10;    // documents whose topic mass orders the menu
  RewardConfig reward;
};

struct SessionState {
  std::string qid;
  TermDistribution original;
  std::size_t query_length = 0;
  QueryModel query;
  NegativeModel neg;
  RankedList ranked;
  int turn = 0;
  std::set<TermId> asked_terms;
  bool terminal = false;
  std::optional<double> quality;  // AP of `ranked` when judgments exist

  RetrievalSituation situation() const {
    return {query, neg, ranked, original, query_length, turn};
  }
};

/// What the system shows the user for one action.
struct Payload {
  Action action = Action::ShowList;
  std::vector<ScoredDoc> docs;  // ReturnDocuments: shown prefix; ShowList: full list
  std::optional<TermId> term;   // ReturnKeyTerm
  std::vector<int> topics;      // ReturnTopic
  std::string prompt;           // ReturnRequest
  bool noop = false;            // nothing left to ask
};

struct DocResponse {
  std::optional<std::string> doc_id;
};
struct KeyTermResponse {
  std::optional<bool> relevant;
};
struct RequestResponse {
  std::optional<std::string> term;
};
struct TopicResponse {
  std::optional<int> topic;
};
struct Acknowledge {};

using UserResponse =
    std::variant<DocResponse, KeyTermResponse, RequestResponse, TopicResponse, Acknowledge>;

/// The response alternative expected for an action (index into UserResponse).
std::size_t expected_response_index(Action a);

struct StepResult {
  double reward = 0.0;
  bool judged = false;  // false: reward holds only the cost term
  SessionState next;
  bool terminal = false;
  Payload payload;
  std::optional<double> ap_before;
  std::optional<double> ap_after;
};

/// (1/|R|) * sum over relevant ranks i of precision@i. `relevant` is a
/// per-document flag vector in corpus order.
double average_precision(const RankedList& list, std::span<const char> relevant,
                         std::size_t num_relevant);
double average_precision(const RankedList& list, const Corpus& corpus,
                         const std::set<std::string>& relevant);

class User {
 public:
  virtual ~User() = default;
  virtual UserResponse respond(const SessionState& state, const Payload& payload) = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action choose(const FeatureVector& features) = 0;
  virtual bool needs_features() const { return true; }
  virtual std::optional<std::array<double, kNumActions>> q_values(const FeatureVector&) const {
    return std::nullopt;
  }
};

/// Interactive retrieval MDP over immutable retrieval models. All methods are
/// const and safe to call concurrently on distinct states.
class Environment {
 public:
  Environment(const Retriever& retriever, const TopicModel* topics, const JudgmentSet* judgments,
              EnvironmentConfig config);

  const Retriever& retriever() const { return *retriever_; }
  const Corpus& corpus() const { return retriever_->corpus(); }
  const TopicModel* topics() const { return topics_; }
  const EnvironmentConfig& config() const { return config_; }

  /// First-pass retrieval for a typed query.
  SessionState start(const Query& query) const;

  /// Payload for `action`; at the turn cap any action becomes ShowList.
  Payload propose(const SessionState& state, Action action) const;
  StepResult transition(const SessionState& state, const Payload& payload,
                        const UserResponse& response) const;

  std::optional<double> quality(std::string_view qid, const RankedList& list) const;
  bool judged(std::string_view qid) const { return relevance_.count(std::string(qid)) > 0; }
  /// Per-document relevance flags for a judged query, or nullptr.
  const std::vector<char>* relevance(std::string_view qid) const;

  std::optional<TermId> select_key_term(const SessionState& state) const;
  std::vector<int> topic_menu(const SessionState& state) const;

 private:
  struct Judged {
    std::vector<char> flags;
    std::size_t count = 0;
  };

  const Retriever* retriever_;
  const TopicModel* topics_;
  EnvironmentConfig config_;
  std::map<std::string, Judged, std::less<>> relevance_;
};

struct Experience {
  std::vector<double> state;
  Action action = Action::ShowList;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
};

struct StepRecord {
  std::string qid;
  int k = 0;
  Action action = Action::ShowList;
  double reward = 0.0;
  double ap_before = 0.0;
  double ap_after = 0.0;
  bool terminal = false;
};

struct Episode {
  std::vector<Experience> experiences;  // filled when features are recorded
  std::vector<StepRecord> steps;
  std::vector<Action> actions;
  double total_return = 0.0;
  double initial_ap = 0.0;
  double final_ap = 0.0;
};

struct EpisodeOptions {
  bool record_features = false;
};

/// Runs propose/respond/transition until ShowList (or the turn cap).
Episode run_episode(const Environment& env, const FeatureExtractor* features, Policy& policy,
                    User& user, const Query& query, EpisodeOptions options = {});

void write_trajectory(std::ostream& out, const Episode& episode);

}  // namespace iir
