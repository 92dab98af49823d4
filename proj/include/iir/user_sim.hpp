#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "iir/environment.hpp"

namespace iir {

/// First shown document that is relevant, if any.
std::optional<DocIndex> respond_documents(std::span<const ScoredDoc> list,
                                          std::span<const char> relevant);

/// Yes iff the term occurs in strictly more than half of the relevant documents.
bool respond_keyterm(TermId term, const Corpus& corpus, std::span<const DocIndex> relevant_docs);

/// Highest sum_{d in relevant} tf(t,d) * ln(|corpus| / df(t)) outside `excluded`;
/// ties go to the lexicographically smallest term. Throws if every term is excluded.
TermId respond_request(const Corpus& corpus, std::span<const DocIndex> relevant_docs,
                       const std::set<TermId>& excluded);

std::optional<int> respond_topic(std::span<const int> offered, const std::set<int>& truth,
                                 std::mt19937_64& rng);

/// Topic z is relevant to a query when its mean P(z|d) over the relevant
/// documents reaches the uniform level 1/K.
std::set<int> derive_topic_truth(const TopicModel& topics, std::span<const DocIndex> relevant_docs);

/// Rule-based simulated user. Copies share the immutable per-query data and
/// carry their own random stream.
class SimUser final : public User {
 public:
  SimUser(const Environment& env, const JudgmentSet& judgments, std::uint64_t seed);

  UserResponse respond(const SessionState& state, const Payload& payload) override;

  void reseed(std::uint64_t seed) { rng_.seed(seed); }
  const std::set<int>& topic_truth(const std::string& qid) const;

 private:
  struct QueryTruth {
    std::vector<DocIndex> relevant;
    std::set<int> topics;
  };
  struct Shared {
    const Environment* env;
    std::map<std::string, QueryTruth, std::less<>> truth;
  };

  const QueryTruth& truth_for(const std::string& qid) const;

  std::shared_ptr<const Shared> shared_;
  std::mt19937_64 rng_;
};

}  // namespace iir
