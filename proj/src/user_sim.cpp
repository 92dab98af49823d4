#include "iir/user_sim.hpp"

#include <algorithm>
#include <cmath>

namespace iir {

std::optional<DocIndex> respond_documents(std::span<const ScoredDoc> list,
                                          std::span<const char> relevant) {
  for (const auto& e : list) {
    if (e.doc < relevant.size() && relevant[e.doc]) return e.doc;
  }
  return std::nullopt;
}

bool respond_keyterm(TermId term, const Corpus& corpus, std::span<const DocIndex> relevant_docs) {
  if (relevant_docs.empty()) throw Error("key term judgment needs relevant documents");
  std::size_t containing = 0;
  for (DocIndex d : relevant_docs) containing += corpus.doc(d).count(term) > 0 ? 1 : 0;
  return 2 * containing > relevant_docs.size();
}

TermId respond_request(const Corpus& corpus, std::span<const DocIndex> relevant_docs,
                       const std::set<TermId>& excluded) {
  if (relevant_docs.empty()) throw Error("request answer needs relevant documents");
  std::vector<TermDistribution::Entry> tf;
  for (DocIndex d : relevant_docs) {
    for (const auto& [t, n] : corpus.doc(d).counts) tf.emplace_back(t, static_cast<double>(n));
  }
  const TermDistribution pooled(std::move(tf));
  const double N = static_cast<double>(corpus.size());
  std::optional<TermId> best;
  double best_score = 0.0;
  for (const auto& [t, n] : pooled.entries()) {
    if (excluded.count(t)) continue;
    const double s = n * std::log(N / corpus.df(t));
    if (!best || s > best_score ||
        (s == best_score && corpus.vocab().term(t) < corpus.vocab().term(*best))) {
      best = t;
      best_score = s;
    }
  }
  if (!best) throw Error("every candidate term is already in the query");
  return *best;
}

std::optional<int> respond_topic(std::span<const int> offered, const std::set<int>& truth,
                                 std::mt19937_64& rng) {
  std::vector<int> candidates;
  for (int z : offered) {
    if (truth.count(z)) candidates.push_back(z);
  }
  if (candidates.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  return candidates[pick(rng)];
}

std::set<int> derive_topic_truth(const TopicModel& topics, std::span<const DocIndex> relevant_docs) {
  std::set<int> truth;
  if (relevant_docs.empty()) return truth;
  const double n = static_cast<double>(relevant_docs.size());
  for (int z = 0; z < topics.K; ++z) {
    double mass = 0.0;
    for (DocIndex d : relevant_docs) mass += topics.doc_topic.at(d)[z];
    if (mass / n >= 1.0 / topics.K) truth.insert(z);
  }
  return truth;
}

SimUser::SimUser(const Environment& env, const JudgmentSet& judgments, std::uint64_t seed)
    : rng_(seed) {
  auto shared = std::make_shared<Shared>();
  shared->env = &env;
  for (const auto& [qid, ids] : judgments.relevant) {
    QueryTruth truth;
    for (const auto& id : ids) {
      if (auto d = env.corpus().index_of(id)) truth.relevant.push_back(*d);
    }
    std::sort(truth.relevant.begin(), truth.relevant.end());
    if (env.topics()) truth.topics = derive_topic_truth(*env.topics(), truth.relevant);
    shared->truth.emplace(qid, std::move(truth));
  }
  shared_ = std::move(shared);
}

const SimUser::QueryTruth& SimUser::truth_for(const std::string& qid) const {
  auto it = shared_->truth.find(qid);
  if (it == shared_->truth.end() || it->second.relevant.empty()) {
    throw Error("simulated user has no judgments for query '" + qid + "'");
  }
  return it->second;
}

const std::set<int>& SimUser::topic_truth(const std::string& qid) const {
  return truth_for(qid).topics;
}

UserResponse SimUser::respond(const SessionState& state, const Payload& payload) {
  const Environment& env = *shared_->env;
  const QueryTruth& truth = truth_for(state.qid);
  switch (payload.action) {
    case Action::ReturnDocuments: {
      const auto* flags = env.relevance(state.qid);
      auto d = respond_documents(payload.docs, *flags);
      if (!d) return DocResponse{};
      return DocResponse{env.corpus().doc(*d).id};
    }
    case Action::ReturnKeyTerm:
      if (!payload.term) return KeyTermResponse{};
      return KeyTermResponse{respond_keyterm(*payload.term, env.corpus(), truth.relevant)};
    case Action::ReturnRequest: {
      std::set<TermId> excluded = state.query.key_terms;
      try {
        const TermId t = respond_request(env.corpus(), truth.relevant, excluded);
        return RequestResponse{env.corpus().vocab().term(t)};
      } catch (const Error&) {
        return RequestResponse{};
      }
    }
    case Action::ReturnTopic:
      return TopicResponse{respond_topic(payload.topics, truth.topics, rng_)};
    case Action::ShowList:
      return Acknowledge{};
  }
  return Acknowledge{};
}

}  // namespace iir
