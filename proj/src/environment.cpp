#include "iir/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace iir {

namespace {

constexpr std::array<std::string_view, kNumActions> kActionNames = {
    "ReturnDocuments", "ReturnKeyTerm", "ReturnRequest", "ReturnTopic", "ShowList"};

constexpr std::array<std::string_view, 5> kResponseNames = {"document", "keyterm answer", "term",
                                                            "topic", "acknowledgement"};

}  // namespace

std::string_view action_name(Action a) { return kActionNames.at(action_index(a)); }

std::optional<Action> parse_action(std::string_view name) {
  for (int i = 0; i < kNumActions; ++i) {
    if (kActionNames[i] == name) return static_cast<Action>(i);
  }
  return std::nullopt;
}

std::size_t expected_response_index(Action a) { return static_cast<std::size_t>(action_index(a)); }

double average_precision(const RankedList& list, std::span<const char> relevant,
                         std::size_t num_relevant) {
  if (num_relevant == 0) throw Error("average precision needs at least one relevant document");
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const DocIndex d = list.entries[i].doc;
    if (d < relevant.size() && relevant[d]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(num_relevant);
}

double average_precision(const RankedList& list, const Corpus& corpus,
                         const std::set<std::string>& relevant) {
  std::vector<char> flags(corpus.size(), 0);
  for (const auto& id : relevant) {
    if (auto d = corpus.index_of(id)) flags[*d] = 1;
  }
  return average_precision(list, flags, relevant.size());
}

Environment::Environment(const Retriever& retriever, const TopicModel* topics,
                         const JudgmentSet* judgments, EnvironmentConfig config)
    : retriever_(&retriever), topics_(topics), config_(config) {
  if (!(config_.reward.tau > 0.0)) throw Error("tau must be positive");
  if (config_.reward.max_turns < 1) throw Error("max_turns must be at least 1");
  for (Action a : kAllActions) {
    if (config_.reward.cost(a) < 0.0) throw Error("action costs must be non-negative");
  }
  if (judgments) {
    const Corpus& corpus = retriever.corpus();
    for (const auto& [qid, docs] : judgments->relevant) {
      Judged j;
      j.flags.assign(corpus.size(), 0);
      for (const auto& id : docs) {
        auto d = corpus.index_of(id);
        if (!d) throw Error("judgment references unknown document '" + id + "'");
        j.flags[*d] = 1;
      }
      j.count = docs.size();
      if (j.count > 0) relevance_.emplace(qid, std::move(j));
    }
  }
}

const std::vector<char>* Environment::relevance(std::string_view qid) const {
  auto it = relevance_.find(qid);
  return it == relevance_.end() ? nullptr : &it->second.flags;
}

std::optional<double> Environment::quality(std::string_view qid, const RankedList& list) const {
  auto it = relevance_.find(qid);
  if (it == relevance_.end()) return std::nullopt;
  return average_precision(list, it->second.flags, it->second.count);
}

SessionState Environment::start(const Query& query) const {
  SessionState s;
  s.qid = query.qid;
  s.query = make_query_model(query.tokens, corpus().vocab());
  s.original = s.query.probs;
  for (const auto& tok : query.tokens) {
    if (corpus().vocab().find(tok)) ++s.query_length;
  }
  s.ranked = retriever_->rank(s.query, s.neg, config_.beta);
  s.quality = quality(s.qid, s.ranked);
  return s;
}

std::optional<TermId> Environment::select_key_term(const SessionState& state) const {
  const Corpus& c = corpus();
  const std::size_t depth =
      std::min<std::size_t>(state.ranked.size(), static_cast<std::size_t>(config_.keyterm_docs));
  std::vector<TermDistribution::Entry> tf;
  for (std::size_t i = 0; i < depth; ++i) {
    for (const auto& [t, n] : c.doc(state.ranked.entries[i].doc).counts) {
      tf.emplace_back(t, static_cast<double>(n));
    }
  }
  const TermDistribution pooled(std::move(tf));
  const double N = static_cast<double>(c.size());
  std::optional<TermId> best;
  double best_score = -1.0;
  for (const auto& [t, n] : pooled.entries()) {
    if (state.query.key_terms.count(t) || state.neg.terms.count(t) || state.asked_terms.count(t)) {
      continue;
    }
    const double s = n * std::log(N / c.df(t));
    if (!best || s > best_score ||
        (s == best_score && c.vocab().term(t) < c.vocab().term(*best))) {
      best = t;
      best_score = s;
    }
  }
  return best;
}

std::vector<int> Environment::topic_menu(const SessionState& state) const {
  if (!topics_) return {};
  const std::size_t depth =
      std::min<std::size_t>(state.ranked.size(), static_cast<std::size_t>(config_.topic_docs));
  std::vector<double> mass(topics_->K, 0.0);
  for (std::size_t i = 0; i < depth; ++i) {
    const auto& row = topics_->doc_topic.at(state.ranked.entries[i].doc);
    for (int z = 0; z < topics_->K; ++z) mass[z] += row[z];
  }
  std::vector<int> order(topics_->K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mass[a] > mass[b]; });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(config_.topic_menu)));
  return order;
}

Payload Environment::propose(const SessionState& state, Action action) const {
  if (state.terminal) throw Error("session already ended");
  if (state.turn >= config_.reward.max_turns - 1) action = Action::ShowList;
  Payload p;
  p.action = action;
  switch (action) {
    case Action::ReturnDocuments: {
      const std::size_t n = std::min<std::size_t>(state.ranked.size(),
                                                  static_cast<std::size_t>(config_.shown_docs));
      p.docs.assign(state.ranked.entries.begin(),
                    state.ranked.entries.begin() + static_cast<std::ptrdiff_t>(n));
      break;
    }
    case Action::ReturnKeyTerm:
      p.term = select_key_term(state);
      p.noop = !p.term.has_value();
      break;
    case Action::ReturnRequest:
      p.prompt = "Please provide an additional query term.";
      break;
    case Action::ReturnTopic:
      p.topics = topic_menu(state);
      p.noop = p.topics.empty();
      break;
    case Action::ShowList:
      p.docs = state.ranked.entries;
      break;
  }
  return p;
}

StepResult Environment::transition(const SessionState& state, const Payload& payload,
                                   const UserResponse& response) const {
  if (state.terminal) throw Error("session already ended");
  const Action action = payload.action;
  if (action != Action::ShowList && state.turn >= config_.reward.max_turns - 1) {
    throw Error("turn cap reached; only ShowList is allowed");
  }
  if (response.index() != expected_response_index(action)) {
    throw Error(std::string("response type mismatch: ") + std::string(action_name(action)) +
                " expects a " + std::string(kResponseNames[expected_response_index(action)]));
  }

  StepResult out;
  out.payload = payload;
  out.next = state;
  SessionState& next = out.next;
  bool changed = false;
  const Corpus& c = corpus();

  switch (action) {
    case Action::ReturnDocuments: {
      const auto& r = std::get<DocResponse>(response);
      if (r.doc_id) {
        auto d = c.index_of(*r.doc_id);
        if (!d) throw Error("unknown document id '" + *r.doc_id + "'");
        const Document* doc = &c.doc(*d);
        next.query = expand_query(next.query, std::span<const Document* const>(&doc, 1),
                                  retriever_->collection(), config_.feedback);
        changed = true;
      }
      break;
    }
    case Action::ReturnKeyTerm: {
      const auto& r = std::get<KeyTermResponse>(response);
      if (payload.term) {
        next.asked_terms.insert(*payload.term);
        if (r.relevant.has_value()) {
          if (*r.relevant) {
            next.query = add_key_term(next.query, *payload.term, config_.key_term_weight);
          } else {
            next.neg = update_negative(next.neg, *payload.term);
          }
          changed = true;
        }
      }
      break;
    }
    case Action::ReturnRequest: {
      const auto& r = std::get<RequestResponse>(response);
      if (r.term) {
        for (const auto& tok : tokenize(*r.term)) {
          if (auto id = c.vocab().find(tok)) {
            next.query = add_key_term(next.query, *id, config_.key_term_weight);
            changed = true;
          }
        }
      }
      break;
    }
    case Action::ReturnTopic: {
      const auto& r = std::get<TopicResponse>(response);
      if (r.topic) {
        if (!topics_ || *r.topic < 0 || *r.topic >= topics_->K) {
          throw Error("unknown topic id " + std::to_string(*r.topic));
        }
        next.query = interpolate_topic(next.query, topics_->topic(*r.topic), config_.topic_weight);
        changed = true;
      }
      break;
    }
    case Action::ShowList:
      break;
  }

  if (changed) {
    next.ranked = retriever_->rank(next.query, next.neg, config_.beta);
    next.quality = quality(next.qid, next.ranked);
  }
  next.turn = state.turn + 1;
  next.terminal = action == Action::ShowList;
  out.terminal = next.terminal;
  out.ap_before = state.quality;
  out.ap_after = next.quality;
  out.reward = -config_.reward.cost(action);
  if (state.quality && next.quality) {
    out.judged = true;
    out.reward += config_.reward.tau * (*next.quality - *state.quality);
  }
  return out;
}

Episode run_episode(const Environment& env, const FeatureExtractor* features, Policy& policy,
                    User& user, const Query& query, EpisodeOptions options) {
  const bool need = policy.needs_features() || options.record_features;
  if (need && !features) throw Error("policy needs a feature extractor");

  Episode ep;
  SessionState state = env.start(query);
  ep.initial_ap = state.quality.value_or(0.0);
  FeatureVector fv;
  if (need) fv = features->extract(state.situation());
  fv.turn = state.turn;
  while (!state.terminal) {
    const Action chosen = policy.choose(fv);
    const Payload payload = env.propose(state, chosen);
    const UserResponse response = user.respond(state, payload);
    StepResult step = env.transition(state, payload, response);

    FeatureVector next_fv;
    if (need && !step.terminal) next_fv = features->extract(step.next.situation());
    next_fv.turn = step.next.turn;
    if (options.record_features) {
      ep.experiences.push_back({fv.flatten(), payload.action, step.reward,
                                step.terminal ? std::vector<double>{} : next_fv.flatten(),
                                step.terminal});
    }
    ep.steps.push_back({state.qid, state.turn, payload.action, step.reward,
                        step.ap_before.value_or(0.0), step.ap_after.value_or(0.0), step.terminal});
    ep.actions.push_back(payload.action);
    ep.total_return += step.reward;
    state = std::move(step.next);
    fv = std::move(next_fv);
  }
  ep.final_ap = state.quality.value_or(0.0);
  return ep;
}

void write_trajectory(std::ostream& out, const Episode& episode) {
  for (const auto& s : episode.steps) {
    nlohmann::json row{{"qid", s.qid},           {"k", s.k},
                       {"action", action_name(s.action)}, {"reward", s.reward},
                       {"ap_before", s.ap_before}, {"ap_after", s.ap_after},
                       {"terminal", s.terminal}};
    out << row.dump() << '\n';
  }
}

}  // namespace iir
