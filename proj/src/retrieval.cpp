#include "iir/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace iir {

namespace {

bool by_term(const TermDistribution::Entry& a, const TermDistribution::Entry& b) {
  return a.first < b.first;
}

// Sum of p * ln p over the support; zero entries contribute nothing.
double neg_entropy(const TermDistribution& dist) {
  double s = 0.0;
  for (const auto& [t, p] : dist.entries()) {
    if (p > 0.0) s += p * std::log(p);
  }
  return s;
}

void check_unit(double w, const char* name) {
  if (!(w >= 0.0 && w <= 1.0)) throw Error(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

TermDistribution::TermDistribution(std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(), by_term);
  for (const auto& e : entries) {
    if (!entries_.empty() && entries_.back().first == e.first) {
      entries_.back().second += e.second;
    } else {
      entries_.push_back(e);
    }
  }
}

TermDistribution TermDistribution::point(TermId term) { return TermDistribution({{term, 1.0}}); }

TermDistribution TermDistribution::uniform(const std::set<TermId>& terms) {
  std::vector<Entry> entries;
  const double p = terms.empty() ? 0.0 : 1.0 / static_cast<double>(terms.size());
  for (TermId t : terms) entries.emplace_back(t, p);
  return TermDistribution(std::move(entries));
}

TermDistribution TermDistribution::normalized(std::vector<Entry> weights) {
  TermDistribution merged(std::move(weights));
  double total = merged.total();
  std::vector<Entry> out;
  if (total <= 0.0) return TermDistribution();
  for (const auto& [t, w] : merged.entries_) {
    if (w > 0.0) out.emplace_back(t, w / total);
  }
  TermDistribution result;
  result.entries_ = std::move(out);
  return result;
}

TermDistribution TermDistribution::from_dense(std::span<const double> probs) {
  TermDistribution result;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    if (probs[t] > 0.0) result.entries_.emplace_back(static_cast<TermId>(t), probs[t]);
  }
  return result;
}

double TermDistribution::prob(TermId term) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), Entry{term, 0.0}, by_term);
  return (it != entries_.end() && it->first == term) ? it->second : 0.0;
}

double TermDistribution::total() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.second;
  return s;
}

TermDistribution mix(const TermDistribution& a, double wa, const TermDistribution& b, double wb) {
  std::vector<TermDistribution::Entry> out;
  out.reserve(a.support_size() + b.support_size());
  auto ia = a.entries().begin();
  auto ib = b.entries().begin();
  const auto ea = a.entries().end();
  const auto eb = b.entries().end();
  while (ia != ea || ib != eb) {
    if (ib == eb || (ia != ea && ia->first < ib->first)) {
      out.emplace_back(ia->first, wa * ia->second);
      ++ia;
    } else if (ia == ea || ib->first < ia->first) {
      out.emplace_back(ib->first, wb * ib->second);
      ++ib;
    } else {
      out.emplace_back(ia->first, wa * ia->second + wb * ib->second);
      ++ia;
      ++ib;
    }
  }
  std::erase_if(out, [](const auto& e) { return e.second <= 0.0; });
  return TermDistribution(std::move(out));
}

QueryModel make_query_model(std::span<const std::string> tokens, const Vocabulary& vocab) {
  QueryModel model;
  std::vector<TermDistribution::Entry> counts;
  for (const auto& tok : tokens) {
    if (auto id = vocab.find(tok)) {
      counts.emplace_back(*id, 1.0);
      model.key_terms.insert(*id);
    }
  }
  if (counts.empty()) throw Error("query has no in-vocabulary terms");
  model.probs = TermDistribution::normalized(std::move(counts));
  return model;
}

double score(const QueryModel& query, const NegativeModel& neg, const DocModel& doc, double beta) {
  if (beta < 0.0) throw Error("beta must be non-negative");
  auto kl = [&](const TermDistribution& p) {
    double s = 0.0;
    for (const auto& [t, pt] : p.entries()) {
      if (pt <= 0.0) continue;
      const double dt = t < doc.probs.size() ? doc.probs[t] : 0.0;
      if (dt <= 0.0) {
        throw Error("document model '" + doc.owner + "' assigns zero probability to term " +
                    std::to_string(t));
      }
      s += pt * std::log(pt / dt);
    }
    return s;
  };
  const double neg_term = neg.empty() ? 0.0 : kl(neg.probs);
  return -(kl(query.probs) - beta * neg_term);
}

Retriever::Retriever(const Corpus& corpus, const CollectionModel& collection, double lambda_d)
    : corpus_(&corpus), collection_(&collection), lambda_d_(lambda_d) {
  if (!(lambda_d > 0.0 && lambda_d <= 1.0)) {
    throw Error("ranking requires a smoothing weight in (0, 1]");
  }
  const std::size_t vocab = collection.vocab_size();
  log_background_.resize(vocab);
  for (std::size_t t = 0; t < vocab; ++t) {
    log_background_[t] = std::log(lambda_d * collection.probs[t]);
  }
  postings_.resize(vocab);
  for (DocIndex d = 0; d < corpus.size(); ++d) {
    const auto& doc = corpus.doc(d);
    const double len = static_cast<double>(doc.length());
    for (const auto& [t, c] : doc.counts) {
      const double p = (1.0 - lambda_d) * c / len + lambda_d * collection.probs[t];
      postings_[t].push_back({d, std::log(p) - log_background_[t]});
    }
  }
}

DocModel Retriever::doc_model(DocIndex doc) const {
  return build_doc_model(corpus_->doc(doc), *collection_, lambda_d_);
}

double Retriever::log_prob(DocIndex doc, TermId term) const {
  const auto& list = postings_.at(term);
  auto it = std::lower_bound(list.begin(), list.end(), doc,
                             [](const Posting& p, DocIndex d) { return p.doc < d; });
  const double boost = (it != list.end() && it->doc == doc) ? it->boost : 0.0;
  return log_background_[term] + boost;
}

RankedList Retriever::rank(const QueryModel& query, const NegativeModel& neg, double beta) const {
  if (beta < 0.0) throw Error("beta must be non-negative");
  // S(q,d) = -sum q ln q + beta * sum n ln n + sum_t (q_t - beta n_t) ln P(t|d)
  const bool use_neg = !neg.empty() && beta > 0.0;
  double base = -neg_entropy(query.probs);
  if (use_neg) base += beta * neg_entropy(neg.probs);
  std::vector<std::pair<TermId, double>> w;
  w.reserve(query.probs.support_size() + neg.probs.support_size());
  for (const auto& e : query.probs.entries()) w.push_back(e);
  if (use_neg) {
    for (const auto& [t, p] : neg.probs.entries()) w.emplace_back(t, -beta * p);
  }

  std::vector<double> scores(corpus_->size(), 0.0);
  for (const auto& [t, wt] : w) {
    if (t >= postings_.size()) throw Error("term id outside the vocabulary");
    if (wt == 0.0) continue;
    base += wt * log_background_[t];
    for (const auto& p : postings_[t]) scores[p.doc] += wt * p.boost;
  }
  if (!std::isfinite(base)) throw Error("non-finite score (zero background probability)");

  RankedList list;
  list.entries.resize(scores.size());
  for (DocIndex d = 0; d < scores.size(); ++d) list.entries[d] = {d, base + scores[d]};
  std::sort(list.entries.begin(), list.entries.end(), [&](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return corpus_->id_rank(a.doc) < corpus_->id_rank(b.doc);
  });
  return list;
}

double Retriever::score_collection(const QueryModel& query, const NegativeModel& neg,
                                   double beta) const {
  DocModel pseudo{"<collection>", collection_->probs};
  return score(query, neg, pseudo, beta);
}

QueryModel expand_query(const QueryModel& query, std::span<const Document* const> feedback_docs,
                        const CollectionModel& collection, const FeedbackParams& params) {
  check_unit(params.alpha, "alpha");
  check_unit(params.lambda_f, "lambda_f");
  check_unit(params.mu, "mu");
  if (params.em_iters < 1) throw Error("em_iters must be at least 1");
  if (feedback_docs.empty() || params.alpha == 0.0) return query;

  std::vector<TermDistribution::Entry> pooled;
  for (const Document* doc : feedback_docs) {
    for (const auto& [t, c] : doc->counts) pooled.emplace_back(t, static_cast<double>(c));
  }
  const TermDistribution counts(std::move(pooled));
  const auto& entries = counts.entries();

  // EM for the feedback component; the background component is fixed.
  std::vector<double> theta(entries.size());
  double total = counts.total();
  for (std::size_t i = 0; i < entries.size(); ++i) theta[i] = entries[i].second / total;
  const double lf = params.lambda_f;
  for (int it = 0; it < params.em_iters && lf > 0.0; ++it) {
    double norm = 0.0;
    std::vector<double> next(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const double fb = (1.0 - lf) * theta[i];
      const double bg = lf * collection.probs.at(entries[i].first);
      const double resp = (fb + bg) > 0.0 ? fb / (fb + bg) : 0.0;
      next[i] = entries[i].second * resp;
      norm += next[i];
    }
    if (norm <= 0.0) break;
    for (std::size_t i = 0; i < entries.size(); ++i) theta[i] = next[i] / norm;
  }
  std::vector<TermDistribution::Entry> fb_entries;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (theta[i] > 0.0) fb_entries.emplace_back(entries[i].first, theta[i]);
  }
  TermDistribution feedback(std::move(fb_entries));
  if (params.mu > 0.0 && !query.key_terms.empty()) {
    feedback = mix(feedback, 1.0 - params.mu, TermDistribution::uniform(query.key_terms), params.mu);
  }
  return QueryModel{mix(query.probs, 1.0 - params.alpha, feedback, params.alpha), query.key_terms};
}

QueryModel add_key_term(const QueryModel& query, TermId term, double weight) {
  if (!(weight > 0.0 && weight < 1.0)) throw Error("key term weight must lie in (0, 1)");
  QueryModel out{mix(query.probs, 1.0 - weight, TermDistribution::point(term), weight),
                 query.key_terms};
  out.key_terms.insert(term);
  return out;
}

NegativeModel update_negative(const NegativeModel& neg, TermId term) {
  NegativeModel out = neg;
  out.terms.insert(term);
  out.probs = TermDistribution::uniform(out.terms);
  return out;
}

QueryModel interpolate_topic(const QueryModel& query, const TermDistribution& topic, double weight) {
  check_unit(weight, "topic weight");
  if (weight == 0.0) return query;
  return QueryModel{mix(query.probs, 1.0 - weight, topic, weight), query.key_terms};
}

}  // namespace iir
