#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iir/common.hpp"
#include "iir/corpus.hpp"

namespace iir {

/// Sparse probability distribution over term ids, entries sorted by id.
class TermDistribution {
 public:
  using Entry = std::pair<TermId, double>;

  TermDistribution() = default;
  /// Entries may be unsorted and contain duplicates; they are merged.
  explicit TermDistribution(std::vector<Entry> entries);

  static TermDistribution point(TermId term);
  static TermDistribution uniform(const std::set<TermId>& terms);
  /// Normalizes counts (or weights) into a distribution; zero entries dropped.
  static TermDistribution normalized(std::vector<Entry> weights);
  static TermDistribution from_dense(std::span<const double> probs);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t support_size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  double prob(TermId term) const;
  double total() const;

 private:
  std::vector<Entry> entries_;
};

/// (wa * a + wb * b), merged over the union of supports.
TermDistribution mix(const TermDistribution& a, double wa, const TermDistribution& b, double wb);

struct QueryModel {
  TermDistribution probs;
  std::set<TermId> key_terms;
};

struct NegativeModel {
  TermDistribution probs;
  std::set<TermId> terms;

  bool empty() const { return terms.empty(); }
};

/// Maximum-likelihood query model over in-vocabulary tokens; those tokens
/// seed the key term set. Throws when no token is in the vocabulary.
QueryModel make_query_model(std::span<const std::string> tokens, const Vocabulary& vocab);

/// -[KL(query || doc) - beta * KL(neg || doc)], natural log.
double score(const QueryModel& query, const NegativeModel& neg, const DocModel& doc, double beta);

struct ScoredDoc {
  DocIndex doc;
  double score;
};

struct RankedList {
  std::vector<ScoredDoc> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

/// Ranking engine over a fixed corpus with Jelinek-Mercer document models.
/// Uses an inverted index of log-probability boosts over the smoothed
/// background, so ranking costs O(postings of the query support).
class Retriever {
 public:
  Retriever(const Corpus& corpus, const CollectionModel& collection, double lambda_d);

  const Corpus& corpus() const { return *corpus_; }
  const CollectionModel& collection() const { return *collection_; }
  double lambda_d() const { return lambda_d_; }

  DocModel doc_model(DocIndex doc) const;
  double log_prob(DocIndex doc, TermId term) const;

  /// Full ordering of the corpus; ties broken by ascending document id.
  RankedList rank(const QueryModel& query, const NegativeModel& neg, double beta) const;
  /// Score of the collection model treated as a pseudo-document.
  double score_collection(const QueryModel& query, const NegativeModel& neg, double beta) const;

 private:
  const Corpus* corpus_;
  const CollectionModel* collection_;
  double lambda_d_;
  std::vector<double> log_background_;
  struct Posting {
    DocIndex doc;
    double boost;
  };
  std::vector<std::vector<Posting>> postings_;
};

struct FeedbackParams {
  double alpha = 0.5;     // interpolation with the current query
  double lambda_f = 0.5;  // background mixing weight inside EM
  double mu = 0.2;        // key-term regularization weight
  int em_iters = 30;
};

/// Estimates a feedback model by EM over the mixture
/// (1 - lambda_f) P(t|F) + lambda_f P(t|C), regularizes it toward the key
/// terms and interpolates with the current query model.
QueryModel expand_query(const QueryModel& query, std::span<const Document* const> feedback_docs,
                        const CollectionModel& collection, const FeedbackParams& params);

QueryModel add_key_term(const QueryModel& query, TermId term, double weight);
NegativeModel update_negative(const NegativeModel& neg, TermId term);
QueryModel interpolate_topic(const QueryModel& query, const TermDistribution& topic, double weight);

}  // namespace iir
