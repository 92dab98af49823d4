#pragma once

#include <array>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "iir/retrieval.hpp"

namespace iir {

inline constexpr std::size_t kNumHandcrafted = 7;

struct FeatureConfig {
  int N = 100;              // raw relevance scores kept
  bool handcrafted = true;  // include the seven predictors
  int clarity_docs = 10;
  int ambiguity_docs = 10;
  int wig_docs = 10;
  int feedback_docs = 10;  // pseudo-feedback depth for the query-feedback predictor
  int overlap_depth = 50;  // capped at corpus_size / 10
};

/// Everything the extractor reads from a session; never mutated.
struct RetrievalSituation {
  const QueryModel& query;
  const NegativeModel& neg;
  const RankedList& ranked;
  const TermDistribution& original;  // maximum-likelihood model of the typed query
  std::size_t query_length;          // in-vocabulary tokens of the typed query
  int turn;
};

struct FeatureVector {
  // clarity, scope, SCS, ambiguity, query-collection similarity, WIG, query feedback
  std::array<double, kNumHandcrafted> handcrafted{};
  bool has_handcrafted = true;
  int turn = 0;
  std::vector<double> raw;

  std::size_t dimension() const { return (has_handcrafted ? kNumHandcrafted : 0) + 1 + raw.size(); }
  /// [handcrafted | turn | raw scores]
  std::vector<double> flatten() const;
};

/// Top-N scores; short lists are padded with their minimum score.
std::vector<double> raw_scores(const RankedList& list, int N);

std::vector<std::string> feature_names(const FeatureConfig& config);

class FeatureExtractor {
 public:
  FeatureExtractor(const Retriever& retriever, double beta, FeedbackParams feedback,
                   FeatureConfig config);

  const FeatureConfig& config() const { return config_; }
  std::size_t dimension() const;

  std::array<double, kNumHandcrafted> extract_handcrafted(const RetrievalSituation& s) const;
  FeatureVector extract(const RetrievalSituation& s) const;

 private:
  const Retriever* retriever_;
  double beta_;
  FeedbackParams feedback_;
  FeatureConfig config_;
  double collection_norm_;
};

void write_feature_header(std::ostream& out, const FeatureConfig& config);
void write_feature_row(std::ostream& out, const FeatureVector& features);

}  // namespace iir
