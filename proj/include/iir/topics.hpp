#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iir/corpus.hpp"
#include "iir/retrieval.hpp"

namespace iir {

/// PLSA topic model. Rows of `topic_word` are P(t|z) over the vocabulary,
/// rows of `doc_topic` are P(z|d) in corpus order.
struct TopicModel {
  int K = 0;
  std::vector<std::vector<double>> topic_word;
  std::vector<std::vector<double>> doc_topic;
  // Training log-likelihood after each EM iteration.
  std::vector<double> log_likelihood;

  TermDistribution topic(int z) const { return TermDistribution::from_dense(topic_word.at(z)); }
  /// The `n` most probable terms of topic z, most probable first.
  std::vector<TermId> top_terms(int z, std::size_t n) const;
};

TopicModel fit_topics(const Corpus& corpus, int K, int em_iters, std::uint64_t seed);

double topic_log_likelihood(const Corpus& corpus, const TopicModel& model);

std::string topics_to_json(const TopicModel& model, const Corpus& corpus);
TopicModel topics_from_json(const std::string& text, const Corpus& corpus);

}  // namespace iir
