#include "iir/topics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

namespace iir {

namespace {

void normalize(std::vector<double>& row) {
  const double s = std::accumulate(row.begin(), row.end(), 0.0);
  if (s <= 0.0) return;
  for (auto& v : row) v /= s;
}

}  // namespace

std::vector<TermId> TopicModel::top_terms(int z, std::size_t n) const {
  const auto& row = topic_word.at(z);
  std::vector<TermId> ids(row.size());
  std::iota(ids.begin(), ids.end(), 0);
  n = std::min(n, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(),
                    [&](TermId a, TermId b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
  ids.resize(n);
  return ids;
}

double topic_log_likelihood(const Corpus& corpus, const TopicModel& model) {
  double ll = 0.0;
  for (DocIndex d = 0; d < corpus.size(); ++d) {
    const auto& theta = model.doc_topic[d];
    for (const auto& [t, c] : corpus.doc(d).counts) {
      double p = 0.0;
      for (int z = 0; z < model.K; ++z) p += model.topic_word[z][t] * theta[z];
      ll += c * std::log(p);
    }
  }
  return ll;
}

TopicModel fit_topics(const Corpus& corpus, int K, int em_iters, std::uint64_t seed) {
  if (K < 1) throw Error("topic count must be at least 1");
  if (em_iters < 1) throw Error("em_iters must be at least 1");
  if (static_cast<std::size_t>(K) > corpus.size()) {
    throw Error("topic count exceeds the number of documents");
  }
  const std::size_t V = corpus.vocab().size();
  const std::size_t D = corpus.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> init(0.5, 1.5);

  TopicModel model;
  model.K = K;
  model.topic_word.assign(K, std::vector<double>(V));
  model.doc_topic.assign(D, std::vector<double>(K));
  for (auto& row : model.topic_word) {
    for (auto& v : row) v = init(rng);
    normalize(row);
  }
  for (auto& row : model.doc_topic) {
    for (auto& v : row) v = init(rng);
    normalize(row);
  }

  std::vector<std::vector<double>> tw_next(K, std::vector<double>(V));
  std::vector<double> post(K);
  for (int it = 0; it < em_iters; ++it) {
    for (auto& row : tw_next) std::fill(row.begin(), row.end(), 0.0);
    std::vector<std::vector<double>> dt_next(D, std::vector<double>(K, 0.0));
    for (DocIndex d = 0; d < D; ++d) {
      const auto& theta = model.doc_topic[d];
      for (const auto& [t, c] : corpus.doc(d).counts) {
        double s = 0.0;
        for (int z = 0; z < K; ++z) {
          post[z] = model.topic_word[z][t] * theta[z];
          s += post[z];
        }
        if (s <= 0.0) continue;
        for (int z = 0; z < K; ++z) {
          const double w = c * post[z] / s;
          tw_next[z][t] += w;
          dt_next[d][z] += w;
        }
      }
    }
    for (int z = 0; z < K; ++z) {
      model.topic_word[z] = tw_next[z];
      normalize(model.topic_word[z]);
    }
    for (DocIndex d = 0; d < D; ++d) {
      normalize(dt_next[d]);
      model.doc_topic[d] = std::move(dt_next[d]);
    }
    model.log_likelihood.push_back(topic_log_likelihood(corpus, model));
  }
  return model;
}

std::string topics_to_json(const TopicModel& model, const Corpus& corpus) {
  using json = nlohmann::json;
  json topic_word = json::array();
  for (const auto& row : model.topic_word) {
    json entries = json::array();
    for (std::size_t t = 0; t < row.size(); ++t) {
      if (row[t] > 0.0) entries.push_back({corpus.vocab().term(static_cast<TermId>(t)), row[t]});
    }
    topic_word.push_back(std::move(entries));
  }
  json doc_topic = json::object();
  for (DocIndex d = 0; d < corpus.size(); ++d) doc_topic[corpus.doc(d).id] = model.doc_topic[d];
  return json{{"K", model.K}, {"topic_word", topic_word}, {"doc_topic", doc_topic}}.dump();
}

TopicModel topics_from_json(const std::string& text, const Corpus& corpus) {
  using json = nlohmann::json;
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("malformed topic model: ") + e.what());
  }
  TopicModel model;
  try {
    model.K = obj.at("K").get<int>();
    if (model.K < 1) throw Error("topic model K must be positive");
    const auto& tw = obj.at("topic_word");
    if (!tw.is_array() || tw.size() != static_cast<std::size_t>(model.K)) {
      throw Error("topic_word must hold K rows");
    }
    model.topic_word.assign(model.K, std::vector<double>(corpus.vocab().size(), 0.0));
    for (int z = 0; z < model.K; ++z) {
      for (const auto& pair : tw[z]) {
        const auto term = pair.at(0).get<std::string>();
        auto id = corpus.vocab().find(term);
        if (!id) throw Error("topic model references unknown term '" + term + "'");
        model.topic_word[z][*id] = pair.at(1).get<double>();
      }
    }
    model.doc_topic.assign(corpus.size(), std::vector<double>(model.K, 0.0));
    const auto& dt = obj.at("doc_topic");
    for (auto it = dt.begin(); it != dt.end(); ++it) {
      auto idx = corpus.index_of(it.key());
      if (!idx) throw Error("topic model references unknown document '" + it.key() + "'");
      auto row = it.value().get<std::vector<double>>();
      if (row.size() != static_cast<std::size_t>(model.K)) throw Error("doc_topic row length != K");
      model.doc_topic[*idx] = std::move(row);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed topic model: ") + e.what());
  }
  return model;
}

}  // namespace iir
