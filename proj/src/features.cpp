#include "iir/features.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace iir {

namespace {

double cosine(const Document& a, const Document& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [t, c] : a.counts) na += static_cast<double>(c) * c;
  for (const auto& [t, c] : b.counts) nb += static_cast<double>(c) * c;
  auto ia = a.counts.begin();
  auto ib = b.counts.begin();
  while (ia != a.counts.end() && ib != b.counts.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += static_cast<double>(ia->second) * ib->second;
      ++ia;
      ++ib;
    }
  }
  return dot / std::sqrt(na * nb);
}

std::size_t depth(const RankedList& list, int k) {
  return std::min<std::size_t>(list.size(), static_cast<std::size_t>(std::max(k, 0)));
}

}  // namespace

std::vector<double> FeatureVector::flatten() const {
  std::vector<double> out;
  out.reserve(dimension());
  if (has_handcrafted) out.insert(out.end(), handcrafted.begin(), handcrafted.end());
  out.push_back(static_cast<double>(turn));
  out.insert(out.end(), raw.begin(), raw.end());
  return out;
}

std::vector<double> raw_scores(const RankedList& list, int N) {
  if (N < 1) throw Error("N must be at least 1");
  if (list.empty()) throw Error("cannot take scores of an empty ranked list");
  std::vector<double> out(static_cast<std::size_t>(N), list.entries.back().score);
  const std::size_t n = std::min<std::size_t>(list.size(), out.size());
  for (std::size_t i = 0; i < n; ++i) out[i] = list.entries[i].score;
  return out;
}

std::vector<std::string> feature_names(const FeatureConfig& config) {
  std::vector<std::string> names;
  if (config.handcrafted) {
    names = {"clarity", "scope", "scs", "ambiguity", "qc_similarity", "wig", "query_feedback"};
  }
  names.emplace_back("t");
  for (int i = 1; i <= config.N; ++i) names.push_back("s_" + std::to_string(i));
  return names;
}

FeatureExtractor::FeatureExtractor(const Retriever& retriever, double beta, FeedbackParams feedback,
                                   FeatureConfig config)
    : retriever_(&retriever), beta_(beta), feedback_(feedback), config_(config) {
  if (config_.N < 1) throw Error("N must be at least 1");
  double sq = 0.0;
  for (double p : retriever.collection().probs) sq += p * p;
  collection_norm_ = std::sqrt(sq);
}

std::size_t FeatureExtractor::dimension() const {
  return (config_.handcrafted ? kNumHandcrafted : 0) + 1 + static_cast<std::size_t>(config_.N);
}

std::array<double, kNumHandcrafted> FeatureExtractor::extract_handcrafted(
    const RetrievalSituation& s) const {
  if (s.ranked.empty()) throw Error("feature extraction needs a non-empty ranked list");
  const Corpus& corpus = retriever_->corpus();
  const auto& bg = retriever_->collection().probs;
  const double lambda = retriever_->lambda_d();
  std::array<double, kNumHandcrafted> f{};

  // Clarity: KL(relevance model over top documents || collection).
  {
    const std::size_t R = depth(s.ranked, config_.clarity_docs);
    const double top = s.ranked.entries.front().score;
    std::vector<double> w(R);
    double wsum = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
      w[i] = std::exp(s.ranked.entries[i].score - top);
      wsum += w[i];
    }
    std::vector<TermDistribution::Entry> fg;
    for (std::size_t i = 0; i < R; ++i) {
      const auto& doc = corpus.doc(s.ranked.entries[i].doc);
      const double scale = (1.0 - lambda) * (w[i] / wsum) / static_cast<double>(doc.length());
      for (const auto& [t, c] : doc.counts) fg.emplace_back(t, scale * c);
    }
    const TermDistribution touched(std::move(fg));
    // Terms outside the top documents keep lambda * P(t|C).
    double clarity = 0.0;
    double touched_bg = 0.0;
    for (const auto& [t, v] : touched.entries()) {
      const double p = v + lambda * bg[t];
      clarity += p * std::log(p / bg[t]);
      touched_bg += bg[t];
    }
    if (lambda > 0.0) clarity += lambda * std::max(0.0, 1.0 - touched_bg) * std::log(lambda);
    f[0] = std::max(0.0, clarity);
  }

  // Query scope.
  {
    std::size_t n_q = 0;
    for (const auto& doc : corpus.docs()) {
      for (const auto& [t, p] : s.original.entries()) {
        if (doc.count(t) > 0) {
          ++n_q;
          break;
        }
      }
    }
    n_q = std::max<std::size_t>(n_q, 1);
    f[1] = -std::log(static_cast<double>(n_q) / static_cast<double>(corpus.size()));
  }

  // Simplified clarity and query-collection cosine on the typed query.
  {
    double scs = 0.0, dot = 0.0, qn = 0.0;
    for (const auto& [t, p] : s.original.entries()) {
      scs += p * std::log(p / bg[t]);
      dot += p * bg[t];
      qn += p * p;
    }
    f[2] = std::max(0.0, scs);
    f[4] = dot / (std::sqrt(qn) * collection_norm_);
  }

  // Ambiguity: mean pairwise cosine among the top documents.
  {
    const std::size_t K = depth(s.ranked, config_.ambiguity_docs);
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = i + 1; j < K; ++j) {
        sum += cosine(corpus.doc(s.ranked.entries[i].doc), corpus.doc(s.ranked.entries[j].doc));
        ++pairs;
      }
    }
    f[3] = pairs ? sum / static_cast<double>(pairs) : 1.0;
  }

  // Weighted information gain.
  {
    const std::size_t K = depth(s.ranked, config_.wig_docs);
    const double base = retriever_->score_collection(s.query, s.neg, beta_);
    double sum = 0.0;
    for (std::size_t i = 0; i < K; ++i) sum += s.ranked.entries[i].score - base;
    const double qlen = static_cast<double>(std::max<std::size_t>(s.query_length, 1));
    f[5] = sum / static_cast<double>(K) / qlen;
  }

  // Query feedback: overlap between the current ranking and the ranking
  // after pseudo-relevance feedback from the current top documents.
  {
    const std::size_t fb = depth(s.ranked, config_.feedback_docs);
    std::vector<const Document*> docs;
    for (std::size_t i = 0; i < fb; ++i) docs.push_back(&corpus.doc(s.ranked.entries[i].doc));
    const QueryModel expanded =
        expand_query(s.query, docs, retriever_->collection(), feedback_);
    const RankedList reranked = retriever_->rank(expanded, s.neg, beta_);
    const int cap = std::max<int>(1, static_cast<int>(corpus.size() / 10));
    const std::size_t K = depth(s.ranked, std::min(config_.overlap_depth, cap));
    std::unordered_set<DocIndex> top;
    for (std::size_t i = 0; i < K; ++i) top.insert(s.ranked.entries[i].doc);
    std::size_t overlap = 0;
    for (std::size_t i = 0; i < K; ++i) overlap += top.count(reranked.entries[i].doc);
    f[6] = static_cast<double>(overlap) / static_cast<double>(K);
  }
  return f;
}

FeatureVector FeatureExtractor::extract(const RetrievalSituation& s) const {
  FeatureVector fv;
  fv.has_handcrafted = config_.handcrafted;
  if (config_.handcrafted) fv.handcrafted = extract_handcrafted(s);
  fv.turn = s.turn;
  fv.raw = raw_scores(s.ranked, config_.N);
  return fv;
}

void write_feature_header(std::ostream& out, const FeatureConfig& config) {
  const auto names = feature_names(config);
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
}

void write_feature_row(std::ostream& out, const FeatureVector& features) {
  const auto values = features.flatten();
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  out << '\n';
}

}  // namespace iir
