#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "iir/common.hpp"

namespace iir {

/// Splits text into lowercase tokens. ASCII letters/digits (and non-CJK
/// letters outside ASCII) form words; each CJK codepoint is its own token.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  TermId intern(std::string_view term);
  std::optional<TermId> find(std::string_view term) const;
  const std::string& term(TermId id) const { return terms_.at(id); }
  std::size_t size() const { return terms_.size(); }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, TermId> ids_;
};

struct Document {
  std::string id;
  std::string text;
  std::vector<TermId> tokens;
  // Sorted by term id.
  std::vector<std::pair<TermId, int>> counts;

  std::size_t length() const { return tokens.size(); }
  int count(TermId term) const;
};

/// Immutable document collection sharing one vocabulary.
class Corpus {
 public:
  Corpus() = default;
  Corpus(Vocabulary vocab, std::vector<Document> docs);

  /// Tokenizes (id, text) records. Throws on duplicates, empty documents,
  /// or an empty record list.
  static Corpus from_texts(const std::vector<std::pair<std::string, std::string>>& records);

  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<Document>& docs() const { return docs_; }
  const Document& doc(DocIndex i) const { return docs_.at(i); }
  std::size_t size() const { return docs_.size(); }
  std::optional<DocIndex> index_of(std::string_view id) const;

  /// Number of documents containing the term.
  int df(TermId term) const { return df_.at(term); }
  /// Position of the document in ascending-id order; used for tie-breaks.
  std::uint32_t id_rank(DocIndex i) const { return id_rank_[i]; }

 private:
  void finalize();

  Vocabulary vocab_;
  std::vector<Document> docs_;
  std::unordered_map<std::string, DocIndex> by_id_;
  std::vector<int> df_;
  std::vector<std::uint32_t> id_rank_;
};

Document make_document(std::string id, std::string text, std::vector<TermId> tokens);

struct CollectionModel {
  std::vector<double> probs;  // indexed by TermId
  std::size_t total_tokens = 0;

  std::size_t vocab_size() const { return probs.size(); }
};

CollectionModel build_collection(const Corpus& corpus);

struct DocModel {
  std::string owner;
  std::vector<double> probs;  // dense over the vocabulary
};

/// Jelinek-Mercer smoothing: (1 - lambda) * ML + lambda * P(t|C).
DocModel build_doc_model(const Document& doc, const CollectionModel& collection, double lambda);

struct Query {
  std::string qid;
  std::string text;
  std::vector<std::string> tokens;
};

struct JudgmentSet {
  std::map<std::string, std::set<std::string>> relevant;

  const std::set<std::string>* find(std::string_view qid) const;
};

struct Dataset {
  Corpus corpus;
  std::vector<Query> queries;
  JudgmentSet judgments;
};

Corpus read_corpus(const std::string& path);
std::vector<Query> read_queries(const std::string& path);
JudgmentSet read_qrels(const std::string& path, const Corpus& corpus);
Dataset ingest(const std::string& corpus_path, const std::string& queries_path,
               const std::string& qrels_path);

void write_corpus(const std::string& path, const Corpus& corpus);
void write_queries(const std::string& path, const std::vector<Query>& queries);
void write_qrels(const std::string& path, const JudgmentSet& judgments);

struct NoisyCorpus {
  Corpus corpus;
  std::size_t replaced = 0;
};

/// Replaces each token independently with probability `rate` by a draw from
/// the collection distribution. Deterministic for a given seed.
NoisyCorpus inject_noise(const Corpus& corpus, double rate, std::uint64_t seed);

}  // namespace iir
