#include "iir/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace iir {

namespace {

using json = nlohmann::json;

bool is_cjk(char32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
         (cp >= 0x20000 && cp <= 0x2A6DF) || (cp >= 0xF900 && cp <= 0xFAFF) ||
         (cp >= 0x3040 && cp <= 0x30FF) || (cp >= 0xAC00 && cp <= 0xD7AF);
}

// CJK symbols/punctuation, fullwidth forms, general punctuation.
bool is_wide_separator(char32_t cp) {
  return (cp >= 0x3000 && cp <= 0x303F) || (cp >= 0xFF00 && cp <= 0xFFEF) ||
         (cp >= 0x2000 && cp <= 0x206F) || cp == 0x00A0;
}

// Decodes one codepoint starting at text[i]; returns 0xFFFD on bad input.
char32_t decode(std::string_view text, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  int extra = 0;
  char32_t cp = 0;
  if (b0 < 0x80) {
    ++i;
    return b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + extra >= text.size()) {
    i = text.size();
    return 0xFFFD;
  }
  for (int k = 1; k <= extra; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += extra + 1;
  return cp;
}

[[noreturn]] void fail_line(const std::string& path, std::size_t line, const std::string& what) {
  throw Error(path + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t cp = decode(text, i);
    if (cp < 0x80) {
      const auto c = static_cast<unsigned char>(cp);
      if (std::isalnum(c)) {
        word.push_back(static_cast<char>(std::tolower(c)));
      } else {
        flush();
      }
    } else if (is_cjk(cp)) {
      flush();
      tokens.emplace_back(text.substr(start, i - start));
    } else if (cp == 0xFFFD || is_wide_separator(cp)) {
      flush();
    } else {
      word.append(text.substr(start, i - start));
    }
  }
  flush();
  return tokens;
}

TermId Vocabulary::intern(std::string_view term) {
  auto it = ids_.find(std::string(term));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<TermId>(terms_.size());
  terms_.emplace_back(term);
  ids_.emplace(terms_.back(), id);
  return id;
}

std::optional<TermId> Vocabulary::find(std::string_view term) const {
  auto it = ids_.find(std::string(term));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

int Document::count(TermId term) const {
  auto it = std::lower_bound(counts.begin(), counts.end(), term,
                             [](const auto& entry, TermId t) { return entry.first < t; });
  return (it != counts.end() && it->first == term) ? it->second : 0;
}

Document make_document(std::string id, std::string text, std::vector<TermId> tokens) {
  Document doc{std::move(id), std::move(text), std::move(tokens), {}};
  std::vector<TermId> sorted = doc.tokens;
  std::sort(sorted.begin(), sorted.end());
  for (TermId t : sorted) {
    if (!doc.counts.empty() && doc.counts.back().first == t) {
      ++doc.counts.back().second;
    } else {
      doc.counts.emplace_back(t, 1);
    }
  }
  return doc;
}

Corpus::Corpus(Vocabulary vocab, std::vector<Document> docs)
    : vocab_(std::move(vocab)), docs_(std::move(docs)) {
  finalize();
}

Corpus Corpus::from_texts(const std::vector<std::pair<std::string, std::string>>& records) {
  if (records.empty()) throw Error("no documents");
  Vocabulary vocab;
  std::vector<Document> docs;
  docs.reserve(records.size());
  for (const auto& [id, text] : records) {
    std::vector<TermId> ids;
    for (const auto& tok : tokenize(text)) ids.push_back(vocab.intern(tok));
    if (ids.empty()) throw Error("document '" + id + "' has no tokens");
    docs.push_back(make_document(id, text, std::move(ids)));
  }
  return Corpus(std::move(vocab), std::move(docs));
}

void Corpus::finalize() {
  if (docs_.empty()) throw Error("no documents");
  df_.assign(vocab_.size(), 0);
  for (DocIndex i = 0; i < docs_.size(); ++i) {
    const auto& doc = docs_[i];
    if (doc.length() == 0) throw Error("document '" + doc.id + "' has no tokens");
    if (!by_id_.emplace(doc.id, i).second) throw Error("duplicate document id '" + doc.id + "'");
    for (const auto& [t, c] : doc.counts) ++df_.at(t);
  }
  std::vector<DocIndex> order(docs_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](DocIndex a, DocIndex b) { return docs_[a].id < docs_[b].id; });
  id_rank_.resize(docs_.size());
  for (std::uint32_t r = 0; r < order.size(); ++r) id_rank_[order[r]] = r;
}

std::optional<DocIndex> Corpus::index_of(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

CollectionModel build_collection(const Corpus& corpus) {
  CollectionModel model;
  std::vector<std::size_t> counts(corpus.vocab().size(), 0);
  for (const auto& doc : corpus.docs()) {
    for (const auto& [t, c] : doc.counts) counts[t] += c;
    model.total_tokens += doc.length();
  }
  model.probs.resize(counts.size());
  for (std::size_t t = 0; t < counts.size(); ++t) {
    model.probs[t] = static_cast<double>(counts[t]) / static_cast<double>(model.total_tokens);
  }
  return model;
}

DocModel build_doc_model(const Document& doc, const CollectionModel& collection, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw Error("smoothing weight must lie in [0, 1]");
  if (doc.length() == 0) throw Error("document '" + doc.id + "' is empty");
  DocModel model{doc.id, std::vector<double>(collection.vocab_size())};
  for (std::size_t t = 0; t < model.probs.size(); ++t) {
    model.probs[t] = lambda * collection.probs[t];
  }
  const double len = static_cast<double>(doc.length());
  for (const auto& [t, c] : doc.counts) model.probs.at(t) += (1.0 - lambda) * c / len;
  return model;
}

const std::set<std::string>* JudgmentSet::find(std::string_view qid) const {
  auto it = relevant.find(std::string(qid));
  return it == relevant.end() ? nullptr : &it->second;
}

Corpus read_corpus(const std::string& path) {
  auto in = open_input(path);
  std::vector<std::pair<std::string, std::string>> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_line(path, lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("text") ||
        !obj["id"].is_string() || !obj["text"].is_string()) {
      fail_line(path, lineno, "expected {\"id\": string, \"text\": string}");
    }
    records.emplace_back(obj["id"].get<std::string>(), obj["text"].get<std::string>());
  }
  if (records.empty()) throw Error(path + ": no documents");
  try {
    return Corpus::from_texts(records);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

std::vector<Query> read_queries(const std::string& path) {
  auto in = open_input(path);
  std::vector<Query> queries;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_line(path, lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object() || !obj.contains("qid") || !obj.contains("text") ||
        !obj["qid"].is_string() || !obj["text"].is_string()) {
      fail_line(path, lineno, "expected {\"qid\": string, \"text\": string}");
    }
    Query q{obj["qid"].get<std::string>(), obj["text"].get<std::string>(), {}};
    if (!seen.insert(q.qid).second) fail_line(path, lineno, "duplicate query id '" + q.qid + "'");
    q.tokens = tokenize(q.text);
    queries.push_back(std::move(q));
  }
  return queries;
}

JudgmentSet read_qrels(const std::string& path, const Corpus& corpus) {
  auto in = open_input(path);
  JudgmentSet judgments;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line) || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      fail_line(path, lineno, "expected two tab-separated columns");
    }
    std::string qid = trim(line.substr(0, tab));
    std::string docid = trim(line.substr(tab + 1));
    if (qid.empty() || docid.empty()) fail_line(path, lineno, "empty column");
    if (!corpus.index_of(docid)) fail_line(path, lineno, "unknown document id '" + docid + "'");
    judgments.relevant[qid].insert(std::move(docid));
  }
  return judgments;
}

Dataset ingest(const std::string& corpus_path, const std::string& queries_path,
               const std::string& qrels_path) {
  Dataset data;
  data.corpus = read_corpus(corpus_path);
  data.queries = read_queries(queries_path);
  data.judgments = read_qrels(qrels_path, data.corpus);
  return data;
}

void write_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& doc : corpus.docs()) {
    out << json{{"id", doc.id}, {"text", doc.text}}.dump() << '\n';
  }
}

void write_queries(const std::string& path, const std::vector<Query>& queries) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& q : queries) out << json{{"qid", q.qid}, {"text", q.text}}.dump() << '\n';
}

void write_qrels(const std::string& path, const JudgmentSet& judgments) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& [qid, docs] : judgments.relevant) {
    for (const auto& d : docs) out << qid << '\t' << d << '\n';
  }
}

NoisyCorpus inject_noise(const Corpus& corpus, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate > 1.0) throw Error("noise rate must lie in [0, 1]");
  const auto collection = build_collection(corpus);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution flip(rate);
  std::discrete_distribution<TermId> draw(collection.probs.begin(), collection.probs.end());

  // Terms can vanish entirely, so the vocabulary is rebuilt to keep every
  // entry at positive collection probability.
  NoisyCorpus result;
  Vocabulary vocab;
  std::vector<Document> docs;
  docs.reserve(corpus.size());
  for (const auto& doc : corpus.docs()) {
    std::vector<TermId> tokens = doc.tokens;
    bool changed = false;
    for (auto& t : tokens) {
      if (flip(rng)) {
        t = draw(rng);
        ++result.replaced;
        changed = true;
      }
    }
    std::string text = doc.text;
    if (changed) {
      std::ostringstream joined;
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) joined << ' ';
        joined << corpus.vocab().term(tokens[i]);
      }
      text = joined.str();
    }
    for (auto& t : tokens) t = vocab.intern(corpus.vocab().term(t));
    docs.push_back(make_document(doc.id, std::move(text), std::move(tokens)));
  }
  result.corpus = Corpus(std::move(vocab), std::move(docs));
  return result;
}

}  // namespace iir
