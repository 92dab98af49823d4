#include "iir/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "iir/evaluation.hpp"

namespace iir {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- synthetic

namespace {

std::vector<double> dirichlet(std::mt19937_64& rng, std::size_t n, double alpha) {
  std::gamma_distribution<double> g(alpha, 1.0);
  std::vector<double> v(n);
  double total = 0.0;
  for (auto& x : v) total += (x = g(rng));
  if (total <= 0.0) {
    // Underflow with tiny shapes: fall back to a single random atom.
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::fill(v.begin(), v.end(), 0.0);
    v[pick(rng)] = 1.0;
    return v;
  }
  for (auto& x : v) x /= total;
  return v;
}

std::string padded(char prefix, int i, int width) {
  std::string digits = std::to_string(i);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

int digits_for(int n) { return static_cast<int>(std::to_string(std::max(n - 1, 0)).size()); }

}  // namespace

Dataset make_synthetic(const SyntheticParams& p, std::uint64_t seed) {
  if (p.docs < 1 || p.topics < 1 || p.vocab < 1 || p.doc_length < 1 || p.queries < 0 ||
      p.query_length < 1) {
    throw Error("synthetic parameters must be positive");
  }
  std::mt19937_64 rng(seed);
  const auto V = static_cast<std::size_t>(p.vocab);
  const auto K = static_cast<std::size_t>(p.topics);

  std::vector<std::string> words(V);
  for (std::size_t v = 0; v < V; ++v) words[v] = padded('w', static_cast<int>(v), digits_for(p.vocab));

  // Zipfian background shared by every document.
  std::vector<double> background(V);
  for (std::size_t v = 0; v < V; ++v) background[v] = 1.0 / static_cast<double>(v + 1);
  std::discrete_distribution<std::size_t> draw_background(background.begin(), background.end());

  std::vector<std::discrete_distribution<std::size_t>> draw_word;
  for (std::size_t k = 0; k < K; ++k) {
    const auto phi = dirichlet(rng, V, p.topic_sparsity);
    draw_word.emplace_back(phi.begin(), phi.end());
  }

  // Mixtures are redrawn until every topic dominates at least one document,
  // so any single-topic query has a relevant document.
  std::vector<std::vector<double>> mixtures;
  std::vector<std::size_t> dominant;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 1000) throw Error("could not give every topic a dominant document");
    mixtures.clear();
    dominant.clear();
    std::vector<int> hits(K, 0);
    for (int d = 0; d < p.docs; ++d) {
      mixtures.push_back(dirichlet(rng, K, p.doc_concentration));
      const auto& m = mixtures.back();
      dominant.push_back(static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin()));
      ++hits[dominant.back()];
    }
    if (std::all_of(hits.begin(), hits.end(), [](int h) { return h > 0; })) break;
  }

  std::bernoulli_distribution from_background(p.background);
  std::vector<std::pair<std::string, std::string>> records;
  for (int d = 0; d < p.docs; ++d) {
    std::discrete_distribution<std::size_t> draw_topic(mixtures[d].begin(), mixtures[d].end());
    std::string text;
    for (int i = 0; i < p.doc_length; ++i) {
      const std::size_t w =
          from_background(rng) ? draw_background(rng) : draw_word[draw_topic(rng)](rng);
      if (i) text += ' ';
      text += words[w];
    }
    records.emplace_back(padded('d', d, digits_for(p.docs)), std::move(text));
  }

  Dataset data;
  data.corpus = Corpus::from_texts(records);
  std::uniform_int_distribution<std::size_t> pick_topic(0, K - 1);
  for (int q = 0; q < p.queries; ++q) {
    const std::size_t topic = pick_topic(rng);
    Query query;
    query.qid = padded('q', q, digits_for(p.queries));
    // Query words must exist in the corpus vocabulary.
    std::vector<std::string> tokens;
    for (int tries = 0; static_cast<int>(tokens.size()) < p.query_length && tries < 1000; ++tries) {
      const auto& w = words[draw_word[topic](rng)];
      if (data.corpus.vocab().find(w)) tokens.push_back(w);
    }
    if (tokens.empty()) throw Error("synthetic query has no corpus words");
    for (std::size_t i = 0; i < tokens.size(); ++i) query.text += (i ? " " : "") + tokens[i];
    query.tokens = tokens;
    for (int d = 0; d < p.docs; ++d) {
      if (dominant[d] == topic) data.judgments.relevant[query.qid].insert(records[d].first);
    }
    data.queries.push_back(std::move(query));
  }
  return data;
}

void write_dataset(const std::string& dir, const Dataset& data) {
  fs::create_directories(dir);
  write_corpus((fs::path(dir) / "corpus.jsonl").string(), data.corpus);
  write_queries((fs::path(dir) / "queries.jsonl").string(), data.queries);
  write_qrels((fs::path(dir) / "qrels.tsv").string(), data.judgments);
}

// ------------------------------------------------------------------ config

namespace {

void check_keys(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw Error(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw Error(where + ": unknown key '" + key + "'");
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

FeatureConfig features_from_json(const json& j) {
  FeatureConfig f;
  check_keys(j, {"N", "handcrafted", "clarity_docs", "ambiguity_docs", "wig_docs", "feedback_docs",
                 "overlap_depth"},
             "features");
  read(j, "N", f.N);
  read(j, "handcrafted", f.handcrafted);
  read(j, "clarity_docs", f.clarity_docs);
  read(j, "ambiguity_docs", f.ambiguity_docs);
  read(j, "wig_docs", f.wig_docs);
  read(j, "feedback_docs", f.feedback_docs);
  read(j, "overlap_depth", f.overlap_depth);
  return f;
}

json features_to_json(const FeatureConfig& f) {
  return {{"N", f.N},
          {"handcrafted", f.handcrafted},
          {"clarity_docs", f.clarity_docs},
          {"ambiguity_docs", f.ambiguity_docs},
          {"wig_docs", f.wig_docs},
          {"feedback_docs", f.feedback_docs},
          {"overlap_depth", f.overlap_depth}};
}

EnvironmentConfig environment_from_json(const json& j) {
  EnvironmentConfig e;
  check_keys(j, {"beta", "feedback", "key_term_weight", "topic_weight", "shown_docs", "keyterm_docs",
                 "topic_menu", "topic_docs", "reward"},
             "environment");
  read(j, "beta", e.beta);
  read(j, "key_term_weight", e.key_term_weight);
  read(j, "topic_weight", e.topic_weight);
  read(j, "shown_docs", e.shown_docs);
  read(j, "keyterm_docs", e.keyterm_docs);
  read(j, "topic_menu", e.topic_menu);
  read(j, "topic_docs", e.topic_docs);
  if (j.contains("feedback")) {
    const auto& f = j["feedback"];
    check_keys(f, {"alpha", "lambda_f", "mu", "em_iters"}, "environment.feedback");
    read(f, "alpha", e.feedback.alpha);
    read(f, "lambda_f", e.feedback.lambda_f);
    read(f, "mu", e.feedback.mu);
    read(f, "em_iters", e.feedback.em_iters);
  }
  if (j.contains("reward")) {
    const auto& r = j["reward"];
    check_keys(r, {"tau", "costs", "max_turns"}, "environment.reward");
    read(r, "tau", e.reward.tau);
    read(r, "max_turns", e.reward.max_turns);
    if (r.contains("costs")) {
      const auto costs = r["costs"].get<std::vector<double>>();
      if (costs.size() != kNumActions) throw Error("environment.reward.costs: expected 5 values");
      std::copy(costs.begin(), costs.end(), e.reward.costs.begin());
    }
  }
  return e;
}

json environment_to_json(const EnvironmentConfig& e) {
  return {{"beta", e.beta},
          {"feedback",
           {{"alpha", e.feedback.alpha},
            {"lambda_f", e.feedback.lambda_f},
            {"mu", e.feedback.mu},
            {"em_iters", e.feedback.em_iters}}},
          {"key_term_weight", e.key_term_weight},
          {"topic_weight", e.topic_weight},
          {"shown_docs", e.shown_docs},
          {"keyterm_docs", e.keyterm_docs},
          {"topic_menu", e.topic_menu},
          {"topic_docs", e.topic_docs},
          {"reward",
           {{"tau", e.reward.tau},
            {"costs", std::vector<double>(e.reward.costs.begin(), e.reward.costs.end())},
            {"max_turns", e.reward.max_turns}}}};
}

TrainerConfig trainer_from_json(const json& j) {
  TrainerConfig t;
  check_keys(j, {"gamma", "epsilon_start", "epsilon_end", "epsilon_decay_steps", "buffer_capacity",
                 "batch_size", "sync_period", "learning_rate", "optimizer", "total_steps",
                 "learning_starts", "steps_per_epoch", "hidden_layers", "hidden_width",
                 "reward_scale", "scaler_episodes", "eval_episodes"},
             "trainer");
  read(j, "gamma", t.gamma);
  read(j, "epsilon_start", t.epsilon_start);
  read(j, "epsilon_end", t.epsilon_end);
  read(j, "epsilon_decay_steps", t.epsilon_decay_steps);
  read(j, "buffer_capacity", t.buffer_capacity);
  read(j, "batch_size", t.batch_size);
  read(j, "sync_period", t.sync_period);
  read(j, "learning_rate", t.learning_rate);
  read(j, "optimizer", t.optimizer);
  read(j, "total_steps", t.total_steps);
  read(j, "learning_starts", t.learning_starts);
  read(j, "steps_per_epoch", t.steps_per_epoch);
  read(j, "hidden_layers", t.hidden_layers);
  read(j, "hidden_width", t.hidden_width);
  read(j, "reward_scale", t.reward_scale);
  read(j, "scaler_episodes", t.scaler_episodes);
  read(j, "eval_episodes", t.eval_episodes);
  return t;
}

json trainer_to_json(const TrainerConfig& t) {
  return {{"gamma", t.gamma},
          {"epsilon_start", t.epsilon_start},
          {"epsilon_end", t.epsilon_end},
          {"epsilon_decay_steps", t.epsilon_decay_steps},
          {"buffer_capacity", t.buffer_capacity},
          {"batch_size", t.batch_size},
          {"sync_period", t.sync_period},
          {"learning_rate", t.learning_rate},
          {"optimizer", t.optimizer},
          {"total_steps", t.total_steps},
          {"learning_starts", t.learning_starts},
          {"steps_per_epoch", t.steps_per_epoch},
          {"hidden_layers", t.hidden_layers},
          {"hidden_width", t.hidden_width},
          {"reward_scale", t.reward_scale},
          {"scaler_episodes", t.scaler_episodes},
          {"eval_episodes", t.eval_episodes}};
}

HandcraftedTrainConfig handcrafted_config_from_json(const json& j) {
  HandcraftedTrainConfig h;
  check_keys(j, {"episodes_per_query", "ridge", "fvi"}, "handcrafted");
  read(j, "episodes_per_query", h.episodes_per_query);
  read(j, "ridge", h.ridge);
  if (j.contains("fvi")) {
    const auto& f = j["fvi"];
    check_keys(f, {"gamma", "centers", "sigma", "max_iterations", "ridge", "tolerance"},
               "handcrafted.fvi");
    read(f, "gamma", h.fvi.gamma);
    read(f, "centers", h.fvi.centers);
    read(f, "sigma", h.fvi.sigma);
    read(f, "max_iterations", h.fvi.max_iterations);
    read(f, "ridge", h.fvi.ridge);
    read(f, "tolerance", h.fvi.tolerance);
  }
  return h;
}

json handcrafted_to_json_config(const HandcraftedTrainConfig& h) {
  return {{"episodes_per_query", h.episodes_per_query},
          {"ridge", h.ridge},
          {"fvi",
           {{"gamma", h.fvi.gamma},
            {"centers", h.fvi.centers},
            {"sigma", h.fvi.sigma},
            {"max_iterations", h.fvi.max_iterations},
            {"ridge", h.fvi.ridge},
            {"tolerance", h.fvi.tolerance}}}};
}

SyntheticParams synthetic_from_json(const json& j) {
  SyntheticParams s;
  check_keys(j, {"docs", "topics", "vocab", "doc_length", "queries", "query_length", "background",
                 "topic_sparsity", "doc_concentration"},
             "synthetic");
  read(j, "docs", s.docs);
  read(j, "topics", s.topics);
  read(j, "vocab", s.vocab);
  read(j, "doc_length", s.doc_length);
  read(j, "queries", s.queries);
  read(j, "query_length", s.query_length);
  read(j, "background", s.background);
  read(j, "topic_sparsity", s.topic_sparsity);
  read(j, "doc_concentration", s.doc_concentration);
  return s;
}

json synthetic_to_json(const SyntheticParams& s) {
  return {{"docs", s.docs},
          {"topics", s.topics},
          {"vocab", s.vocab},
          {"doc_length", s.doc_length},
          {"queries", s.queries},
          {"query_length", s.query_length},
          {"background", s.background},
          {"topic_sparsity", s.topic_sparsity},
          {"doc_concentration", s.doc_concentration}};
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    check_keys(j, {"corpus", "queries", "qrels", "synthetic", "noise_rate", "lambda_d", "topics",
                   "topic_iters", "features", "environment", "trainer", "handcrafted", "policies",
                   "folds", "seed", "eval_episodes", "random_episodes", "oracle_max_len",
                   "oracle_episodes", "depth_layers", "n_sizes"},
               "config");
    read(j, "corpus", c.corpus);
    read(j, "queries", c.queries);
    read(j, "qrels", c.qrels);
    if (j.contains("synthetic")) c.synthetic = synthetic_from_json(j["synthetic"]);
    read(j, "noise_rate", c.noise_rate);
    read(j, "lambda_d", c.lambda_d);
    read(j, "topics", c.topics);
    read(j, "topic_iters", c.topic_iters);
    if (j.contains("features")) c.features = features_from_json(j["features"]);
    if (j.contains("environment")) c.environment = environment_from_json(j["environment"]);
    if (j.contains("trainer")) c.trainer = trainer_from_json(j["trainer"]);
    if (j.contains("handcrafted")) c.handcrafted = handcrafted_config_from_json(j["handcrafted"]);
    read(j, "policies", c.policies);
    read(j, "folds", c.folds);
    read(j, "seed", c.seed);
    read(j, "eval_episodes", c.eval_episodes);
    read(j, "random_episodes", c.random_episodes);
    read(j, "oracle_max_len", c.oracle_max_len);
    read(j, "oracle_episodes", c.oracle_episodes);
    read(j, "depth_layers", c.depth_layers);
    read(j, "n_sizes", c.n_sizes);
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  return {{"corpus", c.corpus},
          {"queries", c.queries},
          {"qrels", c.qrels},
          {"synthetic", synthetic_to_json(c.synthetic)},
          {"noise_rate", c.noise_rate},
          {"lambda_d", c.lambda_d},
          {"topics", c.topics},
          {"topic_iters", c.topic_iters},
          {"features", features_to_json(c.features)},
          {"environment", environment_to_json(c.environment)},
          {"trainer", trainer_to_json(c.trainer)},
          {"handcrafted", handcrafted_to_json_config(c.handcrafted)},
          {"policies", c.policies},
          {"folds", c.folds},
          {"seed", c.seed},
          {"eval_episodes", c.eval_episodes},
          {"random_episodes", c.random_episodes},
          {"oracle_max_len", c.oracle_max_len},
          {"oracle_episodes", c.oracle_episodes},
          {"depth_layers", c.depth_layers},
          {"n_sizes", c.n_sizes}};
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(path + ": " + e.what());
  }
  auto c = config_from_json(j);
  // Relative data paths are resolved against the config file.
  const auto base = fs::path(path).parent_path();
  for (std::string* p : {&c.corpus, &c.queries, &c.qrels}) {
    if (!p->empty() && fs::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
  return c;
}

bool is_known_policy(const std::string& name) {
  static const std::set<std::string> known = {"first_pass", "random", "handcrafted",
                                              "dqn",        "dqn_raw", "oracle"};
  return known.count(name) > 0;
}

void validate(const ExperimentConfig& c) {
  if (c.folds < 2) throw Error("folds must be at least 2");
  const bool any = !c.corpus.empty() || !c.queries.empty() || !c.qrels.empty();
  if (any) {
    for (const auto* p : {&c.corpus, &c.queries, &c.qrels}) {
      if (p->empty()) throw Error("corpus, queries and qrels must be given together");
      if (!fs::exists(*p)) throw Error("no such file: " + *p);
    }
  }
  if (c.noise_rate < 0.0 || c.noise_rate > 1.0) throw Error("noise_rate must lie in [0, 1]");
  if (!(c.lambda_d > 0.0 && c.lambda_d <= 1.0)) throw Error("lambda_d must lie in (0, 1]");
  if (c.topics < 1 || c.topic_iters < 1) throw Error("topics and topic_iters must be positive");
  if (c.eval_episodes < 1 || c.random_episodes < 1 || c.oracle_episodes < 1) {
    throw Error("episode counts must be positive");
  }
  if (c.oracle_max_len < 1 || c.oracle_max_len > c.environment.reward.max_turns) {
    throw Error("oracle_max_len must lie in [1, max_turns]");
  }
  if (c.features.N < 1) throw Error("features.N must be positive");
  for (const auto& p : c.policies) {
    if (!is_known_policy(p)) throw Error("unknown policy '" + p + "'");
  }
}

// -------------------------------------------------------------- experiment

Experiment::Experiment(ExperimentConfig config) : config_(std::move(config)) {
  validate(config_);
  if (config_.corpus.empty()) {
    data_ = make_synthetic(config_.synthetic, config_.seed);
  } else {
    data_ = ingest(config_.corpus, config_.queries, config_.qrels);
  }
  if (config_.noise_rate > 0.0) {
    // Judgments reference document ids, which noise leaves intact.
    data_.corpus = inject_noise(data_.corpus, config_.noise_rate, config_.seed ^ 0x5eedULL).corpus;
  }
  // Queries must have at least one judged relevant document.
  std::vector<Query> kept;
  for (auto& q : data_.queries) {
    const auto* rel = data_.judgments.find(q.qid);
    if (rel && !rel->empty()) kept.push_back(std::move(q));
  }
  data_.queries = std::move(kept);
  if (data_.queries.empty()) throw Error("no query has relevance judgments");

  collection_ = build_collection(data_.corpus);
  retriever_ = std::make_unique<Retriever>(data_.corpus, collection_, config_.lambda_d);
  topics_ = fit_topics(data_.corpus, std::min<int>(config_.topics, static_cast<int>(data_.corpus.size())),
                       config_.topic_iters, config_.seed);
  env_ = std::make_unique<Environment>(*retriever_, &topics_, &data_.judgments, config_.environment);
  user_ = std::make_unique<SimUser>(*env_, data_.judgments, config_.seed);
}

FeatureExtractor Experiment::extractor(const FeatureConfig& features) const {
  return FeatureExtractor(*retriever_, config_.environment.beta, config_.environment.feedback,
                          features);
}

FeatureConfig Experiment::features_for(const std::string& policy) const {
  FeatureConfig f = config_.features;
  if (policy == "dqn_raw") f.handcrafted = false;
  return f;
}

std::vector<std::vector<std::size_t>> partition_folds(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error("folds must be at least 2");
  if (n < static_cast<std::size_t>(folds)) {
    throw Error("fewer queries (" + std::to_string(n) + ") than folds (" + std::to_string(folds) + ")");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates by hand: std::shuffle's draw pattern is implementation-defined.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < n; ++i) out[i % out.size()].push_back(order[i]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

const PolicyResult* CrossvalResult::find(const std::string& policy) const {
  for (const auto& p : policies) {
    if (p.policy == policy) return &p;
  }
  return nullptr;
}

namespace {

std::uint64_t derive_seed(std::uint64_t base, const std::string& tag, int fold) {
  return episode_seed(base, tag, fold);
}

std::vector<Query> pick(const std::vector<Query>& all, const std::vector<std::size_t>& idx) {
  std::vector<Query> out;
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

struct FoldEval {
  double map = 0.0;
  std::optional<double> ret;
  std::vector<std::pair<std::string, double>> query_returns;
  std::vector<CurvePoint> curve;
};

FoldEval from_summary(const EvalSummary& s, const std::vector<Query>& queries) {
  FoldEval f;
  f.map = s.mean_ap;
  f.ret = s.mean_return;
  for (std::size_t i = 0; i < queries.size(); ++i) f.query_returns.emplace_back(queries[i].qid, s.query_returns[i]);
  return f;
}

FoldEval eval_fold(const Experiment& exp, const std::string& policy, const std::vector<Query>& train,
                   const std::vector<Query>& test, int fold) {
  const auto& cfg = exp.config();
  const auto& env = exp.env();
  const std::uint64_t eval_seed = exp.eval_seed();
  const std::uint64_t train_seed = derive_seed(cfg.seed, policy, fold);

  if (policy == "first_pass") {
    FoldEval f;
    for (const auto& q : test) f.map += env.start(q).quality.value_or(0.0);
    f.map /= static_cast<double>(test.size());
    return f;
  }
  if (policy == "random") {
    RandomPolicy random(train_seed);
    return from_summary(
        evaluate_policy(env, nullptr, random, exp.user(), test, cfg.random_episodes, eval_seed), test);
  }
  if (policy == "handcrafted") {
    const auto fx = exp.extractor(exp.features_for(policy));
    const auto model = train_handcrafted(env, fx, exp.user(), train, cfg.handcrafted, train_seed);
    HandcraftedPolicy hp(model);
    return from_summary(
        evaluate_policy(env, &fx, hp, exp.user(), test, cfg.eval_episodes, eval_seed), test);
  }
  if (policy == "dqn" || policy == "dqn_raw") {
    const auto fx = exp.extractor(exp.features_for(policy));
    const auto trained = train_dqn(env, fx, exp.user(), train, test, cfg.trainer, train_seed);
    DqnPolicy greedy(trained.model);
    auto f = from_summary(
        evaluate_policy(env, &fx, greedy, exp.user(), test, cfg.eval_episodes, eval_seed), test);
    f.curve = trained.curve;
    return f;
  }
  if (policy == "oracle") {
    FoldEval f;
    double ret = 0.0;
    for (const auto& q : test) {
      double q_ret = 0.0, q_ap = 0.0;
      for (int e = 0; e < cfg.oracle_episodes; ++e) {
        const auto r = oracle_search(env, exp.user(), q, cfg.oracle_max_len,
                                     episode_seed(eval_seed, q.qid, e));
        q_ret += r.best_return;
        q_ap += r.best_final_ap;
      }
      q_ret /= cfg.oracle_episodes;
      q_ap /= cfg.oracle_episodes;
      f.query_returns.emplace_back(q.qid, q_ret);
      ret += q_ret;
      f.map += q_ap;
    }
    f.map /= static_cast<double>(test.size());
    f.ret = ret / static_cast<double>(test.size());
    return f;
  }
  throw Error("unknown policy '" + policy + "'");
}

}  // namespace

PolicyResult run_policy(const Experiment& exp, const std::string& policy,
                        const std::vector<std::vector<std::size_t>>& folds) {
  if (!is_known_policy(policy)) throw Error("unknown policy '" + policy + "'");
  PolicyResult out;
  out.policy = policy;
  double map = 0.0, ret = 0.0;
  for (std::size_t k = 0; k < folds.size(); ++k) {
    std::vector<std::size_t> train_idx;
    for (std::size_t j = 0; j < folds.size(); ++j) {
      if (j != k) train_idx.insert(train_idx.end(), folds[j].begin(), folds[j].end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    const auto train = pick(exp.queries(), train_idx);
    const auto test = pick(exp.queries(), folds[k]);
    auto f = eval_fold(exp, policy, train, test, static_cast<int>(k));
    out.folds.push_back({static_cast<int>(k), test.size(), f.map, f.ret});
    map += f.map;
    if (f.ret) ret += *f.ret;
    for (const auto& [qid, r] : f.query_returns) out.query_returns[qid] = r;
    if (!f.curve.empty()) out.curves.push_back(std::move(f.curve));
  }
  out.map = map / static_cast<double>(folds.size());
  if (policy != "first_pass") out.mean_return = ret / static_cast<double>(folds.size());
  return out;
}

CrossvalResult crossval(const Experiment& exp) {
  const auto folds = partition_folds(exp.queries().size(), exp.config().folds, exp.config().seed);
  CrossvalResult result;
  for (const auto& p : exp.config().policies) result.policies.push_back(run_policy(exp, p, folds));
  return result;
}

// ------------------------------------------------------------------ report

namespace {

std::string fmt(double x, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, x);
  return buf;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_curve(const std::string& path, const std::vector<CurvePoint>& curve) {
  auto out = open_output(path);
  out << "epoch,mean_return,mean_map,epsilon\n";
  for (const auto& p : curve) {
    out << p.epoch << ',' << fmt(p.mean_return) << ',' << fmt(p.mean_map) << ',' << fmt(p.epsilon)
        << '\n';
  }
}

void write_report(const std::string& dir, const CrossvalResult& result) {
  fs::create_directories(dir);
  auto table = open_output(fs::path(dir) / "results.tsv");
  table << "policy\tMAP\tReturn\n";
  for (const auto& p : result.policies) {
    table << p.policy << '\t' << fmt(p.map) << '\t' << (p.mean_return ? fmt(*p.mean_return, 2) : "-")
          << '\n';
  }
  auto folds = open_output(fs::path(dir) / "folds.tsv");
  folds << "policy\tfold\tqueries\tMAP\tReturn\n";
  for (const auto& p : result.policies) {
    for (const auto& f : p.folds) {
      folds << p.policy << '\t' << f.fold << '\t' << f.queries << '\t' << fmt(f.map) << '\t'
            << (f.mean_return ? fmt(*f.mean_return, 2) : "-") << '\n';
    }
  }
  for (const auto& p : result.policies) {
    for (std::size_t k = 0; k < p.curves.size(); ++k) {
      write_curve((fs::path(dir) / ("curve_" + p.policy + "_fold" + std::to_string(k) + ".csv")).string(),
                  p.curves[k]);
    }
  }
}

json results_to_json(const CrossvalResult& result) {
  json out = json::array();
  for (const auto& p : result.policies) {
    json folds = json::array();
    for (const auto& f : p.folds) {
      folds.push_back({{"fold", f.fold},
                       {"queries", f.queries},
                       {"map", f.map},
                       {"return", f.mean_return ? json(*f.mean_return) : json(nullptr)}});
    }
    json curves = json::array();
    for (const auto& c : p.curves) {
      json pts = json::array();
      for (const auto& pt : c) pts.push_back({pt.epoch, pt.mean_return, pt.mean_map, pt.epsilon});
      curves.push_back(pts);
    }
    out.push_back({{"policy", p.policy},
                   {"map", p.map},
                   {"return", p.mean_return ? json(*p.mean_return) : json(nullptr)},
                   {"folds", folds},
                   {"query_returns", p.query_returns},
                   {"curves", curves}});
  }
  return {{"policies", out}};
}

CrossvalResult results_from_json(const json& j) {
  CrossvalResult r;
  try {
    for (const auto& p : j.at("policies")) {
      PolicyResult pr;
      pr.policy = p.at("policy").get<std::string>();
      pr.map = p.at("map").get<double>();
      if (!p.at("return").is_null()) pr.mean_return = p["return"].get<double>();
      for (const auto& f : p.at("folds")) {
        FoldResult fr{f.at("fold").get<int>(), f.at("queries").get<std::size_t>(),
                      f.at("map").get<double>(), std::nullopt};
        if (!f.at("return").is_null()) fr.mean_return = f["return"].get<double>();
        pr.folds.push_back(fr);
      }
      pr.query_returns = p.value("query_returns", std::map<std::string, double>{});
      for (const auto& c : p.value("curves", json::array())) {
        std::vector<CurvePoint> curve;
        for (const auto& pt : c) {
          curve.push_back({pt.at(0).get<int>(), pt.at(1).get<double>(), pt.at(2).get<double>(),
                           pt.at(3).get<double>()});
        }
        pr.curves.push_back(std::move(curve));
      }
      r.policies.push_back(std::move(pr));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed results: ") + e.what());
  }
  if (r.policies.empty()) throw Error("results contain no policy");
  return r;
}

// ----------------------------------------------------------------- studies

namespace {

StudyResult run_study(const Experiment& exp, const std::vector<std::pair<std::string, std::pair<FeatureConfig, TrainerConfig>>>& variants) {
  const auto& cfg = exp.config();
  const auto folds = partition_folds(exp.queries().size(), cfg.folds, cfg.seed);
  std::vector<std::size_t> train_idx;
  for (std::size_t j = 1; j < folds.size(); ++j) train_idx.insert(train_idx.end(), folds[j].begin(), folds[j].end());
  std::sort(train_idx.begin(), train_idx.end());
  const auto train = pick(exp.queries(), train_idx);
  const auto test = pick(exp.queries(), folds[0]);

  StudyResult out;
  RandomPolicy random(derive_seed(cfg.seed, "random", 0));
  out.random_return =
      evaluate_policy(exp.env(), nullptr, random, exp.user(), test, cfg.random_episodes, exp.eval_seed())
          .mean_return;
  for (const auto& [label, v] : variants) {
    const auto fx = exp.extractor(v.first);
    const auto trained = train_dqn(exp.env(), fx, exp.user(), train, test, v.second,
                                   derive_seed(cfg.seed, "study", 0));
    DqnPolicy greedy(trained.model);
    const auto s = evaluate_policy(exp.env(), &fx, greedy, exp.user(), test, cfg.eval_episodes,
                                   exp.eval_seed());
    out.runs.push_back({label, s.mean_return, s.mean_ap, trained.curve});
  }
  return out;
}

}  // namespace

StudyResult depth_study(const Experiment& exp) {
  std::vector<std::pair<std::string, std::pair<FeatureConfig, TrainerConfig>>> variants;
  for (int h : exp.config().depth_layers) {
    FeatureConfig f = exp.features_for("dqn_raw");
    TrainerConfig t = exp.config().trainer;
    t.hidden_layers = h;
    variants.push_back({"raw_h" + std::to_string(h), {f, t}});
  }
  return run_study(exp, variants);
}

StudyResult nsize_study(const Experiment& exp) {
  std::vector<std::pair<std::string, std::pair<FeatureConfig, TrainerConfig>>> variants;
  for (int n : exp.config().n_sizes) {
    FeatureConfig f = exp.features_for("dqn_raw");
    f.N = n;
    variants.push_back({"N" + std::to_string(n), {f, exp.config().trainer}});
  }
  return run_study(exp, variants);
}

void write_study(const std::string& dir, const StudyResult& study) {
  fs::create_directories(dir);
  auto out = open_output(fs::path(dir) / "study.tsv");
  out << "run\tReturn\tMAP\n";
  out << "random\t" << fmt(study.random_return, 2) << "\t-\n";
  for (const auto& r : study.runs) {
    out << r.label << '\t' << fmt(r.final_return, 2) << '\t' << fmt(r.final_map) << '\n';
    write_curve((fs::path(dir) / ("curve_" + r.label + ".csv")).string(), r.curve);
  }
}

// ------------------------------------------------------- handcrafted model

std::string handcrafted_to_json(const HandcraftedModel& m) {
  json weights = json::array();
  for (const auto& w : m.q.weights) weights.push_back(w);
  return json{{"regressor", {{"weights", m.regressor.weights}, {"bias", m.regressor.bias}}},
              {"basis", {{"centers", m.q.centers}, {"sigma", m.q.sigma}, {"weights", weights}}}}
      .dump();
}

HandcraftedModel handcrafted_from_json(const std::string& text) {
  HandcraftedModel m;
  try {
    const auto j = json::parse(text);
    m.regressor.weights = j.at("regressor").at("weights").get<std::vector<double>>();
    m.regressor.bias = j.at("regressor").at("bias").get<double>();
    const auto& b = j.at("basis");
    m.q = GBasisQ::make(b.at("centers").get<std::vector<double>>(), b.at("sigma").get<double>());
    const auto& w = b.at("weights");
    if (w.size() != kNumActions) throw Error("handcrafted model needs 5 weight rows");
    for (int a = 0; a < kNumActions; ++a) {
      m.q.weights[a] = w[a].get<std::vector<double>>();
      if (m.q.weights[a].size() != m.q.centers.size()) throw Error("basis weight row has the wrong size");
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed handcrafted model: ") + e.what());
  }
  return m;
}

}  // namespace iir
