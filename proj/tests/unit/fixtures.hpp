#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include <memory>

#include "iir/corpus.hpp"
#include "iir/environment.hpp"
#include "iir/harness.hpp"
#include "iir/topics.hpp"
#include "iir/user_sim.hpp"

namespace iir::test {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("iir_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Corpus make_corpus(std::vector<std::pair<std::string, std::string>> records) {
  return Corpus::from_texts(records);
}

inline TermId term(const Corpus& c, const std::string& t) { return *c.vocab().find(t); }

/// Small hand-built world: corpus, judgments, optional topics and an environment.
struct World {
  Corpus corpus;
  CollectionModel collection;
  std::unique_ptr<Retriever> retriever;
  std::unique_ptr<TopicModel> topics;
  JudgmentSet judgments;
  std::unique_ptr<Environment> env;

  World(std::vector<std::pair<std::string, std::string>> docs,
        std::map<std::string, std::set<std::string>> qrels, EnvironmentConfig config = {},
        int K = 0)
      : corpus(make_corpus(std::move(docs))), collection(build_collection(corpus)) {
    retriever = std::make_unique<Retriever>(corpus, collection, 0.5);
    if (K > 0) topics = std::make_unique<TopicModel>(fit_topics(corpus, K, 30, 1));
    judgments.relevant = std::move(qrels);
    env = std::make_unique<Environment>(*retriever, topics.get(), &judgments, config);
  }

  SimUser user(std::uint64_t seed = 1) const { return SimUser(*env, judgments, seed); }
};

inline Query make_query(std::string qid, std::string text) {
  Query q{std::move(qid), text, tokenize(text)};
  return q;
}

/// Small synthetic experiment for end-to-end checks.
inline ExperimentConfig small_config(int docs = 60, int queries = 6) {
  ExperimentConfig c;
  c.synthetic.docs = docs;
  c.synthetic.topics = 3;
  c.synthetic.vocab = 300;
  c.synthetic.doc_length = 40;
  c.synthetic.queries = queries;
  c.topics = 3;
  c.topic_iters = 10;
  c.features.N = 10;
  c.folds = 2;
  c.eval_episodes = 2;
  c.random_episodes = 3;
  c.oracle_max_len = 3;
  c.oracle_episodes = 1;
  c.trainer.total_steps = 200;
  c.trainer.steps_per_epoch = 100;
  c.trainer.epsilon_decay_steps = 150;
  c.trainer.buffer_capacity = 500;
  c.trainer.batch_size = 8;
  c.trainer.learning_starts = 16;
  c.trainer.sync_period = 50;
  c.trainer.hidden_width = 16;
  c.trainer.scaler_episodes = 5;
  c.trainer.eval_episodes = 1;
  c.handcrafted.episodes_per_query = 2;
  return c;
}

}  // namespace iir::test
