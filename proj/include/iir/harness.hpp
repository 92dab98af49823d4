#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "iir/baselines.hpp"
#include "iir/corpus.hpp"
#include "iir/dqn.hpp"
#include "iir/environment.hpp"
#include "iir/features.hpp"
#include "iir/topics.hpp"
#include "iir/user_sim.hpp"

namespace iir {

struct SyntheticParams {
  int docs = 500;
  int topics = 10;
  int vocab = 2000;
  int doc_length = 100;
  int queries = 50;
  int query_length = 3;
  double background = 0.3;         // share of each document drawn from the background
  double topic_sparsity = 0.05;    // Gamma shape of topic-word weights
  double doc_concentration = 0.2;  // Dirichlet parameter of document topic mixtures
};

/// Topic-mixture documents, single-topic queries, and qrels by dominant topic.
Dataset make_synthetic(const SyntheticParams& params, std::uint64_t seed);
/// corpus.jsonl, queries.jsonl, qrels.tsv under `dir`.
void write_dataset(const std::string& dir, const Dataset& data);

struct ExperimentConfig {
  // Empty paths select an in-memory synthetic dataset.
  std::string corpus;
  std::string queries;
  std::string qrels;
  SyntheticParams synthetic;
  double noise_rate = 0.0;

  double lambda_d = 0.5;
  int topics = 10;
  int topic_iters = 50;

  FeatureConfig features;
  EnvironmentConfig environment;
  TrainerConfig trainer;
  HandcraftedTrainConfig handcrafted;

  std::vector<std::string> policies = {"first_pass", "random", "handcrafted",
                                       "dqn_raw",    "dqn",    "oracle"};
  int folds = 10;
  std::uint64_t seed = 1;
  int eval_episodes = 20;
  int random_episodes = 1000;
  int oracle_max_len = 5;
  int oracle_episodes = 20;

  // Learning-curve studies on a single train/test split.
  std::vector<int> depth_layers = {0, 2};
  std::vector<int> n_sizes = {1, 5, 10, 50, 100};
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& config);

/// Everything a run needs, built once from a config. Not movable: the
/// environment and user hold pointers into it.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  const ExperimentConfig& config() const { return config_; }
  const Dataset& data() const { return data_; }
  const Corpus& corpus() const { return data_.corpus; }
  const std::vector<Query>& queries() const { return data_.queries; }
  const JudgmentSet& judgments() const { return data_.judgments; }
  const Retriever& retriever() const { return *retriever_; }
  const TopicModel& topics() const { return topics_; }
  const Environment& env() const { return *env_; }
  const SimUser& user() const { return *user_; }

  FeatureExtractor extractor(const FeatureConfig& features) const;
  /// Feature configuration used by a named policy ("dqn_raw" drops the predictors).
  FeatureConfig features_for(const std::string& policy) const;
  /// User seed base shared by every evaluated policy and the oracle.
  std::uint64_t eval_seed() const { return config_.seed + 1; }

 private:
  ExperimentConfig config_;
  Dataset data_;
  CollectionModel collection_;
  std::unique_ptr<Retriever> retriever_;
  TopicModel topics_;
  std::unique_ptr<Environment> env_;
  std::unique_ptr<SimUser> user_;
};

/// Deterministic disjoint cover of 0..n-1 into `folds` parts.
std::vector<std::vector<std::size_t>> partition_folds(std::size_t n, int folds, std::uint64_t seed);

struct FoldResult {
  int fold = 0;
  std::size_t queries = 0;
  double map = 0.0;
  std::optional<double> mean_return;
};

struct PolicyResult {
  std::string policy;
  std::vector<FoldResult> folds;
  double map = 0.0;
  std::optional<double> mean_return;  // absent for first_pass
  std::map<std::string, double> query_returns;
  std::vector<std::vector<CurvePoint>> curves;  // one per fold for learned policies
};

struct CrossvalResult {
  std::vector<PolicyResult> policies;

  const PolicyResult* find(const std::string& policy) const;
};

bool is_known_policy(const std::string& name);

PolicyResult run_policy(const Experiment& exp, const std::string& policy,
                        const std::vector<std::vector<std::size_t>>& folds);
CrossvalResult crossval(const Experiment& exp);

nlohmann::json results_to_json(const CrossvalResult& result);
CrossvalResult results_from_json(const nlohmann::json& j);

/// results.tsv (policy, MAP, Return), folds.tsv, and curve_<policy>_fold<k>.csv.
void write_report(const std::string& dir, const CrossvalResult& result);
void write_curve(const std::string& path, const std::vector<CurvePoint>& curve);

struct StudyRun {
  std::string label;
  double final_return = 0.0;
  double final_map = 0.0;
  std::vector<CurvePoint> curve;
};

struct StudyResult {
  double random_return = 0.0;
  std::vector<StudyRun> runs;
};

/// Raw-score-only DQN with each hidden-layer count, trained on every fold
/// but the first and evaluated on the first.
StudyResult depth_study(const Experiment& exp);
/// Raw-score-only DQN with each score count N on the same split.
StudyResult nsize_study(const Experiment& exp);
/// study.tsv plus one curve_<label>.csv per run.
void write_study(const std::string& dir, const StudyResult& study);

std::string handcrafted_to_json(const HandcraftedModel& model);
HandcraftedModel handcrafted_from_json(const std::string& text);

}  // namespace iir
