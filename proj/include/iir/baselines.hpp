#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "iir/environment.hpp"
#include "iir/features.hpp"
#include "iir/user_sim.hpp"

namespace iir {

Action random_action(std::mt19937_64& rng);

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
  Action choose(const FeatureVector&) override { return random_action(rng_); }
  bool needs_features() const override { return false; }

 private:
  std::mt19937_64 rng_;
};

/// Plays script[turn], then ShowList once the script runs out.
class ScriptedPolicy final : public Policy {
 public:
  explicit ScriptedPolicy(std::vector<Action> script) : script_(std::move(script)) {}
  Action choose(const FeatureVector& features) override {
    const auto t = static_cast<std::size_t>(features.turn);
    return t < script_.size() ? script_[t] : Action::ShowList;
  }
  bool needs_features() const override { return false; }

 private:
  std::vector<Action> script_;
};

/// Linear ridge regression from feature vectors to AP, clamped to [0, 1].
/// The intercept is not penalized.
struct APRegressor {
  std::vector<double> weights;
  double bias = 0.0;

  double predict(std::span<const double> features) const;
};

APRegressor fit_ap_regressor(const std::vector<std::vector<double>>& features,
                             std::span<const double> targets, double ridge);

/// Per-action Gaussian basis expansion over the scalar state s in [0, 1].
struct GBasisQ {
  std::vector<double> centers;
  double sigma = 0.25;
  // weights[a][j]
  std::array<std::vector<double>, kNumActions> weights;

  static GBasisQ make(std::vector<double> centers, double sigma);
  double q(double s, Action a) const;
  std::array<double, kNumActions> q_all(double s) const;
};

struct ScalarExperience {
  double state;
  Action action;
  double reward;
  double next_state;
  bool terminal;
};

struct FviConfig {
  double gamma = 0.9;
  std::vector<double> centers = {0.25, 0.5, 0.75};
  double sigma = 0.25;
  int max_iterations = 50;
  double ridge = 1e-6;
  double tolerance = 1e-9;
};

struct FviResult {
  GBasisQ q;
  // Projected Bellman residual per iteration: mean over experiences of
  // (Q_{k+1}(s,a) - Q_k(s,a))^2, where Q_{k+1} is the refit of the Bellman targets of Q_k.
  std::vector<double> residuals;
  std::array<bool, kNumActions> unseen{};  // actions without experiences keep zero weights
  int iterations = 0;
};

FviResult fvi_train(std::span<const ScalarExperience> experiences, const FviConfig& config);

Action handcrafted_action(const APRegressor& regressor, const GBasisQ& q,
                          std::span<const double> features);

struct HandcraftedModel {
  APRegressor regressor;
  GBasisQ q;
};

class HandcraftedPolicy final : public Policy {
 public:
  explicit HandcraftedPolicy(const HandcraftedModel& model) : model_(&model) {}
  Action choose(const FeatureVector& features) override;
  std::optional<std::array<double, kNumActions>> q_values(const FeatureVector& fv) const override;

 private:
  const HandcraftedModel* model_;
};

struct HandcraftedTrainConfig {
  int episodes_per_query = 40;  // random-policy episodes collected per training query
  double ridge = 1e-3;
  FviConfig fvi;
};

/// Two-stage baseline: AP regression on random-policy states, then FVI on
/// the estimated-AP state.
HandcraftedModel train_handcrafted(const Environment& env, const FeatureExtractor& features,
                                   const SimUser& user, std::span<const Query> queries,
                                   const HandcraftedTrainConfig& config, std::uint64_t seed);

struct OracleResult {
  std::vector<Action> best_sequence;
  double best_return = 0.0;
  double best_final_ap = 0.0;
  double worst_return = 0.0;
  std::size_t evaluated = 0;
};

/// sum_{k=0}^{max_len-1} 4^k
std::size_t oracle_sequence_count(int max_len);

/// Exhaustive search over every run of non-terminal actions of length
/// 0..max_len-1 followed by ShowList, with the user seeded by `seed`.
/// The environment's turn cap must not truncate any enumerated sequence.
OracleResult oracle_search(const Environment& env, const SimUser& user, const Query& query,
                           int max_len, std::uint64_t seed);

std::string oracle_report_line(const std::string& qid, const OracleResult& result);

}  // namespace iir
