#include "iir/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace iir {

Action random_action(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, kNumActions - 1);
  return static_cast<Action>(pick(rng));
}

double APRegressor::predict(std::span<const double> features) const {
  if (features.size() != weights.size()) throw Error("AP regressor dimension mismatch");
  double y = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) y += weights[i] * features[i];
  return std::clamp(y, 0.0, 1.0);
}

APRegressor fit_ap_regressor(const std::vector<std::vector<double>>& features,
                             std::span<const double> targets, double ridge) {
  if (features.size() < 2) throw Error("AP regression needs at least two samples");
  if (features.size() != targets.size()) throw Error("feature/target count mismatch");
  if (ridge < 0.0) throw Error("ridge must be non-negative");
  const auto n = static_cast<Eigen::Index>(features.size());
  const auto p = static_cast<Eigen::Index>(features.front().size());
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = features[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != p) throw Error("ragged feature matrix");
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = row[static_cast<std::size_t>(j)];
    y(i) = targets[static_cast<std::size_t>(i)];
  }
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  X.rowwise() -= x_mean;
  y.array() -= y_mean;
  Eigen::MatrixXd A = X.transpose() * X;
  A.diagonal().array() += ridge;
  const Eigen::VectorXd w = A.completeOrthogonalDecomposition().solve(X.transpose() * y);

  APRegressor reg;
  reg.weights.assign(w.data(), w.data() + w.size());
  reg.bias = y_mean - x_mean.dot(w);
  return reg;
}

GBasisQ GBasisQ::make(std::vector<double> centers, double sigma) {
  if (centers.empty()) throw Error("basis needs at least one center");
  if (!(sigma > 0.0)) throw Error("basis width must be positive");
  GBasisQ q;
  q.centers = std::move(centers);
  q.sigma = sigma;
  for (auto& w : q.weights) w.assign(q.centers.size(), 0.0);
  return q;
}

namespace {

std::vector<double> basis(const GBasisQ& q, double s) {
  std::vector<double> phi(q.centers.size());
  for (std::size_t j = 0; j < phi.size(); ++j) {
    const double d = s - q.centers[j];
    phi[j] = std::exp(-d * d / (2.0 * q.sigma * q.sigma));
  }
  return phi;
}

}  // namespace

double GBasisQ::q(double s, Action a) const {
  const auto phi = basis(*this, s);
  const auto& w = weights[action_index(a)];
  double v = 0.0;
  for (std::size_t j = 0; j < phi.size(); ++j) v += w[j] * phi[j];
  return v;
}

std::array<double, kNumActions> GBasisQ::q_all(double s) const {
  const auto phi = basis(*this, s);
  std::array<double, kNumActions> out{};
  for (int a = 0; a < kNumActions; ++a) {
    for (std::size_t j = 0; j < phi.size(); ++j) out[a] += weights[a][j] * phi[j];
  }
  return out;
}

FviResult fvi_train(std::span<const ScalarExperience> experiences, const FviConfig& cfg) {
  if (experiences.empty()) throw Error("fitted value iteration needs experiences");
  FviResult result;
  result.q = GBasisQ::make(cfg.centers, cfg.sigma);
  const auto J = static_cast<Eigen::Index>(cfg.centers.size());

  std::array<std::vector<std::size_t>, kNumActions> by_action;
  for (std::size_t i = 0; i < experiences.size(); ++i) {
    by_action[action_index(experiences[i].action)].push_back(i);
  }
  for (int a = 0; a < kNumActions; ++a) result.unseen[a] = by_action[a].empty();

  // Per-action normal equations do not change across iterations.
  std::array<Eigen::MatrixXd, kNumActions> Phi;
  std::array<Eigen::LDLT<Eigen::MatrixXd>, kNumActions> solver;
  for (int a = 0; a < kNumActions; ++a) {
    const auto& idx = by_action[a];
    if (idx.empty()) continue;
    Phi[a].resize(static_cast<Eigen::Index>(idx.size()), J);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto phi = basis(result.q, experiences[idx[i]].state);
      for (Eigen::Index j = 0; j < J; ++j) Phi[a](static_cast<Eigen::Index>(i), j) = phi[j];
    }
    Eigen::MatrixXd A = Phi[a].transpose() * Phi[a];
    A.diagonal().array() += cfg.ridge;
    solver[a].compute(A);
  }

  for (int it = 0; it < cfg.max_iterations; ++it) {
    std::vector<double> y(experiences.size());
    for (std::size_t i = 0; i < experiences.size(); ++i) {
      const auto& e = experiences[i];
      y[i] = e.reward;
      if (!e.terminal && cfg.gamma > 0.0) {
        const auto q = result.q.q_all(e.next_state);
        y[i] += cfg.gamma * *std::max_element(q.begin(), q.end());
      }
    }
    double change = 0.0;
    GBasisQ next = result.q;
    for (int a = 0; a < kNumActions; ++a) {
      const auto& idx = by_action[a];
      if (idx.empty()) continue;
      Eigen::VectorXd ya(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t i = 0; i < idx.size(); ++i) ya(static_cast<Eigen::Index>(i)) = y[idx[i]];
      const Eigen::VectorXd w = solver[a].solve(Phi[a].transpose() * ya);
      for (Eigen::Index j = 0; j < J; ++j) {
        change = std::max(change, std::abs(w(j) - next.weights[a][j]));
        next.weights[a][j] = w(j);
      }
    }
    double residual = 0.0;
    for (const auto& e : experiences) {
      const double d = next.q(e.state, e.action) - result.q.q(e.state, e.action);
      residual += d * d;
    }
    result.q = std::move(next);
    result.residuals.push_back(residual / static_cast<double>(experiences.size()));
    result.iterations = it + 1;
    if (change < cfg.tolerance) break;
  }
  return result;
}

Action handcrafted_action(const APRegressor& regressor, const GBasisQ& q,
                          std::span<const double> features) {
  const auto values = q.q_all(regressor.predict(features));
  int best = 0;
  for (int a = 1; a < kNumActions; ++a) {
    if (values[a] > values[best]) best = a;
  }
  return static_cast<Action>(best);
}

Action HandcraftedPolicy::choose(const FeatureVector& features) {
  return handcrafted_action(model_->regressor, model_->q, features.flatten());
}

std::optional<std::array<double, kNumActions>> HandcraftedPolicy::q_values(
    const FeatureVector& fv) const {
  return model_->q.q_all(model_->regressor.predict(fv.flatten()));
}

HandcraftedModel train_handcrafted(const Environment& env, const FeatureExtractor& features,
                                   const SimUser& user, std::span<const Query> queries,
                                   const HandcraftedTrainConfig& config, std::uint64_t seed) {
  if (queries.empty()) throw Error("training needs at least one query");
  std::mt19937_64 rng(seed);
  SimUser u = user;
  RandomPolicy explore(rng());

  std::vector<Episode> episodes;
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (const auto& q : queries) {
    for (int e = 0; e < config.episodes_per_query; ++e) {
      u.reseed(rng());
      Episode ep = run_episode(env, &features, explore, u, q, {.record_features = true});
      for (std::size_t k = 0; k < ep.experiences.size(); ++k) {
        xs.push_back(ep.experiences[k].state);
        ys.push_back(ep.steps[k].ap_before);
      }
      episodes.push_back(std::move(ep));
    }
  }
  HandcraftedModel model;
  model.regressor = fit_ap_regressor(xs, ys, config.ridge);

  std::vector<ScalarExperience> scalar;
  for (const auto& ep : episodes) {
    for (const auto& e : ep.experiences) {
      const double s = model.regressor.predict(e.state);
      const double s_next = e.terminal ? 0.0 : model.regressor.predict(e.next_state);
      scalar.push_back({s, e.action, e.reward, s_next, e.terminal});
    }
  }
  model.q = fvi_train(scalar, config.fvi).q;
  return model;
}

std::size_t oracle_sequence_count(int max_len) {
  std::size_t total = 0, power = 1;
  for (int k = 0; k < max_len; ++k) {
    total += power;
    power *= kNumActions - 1;
  }
  return total;
}

namespace {

struct OracleSearch {
  const Environment& env;
  int max_len;
  OracleResult result;
  std::vector<Action> path;
  bool first = true;

  void visit(const SessionState& state, const SimUser& user, double acc) {
    // Stop here.
    {
      SimUser u = user;
      const Payload p = env.propose(state, Action::ShowList);
      const StepResult end = env.transition(state, p, u.respond(state, p));
      const double ret = acc + end.reward;
      ++result.evaluated;
      if (first || ret > result.best_return) {
        result.best_return = ret;
        result.best_sequence = path;
        result.best_sequence.push_back(Action::ShowList);
        result.best_final_ap = end.next.quality.value_or(0.0);
      }
      result.worst_return = first ? ret : std::min(result.worst_return, ret);
      first = false;
    }
    if (static_cast<int>(path.size()) + 1 >= max_len) return;
    for (Action a : kAllActions) {
      if (a == Action::ShowList) continue;
      SimUser u = user;
      const Payload p = env.propose(state, a);
      const StepResult step = env.transition(state, p, u.respond(state, p));
      path.push_back(a);
      visit(step.next, u, acc + step.reward);
      path.pop_back();
    }
  }
};

}  // namespace

OracleResult oracle_search(const Environment& env, const SimUser& user, const Query& query,
                           int max_len, std::uint64_t seed) {
  if (max_len < 1) throw Error("max_len must be at least 1");
  if (env.config().reward.max_turns < max_len) {
    throw Error("environment turn cap (" + std::to_string(env.config().reward.max_turns) +
                ") is shorter than the oracle sequence length " + std::to_string(max_len));
  }
  SimUser u = user;
  u.reseed(seed);
  OracleSearch search{env, max_len, {}, {}};
  search.visit(env.start(query), u, 0.0);
  return search.result;
}

std::string oracle_report_line(const std::string& qid, const OracleResult& result) {
  std::vector<std::string> names;
  for (Action a : result.best_sequence) names.emplace_back(action_name(a));
  return nlohmann::ordered_json{{"qid", qid},
                        {"best_sequence", names},
                        {"return", result.best_return},
                        {"evaluated", result.evaluated}}
      .dump();
}

}  // namespace iir
