#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iir/environment.hpp"
#include "iir/features.hpp"

namespace iir {

class SimUser;

/// Feed-forward Q-function: affine -> ReLU per hidden layer, affine output
/// with one unit per action.
struct QNetwork {
  struct Layer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;
  };

  std::vector<Layer> layers;

  QNetwork() = default;
  /// Zero weights and biases; dims = [input, hidden..., outputs].
  explicit QNetwork(const std::vector<int>& dims);
  /// Uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static QNetwork glorot(const std::vector<int>& dims, std::mt19937_64& rng);
  static std::vector<int> shape(int input, int hidden_layers, int width);

  std::vector<int> layer_dims() const;
  int input_dim() const { return static_cast<int>(layers.front().W.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().W.rows()); }
  int hidden_layers() const { return static_cast<int>(layers.size()) - 1; }
  std::size_t parameter_count() const;

  Eigen::VectorXd forward(std::span<const double> features) const;
  /// Columns of `inputs` are samples.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;
};

struct TrainingBatch {
  Eigen::MatrixXd inputs;  // input_dim x B
  std::vector<int> actions;
  Eigen::VectorXd targets;
};

/// Mean over the batch of (target - Q(s, a))^2. When `gradient` is given it
/// receives dLoss/dParams in the network's own shape.
double loss_and_gradient(const QNetwork& net, const TrainingBatch& batch, QNetwork* gradient);

/// argmax with ties to the lowest index.
Action greedy_action(const Eigen::VectorXd& q);
Action select_action(const QNetwork& net, std::span<const double> features, double epsilon,
                     std::mt19937_64& rng);

/// Fixed-capacity FIFO ring of experiences with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void store(Experience e);
  /// B independent uniform draws with replacement.
  std::vector<const Experience*> sample(std::size_t B, std::mt19937_64& rng) const;
  std::vector<std::size_t> sample_indices(std::size_t B, std::mt19937_64& rng) const;

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  /// i-th item counted from the oldest.
  const Experience& at(std::size_t i) const;

 private:
  std::size_t capacity_;
  std::vector<Experience> items_;
  std::size_t head_ = 0;  // oldest item once full
};

double td_target(double reward, std::span<const double> next_features, const QNetwork& target,
                 double gamma, bool terminal);

TrainingBatch make_batch(std::span<const Experience* const> batch, const QNetwork& target,
                         double gamma);

/// One plain gradient-descent step on the squared TD error; returns the
/// loss before the update. Throws on a non-finite loss.
double train_step(QNetwork& net, const QNetwork& target, std::span<const Experience* const> batch,
                  double gamma, double learning_rate);

/// Bit-exact copy used as the frozen target network.
inline QNetwork sync_target(const QNetwork& net) { return net; }

/// Gradient-descent update rule applied to a computed gradient.
class Optimizer {
 public:
  enum class Kind { Sgd, Adam };

  Optimizer(Kind kind, double learning_rate);
  void apply(QNetwork& net, const QNetwork& gradient);
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  QNetwork m_, v_;
};

/// Per-dimension standardization fitted on observed states.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> scale;  // 1 / std, or 1 for constant dimensions

  static FeatureScaler identity(std::size_t dim);
  static FeatureScaler fit(const std::vector<std::vector<double>>& samples);
  std::vector<double> apply(std::span<const double> x) const;
};

struct TrainerConfig {
  double gamma = 0.9;
  double epsilon_start = 1.0;
  double epsilon_end = 0.1;
  long epsilon_decay_steps = 50000;
  std::size_t buffer_capacity = 10000;
  std::size_t batch_size = 32;
  long sync_period = 1000;
  double learning_rate = 1e-4;
  std::string optimizer = "sgd";
  long total_steps = 50000;
  long learning_starts = 500;
  long steps_per_epoch = 1000;
  int hidden_layers = 2;
  int hidden_width = 128;
  double reward_scale = 0.01;  // rewards are multiplied by this before learning
  int scaler_episodes = 200;   // random-policy episodes used to fit the input scaler
  int eval_episodes = 1;       // per evaluation query, per epoch

  double epsilon_at(long step) const;
};

struct DqnModel {
  QNetwork net;
  FeatureScaler scaler;
  FeatureConfig features;
  TrainerConfig config;
  long train_steps = 0;

  Eigen::VectorXd q_values(const FeatureVector& fv) const;
};

struct CurvePoint {
  int epoch = 0;
  double mean_return = 0.0;
  double mean_map = 0.0;
  double epsilon = 0.0;
};

struct TrainResult {
  DqnModel model;
  std::vector<CurvePoint> curve;
  std::vector<double> losses;  // mean loss per epoch
};

/// Interleaves epsilon-greedy episode generation with replayed gradient
/// steps; syncs the target every `sync_period` steps and evaluates the
/// greedy policy on `eval_queries` after each epoch.
TrainResult train_dqn(const Environment& env, const FeatureExtractor& features, const SimUser& user,
                      std::span<const Query> train_queries, std::span<const Query> eval_queries,
                      const TrainerConfig& config, std::uint64_t seed);

class DqnPolicy final : public Policy {
 public:
  explicit DqnPolicy(const DqnModel& model, double epsilon = 0.0, std::uint64_t seed = 0)
      : model_(&model), epsilon_(epsilon), rng_(seed) {}

  Action choose(const FeatureVector& features) override;
  std::optional<std::array<double, kNumActions>> q_values(const FeatureVector& fv) const override;

 private:
  const DqnModel* model_;
  double epsilon_;
  std::mt19937_64 rng_;
};

std::string checkpoint_to_json(const DqnModel& model);
DqnModel checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::string& path, const DqnModel& model);
DqnModel load_checkpoint(const std::string& path);

}  // namespace iir
