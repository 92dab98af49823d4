#include "iir/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "iir/evaluation.hpp"
#include "iir/user_sim.hpp"

namespace iir {

namespace {

using json = nlohmann::json;

Eigen::VectorXd to_vector(std::span<const double> x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

}  // namespace

QNetwork::QNetwork(const std::vector<int>& dims) {
  if (dims.size() < 2) throw Error("a Q-network needs at least input and output dimensions");
  for (int d : dims) {
    if (d < 1) throw Error("layer dimensions must be positive");
  }
  for (std::size_t l = 1; l < dims.size(); ++l) {
    layers.push_back({Eigen::MatrixXd::Zero(dims[l], dims[l - 1]), Eigen::VectorXd::Zero(dims[l])});
  }
}

QNetwork QNetwork::glorot(const std::vector<int>& dims, std::mt19937_64& rng) {
  QNetwork net(dims);
  for (auto& layer : net.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.W.rows() + layer.W.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < layer.W.size(); ++i) layer.W.data()[i] = u(rng);
  }
  return net;
}

std::vector<int> QNetwork::shape(int input, int hidden_layers, int width) {
  std::vector<int> dims{input};
  for (int i = 0; i < hidden_layers; ++i) dims.push_back(width);
  dims.push_back(kNumActions);
  return dims;
}

std::vector<int> QNetwork::layer_dims() const {
  std::vector<int> dims;
  if (layers.empty()) return dims;
  dims.push_back(static_cast<int>(layers.front().W.cols()));
  for (const auto& l : layers) dims.push_back(static_cast<int>(l.W.rows()));
  return dims;
}

std::size_t QNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.W.size() + l.b.size());
  return n;
}

Eigen::VectorXd QNetwork::forward(std::span<const double> features) const {
  if (layers.empty()) throw Error("empty Q-network");
  if (static_cast<int>(features.size()) != input_dim()) {
    throw Error("feature dimension " + std::to_string(features.size()) +
                " does not match network input " + std::to_string(input_dim()));
  }
  Eigen::VectorXd a = to_vector(features);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::VectorXd z = layers[l].W * a + layers[l].b;
    a = (l + 1 < layers.size()) ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

Eigen::MatrixXd QNetwork::forward_batch(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_dim()) throw Error("batch dimension does not match network input");
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].W * a;
    z.colwise() += layers[l].b;
    a = (l + 1 < layers.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

double loss_and_gradient(const QNetwork& net, const TrainingBatch& batch, QNetwork* gradient) {
  const auto B = batch.inputs.cols();
  if (B == 0) throw Error("empty training batch");
  if (static_cast<std::size_t>(B) != batch.actions.size() || B != batch.targets.size()) {
    throw Error("inconsistent training batch");
  }
  if (batch.inputs.rows() != net.input_dim()) throw Error("batch dimension does not match network");

  // Keep every layer's activation for backpropagation.
  std::vector<Eigen::MatrixXd> acts{batch.inputs};
  acts.reserve(net.layers.size() + 1);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Eigen::MatrixXd z = net.layers[l].W * acts.back();
    z.colwise() += net.layers[l].b;
    if (l + 1 < net.layers.size()) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }
  const Eigen::MatrixXd& q = acts.back();

  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), B);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    const int a = batch.actions[static_cast<std::size_t>(i)];
    if (a < 0 || a >= q.rows()) throw Error("action index out of range");
    const double err = batch.targets(i) - q(a, i);
    loss += err * err;
    delta(a, i) = -2.0 * err / static_cast<double>(B);
  }
  loss /= static_cast<double>(B);
  if (!gradient) return loss;

  *gradient = QNetwork(net.layer_dims());
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    gradient->layers[l].W = delta * acts[l].transpose();
    gradient->layers[l].b = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = net.layers[l].W.transpose() * delta;
      // ReLU derivative: activations are positive exactly where z > 0.
      delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss;
}

Action greedy_action(const Eigen::VectorXd& q) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i) {
    if (q(i) > q(best)) best = i;
  }
  return static_cast<Action>(best);
}

Action select_action(const QNetwork& net, std::span<const double> features, double epsilon,
                     std::mt19937_64& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error("epsilon must lie in [0, 1]");
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
      std::uniform_int_distribution<int> pick(0, kNumActions - 1);
      return static_cast<Action>(pick(rng));
    }
  }
  return greedy_action(net.forward(features));
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error("replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::store(Experience e) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(e));
  } else {
    items_[head_] = std::move(e);
    head_ = (head_ + 1) % capacity_;
  }
}

const Experience& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw Error("replay index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t B, std::mt19937_64& rng) const {
  if (items_.empty()) throw Error("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> out(B);
  for (auto& i : out) i = pick(rng);
  return out;
}

std::vector<const Experience*> ReplayBuffer::sample(std::size_t B, std::mt19937_64& rng) const {
  std::vector<const Experience*> out;
  out.reserve(B);
  for (std::size_t i : sample_indices(B, rng)) out.push_back(&items_[i]);
  return out;
}

double td_target(double reward, std::span<const double> next_features, const QNetwork& target,
                 double gamma, bool terminal) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error("gamma must lie in [0, 1]");
  if (terminal || gamma == 0.0) return reward;
  return reward + gamma * target.forward(next_features).maxCoeff();
}

TrainingBatch make_batch(std::span<const Experience* const> batch, const QNetwork& target,
                         double gamma) {
  if (batch.empty()) throw Error("empty training batch");
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto dim = static_cast<Eigen::Index>(batch.front()->state.size());
  TrainingBatch out;
  out.inputs.resize(dim, B);
  out.targets.resize(B);
  out.actions.resize(batch.size());

  std::vector<Eigen::Index> live;
  for (Eigen::Index i = 0; i < B; ++i) {
    const Experience& e = *batch[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(e.state.size()) != dim) throw Error("ragged experience batch");
    out.inputs.col(i) = to_vector(e.state);
    out.actions[static_cast<std::size_t>(i)] = action_index(e.action);
    out.targets(i) = e.reward;
    if (!e.terminal && gamma > 0.0) live.push_back(i);
  }
  if (!live.empty()) {
    Eigen::MatrixXd next(dim, static_cast<Eigen::Index>(live.size()));
    for (std::size_t j = 0; j < live.size(); ++j) {
      next.col(static_cast<Eigen::Index>(j)) =
          to_vector(batch[static_cast<std::size_t>(live[j])]->next_state);
    }
    const Eigen::MatrixXd q_next = target.forward_batch(next);
    for (std::size_t j = 0; j < live.size(); ++j) {
      out.targets(live[j]) += gamma * q_next.col(static_cast<Eigen::Index>(j)).maxCoeff();
    }
  }
  return out;
}

double train_step(QNetwork& net, const QNetwork& target, std::span<const Experience* const> batch,
                  double gamma, double learning_rate) {
  Optimizer sgd(Optimizer::Kind::Sgd, learning_rate);
  const TrainingBatch tb = make_batch(batch, target, gamma);
  QNetwork grad;
  const double loss = loss_and_gradient(net, tb, &grad);
  if (!std::isfinite(loss)) throw Error("training diverged (non-finite loss)");
  sgd.apply(net, grad);
  return loss;
}

Optimizer::Optimizer(Kind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
}

void Optimizer::apply(QNetwork& net, const QNetwork& gradient) {
  if (kind_ == Kind::Sgd) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      net.layers[l].W -= lr_ * gradient.layers[l].W;
      net.layers[l].b -= lr_ * gradient.layers[l].b;
    }
    return;
  }
  if (m_.layers.empty()) {
    m_ = QNetwork(net.layer_dims());
    v_ = QNetwork(net.layer_dims());
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    update(net.layers[l].W, m_.layers[l].W, v_.layers[l].W, gradient.layers[l].W);
    update(net.layers[l].b, m_.layers[l].b, v_.layers[l].b, gradient.layers[l].b);
  }
}

FeatureScaler FeatureScaler::identity(std::size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

FeatureScaler FeatureScaler::fit(const std::vector<std::vector<double>>& samples) {
  if (samples.empty()) throw Error("cannot fit a scaler without samples");
  const std::size_t dim = samples.front().size();
  FeatureScaler s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
  const double n = static_cast<double>(samples.size());
  for (const auto& x : samples) {
    for (std::size_t i = 0; i < dim; ++i) s.mean[i] += x[i] / n;
  }
  for (std::size_t i = 0; i < dim; ++i) {
    double var = 0.0;
    for (const auto& x : samples) var += (x[i] - s.mean[i]) * (x[i] - s.mean[i]) / n;
    const double sd = std::sqrt(var);
    s.scale[i] = sd > 1e-9 ? 1.0 / sd : 1.0;
  }
  return s;
}

std::vector<double> FeatureScaler::apply(std::span<const double> x) const {
  if (x.size() != mean.size()) throw Error("scaler dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) * scale[i];
  return out;
}

double TrainerConfig::epsilon_at(long step) const {
  if (epsilon_decay_steps <= 0 || step >= epsilon_decay_steps) return epsilon_end;
  const double frac = static_cast<double>(step) / static_cast<double>(epsilon_decay_steps);
  return epsilon_start + frac * (epsilon_end - epsilon_start);
}

Eigen::VectorXd DqnModel::q_values(const FeatureVector& fv) const {
  const auto x = scaler.apply(fv.flatten());
  return net.forward(x);
}

Action DqnPolicy::choose(const FeatureVector& features) {
  const auto x = model_->scaler.apply(features.flatten());
  return select_action(model_->net, x, epsilon_, rng_);
}

std::optional<std::array<double, kNumActions>> DqnPolicy::q_values(const FeatureVector& fv) const {
  const Eigen::VectorXd q = model_->q_values(fv);
  std::array<double, kNumActions> out{};
  for (int i = 0; i < kNumActions; ++i) out[i] = q(i);
  return out;
}

namespace {

class UniformPolicy final : public Policy {
 public:
  explicit UniformPolicy(std::mt19937_64& rng) : rng_(&rng) {}
  Action choose(const FeatureVector&) override {
    std::uniform_int_distribution<int> pick(0, kNumActions - 1);
    return static_cast<Action>(pick(*rng_));
  }
  bool needs_features() const override { return false; }

 private:
  std::mt19937_64* rng_;
};

}  // namespace

TrainResult train_dqn(const Environment& env, const FeatureExtractor& features, const SimUser& user,
                      std::span<const Query> train_queries, std::span<const Query> eval_queries,
                      const TrainerConfig& cfg, std::uint64_t seed) {
  if (train_queries.empty()) throw Error("training needs at least one query");
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) throw Error("gamma must lie in [0, 1]");
  if (cfg.batch_size == 0) throw Error("batch size must be positive");
  if (cfg.sync_period < 1 || cfg.steps_per_epoch < 1) throw Error("periods must be positive");
  std::mt19937_64 rng(seed);
  const int dim = static_cast<int>(features.dimension());

  TrainResult result;
  DqnModel& model = result.model;
  model.features = features.config();
  model.config = cfg;
  model.net = QNetwork::glorot(QNetwork::shape(dim, cfg.hidden_layers, cfg.hidden_width), rng);
  model.scaler = FeatureScaler::identity(static_cast<std::size_t>(dim));
  if (cfg.total_steps <= 0) return result;

  SimUser u = user;
  std::uniform_int_distribution<std::size_t> pick_query(0, train_queries.size() - 1);

  // Input standardization from states visited by a uniform policy.
  if (cfg.scaler_episodes > 0) {
    std::vector<std::vector<double>> samples;
    UniformPolicy explore(rng);
    for (int e = 0; e < cfg.scaler_episodes; ++e) {
      u.reseed(rng());
      const Episode ep = run_episode(env, &features, explore, u, train_queries[pick_query(rng)],
                                     {.record_features = true});
      for (const auto& x : ep.experiences) samples.push_back(x.state);
    }
    model.scaler = FeatureScaler::fit(samples);
  }

  QNetwork target = sync_target(model.net);
  Optimizer opt(cfg.optimizer == "adam" ? Optimizer::Kind::Adam : Optimizer::Kind::Sgd,
                cfg.learning_rate);
  if (cfg.optimizer != "adam" && cfg.optimizer != "sgd") {
    throw Error("unknown optimizer '" + cfg.optimizer + "'");
  }
  ReplayBuffer buffer(cfg.buffer_capacity);
  double epoch_loss = 0.0;
  long epoch_updates = 0;

  long step = 0;
  while (step < cfg.total_steps) {
    u.reseed(rng());
    SessionState state = env.start(train_queries[pick_query(rng)]);
    std::vector<double> x = model.scaler.apply(features.extract(state.situation()).flatten());
    while (!state.terminal && step < cfg.total_steps) {
      const double eps = cfg.epsilon_at(step);
      const Action chosen = select_action(model.net, x, eps, rng);
      const Payload payload = env.propose(state, chosen);
      const UserResponse response = u.respond(state, payload);
      StepResult res = env.transition(state, payload, response);
      std::vector<double> x_next;
      if (!res.terminal) x_next = model.scaler.apply(features.extract(res.next.situation()).flatten());
      buffer.store({x, payload.action, res.reward * cfg.reward_scale, x_next, res.terminal});
      state = std::move(res.next);
      x = std::move(x_next);
      ++step;

      if (static_cast<long>(buffer.size()) >= std::max<long>(cfg.learning_starts, 1)) {
        const auto batch = buffer.sample(cfg.batch_size, rng);
        const TrainingBatch tb = make_batch(batch, target, cfg.gamma);
        QNetwork grad;
        const double loss = loss_and_gradient(model.net, tb, &grad);
        if (!std::isfinite(loss)) throw Error("training diverged (non-finite loss)");
        opt.apply(model.net, grad);
        epoch_loss += loss;
        ++epoch_updates;
        ++model.train_steps;
      }
      if (step % cfg.sync_period == 0) target = sync_target(model.net);
      if (step % cfg.steps_per_epoch == 0) {
        CurvePoint pt;
        pt.epoch = static_cast<int>(step / cfg.steps_per_epoch);
        pt.epsilon = cfg.epsilon_at(step);
        if (!eval_queries.empty()) {
          DqnPolicy greedy(model);
          const auto summary = evaluate_policy(env, &features, greedy, user, eval_queries,
                                               std::max(cfg.eval_episodes, 1), seed + 7919);
          pt.mean_return = summary.mean_return;
          pt.mean_map = summary.mean_ap;
        }
        result.curve.push_back(pt);
        result.losses.push_back(epoch_updates ? epoch_loss / epoch_updates : 0.0);
        epoch_loss = 0.0;
        epoch_updates = 0;
      }
    }
  }
  return result;
}

std::string checkpoint_to_json(const DqnModel& model) {
  json weights = json::array();
  json biases = json::array();
  for (const auto& l : model.net.layers) {
    std::vector<double> flat(static_cast<std::size_t>(l.W.size()));
    for (Eigen::Index r = 0; r < l.W.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) {
        flat[static_cast<std::size_t>(r * l.W.cols() + c)] = l.W(r, c);
      }
    }
    weights.push_back(flat);
    biases.push_back(std::vector<double>(l.b.data(), l.b.data() + l.b.size()));
  }
  const auto& c = model.config;
  json config{{"gamma", c.gamma},
              {"epsilon_start", c.epsilon_start},
              {"epsilon_end", c.epsilon_end},
              {"epsilon_decay_steps", c.epsilon_decay_steps},
              {"buffer_capacity", c.buffer_capacity},
              {"batch_size", c.batch_size},
              {"sync_period", c.sync_period},
              {"learning_rate", c.learning_rate},
              {"optimizer", c.optimizer},
              {"total_steps", c.total_steps},
              {"learning_starts", c.learning_starts},
              {"steps_per_epoch", c.steps_per_epoch},
              {"hidden_layers", c.hidden_layers},
              {"hidden_width", c.hidden_width},
              {"reward_scale", c.reward_scale},
              {"scaler_episodes", c.scaler_episodes},
              {"eval_episodes", c.eval_episodes},
              {"features",
               {{"N", model.features.N},
                {"handcrafted", model.features.handcrafted},
                {"clarity_docs", model.features.clarity_docs},
                {"ambiguity_docs", model.features.ambiguity_docs},
                {"wig_docs", model.features.wig_docs},
                {"feedback_docs", model.features.feedback_docs},
                {"overlap_depth", model.features.overlap_depth}}},
              {"input_mean", model.scaler.mean},
              {"input_scale", model.scaler.scale}};
  return json{{"layer_dims", model.net.layer_dims()},
              {"activation", "relu"},
              {"weights", weights},
              {"biases", biases},
              {"config", config},
              {"train_steps", model.train_steps}}
      .dump();
}

DqnModel checkpoint_from_json(const std::string& text) {
  DqnModel model;
  try {
    const json obj = json::parse(text);
    if (obj.at("activation").get<std::string>() != "relu") {
      throw Error("unsupported activation in checkpoint");
    }
    const auto dims = obj.at("layer_dims").get<std::vector<int>>();
    model.net = QNetwork(dims);
    const auto& weights = obj.at("weights");
    const auto& biases = obj.at("biases");
    if (weights.size() != model.net.layers.size() || biases.size() != model.net.layers.size()) {
      throw Error("checkpoint layer count does not match layer_dims");
    }
    for (std::size_t l = 0; l < model.net.layers.size(); ++l) {
      auto& layer = model.net.layers[l];
      const auto flat = weights[l].get<std::vector<double>>();
      const auto b = biases[l].get<std::vector<double>>();
      if (flat.size() != static_cast<std::size_t>(layer.W.size()) ||
          b.size() != static_cast<std::size_t>(layer.b.size())) {
        throw Error("checkpoint layer " + std::to_string(l) + " has the wrong size");
      }
      for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.W.cols(); ++c) {
          layer.W(r, c) = flat[static_cast<std::size_t>(r * layer.W.cols() + c)];
        }
      }
      for (std::size_t i = 0; i < b.size(); ++i) layer.b(static_cast<Eigen::Index>(i)) = b[i];
    }
    const auto& c = obj.at("config");
    auto& t = model.config;
    t.gamma = c.value("gamma", t.gamma);
    t.epsilon_start = c.value("epsilon_start", t.epsilon_start);
    t.epsilon_end = c.value("epsilon_end", t.epsilon_end);
    t.epsilon_decay_steps = c.value("epsilon_decay_steps", t.epsilon_decay_steps);
    t.buffer_capacity = c.value("buffer_capacity", t.buffer_capacity);
    t.batch_size = c.value("batch_size", t.batch_size);
    t.sync_period = c.value("sync_period", t.sync_period);
    t.learning_rate = c.value("learning_rate", t.learning_rate);
    t.optimizer = c.value("optimizer", t.optimizer);
    t.total_steps = c.value("total_steps", t.total_steps);
    t.learning_starts = c.value("learning_starts", t.learning_starts);
    t.steps_per_epoch = c.value("steps_per_epoch", t.steps_per_epoch);
    t.hidden_layers = c.value("hidden_layers", t.hidden_layers);
    t.hidden_width = c.value("hidden_width", t.hidden_width);
    t.reward_scale = c.value("reward_scale", t.reward_scale);
    t.scaler_episodes = c.value("scaler_episodes", t.scaler_episodes);
    t.eval_episodes = c.value("eval_episodes", t.eval_episodes);
    if (c.contains("features")) {
      const auto& f = c["features"];
      auto& fc = model.features;
      fc.N = f.value("N", fc.N);
      fc.handcrafted = f.value("handcrafted", fc.handcrafted);
      fc.clarity_docs = f.value("clarity_docs", fc.clarity_docs);
      fc.ambiguity_docs = f.value("ambiguity_docs", fc.ambiguity_docs);
      fc.wig_docs = f.value("wig_docs", fc.wig_docs);
      fc.feedback_docs = f.value("feedback_docs", fc.feedback_docs);
      fc.overlap_depth = f.value("overlap_depth", fc.overlap_depth);
    }
    const auto in = static_cast<std::size_t>(model.net.input_dim());
    model.scaler = FeatureScaler::identity(in);
    if (c.contains("input_mean")) model.scaler.mean = c["input_mean"].get<std::vector<double>>();
    if (c.contains("input_scale")) model.scaler.scale = c["input_scale"].get<std::vector<double>>();
    if (model.scaler.mean.size() != in || model.scaler.scale.size() != in) {
      throw Error("checkpoint scaler does not match the input dimension");
    }
    model.train_steps = obj.value("train_steps", 0L);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed checkpoint: ") + e.what());
  }
  return model;
}

void save_checkpoint(const std::string& path, const DqnModel& model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << checkpoint_to_json(model) << '\n';
}

DqnModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace iir
