#include <doctest.h>

#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "../common/gradcheck.hpp"
#include "fixtures.hpp"
#include "iir/dqn.hpp"

using namespace iir;
using namespace iir::test;

namespace {

Experience exp_of(std::vector<double> s, Action a, double r, bool terminal = true,
                  std::vector<double> next = {}) {
  return {std::move(s), a, r, std::move(next), terminal};
}

QNetwork linear_unit() {
  QNetwork net({1, kNumActions});
  net.layers[0].W(0, 0) = 1.0;
  return net;
}

}  // namespace

TEST_CASE("forward pass hand cases") {
  const QNetwork zero({3, 4, kNumActions});
  const std::vector<double> x = {1.0, -2.0, 0.5};
  CHECK(zero.forward(x).isZero());

  QNetwork lin({2, kNumActions});
  lin.layers[0].W(0, 0) = 2.0;
  const std::vector<double> e0 = {1.0, 0.0};
  CHECK(lin.forward(e0)(0) == 2.0);

  QNetwork relu({1, 1, kNumActions});
  relu.layers[0].W(0, 0) = 1.0;
  relu.layers[0].b(0) = -4.0;  // pre-activation -3 for x = 1
  relu.layers[1].W.setConstant(5.0);
  relu.layers[1].b << 1, 2, 3, 4, 5;
  const std::vector<double> one = {1.0};
  CHECK(relu.forward(one) == Eigen::VectorXd{{1, 2, 3, 4, 5}});
  CHECK_THROWS_AS(relu.forward(x), Error);
}

TEST_CASE("network shapes") {
  std::mt19937_64 rng(1);
  for (int h : {0, 2, 4}) {
    const auto net = QNetwork::glorot(QNetwork::shape(10, h, 16), rng);
    CHECK(net.hidden_layers() == h);
    CHECK(net.output_dim() == kNumActions);
    CHECK(net.input_dim() == 10);
    const double bound = std::sqrt(6.0 / (10 + (h ? 16 : kNumActions)));
    CHECK(net.layers[0].W.cwiseAbs().maxCoeff() <= bound);
    CHECK(net.layers[0].b.isZero());
  }
  CHECK(QNetwork::shape(8, 2, 1024) == std::vector<int>{8, 1024, 1024, kNumActions});
}

TEST_CASE("greedy and epsilon-greedy selection") {
  CHECK(greedy_action(Eigen::VectorXd{{1, 5, 2, 0, 0}}) == Action::ReturnKeyTerm);
  CHECK(greedy_action(Eigen::VectorXd::Constant(5, 3.0)) == Action::ReturnDocuments);

  QNetwork net({1, kNumActions});
  net.layers[0].b << 0, 0, 0, 9, 0;
  std::mt19937_64 rng(3);
  const std::vector<double> x = {0.0};
  CHECK(select_action(net, x, 0.0, rng) == Action::ReturnTopic);
  std::array<int, kNumActions> counts{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[action_index(select_action(net, x, 1.0, rng))];
  const double p = 1.0 / kNumActions, sigma = std::sqrt(n * p * (1 - p));
  for (int c : counts) CHECK(std::abs(c - n * p) <= 3 * sigma);
  CHECK_THROWS_AS(select_action(net, x, 1.5, rng), Error);
}

TEST_CASE("argmax is invariant to positive scaling") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd q(5);
    for (int a = 0; a < 5; ++a) q(a) = u(rng);
    CHECK(greedy_action(q) == greedy_action(q * 0.37));
    CHECK(greedy_action(q) == greedy_action(q * 250.0));
  }
}

TEST_CASE("replay buffer FIFO and sampling") {
  ReplayBuffer buf(2);
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(buf.sample(1, rng), Error);
  buf.store(exp_of({1}, Action::ShowList, 1));
  CHECK(buf.size() == 1);
  for (const auto* e : buf.sample(4, rng)) CHECK(e->reward == 1);
  buf.store(exp_of({2}, Action::ShowList, 2));
  buf.store(exp_of({3}, Action::ShowList, 3));
  CHECK(buf.size() == 2);
  CHECK(buf.at(0).reward == 2);
  CHECK(buf.at(1).reward == 3);
  for (const auto* e : buf.sample(50, rng)) CHECK(e->reward >= 2);
  CHECK_THROWS_AS(ReplayBuffer(0), Error);

  ReplayBuffer big(1000);
  for (int i = 0; i < 1000; ++i) big.store(exp_of({double(i)}, Action::ShowList, i));
  std::mt19937_64 a(5), b(5);
  CHECK(big.sample_indices(64, a) == big.sample_indices(64, b));
  std::vector<int> hits(1000, 0);
  std::mt19937_64 r(11);
  const int draws = 100000;
  for (auto i : big.sample_indices(draws, r)) ++hits[i];
  const double p = 1.0 / 1000, mu = draws * p, sigma = std::sqrt(draws * p * (1 - p));
  for (int h : hits) CHECK(std::abs(h - mu) <= 4.5 * sigma);
}

TEST_CASE("TD targets") {
  QNetwork target({1, kNumActions});
  target.layers[0].b << 0, 2, 1, -1, 0;
  const std::vector<double> s = {0.0};
  CHECK(td_target(-10, {}, target, 0.9, true) == -10);
  CHECK(td_target(1, s, target, 0.9, false) == doctest::Approx(2.8));
  CHECK(td_target(1, s, target, 0.0, false) == 1);
  CHECK(td_target(2, s, target, 0.9, false) - td_target(1, s, target, 0.9, false) == doctest::Approx(1.0));
  CHECK_THROWS_AS(td_target(1, s, target, 1.5, false), Error);
}

TEST_CASE("hand gradient step on a linear unit") {
  QNetwork net = linear_unit();
  const QNetwork target = net;
  const auto e = exp_of({1.0}, Action::ReturnDocuments, 3.0);
  const Experience* batch[] = {&e};
  CHECK(train_step(net, target, batch, 0.9, 0.1) == doctest::Approx(4.0));
  CHECK(net.layers[0].W(0, 0) == doctest::Approx(1.4));
  CHECK(net.layers[0].b(0) == doctest::Approx(0.4));
  // Untaken actions receive no gradient.
  CHECK(net.layers[0].W.row(1).isZero());

  QNetwork exact = linear_unit();
  const auto fit = exp_of({1.0}, Action::ReturnDocuments, 1.0);
  const Experience* b2[] = {&fit};
  const QNetwork before = exact;
  CHECK(train_step(exact, target, b2, 0.9, 0.1) == 0.0);
  CHECK(exact.layers[0].W == before.layers[0].W);
}

TEST_CASE("analytic gradients match finite differences") {
  std::mt19937_64 rng(21);
  for (int h : {0, 2, 4}) {
    for (int trial = 0; trial < 3; ++trial) {
      const auto net = QNetwork::glorot(QNetwork::shape(6, h, 8), rng);
      const auto batch = random_batch(6, 4, rng);
      CHECK(max_gradient_error(net, batch) < 1e-4);
    }
  }
}

TEST_CASE("least-squares descent is monotone") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Experience> data;
  for (int i = 0; i < 30; ++i) {
    const double x = u(rng);
    data.push_back(exp_of({x, 1.0}, Action::ReturnKeyTerm, 2.0 * x - 0.5 + 0.1 * u(rng)));
  }
  std::vector<const Experience*> batch;
  for (const auto& e : data) batch.push_back(&e);
  QNetwork net({2, kNumActions});
  const QNetwork target = net;
  double prev = train_step(net, target, batch, 0.0, 0.05);
  for (int i = 0; i < 300; ++i) {
    const double loss = train_step(net, target, batch, 0.0, 0.05);
    CHECK(loss <= prev + 1e-12);
    prev = loss;
  }
  CHECK(net.layers[0].W(1, 0) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("target network contract") {
  std::mt19937_64 rng(4);
  QNetwork net = QNetwork::glorot(QNetwork::shape(3, 2, 8), rng);
  QNetwork target = sync_target(net);
  const std::vector<double> x = {0.3, -0.2, 0.9};
  CHECK((net.forward(x).array() == target.forward(x).array()).all());
  const Eigen::VectorXd frozen = target.forward(x);
  std::vector<Experience> data;
  for (int i = 0; i < 8; ++i) data.push_back(exp_of({0.1 * i, 0.2, -0.1}, Action::ReturnTopic, 1.0, false, {0.0, 0.1, 0.2}));
  std::vector<const Experience*> batch;
  for (const auto& e : data) batch.push_back(&e);
  for (int i = 0; i < 10; ++i) train_step(net, target, batch, 0.9, 0.01);
  CHECK((target.forward(x).array() == frozen.array()).all());
  CHECK_FALSE((net.forward(x).array() == frozen.array()).all());
  target = sync_target(net);
  const QNetwork again = sync_target(net);
  CHECK((target.forward(x).array() == net.forward(x).array()).all());
  CHECK((again.forward(x).array() == target.forward(x).array()).all());
}

TEST_CASE("optimizers and scaler") {
  QNetwork net = linear_unit(), grad({1, kNumActions});
  grad.layers[0].W(0, 0) = 2.0;
  Optimizer sgd(Optimizer::Kind::Sgd, 0.5);
  sgd.apply(net, grad);
  CHECK(net.layers[0].W(0, 0) == 0.0);
  QNetwork n2 = linear_unit();
  Optimizer adam(Optimizer::Kind::Adam, 0.01);
  adam.apply(n2, grad);
  CHECK(n2.layers[0].W(0, 0) == doctest::Approx(0.99).epsilon(1e-6));
  CHECK_THROWS_AS(Optimizer(Optimizer::Kind::Sgd, 0.0), Error);

  const auto sc = FeatureScaler::fit({{1.0, 5.0}, {3.0, 5.0}});
  const auto y = sc.apply(std::vector<double>{3.0, 5.0});
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == 0.0);
  CHECK(FeatureScaler::identity(2).apply(std::vector<double>{4, 2}) == std::vector<double>{4, 2});

  TrainerConfig cfg;
  cfg.epsilon_decay_steps = 100;
  CHECK(cfg.epsilon_at(0) == 1.0);
  CHECK(cfg.epsilon_at(50) == doctest::Approx(0.55));
  CHECK(cfg.epsilon_at(1000) == doctest::Approx(0.1));
}

TEST_CASE("training loop contracts and checkpoints") {
  const Experiment exp(small_config());
  const auto fx = exp.extractor(exp.config().features);
  auto cfg = exp.config().trainer;

  SUBCASE("zero steps returns the initial network") {
    cfg.total_steps = 0;
    const auto r = train_dqn(exp.env(), fx, exp.user(), exp.queries(), exp.queries(), cfg, 5);
    CHECK(r.curve.empty());
    CHECK(r.model.train_steps == 0);
    std::mt19937_64 rng(5);
    const auto init = QNetwork::glorot(QNetwork::shape(static_cast<int>(fx.dimension()), cfg.hidden_layers, cfg.hidden_width), rng);
    CHECK(r.model.net.layers[0].W == init.layers[0].W);
  }
  SUBCASE("fixed seed gives identical curves") {
    const auto a = train_dqn(exp.env(), fx, exp.user(), exp.queries(), exp.queries(), cfg, 9);
    const auto b = train_dqn(exp.env(), fx, exp.user(), exp.queries(), exp.queries(), cfg, 9);
    REQUIRE(a.curve.size() == 2);
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
      CHECK(a.curve[i].mean_return == b.curve[i].mean_return);
      CHECK(a.curve[i].epsilon == b.curve[i].epsilon);
    }
    CHECK(a.model.net.layers.back().W == b.model.net.layers.back().W);

    const auto back = checkpoint_from_json(checkpoint_to_json(a.model));
    CHECK(back.net.layer_dims() == a.model.net.layer_dims());
    for (std::size_t l = 0; l < back.net.layers.size(); ++l) {
      CHECK(back.net.layers[l].W == a.model.net.layers[l].W);
      CHECK(back.net.layers[l].b == a.model.net.layers[l].b);
    }
    CHECK(back.scaler.mean == a.model.scaler.mean);
    CHECK(back.train_steps == a.model.train_steps);
    CHECK(back.features.N == a.model.features.N);

    const auto dir = scratch_dir("dqn");
    save_checkpoint((dir / "m.json").string(), a.model);
    const auto json = nlohmann::json::parse(read_text(dir / "m.json"));
    for (const char* key : {"layer_dims", "activation", "weights", "biases", "config", "train_steps"}) {
      CHECK(json.contains(key));
    }
    CHECK(json["activation"] == "relu");
    CHECK(load_checkpoint((dir / "m.json").string()).net.layer_dims() == a.model.net.layer_dims());
  }
  SUBCASE("bad inputs") {
    CHECK_THROWS_AS(checkpoint_from_json("{\"layer_dims\": [2, 5], \"activation\": \"tanh\"}"), Error);
    cfg.gamma = 2.0;
    CHECK_THROWS_AS(train_dqn(exp.env(), fx, exp.user(), exp.queries(), {}, cfg, 1), Error);
  }
}
