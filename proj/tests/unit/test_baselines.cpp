#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "iir/baselines.hpp"
#include "iir/evaluation.hpp"

using namespace iir;
using namespace iir::test;

TEST_CASE("random policy is uniform and reproducible") {
  std::mt19937_64 rng(7);
  std::array<int, kNumActions> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const int a = action_index(random_action(rng));
    REQUIRE(a >= 0);
    REQUIRE(a < kNumActions);
    ++counts[a];
  }
  for (int c : counts) CHECK(std::abs(c / double(n) - 0.2) <= 0.005);
  RandomPolicy p(3), q(3);
  for (int i = 0; i < 50; ++i) CHECK(p.choose({}) == q.choose({}));
}

TEST_CASE("AP regression") {
  SUBCASE("constant targets") {
    const std::vector<std::vector<double>> x = {{1, 2}, {3, 1}, {0, 5}};
    const std::vector<double> y = {0.7, 0.7, 0.7};
    const auto r = fit_ap_regressor(x, y, 0.0);
    for (const auto& row : x) CHECK(r.predict(row) == doctest::Approx(0.7));
    CHECK(r.predict(std::vector<double>{100, -40}) == doctest::Approx(0.7));
  }
  SUBCASE("two points interpolate exactly") {
    const std::vector<std::vector<double>> x = {{1}, {3}};
    const std::vector<double> y = {0.2, 0.6};
    const auto r = fit_ap_regressor(x, y, 0.0);
    CHECK(r.weights[0] == doctest::Approx(0.2));
    CHECK(r.bias == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.predict(std::vector<double>{2}) == doctest::Approx(0.4));
    CHECK(r.predict(std::vector<double>{10}) == 1.0);
    CHECK(r.predict(std::vector<double>{-10}) == 0.0);
  }
  SUBCASE("huge ridge tends to the mean") {
    const std::vector<std::vector<double>> x = {{1}, {2}, {4}};
    const std::vector<double> y = {0.1, 0.3, 0.8};
    const auto r = fit_ap_regressor(x, y, 1e12);
    CHECK(std::abs(r.weights[0]) < 1e-9);
    CHECK(r.predict(std::vector<double>{7}) == doctest::Approx(0.4).epsilon(1e-6));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(fit_ap_regressor({{1}}, std::vector<double>{0.1}, 0.0), Error);
    const auto r = fit_ap_regressor({{1}, {2}}, std::vector<double>{0.1, 0.2}, 0.0);
    CHECK_THROWS_AS(r.predict(std::vector<double>{1, 2}), Error);
  }
}

TEST_CASE("fitted value iteration") {
  FviConfig cfg;
  SUBCASE("zero rewards give the zero fixed point") {
    std::vector<ScalarExperience> xs;
    for (int i = 0; i < 20; ++i) xs.push_back({i / 20.0, kAllActions[i % 5], 0.0, (i + 1) / 20.0, i % 3 == 0});
    const auto r = fvi_train(xs, cfg);
    for (double s : {0.0, 0.3, 1.0}) {
      for (double q : r.q.q_all(s)) CHECK(q == doctest::Approx(0.0));
    }
  }
  SUBCASE("one basis, one terminal experience") {
    cfg.centers = {0.5};
    std::vector<ScalarExperience> xs = {{0.5, Action::ShowList, 7.0, 0.0, true}};
    for (double ridge : {1e-9, 1.0}) {
      cfg.ridge = ridge;
      const auto r = fvi_train(xs, cfg);
      CHECK(r.q.q(0.5, Action::ShowList) == doctest::Approx(7.0 / (1.0 + ridge)).epsilon(1e-9));
      CHECK(r.unseen[action_index(Action::ReturnTopic)]);
      CHECK_FALSE(r.unseen[action_index(Action::ShowList)]);
      CHECK(r.q.q(0.5, Action::ReturnTopic) == 0.0);
    }
  }
  SUBCASE("residual settles on a random experience set") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<ScalarExperience> xs;
    for (int i = 0; i < 100; ++i) {
      const double s = u(rng);
      const bool term = u(rng) < 0.3;
      xs.push_back({s, random_action(rng), 10.0 * (u(rng) - s), term ? 0.0 : u(rng), term});
    }
    const auto r = fvi_train(xs, cfg);
    REQUIRE(r.residuals.size() >= 3);
    const auto n = r.residuals.size();
    CHECK(r.residuals[n - 1] <= r.residuals[n - 2] + 1e-9);
    CHECK(r.residuals[n - 2] <= r.residuals[n - 3] + 1e-9);
  }
  CHECK_THROWS_AS(fvi_train({}, cfg), Error);
}

TEST_CASE("hand-crafted policy decisions") {
  APRegressor reg{{1.0}, 0.0};  // state = first feature
  auto q = GBasisQ::make({0.25, 0.5, 0.75}, 0.25);
  q.weights[action_index(Action::ShowList)] = {1, 1, 1};
  const std::vector<double> at02 = {0.2};
  CHECK(handcrafted_action(reg, q, at02) == Action::ShowList);
  auto flat = GBasisQ::make({0.5}, 0.25);
  CHECK(handcrafted_action(reg, flat, at02) == Action::ReturnDocuments);
  auto peaked = GBasisQ::make({0.2, 0.8}, 0.1);
  peaked.weights[action_index(Action::ReturnRequest)] = {5, 0};
  peaked.weights[action_index(Action::ShowList)] = {0, 5};
  CHECK(handcrafted_action(reg, peaked, at02) == Action::ReturnRequest);
  CHECK(handcrafted_action(reg, peaked, std::vector<double>{0.8}) == Action::ShowList);

  // Increasing affine transforms of every Q value keep the choice.
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    auto a = GBasisQ::make({0.25, 0.5, 0.75}, 0.25);
    for (auto& w : a.weights) for (auto& x : w) x = g(rng);
    auto b = a;
    for (auto& w : b.weights) for (auto& x : w) x = 3.0 * x;
    b.weights[0][0] += 0.0;
    const std::vector<double> s = {std::uniform_real_distribution<double>(0, 1)(rng)};
    CHECK(handcrafted_action(reg, a, s) == handcrafted_action(reg, b, s));
  }
}

TEST_CASE("oracle enumeration") {
  CHECK(oracle_sequence_count(1) == 1);
  CHECK(oracle_sequence_count(4) == 85);
  CHECK(oracle_sequence_count(5) == 341);

  const Experiment exp(small_config());
  const auto& q = exp.queries()[0];
  const auto one = oracle_search(exp.env(), exp.user(), q, 1, 3);
  CHECK(one.evaluated == 1);
  CHECK(one.best_return == 0.0);
  CHECK(one.best_sequence == std::vector<Action>{Action::ShowList});

  const auto four = oracle_search(exp.env(), exp.user(), q, 4, 3);
  CHECK(four.evaluated == 85);
  CHECK(four.best_return >= four.worst_return);
  const auto five = oracle_search(exp.env(), exp.user(), q, 5, 3);
  CHECK(five.evaluated == 341);
  CHECK(five.best_return >= four.best_return);

  // The best sequence replays to the reported return under the same seed.
  auto user = exp.user();
  user.reseed(3);
  ScriptedPolicy replay(five.best_sequence);
  CHECK(run_episode(exp.env(), nullptr, replay, user, q).total_return == doctest::Approx(five.best_return));

  // Dominance over fixed and random policies with the same seed.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto best = oracle_search(exp.env(), exp.user(), q, 5, seed);
    RandomPolicy policy(seed * 31);
    auto u = exp.user();
    u.reseed(seed);
    const double r = run_episode(exp.env(), nullptr, policy, u, q).total_return;
    CHECK(best.best_return >= r - 1e-9);
    CHECK(best.worst_return <= r + 1e-9);
  }

  EnvironmentConfig short_cfg = exp.env().config();
  short_cfg.reward.max_turns = 3;
  const Environment short_env(exp.retriever(), &exp.topics(), &exp.judgments(), short_cfg);
  CHECK_THROWS_AS(oracle_search(short_env, SimUser(short_env, exp.judgments(), 1), q, 4, 1), Error);

  const auto line = nlohmann::json::parse(oracle_report_line("q7", four));
  CHECK(line["qid"] == "q7");
  CHECK(line["evaluated"] == 85);
  CHECK(line["best_sequence"].back() == "ShowList");
  CHECK(line["return"].get<double>() == doctest::Approx(four.best_return));
}

TEST_CASE("hand-crafted baseline trains end to end") {
  const Experiment exp(small_config());
  const auto fx = exp.extractor(exp.config().features);
  const auto model = train_handcrafted(exp.env(), fx, exp.user(), exp.queries(), exp.config().handcrafted, 4);
  CHECK(model.regressor.weights.size() == fx.dimension());
  HandcraftedPolicy policy(model);
  auto user = exp.user();
  const auto ep = run_episode(exp.env(), &fx, policy, user, exp.queries()[0]);
  CHECK(ep.steps.back().terminal);
  const auto again = train_handcrafted(exp.env(), fx, exp.user(), exp.queries(), exp.config().handcrafted, 4);
  CHECK(again.regressor.weights == model.regressor.weights);
  const auto text = handcrafted_to_json(model);
  CHECK(handcrafted_from_json(text).regressor.weights == model.regressor.weights);
}
