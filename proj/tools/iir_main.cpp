// Command-line driver: synthetic data, training, evaluation, cross-validation,
// oracle search, reports, learning-curve studies and the session service.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "iir/evaluation.hpp"
#include "iir/harness.hpp"
#include "iir/service.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace iir;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string policy;
  std::string out = ".";
  std::string model;
  std::string input;
  std::string study = "depth";
  int max_len = 0;
  std::string host = "127.0.0.1";
  int port = 8080;
};

ExperimentConfig make_config(const Options& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void require_policy(const std::string& p, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed) {
    if (p == a) return;
  }
  throw Error("policy '" + p + "' is not valid here");
}

int cmd_synth(const Options& o) {
  const auto c = make_config(o);
  const auto data = make_synthetic(c.synthetic, c.seed);
  write_dataset(o.out, data);
  std::cout << "wrote " << data.corpus.size() << " documents and " << data.queries.size()
            << " queries to " << o.out << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  require_policy(o.policy, {"dqn", "dqn_raw", "handcrafted"});
  const Experiment exp(make_config(o));
  fs::create_directories(o.out);
  const auto fx = exp.extractor(exp.features_for(o.policy));
  if (o.policy == "handcrafted") {
    const auto model = train_handcrafted(exp.env(), fx, exp.user(), exp.queries(),
                                         exp.config().handcrafted, exp.config().seed);
    write_file(fs::path(o.out) / "handcrafted.json", handcrafted_to_json(model) + "\n");
  } else {
    const auto trained = train_dqn(exp.env(), fx, exp.user(), exp.queries(), exp.queries(),
                                   exp.config().trainer, exp.config().seed);
    save_checkpoint((fs::path(o.out) / (o.policy + ".json")).string(), trained.model);
    write_curve((fs::path(o.out) / ("curve_" + o.policy + ".csv")).string(), trained.curve);
  }
  std::cout << "trained " << o.policy << " on " << exp.queries().size() << " queries\n";
  return 0;
}

int cmd_eval(const Options& o) {
  require_policy(o.policy, {"first_pass", "random", "handcrafted", "dqn", "dqn_raw"});
  const Experiment exp(make_config(o));
  const auto& cfg = exp.config();
  fs::create_directories(o.out);

  std::unique_ptr<Policy> policy;
  std::optional<FeatureExtractor> fx;
  std::optional<DqnModel> dqn;
  std::optional<HandcraftedModel> hand;
  int episodes = cfg.eval_episodes;
  if (o.policy == "first_pass") {
    policy = std::make_unique<ScriptedPolicy>(std::vector<Action>{});
    episodes = 1;
  } else if (o.policy == "random") {
    policy = std::make_unique<RandomPolicy>(cfg.seed);
    episodes = cfg.random_episodes;
  } else {
    if (o.model.empty()) throw Error("--model is required for policy " + o.policy);
    if (o.policy == "handcrafted") {
      hand = handcrafted_from_json(read_file(o.model));
      fx.emplace(exp.extractor(exp.features_for(o.policy)));
      policy = std::make_unique<HandcraftedPolicy>(*hand);
    } else {
      dqn = load_checkpoint(o.model);
      fx.emplace(exp.extractor(dqn->features));
      if (static_cast<int>(fx->dimension()) != dqn->net.input_dim()) {
        throw Error("checkpoint input size does not match its feature configuration");
      }
      policy = std::make_unique<DqnPolicy>(*dqn);
    }
  }

  std::ofstream traj(fs::path(o.out) / "trajectories.jsonl");
  if (!traj) throw Error("cannot write trajectories");
  SimUser user = exp.user();
  double ret = 0.0, ap = 0.0;
  for (const auto& q : exp.queries()) {
    for (int e = 0; e < episodes; ++e) {
      user.reseed(episode_seed(exp.eval_seed(), q.qid, e));
      const Episode ep = run_episode(exp.env(), fx ? &*fx : nullptr, *policy, user, q);
      // Random evaluation repeats many episodes; one trajectory per query is kept.
      if (e == 0) write_trajectory(traj, ep);
      ret += ep.total_return;
      ap += ep.final_ap;
    }
  }
  const double n = static_cast<double>(exp.queries().size()) * episodes;
  json summary{{"policy", o.policy},
               {"queries", exp.queries().size()},
               {"episodes_per_query", episodes},
               {"map", ap / n}};
  if (o.policy == "first_pass") {
    summary["return"] = nullptr;
  } else {
    summary["return"] = ret / n;
  }
  write_file(fs::path(o.out) / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_crossval(const Options& o) {
  auto c = make_config(o);
  if (!o.policy.empty()) c.policies = {o.policy};
  const Experiment exp(c);
  const auto result = crossval(exp);
  fs::create_directories(o.out);
  write_file(fs::path(o.out) / "results.json", results_to_json(result).dump(2) + "\n");
  write_report(o.out, result);
  std::cout << read_file((fs::path(o.out) / "results.tsv").string());
  return 0;
}

int cmd_report(const Options& o) {
  const std::string in = o.input.empty() ? (fs::path(o.out) / "results.json").string() : o.input;
  const auto result = results_from_json(json::parse(read_file(in)));
  write_report(o.out, result);
  std::cout << read_file((fs::path(o.out) / "results.tsv").string());
  return 0;
}

int cmd_oracle(const Options& o) {
  const Experiment exp(make_config(o));
  const int max_len = o.max_len > 0 ? o.max_len : exp.config().oracle_max_len;
  fs::create_directories(o.out);
  std::ofstream out(fs::path(o.out) / "oracle.jsonl");
  if (!out) throw Error("cannot write oracle report");
  for (const auto& q : exp.queries()) {
    const auto r = oracle_search(exp.env(), exp.user(), q, max_len, episode_seed(exp.eval_seed(), q.qid, 0));
    out << oracle_report_line(q.qid, r) << '\n';
  }
  std::cout << "searched " << oracle_sequence_count(max_len) << " sequences for each of "
            << exp.queries().size() << " queries\n";
  return 0;
}

int cmd_study(const Options& o) {
  const Experiment exp(make_config(o));
  StudyResult s;
  if (o.study == "depth") {
    s = depth_study(exp);
  } else if (o.study == "nsize") {
    s = nsize_study(exp);
  } else {
    throw Error("unknown study '" + o.study + "' (expected depth or nsize)");
  }
  write_study(o.out, s);
  std::cout << read_file((fs::path(o.out) / "study.tsv").string());
  return 0;
}

HttpService* g_service = nullptr;

int cmd_serve(const Options& o) {
  const Experiment exp(make_config(o));
  const auto& cfg = exp.config();
  std::map<std::string, PolicyEntry> policies;
  policies["random"] = {[](std::uint64_t seed) { return std::make_unique<RandomPolicy>(seed); },
                        nullptr, false};

  auto hand_fx = std::make_shared<const FeatureExtractor>(exp.extractor(exp.features_for("handcrafted")));
  std::cerr << "fitting the handcrafted baseline...\n";
  auto hand = std::make_shared<const HandcraftedModel>(
      train_handcrafted(exp.env(), *hand_fx, exp.user(), exp.queries(), cfg.handcrafted, cfg.seed));
  policies["handcrafted"] = {
      [hand](std::uint64_t) { return std::make_unique<HandcraftedPolicy>(*hand); }, hand_fx, false};

  std::shared_ptr<const DqnModel> dqn;
  if (!o.model.empty()) {
    dqn = std::make_shared<const DqnModel>(load_checkpoint(o.model));
  } else {
    std::cerr << "no --model given; training a DQN (" << cfg.trainer.total_steps << " steps)...\n";
    const auto fx = exp.extractor(exp.features_for("dqn"));
    dqn = std::make_shared<const DqnModel>(
        train_dqn(exp.env(), fx, exp.user(), exp.queries(), {}, cfg.trainer, cfg.seed).model);
  }
  auto dqn_fx = std::make_shared<const FeatureExtractor>(exp.extractor(dqn->features));
  if (static_cast<int>(dqn_fx->dimension()) != dqn->net.input_dim()) {
    throw Error("checkpoint input size does not match its feature configuration");
  }
  policies["dqn"] = {[dqn](std::uint64_t) { return std::make_unique<DqnPolicy>(*dqn); }, dqn_fx, true};

  SessionManager sessions(exp.env(), std::move(policies));
  HttpService service(sessions);
  if (!service.bind(o.host, o.port)) throw Error("cannot bind " + o.host + ":" + std::to_string(o.port));
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::cerr << "listening on http://" << o.host << ':' << service.port() << '\n';
  service.listen();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive retrieval with learned dialogue policies"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--out", o.out, "output directory");
  };

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus, queries and qrels");
  common(synth);
  auto* train = app.add_subcommand("train", "train a policy on every query");
  common(train);
  train->add_option("--policy", o.policy, "dqn, dqn_raw or handcrafted")->required();
  auto* eval = app.add_subcommand("eval", "evaluate a policy on every query");
  common(eval);
  eval->add_option("--policy", o.policy, "first_pass, random, handcrafted, dqn or dqn_raw")->required();
  eval->add_option("--model", o.model, "trained model file");
  auto* cv = app.add_subcommand("crossval", "k-fold cross-validation of the configured policies");
  common(cv);
  cv->add_option("--policy", o.policy, "run only this policy");
  auto* oracle = app.add_subcommand("oracle", "exhaustive best action sequence per query");
  common(oracle);
  oracle->add_option("--max-len", o.max_len, "longest sequence, ShowList included");
  auto* report = app.add_subcommand("report", "rebuild tables and curves from results.json");
  common(report);
  report->add_option("--in", o.input, "results.json (default: <out>/results.json)");
  auto* study = app.add_subcommand("study", "learning-curve study: depth or nsize");
  common(study);
  study->add_option("--kind", o.study, "depth or nsize");
  auto* serve = app.add_subcommand("serve", "run the interactive session service");
  common(serve);
  serve->add_option("--model", o.model, "DQN checkpoint");
  serve->add_option("--host", o.host);
  serve->add_option("--port", o.port);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*cv) return cmd_crossval(o);
    if (*oracle) return cmd_oracle(o);
    if (*report) return cmd_report(o);
    if (*study) return cmd_study(o);
    if (*serve) return cmd_serve(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
