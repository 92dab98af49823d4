#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "iir/evaluation.hpp"
#include "iir/harness.hpp"
#include "iir/service.hpp"

namespace py = pybind11;
using json = nlohmann::json;
using namespace iir;

namespace {

// Owns an experiment plus a session manager over it.
class PyExperiment {
 public:
  explicit PyExperiment(const std::string& config_json)
      : exp_(std::make_unique<Experiment>(config_from_json(json::parse(config_json)))) {}

  std::size_t num_documents() const { return exp_->corpus().size(); }

  std::vector<std::string> query_ids() const {
    std::vector<std::string> out;
    for (const auto& q : exp_->queries()) out.push_back(q.qid);
    return out;
  }

  std::vector<std::pair<std::string, double>> rank(const std::string& text, std::size_t top) const {
    const auto tokens = tokenize(text);
    const auto q = make_query_model(tokens, exp_->corpus().vocab());
    const auto list = exp_->retriever().rank(q, {}, exp_->config().environment.beta);
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t i = 0; i < std::min(top, list.size()); ++i) {
      out.emplace_back(exp_->corpus().doc(list.entries[i].doc).id, list.entries[i].score);
    }
    return out;
  }

  double first_pass_map() const {
    double sum = 0.0;
    for (const auto& q : exp_->queries()) sum += exp_->env().start(q).quality.value_or(0.0);
    return sum / static_cast<double>(exp_->queries().size());
  }

  std::pair<double, double> evaluate_random(int episodes, std::uint64_t seed) const {
    RandomPolicy p(seed);
    const auto s = evaluate_policy(exp_->env(), nullptr, p, exp_->user(), exp_->queries(), episodes,
                                   exp_->eval_seed());
    return {s.mean_ap, s.mean_return};
  }

  std::pair<double, double> evaluate_script(const std::vector<std::string>& actions, int episodes) const {
    std::vector<Action> script;
    for (const auto& a : actions) {
      auto parsed = parse_action(a);
      if (!parsed) throw Error("unknown action '" + a + "'");
      script.push_back(*parsed);
    }
    ScriptedPolicy p(script);
    const auto s = evaluate_policy(exp_->env(), nullptr, p, exp_->user(), exp_->queries(), episodes,
                                   exp_->eval_seed());
    return {s.mean_ap, s.mean_return};
  }

  std::string oracle(const std::string& qid, int max_len, std::uint64_t seed) const {
    for (const auto& q : exp_->queries()) {
      if (q.qid == qid) return oracle_report_line(qid, oracle_search(exp_->env(), exp_->user(), q, max_len, seed));
    }
    throw Error("unknown query '" + qid + "'");
  }

  std::string crossval(const std::vector<std::string>& policies) const {
    std::vector<std::vector<std::size_t>> folds =
        partition_folds(exp_->queries().size(), exp_->config().folds, exp_->config().seed);
    CrossvalResult r;
    for (const auto& p : policies) r.policies.push_back(run_policy(*exp_, p, folds));
    return results_to_json(r).dump();
  }

  std::string create_session(const std::string& body) { return sessions().create(json::parse(body)).dump(); }
  std::string step_session(const std::string& id, const std::string& body) {
    return sessions().step(id, json::parse(body)).dump();
  }
  std::string get_session(const std::string& id) { return sessions().get(id).dump(); }

 private:
  SessionManager& sessions() {
    if (!sessions_) {
      std::map<std::string, PolicyEntry> policies;
      policies["random"] = {[](std::uint64_t s) { return std::make_unique<RandomPolicy>(s); }, nullptr, false};
      sessions_ = std::make_unique<SessionManager>(exp_->env(), std::move(policies));
    }
    return *sessions_;
  }

  std::unique_ptr<Experiment> exp_;
  std::unique_ptr<SessionManager> sessions_;
};

}  // namespace

PYBIND11_MODULE(_iir, m) {
  m.doc() = "Interactive retrieval core";
  // Registered base first: the most recently registered translator wins.
  auto base = py::register_exception<Error>(m, "IirError");
  py::register_exception<ServiceError>(m, "ServiceError", base.ptr());

  m.def("tokenize", &tokenize, py::arg("text"));
  m.def("episode_seed", &episode_seed, py::arg("base"), py::arg("qid"), py::arg("episode"));
  m.def("oracle_sequence_count", &oracle_sequence_count, py::arg("max_len"));
  m.def(
      "average_precision",
      [](const std::vector<bool>& flags, std::size_t num_relevant) {
        RankedList list;
        std::vector<char> rel(flags.size());
        for (std::size_t i = 0; i < flags.size(); ++i) {
          list.entries.push_back({static_cast<DocIndex>(i), 0.0});
          rel[i] = flags[i];
        }
        return average_precision(list, rel, num_relevant);
      },
      py::arg("relevant_flags"), py::arg("num_relevant"),
      "AP of a ranked list given per-rank relevance flags.");
  m.def(
      "write_synthetic",
      [](const std::string& dir, const std::string& config_json) {
        const auto c = config_from_json(json::parse(config_json));
        write_dataset(dir, make_synthetic(c.synthetic, c.seed));
      },
      py::arg("dir"), py::arg("config_json") = "{}");

  py::class_<PyExperiment>(m, "Experiment")
      .def(py::init<const std::string&>(), py::arg("config_json") = "{}")
      .def_property_readonly("num_documents", &PyExperiment::num_documents)
      .def("query_ids", &PyExperiment::query_ids)
      .def("rank", &PyExperiment::rank, py::arg("text"), py::arg("top") = 10)
      .def("first_pass_map", &PyExperiment::first_pass_map)
      .def("evaluate_random", &PyExperiment::evaluate_random, py::arg("episodes"), py::arg("seed") = 0)
      .def("evaluate_script", &PyExperiment::evaluate_script, py::arg("actions"), py::arg("episodes") = 1)
      .def("oracle", &PyExperiment::oracle, py::arg("qid"), py::arg("max_len") = 4, py::arg("seed") = 0)
      .def("crossval", &PyExperiment::crossval, py::arg("policies"),
           py::call_guard<py::gil_scoped_release>())
      .def("create_session", &PyExperiment::create_session, py::arg("body"))
      .def("step_session", &PyExperiment::step_session, py::arg("session_id"), py::arg("body"))
      .def("get_session", &PyExperiment::get_session, py::arg("session_id"));
}
