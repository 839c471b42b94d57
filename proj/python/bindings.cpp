#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <sstream>

#include "teachlab/analysis.hpp"
#include "teachlab/errors.hpp"
#include "teachlab/optimal_teacher.hpp"
#include "teachlab/service.hpp"

namespace py = pybind11;
using namespace teachlab;
using nlohmann::json;

namespace {

LearnerSpec learner_from(const std::string& text) {
  try {
    return condition_spec(text);
  } catch (const DomainError&) {
  }
  return parse_learner_spec(text);
}

std::shared_ptr<const ValueTable> solve_dog(double epsilon) {
  const auto env = dog_env();
  SolverOptions opts;
  opts.epsilon = epsilon;
  return std::make_shared<const ValueTable>(solve_value_iteration(env, dog_goal(env), opts));
}

double bound_or_inf(std::optional<double> v) { return v ? *v : kUnboundedReward; }

json summary_json(const MonteCarloSummary& mc) {
  json j;
  j["n_episodes"] = mc.n_episodes;
  j["n_success"] = mc.n_success;
  j["success_rate"] = mc.success_rate;
  j["mean_steps"] = mc.mean_steps;
  j["std_error"] = mc.std_error;
  j["ci"] = {mc.ci_low, mc.ci_high};
  j["max_abs_reward"] = mc.max_abs_reward;
  j["steps"] = mc.steps;
  return j;
}

std::string solve(double epsilon, double tol) {
  const auto env = dog_env();
  SolverOptions opts;
  opts.epsilon = epsilon;
  opts.tol = tol;
  const auto vt = solve_value_iteration(env, dog_goal(env), opts);
  json j;
  j["teaching_dimension"] = teaching_dimension(vt, env);
  j["iterations"] = vt.iterations();
  j["residual"] = vt.residual();
  j["shortest_success_path"] = shortest_success_path(env, vt.goal(), epsilon);
  j["optimal_length"] = optimal_length(vt, env);
  j["abstract_states"] = vt.space().n_abstract_states();
  return j.dump();
}

std::string simulate(const std::string& learner, int episodes, std::uint64_t seed, double epsilon,
                     std::optional<int> max_steps, std::optional<double> r_max, double margin, unsigned threads) {
  const auto env = dog_env();
  const auto spec = learner_from(learner);
  RealizedTeacherPolicy policy{solve_dog(epsilon), margin, bound_or_inf(r_max), spec, true, r_max.has_value()};
  const EpisodeConfig cfg{epsilon, max_steps ? *max_steps : kUnboundedSteps, seed, policy.r_max};
  return summary_json(monte_carlo_td(env, spec, policy, episodes, cfg, threads)).dump();
}

std::string equivalence(const std::vector<std::string>& learners, int episodes, std::uint64_t seed, double epsilon) {
  std::vector<LearnerSpec> specs;
  for (const auto& l : learners) specs.push_back(learner_from(l));
  const auto report = verify_equivalence(dog_env(), specs, solve_dog(epsilon), episodes,
                                         EpisodeConfig{epsilon, kUnboundedSteps, seed, kUnboundedReward});
  json j;
  j["all_overlap"] = report.all_overlap;
  j["identical_step_sequences"] = report.identical_step_sequences;
  for (const auto& e : report.entries) {
    auto s = summary_json(e.summary);
    s.erase("steps");
    s["learner"] = to_string(e.spec);
    j["entries"].push_back(s);
  }
  return j.dump();
}

std::string replay_file(const std::string& path) {
  json out = json::array();
  for (const auto& log : read_session_log_file(path)) {
    const auto o = replay(log).outcome();
    out.push_back({{"learner", to_string(log.learner_spec)},
                   {"steps", log.steps.size()},
                   {"outcome", o.kind == OutcomeKind::kSuccess   ? "success"
                               : o.kind == OutcomeKind::kTimeout ? "timeout"
                                                                 : "in_progress"},
                   {"steps_used", o.steps_used}});
  }
  return out.dump();
}

int synthesize(const std::filesystem::path& out_dir, const std::string& condition, const std::string& teacher, int dogs,
               std::uint64_t seed, bool sync) {
  const auto env = dog_env();
  SyntheticOptions opts;
  opts.sync = sync;
  auto records =
      generate_synthetic_logs(env, condition_spec(condition), parse_synthetic_teacher(teacher), dogs, seed,
                              solve_dog(opts.episode.epsilon), opts);
  std::filesystem::create_directories(out_dir);
  for (auto& rec : records) {
    rec.participant_id = rec.condition + "-" + rec.participant_id;
    for (auto& log : rec.logs) log.meta["participant_id"] = rec.participant_id;
    write_participant((out_dir / (rec.participant_id + ".ndjson")).string(), rec);
  }
  return static_cast<int>(records.size());
}

std::string condition_stats(const std::string& dir, std::optional<int> opt_len, int do_nothing_threshold) {
  const auto records = load_participants(dir);
  const int len = opt_len ? *opt_len : optimal_length(*solve_dog(0.1), dog_env());
  const auto report = exclusion_filter(records, len, do_nothing_threshold);
  json j;
  j["optimal_length"] = len;
  j["excluded"] = json::array();
  for (const auto& e : report.excluded) {
    j["excluded"].push_back({{"participant_id", e.participant_id}, {"dog_index", e.dog_index},
                             {"reason", to_string(e.reason)}});
  }
  j["rows"] = json::array();
  for (const auto& r : compute_condition_stats(report.kept)) {
    json row{{"condition", r.condition}, {"sync", r.sync}, {"n_subjects", r.n_subjects}, {"n_dogs", r.n_dogs},
             {"n_success", r.n_success}, {"success_rate", r.success_rate},
             {"success_ci", {r.success_ci.low, r.success_ci.high}}};
    row["mean_steps"] = r.mean_steps ? json(*r.mean_steps) : json(nullptr);
    row["steps_ci"] = {r.steps_ci.low, r.steps_ci.high};
    j["rows"].push_back(row);
  }
  return j.dump();
}

class Learner {
 public:
  explicit Learner(const std::string& spec) : state_(make_learner(learner_from(spec), dog_env())) {}

  void update(int s, int a, int s_next, bool absorb, double r) {
    apply_update(state_, Experience{StateId{s}, ActionId{a}, StateId{s_next}, absorb, r});
  }
  std::vector<std::vector<double>> q() const {
    std::vector<std::vector<double>> rows;
    for (int s = 0; s < state_.q.n_states(); ++s) rows.push_back({state_.q.at(s, 0), state_.q.at(s, 1)});
    return rows;
  }
  std::vector<int> greedy(int s) const {
    std::vector<int> out;
    for (const auto a : greedy_actions(state_.q, StateId{s})) out.push_back(a.index);
    return out;
  }
  std::string spec() const { return to_string(state_.spec); }

 private:
  LearnerState state_;
};

class Service {
 public:
  explicit Service(std::optional<std::string> data_dir) : svc_(std::move(data_dir)) {}

  std::pair<int, std::string> request(const std::string& method, const std::string& path, const std::string& body,
                                      const std::map<std::string, std::string>& query) {
    const auto res = handle_request(svc_, method, path, query, body);
    return {res.status, res.body};
  }

 private:
  SessionService svc_;
};

}  // namespace

PYBIND11_MODULE(_teachlab, m) {
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  m.def("solve", &solve, py::arg("epsilon") = 0.1, py::arg("tol") = 1e-10);
  m.def("simulate", &simulate, py::arg("learner"), py::arg("episodes"), py::arg("seed"), py::arg("epsilon") = 0.1,
        py::arg("max_steps") = std::nullopt, py::arg("r_max") = std::nullopt, py::arg("margin") = 0.1,
        py::arg("threads") = 0, py::call_guard<py::gil_scoped_release>());
  m.def("equivalence", &equivalence, py::arg("learners"), py::arg("episodes"), py::arg("seed"),
        py::arg("epsilon") = 0.1, py::call_guard<py::gil_scoped_release>());
  m.def("replay_file", &replay_file, py::arg("path"));
  m.def("synthesize", &synthesize, py::arg("out_dir"), py::arg("condition"), py::arg("teacher"), py::arg("dogs"),
        py::arg("seed"), py::arg("sync") = false);
  m.def("condition_stats", &condition_stats, py::arg("dir"), py::arg("optimal_length") = std::nullopt,
        py::arg("do_nothing_threshold") = 36);
  m.def("condition_tags", &condition_tags);

  py::class_<Learner>(m, "Learner")
      .def(py::init<const std::string&>(), py::arg("spec"))
      .def("update", &Learner::update, py::arg("s"), py::arg("a"), py::arg("s_next"), py::arg("absorb"),
           py::arg("r"))
      .def_property_readonly("q", &Learner::q)
      .def_property_readonly("spec", &Learner::spec)
      .def("greedy", &Learner::greedy, py::arg("s"));

  py::class_<Service>(m, "Service")
      .def(py::init<std::optional<std::string>>(), py::arg("data_dir") = std::nullopt)
      .def("request", &Service::request, py::arg("method"), py::arg("path"), py::arg("body") = "",
           py::arg("query") = std::map<std::string, std::string>{}, py::call_guard<py::gil_scoped_release>());
}
