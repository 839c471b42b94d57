#include "teachlab/learner.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "teachlab/errors.hpp"

namespace teachlab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void check_experience(const LearnerState& state, const Experience& e) {
  if (!std::isfinite(e.r)) throw DomainError("experience reward is not finite");
  const int ns = state.q.n_states();
  const int na = state.q.n_actions();
  if (e.s.index < 0 || e.s.index >= ns || e.s_next.index < 0 || e.s_next.index >= ns ||
      e.a.index < 0 || e.a.index >= na) {
    throw DomainError("experience indices out of range");
  }
}

double row_max(const QTable& q, StateId s) {
  const auto row = q.row(s);
  return *std::max_element(row.begin(), row.end());
}

double parse_number(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) throw DomainError("learner spec: bad " + what + " '" + text + "'");
  return value;
}

}  // namespace

double max_abs_diff(const QTable& a, const QTable& b) {
  if (a.n_states() != b.n_states() || a.n_actions() != b.n_actions()) {
    throw DomainError("max_abs_diff: shape mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

void validate(const LearnerSpec& spec) {
  std::visit(overloaded{
                 [](const QLearningParams& p) {
                   if (p.schedule == LearningRateSchedule::kConstant && !(p.alpha > 0.0 && p.alpha <= 1.0)) {
                     throw DomainError("q-learning: alpha must lie in (0, 1]");
                   }
                   if (!(p.gamma >= 0.0 && p.gamma < 1.0)) throw DomainError("q-learning: gamma must lie in [0, 1)");
                 },
                 [](const As1Params& p) {
                   if (!(p.kappa > 0.0) || !std::isfinite(p.kappa)) throw DomainError("as1: kappa must be positive");
                 },
                 [](const As2Params&) {},
             },
             spec);
}

LearnerSpec parse_learner_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.empty()) throw DomainError("learner spec: empty");
  LearnerSpec spec;
  if (parts[0] == "q" && parts.size() == 3) {
    spec = QLearningParams{parse_number(parts[1], "alpha"), parse_number(parts[2], "gamma")};
  } else if (parts[0] == "as1" && parts.size() <= 2) {
    spec = As1Params{parts.size() == 2 ? parse_number(parts[1], "kappa") : 1.0};
  } else if (parts[0] == "as2" && parts.size() == 1) {
    spec = As2Params{};
  } else {
    throw DomainError("learner spec: expected q:<alpha>:<gamma>, as1[:<kappa>] or as2, got '" + text + "'");
  }
  validate(spec);
  return spec;
}

std::string to_string(const LearnerSpec& spec) {
  auto num = [](double x) {
    std::ostringstream os;
    os << x;
    return os.str();
  };
  return std::visit(overloaded{
                        [&](const QLearningParams& p) {
                          if (p.schedule == LearningRateSchedule::kInverseVisits) return "q:1/n:" + num(p.gamma);
                          return "q:" + num(p.alpha) + ":" + num(p.gamma);
                        },
                        [&](const As1Params& p) { return "as1:" + num(p.kappa); },
                        [](const As2Params&) { return std::string("as2"); },
                    },
                    spec);
}

nlohmann::json learner_spec_to_json(const LearnerSpec& spec) {
  return std::visit(overloaded{
                        [](const QLearningParams& p) {
                          nlohmann::json j{{"variant", "q"}, {"alpha", p.alpha}, {"gamma", p.gamma}};
                          if (p.schedule == LearningRateSchedule::kInverseVisits) j["schedule"] = "inverse_visits";
                          return j;
                        },
                        [](const As1Params& p) { return nlohmann::json{{"variant", "as1"}, {"kappa", p.kappa}}; },
                        [](const As2Params&) { return nlohmann::json{{"variant", "as2"}}; },
                    },
                    spec);
}

LearnerSpec learner_spec_from_json(const nlohmann::json& doc) {
  LearnerSpec spec;
  try {
    const auto variant = doc.at("variant").get<std::string>();
    if (variant == "q") {
      QLearningParams p{doc.value("alpha", 0.9), doc.value("gamma", 0.0)};
      if (doc.value("schedule", std::string("constant")) == "inverse_visits") {
        p.schedule = LearningRateSchedule::kInverseVisits;
      }
      spec = p;
    } else if (variant == "as1") {
      spec = As1Params{doc.value("kappa", 1.0)};
    } else if (variant == "as2") {
      spec = As2Params{};
    } else {
      throw DomainError("learner spec: unknown variant '" + variant + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("learner spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

LearnerState make_learner(const LearnerSpec& spec, int n_states, int n_actions) {
  validate(spec);
  return LearnerState{spec, QTable(n_states, n_actions, 0.0), VisitCounts(n_states, n_actions, 0)};
}

LearnerState make_learner(const LearnerSpec& spec, const EnvModel& env) {
  return make_learner(spec, env.n_states(), env.n_actions());
}

double updated_value(const LearnerState& state, const Experience& e) {
  check_experience(state, e);
  const double q = state.q(e.s, e.a);
  return std::visit(overloaded{
                        [&](const QLearningParams& p) {
                          const double alpha = p.schedule == LearningRateSchedule::kInverseVisits
                                                   ? 1.0 / static_cast<double>(state.visits(e.s, e.a) + 1)
                                                   : p.alpha;
                          const double bootstrap = e.reached_absorb ? 0.0 : row_max(state.q, e.s_next);
                          return (1.0 - alpha) * q + alpha * (e.r + p.gamma * bootstrap);
                        },
                        [&](const As1Params& p) { return q + p.kappa * e.r; },
                        [&](const As2Params&) {
                          const double n = static_cast<double>(state.visits(e.s, e.a) + 1);
                          return (1.0 - 1.0 / n) * q + (1.0 / n) * e.r;
                        },
                    },
                    state.spec);
}

void apply_update(LearnerState& state, const Experience& e) {
  const double value = updated_value(state, e);
  state.q(e.s, e.a) = value;
  state.visits(e.s, e.a) += 1;
}

LearnerState dispatch_update(const LearnerState& state, const Experience& e) {
  LearnerState next = state;
  apply_update(next, e);
  return next;
}

LearnerState q_update(const LearnerState& state, const Experience& e) {
  if (!std::holds_alternative<QLearningParams>(state.spec)) throw DomainError("q_update on a non-Q learner");
  return dispatch_update(state, e);
}

LearnerState as1_update(const LearnerState& state, const Experience& e) {
  if (!std::holds_alternative<As1Params>(state.spec)) throw DomainError("as1_update on a non-AS1 learner");
  return dispatch_update(state, e);
}

LearnerState as2_update(const LearnerState& state, const Experience& e) {
  if (!std::holds_alternative<As2Params>(state.spec)) throw DomainError("as2_update on a non-AS2 learner");
  return dispatch_update(state, e);
}

std::vector<double> as1_belief(const LearnerState& state, StateId s) {
  if (!std::holds_alternative<As1Params>(state.spec)) throw DomainError("as1_belief on a non-AS1 learner");
  const auto row = state.q.row(s);
  const double top = *std::max_element(row.begin(), row.end());
  std::vector<double> p(row.size());
  double total = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    p[i] = std::exp(row[i] - top);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

std::vector<ActionId> greedy_actions(const QTable& q, StateId s) {
  const double top = row_max(q, s);
  std::vector<ActionId> best;
  for (int a = 0; a < q.n_actions(); ++a) {
    if (q(s, ActionId{a}) == top) best.push_back(ActionId{a});
  }
  return best;
}

ActionChoice select_action(const LearnerState& state, StateId s, const BehaviorPolicyParams& params,
                           RandomSource& rng) {
  if (!(params.epsilon >= 0.0 && params.epsilon <= 1.0)) throw DomainError("epsilon must lie in [0, 1]");
  const bool explore = rng.uniform01() < params.epsilon;
  if (explore) {
    return {ActionId{static_cast<int>(rng.uniform_index(static_cast<std::size_t>(state.q.n_actions())))}, true};
  }
  const auto best = greedy_actions(state.q, s);
  return {best[rng.uniform_index(best.size())], false};
}

LearnerSpec as2_as_qlearner() {
  return QLearningParams{1.0, 0.0, LearningRateSchedule::kInverseVisits};
}

}  // namespace teachlab
