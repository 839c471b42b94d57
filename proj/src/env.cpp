#include "teachlab/env.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "teachlab/errors.hpp"

namespace teachlab {

namespace {

constexpr double kRowTolerance = 1e-9;

void check_distribution(const std::vector<double>& p, const std::string& what) {
  double total = 0.0;
  for (double x : p) {
    if (!std::isfinite(x) || x < 0.0) throw DomainError(what + ": negative or non-finite probability");
    total += x;
  }
  if (std::abs(total - 1.0) > kRowTolerance) {
    throw DomainError(what + ": probabilities sum to " + std::to_string(total));
  }
}

// Inverse-CDF draw; a point mass consumes no randomness.
std::size_t sample(const std::vector<double>& p, RandomSource& rng) {
  std::size_t support = 0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      ++support;
      last = i;
    }
  }
  if (support == 1) return last;
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  return last;
}

}  // namespace

EnvModel::EnvModel(int n_states, int n_actions, std::vector<std::vector<double>> transition,
                   std::vector<double> initial, std::optional<StateId> absorb_reset)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      initial_(std::move(initial)),
      absorb_reset_(absorb_reset) {
  if (n_states_ < 1 || n_actions_ < 1) throw DomainError("EnvModel: empty state or action space");
  if (transition_.size() != static_cast<std::size_t>(n_states_ * n_actions_)) {
    throw DomainError("EnvModel: expected one transition row per (state, action)");
  }
  for (std::size_t i = 0; i < transition_.size(); ++i) {
    if (transition_[i].size() != static_cast<std::size_t>(n_states_ + 1)) {
      throw DomainError("EnvModel: transition row " + std::to_string(i) + " has wrong width");
    }
    check_distribution(transition_[i], "transition row " + std::to_string(i));
  }
  if (initial_.size() != static_cast<std::size_t>(n_states_)) {
    throw DomainError("EnvModel: initial distribution has wrong width");
  }
  check_distribution(initial_, "initial distribution");
  if (absorb_reset_ && !valid(*absorb_reset_)) throw DomainError("EnvModel: absorb_reset out of range");
}

const std::vector<double>& EnvModel::row(StateId s, ActionId a) const {
  if (!valid(s) || !valid(a)) {
    throw DomainError("invalid (state, action) = (" + std::to_string(s.index) + ", " +
                      std::to_string(a.index) + ")");
  }
  return transition_[static_cast<std::size_t>(s.index * n_actions_ + a.index)];
}

EnvModel dog_env() {
  constexpr int kTiles = 4;
  std::vector<std::vector<double>> rows;
  for (int s = 0; s < kTiles; ++s) {
    std::vector<double> left(kTiles + 1, 0.0);
    std::vector<double> right(kTiles + 1, 0.0);
    left[static_cast<std::size_t>(s == 0 ? 0 : s - 1)] = 1.0;
    right[static_cast<std::size_t>(s + 1)] = 1.0;  // s + 1 == kTiles is the door
    rows.push_back(std::move(left));
    rows.push_back(std::move(right));
  }
  std::vector<double> initial(kTiles, 0.0);
  initial.back() = 1.0;
  return EnvModel(kTiles, 2, std::move(rows), std::move(initial), StateId{kTiles - 1});
}

EnvStep step_env(const EnvModel& env, StateId s, ActionId a, RandomSource& rng) {
  const auto& p = env.row(s, a);
  const auto next = static_cast<int>(sample(p, rng));
  if (next == env.absorb_index()) {
    if (auto reset = env.absorb_reset()) return {*reset, true};
    return {initial_state(env, rng), true};
  }
  return {StateId{next}, false};
}

StateId initial_state(const EnvModel& env, RandomSource& rng) {
  return StateId{static_cast<int>(sample(env.initial(), rng))};
}

std::vector<Outcome> outcomes(const EnvModel& env, StateId s, ActionId a) {
  const auto& p = env.row(s, a);
  std::vector<Outcome> out;
  for (int i = 0; i < env.n_states(); ++i) {
    if (p[static_cast<std::size_t>(i)] > 0.0) out.push_back({StateId{i}, false, p[static_cast<std::size_t>(i)]});
  }
  const double absorb = p[static_cast<std::size_t>(env.absorb_index())];
  if (absorb > 0.0) {
    if (auto reset = env.absorb_reset()) {
      out.push_back({*reset, true, absorb});
    } else {
      for (int i = 0; i < env.n_states(); ++i) {
        const double mu = env.initial()[static_cast<std::size_t>(i)];
        if (mu > 0.0) out.push_back({StateId{i}, true, absorb * mu});
      }
    }
  }
  return out;
}

EnvModel env_from_json(const nlohmann::json& doc) {
  try {
    std::optional<StateId> reset;
    if (doc.contains("absorb_reset") && !doc.at("absorb_reset").is_null()) {
      reset = StateId{doc.at("absorb_reset").get<int>()};
    }
    return EnvModel(doc.at("n_states").get<int>(), doc.at("n_actions").get<int>(),
                    doc.at("transition").get<std::vector<std::vector<double>>>(),
                    doc.at("initial").get<std::vector<double>>(), reset);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("env config: ") + e.what());
  }
}

nlohmann::json env_to_json(const EnvModel& env) {
  nlohmann::json rows = nlohmann::json::array();
  for (int s = 0; s < env.n_states(); ++s) {
    for (int a = 0; a < env.n_actions(); ++a) rows.push_back(env.row(StateId{s}, ActionId{a}));
  }
  nlohmann::json doc{{"n_states", env.n_states()},
                     {"n_actions", env.n_actions()},
                     {"transition", rows},
                     {"initial", env.initial()}};
  if (auto r = env.absorb_reset()) {
    doc["absorb_reset"] = r->index;
  } else {
    doc["absorb_reset"] = nullptr;
  }
  return doc;
}

EnvModel load_env(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open env config " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("env config " + path + ": " + e.what());
  }
  return env_from_json(doc);
}

}  // namespace teachlab
