#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "teachlab/optimal_teacher.hpp"

using namespace teachlab;

namespace {

oracle::Profile random_profile(RandomSource& rng) {
  oracle::Profile p{};
  for (auto& c : p) c = "TLR"[rng.uniform_index(3)];
  return p;
}

}  // namespace

TEST_CASE("value iteration matches horizon-60 expectimax on random abstract states") {
  const auto env = dog_env();
  const auto vt = solve_value_iteration(env, dog_goal(env), SolverOptions{});
  oracle::DogExpectimax brute(0.1);
  RandomSource rng(606);
  for (int i = 0; i < 20; ++i) {
    const int pos = static_cast<int>(rng.uniform_index(4));
    const auto prof = random_profile(rng);
    const double expected = brute.value(pos, prof, 60);
    const double got = vt.value(StateId{pos}, abstract(oracle::dog_table(prof)));
    INFO("pos " << pos << " profile " << std::string(prof.begin(), prof.end()));
    CHECK(std::abs(got - expected) < 1e-6);
  }
  CHECK(std::abs(teaching_dimension(vt, env) - brute.value(3, {'T', 'T', 'T', 'T'}, 60)) < 1e-6);
  // the state named in the solver docs: tile 0, right already taught at 1..3
  CHECK(std::abs(vt.value(StateId{0}, abstract(oracle::dog_table({'T', 'R', 'R', 'R'}))) -
                 brute.value(0, {'T', 'R', 'R', 'R'}, 60)) < 1e-6);
}

TEST_CASE("greedy exploitation (epsilon 0) matches the oracle") {
  const auto env = dog_env();
  SolverOptions opts;
  opts.epsilon = 0.0;
  const auto vt = solve_value_iteration(env, dog_goal(env), opts);
  oracle::DogExpectimax brute(0.0);
  CHECK(std::abs(teaching_dimension(vt, env) - brute.value(3, {'T', 'T', 'T', 'T'}, 60)) < 1e-6);
}

TEST_CASE("finite-horizon values grow with the horizon toward the fixed point") {
  const auto env = dog_env();
  const auto vt = solve_value_iteration(env, dog_goal(env), SolverOptions{});
  oracle::DogExpectimax brute(0.1);
  const oracle::Profile start{'T', 'T', 'T', 'T'};
  double prev = 0.0;
  for (int h = 1; h <= 60; ++h) {
    const double v = brute.value(3, start, h);
    CHECK(v >= prev - 1e-12);
    CHECK(v <= teaching_dimension(vt, env) + 1e-9);
    prev = v;
  }
}

TEST_CASE("shortest lucky path agrees with a hand search") {
  // breadth-first over (pos, profile) where any move and any relation is allowed
  std::map<std::pair<int, std::string>, int> dist;
  std::vector<std::pair<int, oracle::Profile>> frontier{{3, {'T', 'T', 'T', 'T'}}};
  dist[{3, "TTTT"}] = 0;
  int found = -1;
  for (std::size_t head = 0; head < frontier.size() && found < 0; ++head) {
    const auto [pos, prof] = frontier[head];
    const int d = dist[{pos, std::string(prof.begin(), prof.end())}];
    for (int a = 0; a < 2 && found < 0; ++a) {
      for (char rel : {'L', 'R', 'T'}) {
        auto next = prof;
        next[static_cast<std::size_t>(pos)] = rel;
        if (oracle::all_right(next)) {
          found = d + 1;
          break;
        }
        const int np = oracle::dog_move(pos, a);
        if (dist.emplace(std::make_pair(np, std::string(next.begin(), next.end())), d + 1).second) {
          frontier.push_back({np, next});
        }
      }
    }
  }
  const auto env = dog_env();
  CHECK(shortest_success_path(env, dog_goal(env), 0.1) == found);
}
