#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "teachlab/analysis.hpp"
#include "teachlab/env.hpp"
#include "teachlab/errors.hpp"
#include "teachlab/learner.hpp"
#include "teachlab/optimal_teacher.hpp"
#include "teachlab/service.hpp"
#include "teachlab/teaching.hpp"

namespace teachlab::cli {

namespace {

// Bad flag values found after CLI11 parsing; reported like parse errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

const std::vector<std::string> kEquivalenceLearners{"q:0.9:0", "q:0.9:0.9", "q:0.1:0.9", "as1:1", "as2"};

LearnerSpec parse_learner(const std::string& text) {
  try {
    return condition_spec(text);
  } catch (const DomainError&) {
  }
  try {
    return parse_learner_spec(text);
  } catch (const std::exception& e) {
    throw UsageError("--learner: " + std::string(e.what()));
  }
}

EnvModel resolve_env(const std::string& path) {
  if (path.empty()) return dog_env();
  try {
    return load_env(path);
  } catch (const std::exception& e) {
    throw UsageError("--env: " + std::string(e.what()));
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string unbounded_or(double v) {
  if (!std::isfinite(v)) return "unbounded";
  std::ostringstream s;
  s << v;
  return s.str();
}

std::string steps_or_unbounded(int v) { return v == kUnboundedSteps ? "unbounded" : std::to_string(v); }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

std::shared_ptr<const ValueTable> solve_dog(const EnvModel& env, double epsilon, double tol) {
  SolverOptions opts;
  opts.epsilon = epsilon;
  opts.tol = tol;
  return std::make_shared<const ValueTable>(solve_value_iteration(env, dog_goal(env), opts));
}

struct Shared {
  std::optional<std::uint64_t> seed;
  std::string env_path;
  unsigned threads = 0;

  std::uint64_t resolve_seed(std::ostream& out) {
    if (!seed) seed = (static_cast<std::uint64_t>(std::random_device{}()) << 32) | std::random_device{}();
    out << "seed: " << *seed << "\n";
    return *seed;
  }
};

void add_seed(CLI::App* cmd, Shared& shared) {
  cmd->add_option("--seed", shared.seed, "Root seed; drawn at random and printed when omitted");
}

void add_env(CLI::App* cmd, Shared& shared) {
  cmd->add_option("--env", shared.env_path, "Environment JSON file (default: the four-tile dog world)")
      ->check(CLI::ExistingFile);
}

void add_threads(CLI::App* cmd, Shared& shared) {
  cmd->add_option("--threads", shared.threads, "Worker threads for Monte Carlo fan-out (0: all cores)");
}

// ---------------------------------------------------------------------------

struct SolveArgs {
  double epsilon = 0.1;
  double tol = 1e-10;
  std::string out_path;
};

int cmd_solve(const SolveArgs& a, Shared& shared, std::ostream& out) {
  shared.resolve_seed(out);
  const auto env = resolve_env(shared.env_path);
  const auto t0 = std::chrono::steady_clock::now();
  const auto vt = solve_dog(env, a.epsilon, a.tol);
  const double td = teaching_dimension(*vt, env);
  const double elapsed = seconds_since(t0);
  out << std::setprecision(10);
  out << "teaching dimension: " << td << "\n";
  out << "epsilon: " << a.epsilon << "\n";
  out << "iterations: " << vt->iterations() << "  residual: " << vt->residual() << "\n";
  out << "shortest success path: " << shortest_success_path(env, vt->goal(), a.epsilon) << "\n";
  out << "abstract states: " << vt->space().n_abstract_states() << "\n";
  out << std::setprecision(3) << "solve time: " << elapsed * 1e3 << " ms\n";
  if (!a.out_path.empty()) {
    write_text_file(a.out_path, value_table_to_json(*vt).dump(1) + "\n");
    out << "value table written to " << a.out_path << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string learner = "q:0.9:0";
  int episodes = 10000;
  double epsilon = 0.1;
  int max_steps = 0;
  double r_max = 0.0;
  double margin = 0.1;
  std::string logs_path;
};

int cmd_simulate(const SimulateArgs& a, Shared& shared, std::ostream& out) {
  const auto spec = parse_learner(a.learner);
  const auto env = resolve_env(shared.env_path);
  const std::uint64_t seed = shared.resolve_seed(out);
  EpisodeConfig cfg;
  cfg.epsilon = a.epsilon;
  cfg.seed = seed;
  cfg.max_steps = a.max_steps > 0 ? a.max_steps : kUnboundedSteps;
  cfg.r_max = a.r_max > 0.0 ? a.r_max : kUnboundedReward;
  if (std::isfinite(cfg.r_max) && !(a.margin < cfg.r_max)) throw UsageError("--margin must be below --r-max");

  const auto t0 = std::chrono::steady_clock::now();
  const auto vt = solve_dog(env, a.epsilon, 1e-10);
  RealizedTeacherPolicy policy;
  policy.value_table = vt;
  policy.margin = a.margin;
  policy.r_max = cfg.r_max;
  policy.learner_spec = spec;
  policy.fallback_to_feasible = std::isfinite(cfg.r_max);
  std::vector<SessionLog> logs;
  const auto mc = monte_carlo_td(env, spec, policy, a.episodes, cfg, shared.threads,
                                 a.logs_path.empty() ? nullptr : &logs);
  const double elapsed = seconds_since(t0);

  out << std::setprecision(6);
  out << "learner: " << to_string(spec) << "\n";
  out << "max steps: " << steps_or_unbounded(cfg.max_steps) << "  r_max: " << unbounded_or(cfg.r_max)
      << "  margin: " << a.margin << "\n";
  out << "episodes: " << mc.n_episodes << "  successes: " << mc.n_success << "  success rate: " << mc.success_rate
      << "\n";
  out << "mean steps: " << mc.mean_steps << "  std error: " << mc.std_error << "  95% CI: [" << mc.ci_low << ", "
      << mc.ci_high << "]\n";
  out << "solver teaching dimension: " << teaching_dimension(*vt, env) << "\n";
  out << "max |reward|: " << mc.max_abs_reward << "\n";
  out << std::setprecision(3) << "wall time: " << elapsed << " s\n";
  if (!a.logs_path.empty()) {
    for (std::size_t i = 0; i < logs.size(); ++i) {
      logs[i].meta["participant_id"] = "simulated";
      logs[i].meta["episode"] = static_cast<int>(i);
    }
    write_session_log_file(a.logs_path, logs);
    out << "logs written to " << a.logs_path << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EquivalenceArgs {
  std::vector<std::string> learners = kEquivalenceLearners;
  int episodes = 10000;
  double epsilon = 0.1;
  double margin = 0.1;
  std::string out_path;
};

int cmd_equivalence(const EquivalenceArgs& a, Shared& shared, std::ostream& out) {
  std::vector<LearnerSpec> specs;
  for (const auto& l : a.learners) specs.push_back(parse_learner(l));
  const auto env = resolve_env(shared.env_path);
  EpisodeConfig cfg;
  cfg.epsilon = a.epsilon;
  cfg.seed = shared.resolve_seed(out);
  cfg.max_steps = kUnboundedSteps;
  cfg.r_max = kUnboundedReward;
  const auto vt = solve_dog(env, a.epsilon, 1e-10);
  const auto report = verify_equivalence(env, specs, vt, a.episodes, cfg, a.margin, shared.threads);

  std::ostringstream csv;
  csv << std::setprecision(10) << "learner,episodes,successes,mean_steps,std_error,ci_low,ci_high\n";
  out << std::setprecision(6) << "solver teaching dimension: " << teaching_dimension(*vt, env) << "\n";
  out << std::left << std::setw(14) << "learner" << std::setw(12) << "mean" << std::setw(12) << "std error"
      << "95% CI\n";
  for (const auto& e : report.entries) {
    const auto& s = e.summary;
    out << std::setw(14) << to_string(e.spec) << std::setw(12) << s.mean_steps << std::setw(12) << s.std_error << "["
        << s.ci_low << ", " << s.ci_high << "]\n";
    csv << to_string(e.spec) << ',' << s.n_episodes << ',' << s.n_success << ',' << s.mean_steps << ','
        << s.std_error << ',' << s.ci_low << ',' << s.ci_high << '\n';
  }
  out << std::right;
  out << "pairwise CI overlap: " << (report.all_overlap ? "all overlap" : "NOT all overlap") << "\n";
  out << "identical step sequences: " << (report.identical_step_sequences ? "yes" : "no") << "\n";
  if (!a.out_path.empty()) {
    write_text_file(a.out_path, csv.str());
    out << "table written to " << a.out_path << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;
};

int cmd_serve(const ServeArgs& a, Shared& shared, std::ostream& out) {
  shared.resolve_seed(out);
  const auto env = resolve_env(shared.env_path);
  SessionService service(a.data_dir.empty() ? std::nullopt : std::optional<std::string>(a.data_dir), env);
  HttpServer server(service);
  const int port = server.bind(a.host, a.port);
  out << "listening on http://" << a.host << ':' << port << "\n";
  if (!a.data_dir.empty()) out << "session logs in " << a.data_dir << "\n";
  out.flush();
  server.listen();
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::string in_dir;
  std::string out_path;
  int optimal_length = 0;
  int do_nothing_threshold = kDefaultDoNothingThreshold;
  double epsilon = 0.1;
  std::string exclusions_path;
};

int cmd_stats(const StatsArgs& a, Shared& shared, std::ostream& out) {
  if (a.in_dir.empty()) throw UsageError("--in is required (or set TEACHLAB_DATA_DIR)");
  shared.resolve_seed(out);
  const auto env = resolve_env(shared.env_path);
  int opt_len = a.optimal_length;
  if (opt_len <= 0) opt_len = optimal_length(*solve_dog(env, a.epsilon, 1e-10), env);
  const auto records = load_participants(a.in_dir);
  const auto report = exclusion_filter(records, opt_len, a.do_nothing_threshold);
  const auto rows = compute_condition_stats(report.kept);

  out << "participants loaded: " << records.size() << "  kept: " << report.kept.size() << "\n";
  out << "optimal length: " << opt_len << "  do-nothing threshold: " << a.do_nothing_threshold << "\n";
  for (const auto& e : report.excluded) {
    out << "  excluded " << e.participant_id;
    if (e.dog_index >= 0) out << " dog " << e.dog_index;
    out << ": " << to_string(e.reason) << "\n";
  }
  out << std::fixed << std::setprecision(1);
  for (const auto& r : rows) {
    out << std::left << std::setw(6) << r.condition << std::setw(5) << (r.sync ? "on" : "off") << std::right
        << " subjects " << std::setw(4) << r.n_subjects << "  success " << std::setw(5) << r.success_rate << "% ["
        << r.success_ci.low << ", " << r.success_ci.high << "]";
    if (r.mean_steps) {
      out << "  steps " << *r.mean_steps << " [" << r.steps_ci.low << ", " << r.steps_ci.high << "]";
    } else {
      out << "  steps -";
    }
    out << "\n";
  }
  out.unsetf(std::ios::fixed);
  if (!a.out_path.empty()) {
    write_text_file(a.out_path, stats_to_csv(rows));
    out << "table written to " << a.out_path << "\n";
  }
  if (!a.exclusions_path.empty()) {
    std::ostringstream csv;
    csv << "participant_id,dog_index,reason\n";
    for (const auto& e : report.excluded) {
      csv << e.participant_id << ',' << e.dog_index << ',' << to_string(e.reason) << '\n';
    }
    write_text_file(a.exclusions_path, csv.str());
  }
  return kExitOk;
}

struct PermuteArgs {
  std::string in_dir;
  std::string participant;
  int n = 1000;
  std::string out_path;
};

int cmd_permute(const PermuteArgs& a, Shared& shared, std::ostream& out) {
  if (a.in_dir.empty()) throw UsageError("--in is required (or set TEACHLAB_DATA_DIR)");
  const std::uint64_t seed = shared.resolve_seed(out);
  const auto env = resolve_env(shared.env_path);
  const auto records = load_participants(a.in_dir);
  const ParticipantRecord* chosen = nullptr;
  for (const auto& r : records) {
    if (r.participant_id == a.participant) chosen = &r;
  }
  if (!chosen) throw UsageError("--participant: no participant '" + a.participant + "' under " + a.in_dir);
  const auto res = permutation_test(env, *chosen, a.n, seed, shared.threads);
  int original = 0;
  for (const auto& log : chosen->logs) original += log.outcome().kind == OutcomeKind::kSuccess ? 1 : 0;
  out << "participant: " << res.participant_id << "  condition: " << chosen->condition << "  dogs: "
      << chosen->logs.size() << "  original successes: " << original << "\n";
  out << "simulations: " << res.n_simulations << "  target reached: " << res.n_target_reached << "  fraction: "
      << static_cast<double>(res.n_target_reached) / res.n_simulations << "\n";
  if (!a.out_path.empty()) {
    const nlohmann::json j{{"participant_id", res.participant_id},
                           {"condition", chosen->condition},
                           {"seed", seed},
                           {"n_simulations", res.n_simulations},
                           {"n_target_reached", res.n_target_reached},
                           {"original_successes", original}};
    write_text_file(a.out_path, j.dump(1) + "\n");
    out << "result written to " << a.out_path << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::vector<std::string> learners{"Q0"};
  std::string teacher = "optimal";
  int dogs = 300;
  int dogs_per_participant = 3;
  bool sync = false;
  double epsilon = 0.1;
  int max_steps = 40;
  double r_max = 1.0;
  double margin = 0.1;
  std::string out_dir;
};

int cmd_synth(const SynthArgs& a, Shared& shared, std::ostream& out) {
  std::vector<LearnerSpec> specs;
  for (const auto& l : a.learners) specs.push_back(parse_learner(l));
  SyntheticTeacher teacher;
  try {
    teacher = parse_synthetic_teacher(a.teacher);
  } catch (const std::exception& e) {
    throw UsageError("--teacher: " + std::string(e.what()));
  }
  if (!(a.margin < a.r_max)) throw UsageError("--margin must be below --r-max");
  const std::uint64_t seed = shared.resolve_seed(out);
  const auto env = resolve_env(shared.env_path);
  const auto vt = solve_dog(env, a.epsilon, 1e-10);
  SyntheticOptions opts;
  opts.episode = EpisodeConfig{a.epsilon, a.max_steps, 0, a.r_max};
  opts.dogs_per_participant = a.dogs_per_participant;
  opts.sync = a.sync;
  opts.margin = a.margin;
  std::filesystem::create_directories(a.out_dir);
  for (std::size_t k = 0; k < specs.size(); ++k) {
    auto records = generate_synthetic_logs(env, specs[k], teacher, a.dogs, split_seed(seed, k), vt, opts);
    int successes = 0;
    int dogs = 0;
    for (auto& rec : records) {
      // ids are only unique within one generator call
      rec.participant_id = rec.condition + "-" + rec.participant_id;
      for (auto& log : rec.logs) {
        log.meta["participant_id"] = rec.participant_id;
        successes += log.outcome().kind == OutcomeKind::kSuccess ? 1 : 0;
        ++dogs;
      }
      write_participant((std::filesystem::path(a.out_dir) / (rec.participant_id + ".ndjson")).string(), rec);
    }
    out << "learner " << condition_tag(specs[k]) << ": " << records.size() << " participants, " << dogs
        << " dogs, " << successes << " successes\n";
  }
  out << "logs written to " << a.out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ReplayArgs {
  std::vector<std::string> inputs;
};

std::string describe(const EpisodeOutcome& o) {
  switch (o.kind) {
    case OutcomeKind::kSuccess:
      return "success in " + std::to_string(o.steps_used) + " steps";
    case OutcomeKind::kTimeout:
      return "timeout";
    case OutcomeKind::kInProgress:
      return "in progress";
  }
  return "?";
}

int cmd_replay(const ReplayArgs& a, Shared& shared, std::ostream& out, std::ostream& err) {
  shared.resolve_seed(out);
  std::vector<std::string> files;
  for (const auto& in : a.inputs) {
    if (std::filesystem::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& e : std::filesystem::recursive_directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".ndjson") found.push_back(e.path().string());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(in);
    }
  }
  int bad = 0;
  int total = 0;
  for (const auto& f : files) {
    std::vector<SessionLog> logs;
    try {
      logs = read_session_log_file(f);
    } catch (const std::exception& e) {
      err << f << ": " << e.what() << "\n";
      ++bad;
      continue;
    }
    for (std::size_t i = 0; i < logs.size(); ++i) {
      ++total;
      out << f << " #" << i << " (" << to_string(logs[i].learner_spec) << ", " << logs[i].steps.size()
          << " steps): ";
      try {
        replay(logs[i]);
        out << "ok, " << describe(logs[i].outcome()) << "\n";
      } catch (const std::exception& e) {
        out << "FAILED\n";
        err << f << " #" << i << ": " << e.what() << "\n";
        ++bad;
      }
    }
  }
  out << total << " logs replayed, " << bad << " failures\n";
  return bad == 0 ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"teachlab: optimal teaching of sequential learners", "teachlab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "teachlab 0.1.0");
  Shared shared;

  SolveArgs solve;
  auto* c_solve = app.add_subcommand("solve", "Solve the abstract teaching MDP and print the teaching dimension");
  add_seed(c_solve, shared);
  add_env(c_solve, shared);
  c_solve->add_option("--epsilon", solve.epsilon, "Learner exploration rate")->check(CLI::Range(0.0, 1.0));
  c_solve->add_option("--tol", solve.tol, "Value iteration residual tolerance")->check(CLI::PositiveNumber);
  c_solve->add_option("--out", solve.out_path, "Write the value table as JSON");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Monte Carlo episodes under the realized optimal teacher");
  add_seed(c_sim, shared);
  add_env(c_sim, shared);
  add_threads(c_sim, shared);
  c_sim->add_option("--learner", sim.learner, "Learner spec (q:alpha:gamma, as1[:kappa], as2) or condition tag");
  c_sim->add_option("--episodes", sim.episodes, "Number of episodes")->check(CLI::PositiveNumber);
  c_sim->add_option("--epsilon", sim.epsilon, "Learner exploration rate")->check(CLI::Range(0.0, 1.0));
  c_sim->add_option("--max-steps", sim.max_steps, "Step cap per episode (0: unbounded)")->check(CLI::NonNegativeNumber);
  c_sim->add_option("--r-max", sim.r_max, "Reward bound (0: unbounded)")->check(CLI::NonNegativeNumber);
  c_sim->add_option("--margin", sim.margin, "Rank separation used when realizing rewards")->check(CLI::PositiveNumber);
  c_sim->add_option("--logs", sim.logs_path, "Write every episode's session log (NDJSON)");

  EquivalenceArgs eq;
  auto* c_eq = app.add_subcommand("equivalence", "Compare teaching dimension estimates across learners");
  add_seed(c_eq, shared);
  add_env(c_eq, shared);
  add_threads(c_eq, shared);
  c_eq->add_option("--learners", eq.learners, "Learner specs to compare")->expected(1, -1);
  c_eq->add_option("--episodes", eq.episodes, "Episodes per learner")->check(CLI::PositiveNumber);
  c_eq->add_option("--epsilon", eq.epsilon, "Learner exploration rate")->check(CLI::Range(0.0, 1.0));
  c_eq->add_option("--margin", eq.margin, "Rank separation")->check(CLI::PositiveNumber);
  c_eq->add_option("--out", eq.out_path, "Write the per-learner table as CSV");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Run the session backend over HTTP");
  add_seed(c_serve, shared);
  add_env(c_serve, shared);
  c_serve->add_option("--host", serve.host, "Bind address");
  c_serve->add_option("--port", serve.port, "Port (0: any free port)")->check(CLI::Range(0, 65535));
  c_serve->add_option("--data-dir", serve.data_dir, "Directory for append-only session logs")
      ->envname("TEACHLAB_DATA_DIR");

  auto* c_analyze = app.add_subcommand("analyze", "Analyze session logs");
  c_analyze->require_subcommand(1);

  StatsArgs stats;
  auto* c_stats = c_analyze->add_subcommand("stats", "Apply exclusions and tabulate per-condition statistics");
  add_seed(c_stats, shared);
  add_env(c_stats, shared);
  c_stats->add_option("--in", stats.in_dir, "Directory of session logs")->envname("TEACHLAB_DATA_DIR");
  c_stats->add_option("--out", stats.out_path, "Write the table as CSV");
  c_stats->add_option("--exclusions", stats.exclusions_path, "Write the exclusion list as CSV");
  c_stats->add_option("--optimal-length", stats.optimal_length, "Faster-than-optimal cutoff (0: from the solver)")
      ->check(CLI::NonNegativeNumber);
  c_stats->add_option("--do-nothing-threshold", stats.do_nothing_threshold, "Do-nothing count that excludes")
      ->check(CLI::IsMember({36, 37}));
  c_stats->add_option("--epsilon", stats.epsilon, "Exploration rate for the solver cutoff")
      ->check(CLI::Range(0.0, 1.0));

  PermuteArgs perm;
  auto* c_perm = c_analyze->add_subcommand("permute", "Feedback permutation test for one participant");
  add_seed(c_perm, shared);
  add_env(c_perm, shared);
  add_threads(c_perm, shared);
  c_perm->add_option("--in", perm.in_dir, "Directory of session logs")->envname("TEACHLAB_DATA_DIR");
  c_perm->add_option("--participant", perm.participant, "Participant id")->required();
  c_perm->add_option("--n", perm.n, "Number of simulations")->check(CLI::PositiveNumber);
  c_perm->add_option("--out", perm.out_path, "Write the result as JSON");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate synthetic session logs from simulated teachers");
  add_seed(c_synth, shared);
  add_env(c_synth, shared);
  c_synth->add_option("--learners", synth.learners, "Learner specs or condition tags")->expected(1, -1);
  c_synth->add_option("--teacher", synth.teacher, "optimal, noisy:<p_flip> or random");
  c_synth->add_option("--dogs", synth.dogs, "Dogs per learner")->check(CLI::PositiveNumber);
  c_synth->add_option("--dogs-per-participant", synth.dogs_per_participant, "Dogs grouped per participant")
      ->check(CLI::PositiveNumber);
  c_synth->add_flag("--sync", synth.sync, "Mark participants as live-preview sessions");
  c_synth->add_option("--epsilon", synth.epsilon, "Learner exploration rate")->check(CLI::Range(0.0, 1.0));
  c_synth->add_option("--max-steps", synth.max_steps, "Step cap per dog")->check(CLI::PositiveNumber);
  c_synth->add_option("--r-max", synth.r_max, "Reward bound")->check(CLI::PositiveNumber);
  c_synth->add_option("--margin", synth.margin, "Rank separation")->check(CLI::PositiveNumber);
  c_synth->add_option("--out", synth.out_dir, "Output directory")->required();

  ReplayArgs rep;
  auto* c_replay = app.add_subcommand("replay", "Re-run session logs and check every recorded table");
  add_seed(c_replay, shared);
  c_replay->add_option("inputs", rep.inputs, "Log files or directories")->required()->check(CLI::ExistingPath);

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "usage error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (c_solve->parsed()) return cmd_solve(solve, shared, out);
    if (c_sim->parsed()) return cmd_simulate(sim, shared, out);
    if (c_eq->parsed()) return cmd_equivalence(eq, shared, out);
    if (c_serve->parsed()) return cmd_serve(serve, shared, out);
    if (c_stats->parsed()) return cmd_stats(stats, shared, out);
    if (c_perm->parsed()) return cmd_permute(perm, shared, out);
    if (c_synth->parsed()) return cmd_synth(synth, shared, out);
    if (c_replay->parsed()) return cmd_replay(rep, shared, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace teachlab::cli
