#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = teachlab::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"solve", "--no-such-flag"}).code == 2);
  CHECK(run({"solve", "--epsilon", "2"}).code == 2);
  CHECK(run({"simulate", "--learner", "q:oops"}).code == 2);
  CHECK(run({"synth", "--learners", "Q0"}).code == 2);  // --out is required
  CHECK(run({"replay", "/definitely/not/here"}).code == 2);
  const auto r = run({"frobnicate"});
  CHECK(r.err.find("usage error") != std::string::npos);
}

TEST_CASE("help exits 0") {
  const auto r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("solve") != std::string::npos);
  CHECK(run({"simulate", "--help"}).code == 0);
}

TEST_CASE("solve prints the seed and the teaching dimension") {
  auto r = run({"solve", "--seed", "5"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("seed: 5\n") != std::string::npos);
  CHECK(r.out.find("teaching dimension: 8.63") != std::string::npos);
  CHECK(r.out.find("abstract states: 324") != std::string::npos);

  r = run({"solve"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("seed: ", 0) == 0);

  const auto dir = fresh_dir("teachlab_cli_solve");
  r = run({"solve", "--seed", "1", "--out", (dir / "vt.json").string()});
  REQUIRE(r.code == 0);
  std::ifstream in(dir / "vt.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["entries"].size() == 324);
  fs::remove_all(dir);
}

TEST_CASE("runtime failures exit 1") {
  const auto dir = fresh_dir("teachlab_cli_fail");
  {
    std::ofstream bad(dir / "env.json");
    bad << "{\"n_states\": 2}";
  }
  // a malformed argument value is still a usage error
  CHECK(run({"solve", "--env", (dir / "env.json").string()}).code == 2);
  CHECK(run({"solve", "--out", "/proc/no/such/dir/vt.json"}).code == 1);
  {
    std::ofstream bad(dir / "broken.ndjson");
    bad << "{\"kind\": \"header\"\n";
  }
  CHECK(run({"replay", (dir / "broken.ndjson").string()}).code == 1);
  fs::remove_all(dir);
}

TEST_CASE("simulate is reproducible from the seed") {
  const auto dir = fresh_dir("teachlab_cli_sim");
  const auto a = run({"simulate", "--seed", "17", "--episodes", "200", "--learner", "Q0", "--max-steps", "40",
                      "--r-max", "1", "--logs", (dir / "a.ndjson").string()});
  const auto b = run({"simulate", "--seed", "17", "--episodes", "200", "--learner", "Q0", "--max-steps", "40",
                      "--r-max", "1", "--logs", (dir / "b.ndjson").string(), "--threads", "3"});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(dir / "a.ndjson") == slurp(dir / "b.ndjson"));
  CHECK(a.out.find("success rate") != std::string::npos);

  const auto rep = run({"replay", dir.string()});
  CHECK(rep.code == 0);
  CHECK(rep.out.find("400 logs replayed, 0 failures") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("synth, stats and permute pipeline") {
  const auto dir = fresh_dir("teachlab_cli_pipe");
  const auto logs = dir / "logs";
  auto r = run({"synth", "--seed", "3", "--learners", "Q0", "AS2", "--dogs", "30", "--teacher", "optimal", "--out",
                logs.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("learner Q0: 10 participants, 30 dogs") != std::string::npos);
  const auto r2 = run({"synth", "--seed", "3", "--learners", "Q0", "AS2", "--dogs", "30", "--teacher", "optimal",
                       "--out", (dir / "again").string()});
  REQUIRE(r2.code == 0);
  for (const auto& e : fs::directory_iterator(logs)) {
    CHECK(slurp(e.path()) == slurp(dir / "again" / e.path().filename()));
  }

  const auto stats_args = std::vector<std::string>{"analyze", "stats", "--in", logs.string(), "--out",
                                                   (dir / "s1.csv").string(), "--exclusions",
                                                   (dir / "x1.csv").string()};
  r = run(stats_args);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("participants loaded: 20") != std::string::npos);
  auto again = stats_args;
  again[5] = (dir / "s2.csv").string();
  again[7] = (dir / "x2.csv").string();
  REQUIRE(run(again).code == 0);
  CHECK(slurp(dir / "s1.csv") == slurp(dir / "s2.csv"));
  CHECK(slurp(dir / "x1.csv") == slurp(dir / "x2.csv"));
  CHECK(slurp(dir / "s1.csv").find("Q0") != std::string::npos);

  r = run({"analyze", "permute", "--seed", "2", "--in", logs.string(), "--participant", "Q0-synthetic-00001", "--n",
           "50", "--out", (dir / "p.json").string()});
  REQUIRE(r.code == 0);
  std::ifstream in(dir / "p.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["n_simulations"] == 50);
  CHECK(run({"analyze", "permute", "--in", logs.string(), "--participant", "nobody"}).code == 2);

  r = run({"replay", logs.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("60 logs replayed, 0 failures") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("equivalence small run") {
  const auto dir = fresh_dir("teachlab_cli_eq");
  const auto r = run({"equivalence", "--seed", "4", "--episodes", "300", "--learners", "q:0.9:0", "as1:1", "as2",
                      "--out", (dir / "eq.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("identical step sequences: yes") != std::string::npos);
  const auto csv = slurp(dir / "eq.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  fs::remove_all(dir);
}

TEST_CASE("the installed binary honours exit codes") {
  CHECK(std::system(TEACHLAB_BINARY " solve --seed 1 > /dev/null") == 0);
  const int status = std::system(TEACHLAB_BINARY " frobnicate 2> /dev/null");
  CHECK(WEXITSTATUS(status) == 2);
}
