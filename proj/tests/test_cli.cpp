#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "navpruner/world.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* path = std::getenv("NAVPRUNER_CLI");
  REQUIRE(path != nullptr);
  return path;
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd =
      env + " " + cli_path() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() /
          ("navpruner_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const {
    return (dir / name).string();
  }
};

}  // namespace

TEST_CASE("gen-world is deterministic and round-trips") {
  TempDir tmp;
  const std::string args =
      "gen-world --viewpoints 30 --episodes 8 --seed 7 --out ";
  CHECK(run_cli(args + (tmp / "w1.json")) == 0);
  CHECK(run_cli(args + (tmp / "w2.json")) == 0);
  CHECK(slurp(tmp / "w1.json") == slurp(tmp / "w2.json"));

  const auto wf = navpruner::load_world(tmp / "w1.json");
  CHECK(wf.world.num_viewpoints() == 30);
  CHECK(wf.episodes.size() == 8);
}

TEST_CASE("gen-world rejects bad configs with exit 2") {
  TempDir tmp;
  CHECK(run_cli("gen-world --viewpoints 1 --out " + (tmp / "w.json")) == 2);
  CHECK(run_cli("gen-world --radius 0 --out " + (tmp / "w.json")) == 2);
  CHECK(run_cli("gen-world --no-such-flag 3") == 2);
}

TEST_CASE("build-memory caps records and round-trips") {
  TempDir tmp;
  REQUIRE(run_cli("gen-world --viewpoints 30 --episodes 12 --seed 3 --out " +
                  (tmp / "w.json")) == 0);
  CHECK(run_cli("build-memory --world " + (tmp / "w.json") + " --cap 5 --out " +
                (tmp / "mem.jsonl")) == 0);

  std::ifstream in(tmp / "mem.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 5);

  CHECK(run_cli("build-memory --world " + (tmp / "nope.json") + " --out " +
                (tmp / "m.jsonl")) == 3);
}

TEST_CASE("train-retriever writes model and loss curve deterministically") {
  TempDir tmp;
  REQUIRE(run_cli("gen-world --viewpoints 30 --episodes 10 --seed 5 --out " +
                  (tmp / "w.json")) == 0);
  const std::string train =
      "train-retriever --world " + (tmp / "w.json") +
      " --epochs 2 --dim 64 --hidden 16 --seed 9 --loss-csv " +
      (tmp / "loss.csv") + " --out ";
  CHECK(run_cli(train + (tmp / "m1.json")) == 0);
  CHECK(run_cli(train + (tmp / "m2.json")) == 0);
  CHECK(slurp(tmp / "m1.json") == slurp(tmp / "m2.json"));

  const std::string loss_csv = slurp(tmp / "loss.csv");
  CHECK(loss_csv.rfind("epoch,mean_loss\n", 0) == 0);

  CHECK(run_cli("train-retriever --world " + (tmp / "w.json") +
                " --epochs 0 --out " + (tmp / "m.json")) == 2);
}

TEST_CASE("eval baseline equals prune-only with k=8") {
  TempDir tmp;
  REQUIRE(run_cli("gen-world --viewpoints 30 --episodes 10 --seed 4 --out " +
                  (tmp / "w.json")) == 0);
  REQUIRE(run_cli("train-retriever --world " + (tmp / "w.json") +
                  " --epochs 2 --dim 64 --hidden 16 --seed 1 --loss-csv " +
                  (tmp / "loss.csv") + " --out " + (tmp / "m.json")) == 0);

  CHECK(run_cli("eval --world " + (tmp / "w.json") +
                " --policy follower:0 --mode baseline --seed 2 --out " +
                (tmp / "base.json")) == 0);
  CHECK(run_cli("eval --world " + (tmp / "w.json") +
                " --policy follower:0 --mode prune-only --k 8 --model " +
                (tmp / "m.json") + " --seed 2 --out " + (tmp / "prune.json")) ==
        0);
  CHECK(slurp(tmp / "base.json") == slurp(tmp / "prune.json"));
  CHECK(slurp(tmp / "base.csv") == slurp(tmp / "prune.csv"));

  // Oracle run reports SR = 100.
  CHECK(run_cli("eval --world " + (tmp / "w.json") +
                " --policy oracle --mode baseline --out " +
                (tmp / "oracle.json")) == 0);
  CHECK(slurp(tmp / "oracle.json").find("\"sr_pct\": 100.0") !=
        std::string::npos);

  // Full mode logs exemplar usage and per-step prune selections.
  REQUIRE(run_cli("build-memory --world " + (tmp / "w.json") + " --out " +
                  (tmp / "mem.jsonl") + " --dim 64") == 0);
  CHECK(run_cli("eval --world " + (tmp / "w.json") +
                " --policy follower:0.3 --mode full --model " +
                (tmp / "m.json") + " --memory " + (tmp / "mem.jsonl") +
                " --seed 2 --out " + (tmp / "full.json")) == 0);
  const std::string full = slurp(tmp / "full.json");
  CHECK(full.find("\"exemplar_usage\"") != std::string::npos);
  CHECK(full.find("\"prune_selections\"") != std::string::npos);

  CHECK(run_cli("eval --world " + (tmp / "w.json") +
                " --mode prune-only --out " + (tmp / "x.json")) == 2);
}

TEST_CASE("eval --jobs does not change the report") {
  TempDir tmp;
  REQUIRE(run_cli("gen-world --viewpoints 30 --episodes 12 --seed 6 --out " +
                  (tmp / "w.json")) == 0);
  CHECK(run_cli("eval --world " + (tmp / "w.json") +
                " --policy follower:0.5 --mode baseline --seed 3 --jobs 1 "
                "--out " +
                (tmp / "r1.json")) == 0);
  CHECK(run_cli("eval --world " + (tmp / "w.json") +
                " --policy follower:0.5 --mode baseline --seed 3 --jobs 8 "
                "--out " +
                (tmp / "r8.json")) == 0);
  CHECK(slurp(tmp / "r1.json") == slurp(tmp / "r8.json"));
  CHECK(slurp(tmp / "r1.csv") == slurp(tmp / "r8.csv"));
}

TEST_CASE("report renders a table row per input") {
  TempDir tmp;
  REQUIRE(run_cli("gen-world --viewpoints 30 --episodes 6 --seed 8 --out " +
                  (tmp / "w.json")) == 0);
  REQUIRE(run_cli("eval --world " + (tmp / "w.json") +
                  " --policy oracle --mode baseline --out " +
                  (tmp / "r.json")) == 0);

  const std::string cmd = cli_path() + std::string(" report ") +
                          (tmp / "r.json") + " > " + (tmp / "table.txt");
  REQUIRE(std::system(cmd.c_str()) == 0);
  const std::string table = slurp(tmp / "table.txt");
  CHECK(table.find("TL_m") != std::string::npos);
  CHECK(table.find("100.00") != std::string::npos);  // SR column
  CHECK(run_cli("report " + (tmp / "missing.json")) == 3);
}

TEST_CASE("config file and NAVPRUNER_SEED precedence") {
  TempDir tmp;
  {
    std::ofstream cfg(tmp / "cfg.json");
    cfg << R"({"viewpoints": 24, "episodes": 5, "seed": 11})";
  }
  // Config supplies unset flags.
  CHECK(run_cli("gen-world --config " + (tmp / "cfg.json") + " --out " +
                (tmp / "a.json")) == 0);
  auto wf = navpruner::load_world(tmp / "a.json");
  CHECK(wf.world.num_viewpoints() == 24);
  CHECK(wf.episodes.size() == 5);

  // Explicit flags beat the config file.
  CHECK(run_cli("gen-world --config " + (tmp / "cfg.json") +
                " --viewpoints 26 --out " + (tmp / "b.json")) == 0);
  CHECK(navpruner::load_world(tmp / "b.json").world.num_viewpoints() == 26);

  // The environment seed beats the flag: same env seed, different --seed,
  // identical output.
  CHECK(run_cli("gen-world --viewpoints 24 --episodes 5 --seed 1 --id-prefix "
                "p_ --out " +
                    (tmp / "c.json"),
                "NAVPRUNER_SEED=99") == 0);
  CHECK(run_cli("gen-world --viewpoints 24 --episodes 5 --seed 2 --id-prefix "
                "p_ --out " +
                    (tmp / "d.json"),
                "NAVPRUNER_SEED=99") == 0);
  CHECK(slurp(tmp / "c.json") == slurp(tmp / "d.json"));
}
