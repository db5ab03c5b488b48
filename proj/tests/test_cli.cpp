#include "modgraph/netio.hpp"
#include "modgraph/network.hpp"

#include "test_util.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <regex>
#include <sstream>

using namespace modgraph;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

// Runs the installed binary inside `dir`; `env` is prepended verbatim.
Run run_cli(const fs::path& dir, const std::string& args, const std::string& env = "") {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" + MODGRAPH_CLI_PATH +
                          "' " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = testutil::read_file(out);
  r.err = testutil::read_file(err);
  return r;
}

json read_json(const fs::path& p) { return json::parse(testutil::read_file(p)); }

std::string data_dir_flag() { return std::string("--data-dir '") + MODGRAPH_DATA_DIR + "'"; }

}  // namespace

TEST_CASE("init writes a seeded network and prints generated seeds") {
  testutil::TempDir tmp("cli");
  Run r = run_cli(tmp.path(), "init --input 20 --hidden 8,6 --classes 3 --seed 5 --out a.mg");
  REQUIRE(r.status == 0);
  CHECK(load_archive(tmp.path() / "a.mg") == make_glorot_network({20, 8, 6, 3}, 5));
  CHECK(r.out.find("seed:") == std::string::npos);

  r = run_cli(tmp.path(), "init --input 20 --hidden 8 --classes 3 --out b.mg");
  REQUIRE(r.status == 0);
  std::smatch m;
  REQUIRE(std::regex_search(r.out, m, std::regex("seed: (\\d+)")));
  const std::uint64_t seed = std::stoull(m[1].str());
  CHECK(load_archive(tmp.path() / "b.mg") == make_glorot_network({20, 8, 3}, seed));
}

TEST_CASE("cluster writes JSON and partition, reproducibly") {
  testutil::TempDir tmp("cli");
  save_archive(testutil::random_network({12, 10, 10, 4}, 3), tmp.path() / "net.mg");
  Run r = run_cli(tmp.path(), "cluster net.mg --seed 1");
  REQUIRE(r.status == 0);
  const json doc = read_json(tmp.path() / "net-k4.json");
  CHECK(doc["k"] == 4);
  CHECK(doc["seed"] == 1);
  std::ostringstream printed;
  printed.precision(6);
  printed << std::fixed << "ncut " << doc["ncut"].get<double>() << "\n";
  CHECK(r.out == printed.str());
  const std::string csv = testutil::read_file(tmp.path() / "net-k4-partition.csv");
  CHECK(csv.rfind("layer,neuron_index,cluster\n", 0) == 0);

  const std::string first = testutil::read_file(tmp.path() / "net-k4.json");
  REQUIRE(run_cli(tmp.path(), "cluster net.mg --seed 1").status == 0);
  CHECK(testutil::read_file(tmp.path() / "net-k4.json") == first);

  REQUIRE(run_cli(tmp.path(), "cluster net.mg --k 2 --seed 1 --eigensolver krylov").status == 0);
  CHECK(read_json(tmp.path() / "net-k2.json")["diagnostics"]["eigensolver"] == "krylov");
  REQUIRE(run_cli(tmp.path(), "cluster net.mg --k 10 --seed 1 --out-dir sub").status == 0);
  CHECK(fs::exists(tmp.path() / "sub" / "net-k10-partition.csv"));
}

TEST_CASE("a config file supplies flags and explicit flags win") {
  testutil::TempDir tmp("cli");
  save_archive(testutil::random_network({12, 10, 10, 4}, 3), tmp.path() / "net.mg");
  testutil::write_file(tmp.path() / "run.toml", "[cluster]\nk = 3\nseed = 9\n");
  REQUIRE(run_cli(tmp.path(), "--config run.toml cluster net.mg").status == 0);
  const json doc = read_json(tmp.path() / "net-k3.json");
  CHECK(doc["seed"] == 9);
  REQUIRE(run_cli(tmp.path(), "--config run.toml cluster net.mg --k 2").status == 0);
  CHECK(read_json(tmp.path() / "net-k2.json")["seed"] == 9);
}

TEST_CASE("shuffle-test output does not depend on the worker count") {
  testutil::TempDir tmp("cli");
  save_archive(testutil::random_network({10, 8, 8, 4}, 6), tmp.path() / "net.mg");
  const std::string base = "shuffle-test net.mg --k 3 --n-shuffles 16 --seed 4 ";
  REQUIRE(run_cli(tmp.path(), base + "--workers 1 --prefix w1").status == 0);
  REQUIRE(run_cli(tmp.path(), base + "--workers 3 --prefix w3").status == 0);
  REQUIRE(run_cli(tmp.path(), base + "--prefix env", "MODGRAPH_WORKERS=4").status == 0);
  for (const char* suffix : {".json", "-null.csv"}) {
    const std::string one = testutil::read_file(tmp.path() / (std::string("w1") + suffix));
    CHECK(testutil::read_file(tmp.path() / (std::string("w3") + suffix)) == one);
    CHECK(testutil::read_file(tmp.path() / (std::string("env") + suffix)) == one);
  }
  const json doc = read_json(tmp.path() / "w1.json");
  CHECK(doc["n_samples"] == 16);
  CHECK(doc["kind"] == "layer");

  REQUIRE(run_cli(tmp.path(), "shuffle-test net.mg --k 3 --n-shuffles 4 --seed 4 --kind nonzero")
              .status == 0);
  CHECK(read_json(tmp.path() / "net-shuffle.json")["kind"] == "nonzero");
}

TEST_CASE("train, cluster and lesion end to end") {
  testutil::TempDir tmp("cli");
  Run r = run_cli(tmp.path(),
                  "train --dataset mnist-subset " + data_dir_flag() +
                      " --examples 800 --hidden 16,16 --epochs 2 --dropout 0.5 --prune"
                      " --prune-epochs 2 --name small --seed 3");
  REQUIRE(r.status == 0);
  CHECK(r.out.find("epoch 4 (prune)") != std::string::npos);
  const LayeredNetwork net = load_archive(tmp.path() / "small.mg");
  CHECK(net.layer_dims == std::vector<int>{784, 16, 16, 10});
  CHECK(fs::exists(tmp.path() / "small-pre-prune.mg"));
  const json summary = read_json(tmp.path() / "small-train.json");
  CHECK(summary["seed"] == 3);
  CHECK(summary["dropout"] == 0.5);
  for (double s : summary["layer_sparsity"]) CHECK(s >= 0.9);
  std::istringstream metrics(testutil::read_file(tmp.path() / "small-metrics.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line)) ++lines;
  CHECK(lines == 5);

  REQUIRE(run_cli(tmp.path(), "cluster small.mg --k 4 --seed 2").status == 0);
  r = run_cli(tmp.path(), "lesion small.mg small-k4-partition.csv --data mnist-subset " +
                              data_dir_flag() +
                              " --examples 400 --n-null 5 --pairs --pair-null 3 --seed 8");
  REQUIRE(r.status == 0);
  const std::string single = testutil::read_file(tmp.path() / "small-lesion-single.csv");
  CHECK(single.rfind("layer,label,acc_diff,p,proportion,type\n", 0) == 0);
  CHECK(fs::exists(tmp.path() / "small-lesion-double.csv"));
  CHECK(testutil::read_file(tmp.path() / "small-lesion-dependencies.dot").rfind("digraph", 0) ==
        0);
  CHECK(read_json(tmp.path() / "small-lesion.json")["seed"] == 8);

  // Identical inputs and seeds give identical reports.
  REQUIRE(run_cli(tmp.path(), "lesion small.mg small-k4-partition.csv --data mnist-subset " +
                                  data_dir_flag() +
                                  " --examples 400 --n-null 5 --seed 8 --prefix again")
              .status == 0);
  CHECK(testutil::read_file(tmp.path() / "again-single.csv") == single);
}

TEST_CASE("random dataset memorization setup") {
  testutil::TempDir tmp("cli");
  const Run r = run_cli(tmp.path(),
                        "train --dataset random --examples 300 --hidden 8 --epochs 1"
                        " --no-shuffle-epochs --seed 1 --name rnd");
  REQUIRE(r.status == 0);
  const json summary = read_json(tmp.path() / "rnd-train.json");
  CHECK(summary["examples"] == 300);
  CHECK(summary["shuffle_each_epoch"] == false);
  CHECK_FALSE(fs::exists(tmp.path() / "rnd-pre-prune.mg"));
}

TEST_CASE("failures exit nonzero with a message") {
  testutil::TempDir tmp("cli");
  Run r = run_cli(tmp.path(), "cluster missing.mg --seed 1");
  CHECK(r.status == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);

  save_archive(testutil::random_network({6, 5, 3}, 1), tmp.path() / "net.mg");
  r = run_cli(tmp.path(), "shuffle-test net.mg --kind rows --seed 1");
  CHECK(r.status == 1);
  CHECK(r.err.find("rows") != std::string::npos);

  CHECK(run_cli(tmp.path(), "shuffle-test net.mg --n-shuffles 0").status != 0);
  CHECK(run_cli(tmp.path(), "train --dataset nowhere --seed 1").status == 1);
  CHECK(run_cli(tmp.path(), "").status != 0);
}
