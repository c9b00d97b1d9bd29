#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "sgrid/rng.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("sgbench_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int counter;
};
int TempDir::counter = 0;

int run_cli(const std::string& args) {
  std::string cmd = std::string(SGBENCH_BIN) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const char* kDataSpec = R"({"n": 20000, "dims": [
  {"kind":"uniform","lo":0,"hi":100000},
  {"kind":"uniform","lo":0,"hi":100000},
  {"kind":"correlated","base":0,"slope":1.0,"intercept":0.0,"noise_pct":0.05}]})";

const char* kWorkloadSpec = R"({"types":[
  {"count":50, "predicates":[
    {"dim":0,"selectivity":0.1,"center":{"lo":0.75,"hi":1.0}},
    {"dim":2,"selectivity":0.2,"center":{"lo":0.75,"hi":1.0}}]},
  {"count":50, "predicates":[{"dim":1,"selectivity":0.15}]}]})";

}  // namespace

TEST_CASE("cli end to end") {
  TempDir tmp;
  write_text(tmp.file("data.json"), kDataSpec);
  write_text(tmp.file("wl.json"), kWorkloadSpec);

  REQUIRE(run_cli("gen-data --spec " + tmp.file("data.json") + " --seed 5 --out " +
                  tmp.file("d.sgds")) == 0);
  REQUIRE(run_cli("gen-workload --spec " + tmp.file("wl.json") + " --data " + tmp.file("d.sgds") +
                  " --seed 6 --out " + tmp.file("w.json")) == 0);

  SUBCASE("gen-data is deterministic per seed") {
    REQUIRE(run_cli("gen-data --spec " + tmp.file("data.json") + " --seed 5 --out " +
                    tmp.file("d2.sgds")) == 0);
    auto a = slurp(tmp.file("d.sgds"));
    auto b = slurp(tmp.file("d2.sgds"));
    CHECK(sgrid::fnv1a(a.data(), a.size()) == sgrid::fnv1a(b.data(), b.size()));
    REQUIRE(run_cli("gen-data --spec " + tmp.file("data.json") + " --seed 7 --out " +
                    tmp.file("d3.sgds")) == 0);
    auto c = slurp(tmp.file("d3.sgds"));
    CHECK(sgrid::fnv1a(a.data(), a.size()) != sgrid::fnv1a(c.data(), c.size()));
  }

  SUBCASE("cyclic specs exit 2 without writing a file") {
    write_text(tmp.file("cyc.json"), R"({"n": 10, "dims": [
      {"kind":"correlated","base":1,"slope":1.0,"intercept":0.0,"noise_pct":0.0},
      {"kind":"correlated","base":0,"slope":1.0,"intercept":0.0,"noise_pct":0.0}]})");
    CHECK(run_cli("gen-data --spec " + tmp.file("cyc.json") + " --out " + tmp.file("cyc.sgds")) ==
          2);
    CHECK(!fs::exists(tmp.file("cyc.sgds")));
  }

  SUBCASE("bench produces a verified report entry per index") {
    REQUIRE(run_cli("bench --data " + tmp.file("d.sgds") + " --workload " + tmp.file("w.json") +
                    " --indexes tsunami,flood,kdtree,clustered,fullscan --seed 5 --passes 1 "
                    "--out " +
                    tmp.file("report.json")) == 0);
    auto report = json::parse(slurp(tmp.file("report.json")));
    REQUIRE(report["indexes"].size() == 5);
    for (const auto& entry : report["indexes"]) {
      CHECK(entry["verified"].get<bool>());
      CHECK(entry["timing"]["queries_per_sec"].get<double>() > 0);
      CHECK(entry.contains("index_bytes"));
    }
    CHECK(report["environment"]["seed"] == 5);
    // The tsunami trace lands in a sidecar file.
    CHECK(fs::exists(tmp.file("report.json") + ".tsunami.trace.jsonl"));
  }

  SUBCASE("fault injection aborts with exit code 1") {
    CHECK(run_cli("bench --data " + tmp.file("d.sgds") + " --workload " + tmp.file("w.json") +
                  " --indexes tsunami --seed 5 --passes 1 --inject-fault --out " +
                  tmp.file("bad.json")) == 1);
  }

  SUBCASE("unknown index names exit 2") {
    CHECK(run_cli("bench --data " + tmp.file("d.sgds") + " --workload " + tmp.file("w.json") +
                  " --indexes zorder --out " + tmp.file("r.json")) == 2);
  }

  SUBCASE("missing files exit 2") {
    CHECK(run_cli("bench --data /nonexistent.sgds --workload " + tmp.file("w.json")) == 2);
    CHECK(run_cli("nonsense-subcommand") == 2);
  }

  SUBCASE("shift reports the rebuild split") {
    write_text(tmp.file("wl_b.json"), R"({"types":[
      {"count":50, "predicates":[{"dim":1,"selectivity":0.05,"center":{"lo":0.0,"hi":0.25}}]}]})");
    REQUIRE(run_cli("gen-workload --spec " + tmp.file("wl_b.json") + " --data " +
                    tmp.file("d.sgds") + " --seed 9 --out " + tmp.file("wb.json")) == 0);
    REQUIRE(run_cli("shift --data " + tmp.file("d.sgds") + " --workload-a " + tmp.file("w.json") +
                    " --workload-b " + tmp.file("wb.json") + " --seed 5 --passes 1 --out " +
                    tmp.file("shift.json")) == 0);
    auto report = json::parse(slurp(tmp.file("shift.json")));
    CHECK(report["rebuild"].contains("sort_seconds"));
    CHECK(report["rebuild"].contains("optimize_seconds"));
    CHECK(report.contains("workload_a"));
    CHECK(report.contains("workload_b_degraded"));
    CHECK(report.contains("workload_b_rebuilt"));
  }

  SUBCASE("ablate emits lesion and optimizer tables") {
    REQUIRE(run_cli("ablate --data " + tmp.file("d.sgds") + " --workload " + tmp.file("w.json") +
                    " --seed 5 --passes 1 --out " + tmp.file("ablate.json")) == 0);
    auto report = json::parse(slurp(tmp.file("ablate.json")));
    REQUIRE(report["lesion"].size() == 4);
    REQUIRE(report["optimizers"].size() == 4);
    CHECK(report["cost_model"].contains("mean_relative_error"));
    for (const auto& o : report["optimizers"]) {
      CHECK(o["predicted_cost_seconds"].get<double>() > 0);
      CHECK(o["actual_avg_seconds"].get<double>() > 0);
    }
  }
}
