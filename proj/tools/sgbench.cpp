// sgbench: generate synthetic datasets/workloads, build the indexes, and run
// the benchmark suites (bench / shift / ablate) with machine-readable reports.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sgrid/bench.hpp"
#include "sgrid/io.hpp"
#include "sgrid/rng.hpp"
#include "sgrid/synthetic.hpp"

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sgrid::ConfigError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw sgrid::ConfigError("cannot open " + path + " for writing");
  out << text;
}

// Pull inline optimizer traces out of the report into sidecar files.
void extract_traces(json& node, const std::string& prefix, int& counter) {
  if (node.is_object()) {
    if (node.contains("trace_jsonl")) {
      std::string trace = node["trace_jsonl"].get<std::string>();
      node.erase("trace_jsonl");
      if (!trace.empty() && !prefix.empty()) {
        std::string name = node.contains("name") ? node["name"].get<std::string>()
                                                 : std::to_string(counter);
        std::string path = prefix + "." + name + ".trace.jsonl";
        write_file(path, trace);
        node["trace_ref"] = path;
        ++counter;
      }
    }
    for (auto& [k, v] : node.items()) extract_traces(v, prefix, counter);
  } else if (node.is_array()) {
    for (auto& v : node) extract_traces(v, prefix, counter);
  }
}

void emit_report(json report, const std::string& out_path) {
  int counter = 0;
  extract_traces(report, out_path, counter);
  std::string text = report.dump(2) + "\n";
  if (out_path.empty())
    std::cout << text;
  else
    write_file(out_path, text);
}

std::vector<std::string> split_names(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skewgrid benchmark harness"};
  app.require_subcommand(1);

  uint64_t seed = 11;
  app.add_option("--seed", seed, "global RNG seed")->capture_default_str();

  // gen-data
  auto* gen_data = app.add_subcommand("gen-data", "generate a synthetic dataset");
  std::string gd_spec, gd_out;
  gen_data->add_option("--spec", gd_spec, "generator spec JSON")->required();
  gen_data->add_option("--out", gd_out, "output dataset file")->required();

  // gen-workload
  auto* gen_wl = app.add_subcommand("gen-workload", "generate a synthetic workload");
  std::string gw_spec, gw_data, gw_out;
  gen_wl->add_option("--spec", gw_spec, "workload spec JSON")->required();
  gen_wl->add_option("--data", gw_data, "dataset file")->required();
  gen_wl->add_option("--out", gw_out, "output workload JSON")->required();

  // shared bench-ish flags
  std::string data_path, workload_path, out_path;
  std::string indexes_csv = "tsunami,flood,kdtree,clustered,fullscan";
  double w0 = -1, w1 = -1;
  uint64_t budget = 0;
  bool page_sweep = false;
  uint64_t page_size = 4096;
  bool calibrate = false;
  bool inject_fault = false;
  int passes = 3;

  auto add_bench_flags = [&](CLI::App* cmd, bool with_indexes) {
    cmd->add_option("--data", data_path, "dataset file")->required();
    cmd->add_option("--out", out_path, "report JSON path (stdout if omitted)");
    cmd->add_option("--budget", budget, "total grid cell budget (0 = auto)");
    cmd->add_option("--w0", w0, "cost-weight override: seconds per cell range");
    cmd->add_option("--w1", w1, "cost-weight override: seconds per point-dim");
    cmd->add_flag("--page-size-sweep", page_sweep, "sweep kd-tree page sizes 2^7..2^17");
    cmd->add_option("--page-size", page_size, "kd-tree page size when not sweeping");
    cmd->add_option("--passes", passes, "timed passes per workload");
    if (with_indexes)
      cmd->add_option("--indexes", indexes_csv, "comma-separated index list")
          ->capture_default_str();
  };

  auto* bench = app.add_subcommand("bench", "build, verify, and time indexes");
  add_bench_flags(bench, true);
  bench->add_option("--workload", workload_path, "workload JSON")->required();
  bench->add_flag("--calibrate", calibrate, "calibrate cost weights on a pilot grid");
  bench->add_flag("--inject-fault", inject_fault,
                  "testing aid: corrupt a lookup table to force a verification failure");

  auto* shift = app.add_subcommand("shift", "workload shift: bench A, degrade on B, rebuild");
  std::string wl_a, wl_b;
  add_bench_flags(shift, false);
  shift->add_option("--workload-a", wl_a, "initial workload JSON")->required();
  shift->add_option("--workload-b", wl_b, "shifted workload JSON")->required();

  auto* ablate = app.add_subcommand("ablate", "component lesion + optimizer comparison");
  add_bench_flags(ablate, false);
  ablate->add_option("--workload", workload_path, "workload JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen_data->parsed()) {
      std::string text = read_file(gd_spec);
      auto spec = sgrid::DataGenSpec::from_json_text(text);
      auto ds = sgrid::generate_synthetic(spec, seed);
      sgrid::write_dataset(ds, gd_out);
      std::cerr << "wrote " << gd_out << " (" << ds.n << " rows, " << ds.d << " dims)\n";
      return 0;
    }
    if (gen_wl->parsed()) {
      std::string text = read_file(gw_spec);
      auto spec = sgrid::WorkloadGenSpec::from_json_text(text);
      auto ds = sgrid::read_dataset(gw_data);
      auto w = sgrid::generate_workload(spec, ds, seed);
      sgrid::write_workload(w, gw_out);
      std::cerr << "wrote " << gw_out << " (" << w.queries.size() << " queries)\n";
      return 0;
    }

    sgrid::BenchOptions opts;
    opts.seed = seed;
    opts.cell_budget = budget;
    opts.page_size_sweep = page_sweep;
    opts.page_size = page_size;
    opts.timed_passes = passes;
    opts.inject_fault = inject_fault;
    if (w0 >= 0) opts.weights.w0 = w0;
    if (w1 >= 0) opts.weights.w1 = w1;
    opts.calibrate = calibrate && w0 < 0 && w1 < 0;
    opts.dataset_hash = sgrid::fnv1a(data_path.data(), data_path.size());

    auto ds = sgrid::read_dataset(data_path);

    if (bench->parsed()) {
      auto w = sgrid::read_workload(workload_path);
      std::string wtext = read_file(workload_path);
      opts.workload_hash = sgrid::fnv1a(wtext.data(), wtext.size());
      auto report = sgrid::run_bench(ds, w, split_names(indexes_csv), opts);
      emit_report(std::move(report), out_path);
      return 0;
    }
    if (shift->parsed()) {
      auto a = sgrid::read_workload(wl_a);
      auto b = sgrid::read_workload(wl_b);
      auto report = sgrid::run_shift(ds, a, b, opts);
      emit_report(std::move(report), out_path);
      return 0;
    }
    if (ablate->parsed()) {
      auto w = sgrid::read_workload(workload_path);
      // Predicted-vs-actual cost needs machine-specific weights unless the
      // caller pinned them.
      opts.calibrate = w0 < 0 && w1 < 0;
      auto report = sgrid::run_ablate(ds, w, opts);
      emit_report(std::move(report), out_path);
      return 0;
    }
  } catch (const sgrid::VerificationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const sgrid::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const sgrid::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
