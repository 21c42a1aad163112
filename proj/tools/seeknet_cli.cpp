// Command-line front door: run a scenario, sweep a parameter across values
// and seeds, or validate a scenario file without running it.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seeknet/seeknet.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::uint64_t resolve_seed(const seeknet::Scenario& sc, bool seed_set,
                           std::uint64_t seed_flag) {
  if (seed_set) return seed_flag;
  if (const char* env = std::getenv("SEEKNET_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return sc.sim.seed;
}

// Navigates a dotted path with optional [index] steps, e.g.
// "sessions[0].payload_bytes", and assigns the parsed value at the leaf.
void set_json_path(nlohmann::json& doc, const std::string& path,
                   const nlohmann::json& value) {
  nlohmann::json* cur = &doc;
  std::size_t i = 0;
  while (i < path.size()) {
    std::size_t j = i;
    while (j < path.size() && path[j] != '.' && path[j] != '[') ++j;
    const std::string key = path.substr(i, j - i);
    if (key.empty()) throw std::runtime_error("bad --param path: " + path);
    const bool leaf_candidate = j >= path.size();
    if (leaf_candidate) {
      (*cur)[key] = value;
      return;
    }
    cur = &(*cur)[key];
    while (j < path.size() && path[j] == '[') {
      const std::size_t close = path.find(']', j);
      if (close == std::string::npos) {
        throw std::runtime_error("bad --param path: " + path);
      }
      const std::size_t idx = std::stoul(path.substr(j + 1, close - j - 1));
      if (!cur->is_array() || idx >= cur->size()) {
        throw std::runtime_error("--param path indexes a missing element: " + path);
      }
      if (close + 1 >= path.size()) {
        (*cur)[idx] = value;
        return;
      }
      cur = &(*cur)[idx];
      j = close + 1;
    }
    if (j < path.size() && path[j] == '.') ++j;
    i = j;
  }
  throw std::runtime_error("bad --param path: " + path);
}

nlohmann::json parse_value_literal(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    return nlohmann::json(text);  // bare strings are fine
  }
}

int run_one(const seeknet::Scenario& sc, std::uint64_t seed,
            const std::string& out_dir, const std::string& format,
            const std::string& trace_path) {
  seeknet::validate_scenario(sc);
  seeknet::RunResult result = seeknet::run(sc, seed);
  seeknet::MetricsReport rep = seeknet::summarize(result.trace, sc);
  rep.relay = seeknet::relay_share_series(result.trace, sc.sim.duration_s);
  seeknet::emit_report(rep, out_dir);
  if (!trace_path.empty()) {
    std::ofstream os(trace_path);
    if (!os) throw std::runtime_error("cannot write " + trace_path);
    result.trace.write_ndjson(os);
  }
  if (format == "json") {
    std::cout << seeknet::detail_metrics::summary_json(rep).dump(2) << '\n';
  } else {
    seeknet::detail_metrics::write_summary_csv(rep, std::cout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seeknet: packet-level simulator for a cross-layer "
               "energy-aware mesh stack"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = "out";
  std::string format = "csv";
  std::string arq;
  std::string trace_path;
  std::uint64_t seed_flag = 0;
  bool seed_set = false;

  auto* run_cmd = app.add_subcommand("run", "execute one seeded run");
  run_cmd->add_option("--scenario", scenario_path, "scenario JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", seed_flag, "RNG seed (overrides file and env)")
      ->each([&seed_set](const std::string&) { seed_set = true; });
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_option("--format", format, "stdout summary format")
      ->check(CLI::IsMember({"csv", "json"}));
  run_cmd->add_option("--arq", arq, "override the MAC ARQ switch")
      ->check(CLI::IsMember({"on", "off"}));
  run_cmd->add_option("--trace", trace_path, "dump the event trace (ndjson)");

  std::string param;
  std::string values_csv;
  int sweep_seeds = 1;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "run a parameter sweep, one row per (value, seed)");
  sweep_cmd->add_option("--scenario", scenario_path, "scenario JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  sweep_cmd->add_option("--param", param, "dotted path, e.g. sessions[0].payload_bytes")
      ->required();
  sweep_cmd->add_option("--values", values_csv, "comma-separated values")->required();
  sweep_cmd->add_option("--seeds", sweep_seeds, "seeds per value")
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--seed", seed_flag, "base seed")
      ->each([&seed_set](const std::string&) { seed_set = true; });
  sweep_cmd->add_option("--out", out_dir, "output directory");
  sweep_cmd->add_option("--arq", arq, "override the MAC ARQ switch")
      ->check(CLI::IsMember({"on", "off"}));

  auto* validate_cmd =
      app.add_subcommand("validate", "check a scenario file without running");
  validate_cmd->add_option("--scenario", scenario_path, "scenario JSON file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate_cmd->parsed()) {
      seeknet::Scenario sc = seeknet::parse_scenario(read_file(scenario_path));
      seeknet::validate_scenario(sc);
      std::cout << "ok: " << sc.nodes.size() << " nodes, "
                << sc.sessions.size() << " sessions, " << sc.sim.duration_s
                << " s\n";
      return 0;
    }

    if (run_cmd->parsed()) {
      seeknet::Scenario sc = seeknet::parse_scenario(read_file(scenario_path));
      if (!arq.empty()) sc.mac.arq_enabled = arq == "on";
      return run_one(sc, resolve_seed(sc, seed_set, seed_flag), out_dir,
                     format, trace_path);
    }

    // sweep
    const std::string text = read_file(scenario_path);
    std::vector<std::string> values;
    {
      std::stringstream ss(values_csv);
      std::string item;
      while (std::getline(ss, item, ',')) values.push_back(item);
    }
    if (values.empty()) throw std::runtime_error("--values is empty");

    std::filesystem::create_directories(out_dir);
    std::ofstream table(std::filesystem::path(out_dir) / "sweep_summary.csv");
    if (!table) throw std::runtime_error("cannot write sweep_summary.csv");
    const char* header =
        "param,value,seed,sent,received,reliability,goodput_bps,"
        "normalized_throughput\n";
    table << header;
    std::cout << header;
    for (const std::string& v : values) {
      nlohmann::json doc = nlohmann::json::parse(text);
      set_json_path(doc, param, parse_value_literal(v));
      seeknet::Scenario sc = seeknet::parse_scenario(doc.dump());
      if (!arq.empty()) sc.mac.arq_enabled = arq == "on";
      seeknet::validate_scenario(sc);
      const std::uint64_t base = resolve_seed(sc, seed_set, seed_flag);
      for (int k = 0; k < sweep_seeds; ++k) {
        const std::uint64_t seed = base + static_cast<std::uint64_t>(k);
        seeknet::RunResult result = seeknet::run(sc, seed);
        const seeknet::MetricsReport rep = seeknet::summarize(result.trace, sc);
        char line[256];
        std::snprintf(line, sizeof(line), "%s,%s,%llu,%lld,%lld,%.9g,%.9g,%.9g\n",
                      param.c_str(), v.c_str(),
                      static_cast<unsigned long long>(seed),
                      static_cast<long long>(rep.aggregate.sent),
                      static_cast<long long>(rep.aggregate.received),
                      rep.aggregate.reliability.value_or(0.0),
                      rep.aggregate.goodput_bps,
                      rep.aggregate.normalized_throughput);
        table << line;
        std::cout << line;
      }
    }
    return 0;
  } catch (const seeknet::SyntaxError& e) {
    std::cerr << "scenario error: " << e.what() << '\n';
    return 2;
  } catch (const seeknet::SchemaError& e) {
    std::cerr << "scenario error: " << e.what() << '\n';
    return 2;
  } catch (const seeknet::ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
