// SPDX-License-Identifier: Apache-2.0
//
// fedlmd command line: single runs, method comparisons, partition
// inspection, and the finite-difference gradient suite.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedlmd/errors.hpp"
#include "fedlmd/experiment.hpp"
#include "fedlmd/gradcheck.hpp"

using namespace fedlmd;

namespace {

// Pulls `--section.key value` / `--section.key=value` overrides out of argv
// so any config field can be set from the command line.
std::vector<std::string> extract_overrides(const std::vector<std::string>& args,
                                           std::map<std::string, std::string>& overrides) {
  const auto keys = config_keys();
  auto is_key = [&](const std::string& s) {
    return std::find(keys.begin(), keys.end(), s) != keys.end();
  };
  std::vector<std::string> rest;
  for (size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) == 0) {
      const std::string body = a.substr(2);
      const size_t eq = body.find('=');
      if (eq != std::string::npos && is_key(body.substr(0, eq))) {
        overrides[body.substr(0, eq)] = body.substr(eq + 1);
        continue;
      }
      if (is_key(body)) {
        if (i + 1 >= args.size())
          throw ConfigError("flag --" + body + " needs a value");
        overrides[body] = args[++i];
        continue;
      }
    }
    rest.push_back(a);
  }
  return rest;
}

RunConfig load_config(const std::string& path, const std::map<std::string, std::string>& ovr) {
  RunConfig cfg = path.empty() ? RunConfig{} : parse_config_file(path);
  apply_overrides(cfg, ovr);
  check_config(cfg);
  return cfg;
}

MethodSpec parse_method(const std::string& text) {
  MethodSpec m;
  const size_t colon = text.find(':');
  m.name = text.substr(0, colon == std::string::npos ? text.size() : colon);
  if (m.name.empty()) throw ConfigError("method needs a name: '" + text + "'");
  if (colon != std::string::npos) {
    std::string rest = text.substr(colon + 1);
    size_t at = 0;
    while (at < rest.size()) {
      size_t semi = rest.find(';', at);
      if (semi == std::string::npos) semi = rest.size();
      const std::string pair = rest.substr(at, semi - at);
      const size_t eq = pair.find('=');
      if (eq == std::string::npos)
        throw ConfigError("method override must be key=value: '" + pair + "'");
      m.overrides[pair.substr(0, eq)] = pair.substr(eq + 1);
      at = semi + 1;
    }
  }
  return m;
}

int cmd_run(const std::string& config_path, const std::map<std::string, std::string>& ovr) {
  ExperimentResult res = run_experiment(load_config(config_path, ovr), true);
  std::printf("run complete: best_acc=%.4f at round %d over %zu rounds\n", res.best_acc,
              res.best_round, res.records.size());
  std::printf("outputs: %s\n", res.run_dir.c_str());
  return 0;
}

int cmd_compare(const std::string& config_path, const std::vector<std::string>& method_args,
                std::string baseline, const std::vector<std::string>& sweep_args,
                const std::map<std::string, std::string>& ovr) {
  RunConfig base = load_config(config_path, ovr);
  std::vector<MethodSpec> methods;
  for (const auto& m : method_args) methods.push_back(parse_method(m));
  if (methods.empty()) throw ConfigError("compare needs at least one --method");
  if (baseline.empty()) baseline = methods.front().name;
  std::map<std::string, std::vector<std::string>> sweeps;
  for (const auto& s : sweep_args) {
    const size_t eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("sweep must be key=v1,v2,...: '" + s + "'");
    std::vector<std::string> values;
    std::string rest = s.substr(eq + 1);
    size_t at = 0;
    while (at <= rest.size()) {
      size_t comma = rest.find(',', at);
      if (comma == std::string::npos) comma = rest.size();
      values.push_back(rest.substr(at, comma - at));
      at = comma + 1;
    }
    sweeps[s.substr(0, eq)] = values;
  }
  ComparisonResult res = run_comparison(base, methods, baseline, sweeps, true);
  std::printf("%-16s %-10s %-10s %s\n", "method", "best_acc", "rounds", "speedup");
  for (const auto& s : res.summaries) {
    char speed[32];
    if (s.speedup.failed)
      std::snprintf(speed, sizeof(speed), "Failed");
    else
      std::snprintf(speed, sizeof(speed), "%.2fx", s.speedup.ratio);
    std::printf("%-16s %-10.4f %-10d %s\n", s.name.c_str(), s.best_acc,
                s.speedup.method_rounds, speed);
  }
  std::printf("speedup table: %s\n", res.speedup_csv_path.c_str());
  return 0;
}

int cmd_partition_inspect(const std::string& config_path, const std::string& json_out,
                          const std::map<std::string, std::string>& ovr) {
  RunConfig cfg = resolve_config(load_config(config_path, ovr));
  RunInputs in = build_inputs(cfg);
  const int C = in.train.num_classes;
  std::printf("%-8s %-8s %-24s counts\n", "client", "n", "majority");
  for (const auto& p : in.partitions) {
    std::string maj;
    for (int lbl : p.majority_set) maj += (maj.empty() ? "" : ",") + std::to_string(lbl);
    std::printf("%-8d %-8lld %-24s", p.client_id, static_cast<long long>(p.total()),
                maj.empty() ? "-" : maj.c_str());
    for (int c = 0; c < C; ++c)
      std::printf(" %lld", static_cast<long long>(p.label_counts[static_cast<size_t>(c)]));
    std::printf("\n");
  }
  if (!json_out.empty()) {
    std::ofstream(json_out) << partition_export_json(in.partitions);
    std::printf("exported: %s\n", json_out.c_str());
  }
  return 0;
}

int cmd_gradcheck(int samples, int net_samples, uint64_t seed) {
  std::printf("loss gradient checks (%d instances each):\n", samples);
  auto loss_reports = run_loss_gradchecks(samples, seed);
  for (const auto& r : loss_reports) std::printf("  %s\n", format_report(r).c_str());
  std::printf("network gradient checks (%d samples each):\n", net_samples);
  auto net_reports = run_network_gradchecks(net_samples, seed);
  for (const auto& r : net_reports) std::printf("  %s\n", format_report(r).c_str());
  const bool ok = all_passed(loss_reports) && all_passed(net_reports);
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FedLMD federated learning simulator"};
  app.require_subcommand(1);

  std::map<std::string, std::string> overrides;
  std::vector<std::string> raw(argv + 1, argv + argc);
  std::vector<std::string> rest;
  try {
    rest = extract_overrides(raw, overrides);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  std::string config_path, baseline, json_out;
  std::vector<std::string> method_args, sweep_args;
  int samples = 120, net_samples = 30;
  uint64_t seed = 42;

  auto* run_cmd = app.add_subcommand("run", "execute a single experiment");
  run_cmd->add_option("--config", config_path, "config file (flat section.key = value)");

  auto* cmp_cmd = app.add_subcommand("compare", "run several methods on shared partitions");
  cmp_cmd->add_option("--config", config_path, "base config file");
  cmp_cmd->add_option("--method", method_args,
                      "method NAME[:key=value[;key=value]...] (repeatable)");
  cmp_cmd->add_option("--baseline", baseline, "baseline method name (default: first method)");
  cmp_cmd->add_option("--sweep", sweep_args, "grid sweep key=v1,v2,... (repeatable)");

  auto* pi_cmd = app.add_subcommand("partition-inspect", "dump per-client label statistics");
  pi_cmd->add_option("--config", config_path, "config file");
  pi_cmd->add_option("--json", json_out, "also export partition JSON to this path");

  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gc_cmd->add_option("--samples", samples, "instances per loss kind");
  gc_cmd->add_option("--net-samples", net_samples, "samples per architecture/head");
  gc_cmd->add_option("--seed", seed, "suite seed");

  std::vector<const char*> cargs;
  cargs.push_back(argv[0]);
  for (const auto& a : rest) cargs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run_cmd->parsed()) return cmd_run(config_path, overrides);
    if (cmp_cmd->parsed()) return cmd_compare(config_path, method_args, baseline, sweep_args, overrides);
    if (pi_cmd->parsed()) return cmd_partition_inspect(config_path, json_out, overrides);
    if (gc_cmd->parsed()) return cmd_gradcheck(samples, net_samples, seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
