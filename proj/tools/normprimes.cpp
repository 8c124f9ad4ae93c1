#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "normprimes/errors.hpp"
#include "normprimes/harness.hpp"

namespace fs = std::filesystem;
using namespace normprimes;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitCompute = 3;
constexpr int kExitCheckpoint = 4;

struct Common {
  std::string config;
  unsigned workers = 0;
  bool workers_given = false;
  std::string out = ".";
  std::string checkpoint;
  std::string format = "csv";
  double checkpoint_interval = 10.0;
  bool progress = false;
};

bool kind_allowed(const std::string& sub, ExperimentKind kind) {
  static const std::multimap<std::string, ExperimentKind> allowed = {
      {"deciles", ExperimentKind::single_prime_deciles},
      {"pairs", ExperimentKind::pairs_by_cone},
      {"compare", ExperimentKind::compare_fields_single},
      {"compare", ExperimentKind::compare_fields_pairs},
      {"zeta", ExperimentKind::zeta_eval},
      {"invariants", ExperimentKind::invariants_table},
      {"residue", ExperimentKind::residue_check},
  };
  auto [lo, hi] = allowed.equal_range(sub);
  for (auto it = lo; it != hi; ++it)
    if (it->second == kind) return true;
  return false;
}

void dump_partial(const ExperimentReport& report, const fs::path& out, const std::string& message) {
  if (report.kind.empty()) return;
  ExperimentReport copy = report;
  copy.status = "error";
  copy.warnings.push_back(message);
  try {
    fs::create_directories(out);
    std::ofstream f(out / (copy.kind + ".partial.json"));
    f << copy.to_json(false);
    std::cerr << "partial report written to " << (out / (copy.kind + ".partial.json")).string() << "\n";
  } catch (const std::exception&) {
  }
}

int run(const std::string& sub, const Common& c) {
  ExperimentReport report;
  try {
    ExperimentConfig cfg;
    if (c.config.empty()) {
      if (sub != "invariants") throw ConfigError("--config is required for " + sub);
      cfg.kind = ExperimentKind::invariants_table;
    } else {
      cfg = ExperimentConfig::load(c.config);
    }
    if (!kind_allowed(sub, cfg.kind))
      throw ConfigError("config kind '" + std::string(to_string(cfg.kind)) + "' cannot run under '" + sub + "'");
    if (c.format != "csv" && c.format != "json") throw ConfigError("--format must be csv or json");

    RunOptions opts;
    opts.workers = c.workers_given ? c.workers : cfg.workers;
    if (!c.checkpoint.empty()) opts.checkpoint = fs::path(c.checkpoint);
    opts.checkpoint_interval = std::chrono::milliseconds(static_cast<long long>(c.checkpoint_interval * 1000));
    if (c.progress)
      opts.on_progress = [](const ProgressEvent& e) {
        std::fprintf(stderr, "shard %zu done, %llu points\n", e.shard, static_cast<unsigned long long>(e.points));
      };

    run_experiment_into(cfg, opts, report);
    for (const auto& p : report.write(c.out, c.format == "json")) std::cout << "wrote " << p.string() << "\n";
    for (const auto& [k, v] : report.summary) std::cout << k << " = " << v << "\n";
    for (const auto& w : report.warnings) std::cout << "warning: " << w << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CheckpointMismatch& e) {
    std::cerr << "checkpoint mismatch: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    dump_partial(report, c.out, e.what());
    return kExitCompute;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counts primes represented by norm forms and compares them with predicted distributions"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Common common;
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"deciles", "single primes per slope window"},
      {"pairs", "pairs of primes in nested cones"},
      {"compare", "compare two or more quadratic fields"},
      {"zeta", "discrete and continuous double zeta values"},
      {"invariants", "class numbers, units and regulators"},
      {"residue", "residue identity check (experimental)"},
  };
  for (const auto& [name, help] : subs) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--config", common.config, "experiment config file");
    s->add_option("--workers", common.workers, "worker threads (0 = all cores)")
        ->each([&](const std::string&) { common.workers_given = true; });
    s->add_option("--out", common.out, "output directory")->capture_default_str();
    s->add_option("--checkpoint", common.checkpoint, "checkpoint file; resumed when present");
    s->add_option("--checkpoint-interval", common.checkpoint_interval, "seconds between checkpoint writes")
        ->capture_default_str();
    s->add_option("--format", common.format, "csv or json")->capture_default_str();
    s->add_flag("--progress", common.progress, "report finished shards on stderr");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  for (const auto* s : app.get_subcommands()) return run(s->get_name(), common);
  return kExitConfig;
}
