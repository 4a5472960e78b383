#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dpaps/checker.hpp"
#include "dpaps/config.hpp"
#include "dpaps/workloads.hpp"

namespace {

// exit codes
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kWorkloadError = 3;
constexpr int kNetworkError = 4;

void write_output(const dpaps::RunConfig& cfg, const dpaps::StatsReport& report) {
  std::string body = cfg.out_format == "json" ? report.to_json() : report.to_csv();
  if (cfg.out.empty() || cfg.out == "-") {
    std::cout << body;
    return;
  }
  std::ofstream f(cfg.out);
  if (!f) throw dpaps::ConfigError("cannot write " + cfg.out);
  f << body;
}

int run_command(const dpaps::RunConfig& cfg) {
  cfg.validate();

  std::unique_ptr<dpaps::Executor> ex;
  dpaps::SimExecutor* sim = nullptr;
  if (cfg.transport == "sim") {
    auto s = std::make_unique<dpaps::SimExecutor>(cfg.nodes, cfg.workers, cfg.seed,
                                                  cfg.latches, cfg.location_caches);
    if (!cfg.dump_history.empty()) s->set_record_history(true);
    sim = s.get();
    ex = std::move(s);
  } else {
    if (!cfg.dump_history.empty())
      throw dpaps::ConfigError("--dump-history needs the sim transport");
    dpaps::TcpRuntime::Options o;
    o.rank = cfg.rank_id;
    o.peers = cfg.peers;
    o.workers = cfg.workers;
    o.latches = cfg.latches;
    o.caches = cfg.location_caches;
    ex = std::make_unique<dpaps::TcpExecutor>(std::move(o));
  }

  dpaps::StatsReport report;
  if (cfg.workload == "mf") {
    dpaps::MfOptions mf;
    mf.rows = cfg.keys / 2;
    mf.cols = cfg.keys - mf.rows;
    mf.rank = cfg.rank;
    mf.epochs = cfg.epochs;
    mf.seed = cfg.seed;
    mf.eval_each_epoch = cfg.transport == "sim";
    auto res = dpaps::run_dsgd_mf(*ex, mf);
    report = res.report;
    std::cerr << "mf: epochs=" << res.epochs_run << " rmse=" << res.rmse
              << " nonlocal_epoch_reads=" << res.epoch_nonlocal_reads << "\n";
  } else if (cfg.workload == "clustering") {
    dpaps::ClusteringOptions cl;
    cl.key_count = cfg.keys;
    cl.value_len = cfg.value_len;
    cl.seed = cfg.seed;
    auto res = dpaps::run_data_clustering(*ex, cl);
    report = res.report;
    std::cerr << "clustering: local_fraction=" << res.local_fraction << "\n";
  } else {
    dpaps::LatencyOptions lat;
    lat.value_len = cfg.value_len;
    lat.seed = cfg.seed;
    auto res = dpaps::run_latency_hiding(*ex, lat);
    report = res.report;
    std::cerr << "latency: blocked_waits=" << res.blocked_waits
              << " nonlocal_reads_from_point2=" << res.nonlocal_reads_from_point2
              << "\n";
  }

  if (sim && !cfg.dump_history.empty()) {
    std::ofstream f(cfg.dump_history);
    if (!f) throw dpaps::ConfigError("cannot write " + cfg.dump_history);
    sim->cluster()->history()->dump(f);
  }
  write_output(cfg, report);
  return kOk;
}

int costs_command(std::uint32_t nodes, std::uint64_t keys) {
  std::cout << "strategy,storage_per_node,msgs_remote_access,msgs_relocation\n";
  for (const auto& c : dpaps::strategy_costs(nodes, keys)) {
    std::cout << c.name << ',' << c.storage_per_node << ',' << c.msgs_remote_access
              << ',';
    if (c.msgs_relocation) std::cout << *c.msgs_relocation;
    else std::cout << "n/a";
    std::cout << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dpaps: parameter server with dynamic parameter allocation"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a workload");
  std::string config_path, peers_csv;
  run->add_option("--config", config_path, "config file (key = value lines)");
  run->add_option("--transport", "sim or tcp");
  run->add_option("--nodes", "cluster size");
  run->add_option("--workers", "worker threads per node");
  run->add_option("--keys", "number of parameter keys");
  run->add_option("--value-len", "doubles per parameter value");
  run->add_option("--rank", "factorization rank (mf)");
  run->add_option("--rank-id", "this process's rank (tcp)");
  run->add_option("--peers", peers_csv, "comma-separated host:port per rank (tcp)");
  run->add_option("--workload", "mf | clustering | latency");
  run->add_option("--location-caches", "enable location caches (true/false)");
  run->add_option("--latches", "latch stripe count");
  run->add_option("--seed", "rng seed");
  run->add_option("--epochs", "training epochs (mf)");
  run->add_option("--out", "stats output file, '-' = stdout");
  run->add_option("--out-format", "csv | json");
  run->add_option("--dump-history", "write the per-key event log here (sim)");

  auto* costs = app.add_subcommand("costs", "print per-strategy cost table");
  std::uint32_t cost_nodes = 4;
  std::uint64_t cost_keys = 1024;
  costs->add_option("--nodes", cost_nodes, "cluster size");
  costs->add_option("--keys", cost_keys, "number of parameter keys");

  CLI11_PARSE(app, argc, argv);

  try {
    if (costs->parsed()) return costs_command(cost_nodes, cost_keys);

    dpaps::RunConfig cfg;
    if (const char* env = std::getenv("DPAPS_CONFIG"))
      cfg = dpaps::load_config_file(env, cfg);
    if (!config_path.empty()) cfg = dpaps::load_config_file(config_path, cfg);

    // flags win over config files; reuse the file parser for uniform handling
    std::string overrides;
    for (const char* key : {"transport", "nodes", "workers", "keys", "value-len",
                            "rank", "rank-id", "workload", "location-caches",
                            "latches", "seed", "epochs", "out", "out-format",
                            "dump-history"}) {
      auto* opt = run->get_option(std::string("--") + key);
      if (opt->count()) overrides += std::string(key) + " = " + opt->results()[0] + "\n";
    }
    if (!peers_csv.empty()) overrides += "peers = " + peers_csv + "\n";
    cfg = dpaps::parse_config(overrides, cfg);

    return run_command(cfg);
  } catch (const dpaps::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const dpaps::TransportError& e) {
    std::cerr << "network error: " << e.what() << "\n";
    return kNetworkError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kWorkloadError;
  }
}
