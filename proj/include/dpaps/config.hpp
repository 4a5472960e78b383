#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dpaps/core.hpp"

namespace dpaps {

// One run's full configuration. Sources, later ones winning: built-in
// defaults, the config file named by DPAPS_CONFIG or --config (flat
// `key = value` lines, '#' comments), then command-line flags.
struct RunConfig {
  std::string transport = "sim";  // "sim" | "tcp"
  std::uint32_t nodes = 4;
  std::uint32_t workers = 2;
  std::uint64_t keys = 1024;
  std::uint32_t value_len = 1;
  std::uint32_t rank = 5;
  std::string workload = "clustering";  // "mf" | "clustering" | "latency"
  bool location_caches = true;
  std::uint32_t latches = 1000;
  std::uint64_t seed = 1;
  std::uint32_t epochs = 50;
  std::string out;            // stats file; '-' or empty = stdout
  std::string out_format = "csv";  // "csv" | "json"
  std::string dump_history;   // per-key event log destination, empty = off
  // tcp only
  std::uint32_t rank_id = 0;  // this process's rank
  std::vector<std::string> peers;

  void validate() const;  // throws ConfigError
  std::string serialize() const;
};

// Parses `key = value` text; unknown keys raise ConfigError.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config_file(const std::string& path, RunConfig base = {});

}  // namespace dpaps
