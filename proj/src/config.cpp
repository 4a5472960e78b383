#include "dpaps/config.hpp"

#include <fstream>
#include <sstream>

namespace dpaps {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("bad boolean for '" + key + "': " + v);
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    auto x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for '" + key + "': " + v);
  }
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  if (transport != "sim" && transport != "tcp")
    throw ConfigError("transport must be sim or tcp, got '" + transport + "'");
  if (nodes < 1) throw ConfigError("nodes must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (keys < nodes) throw ConfigError("keys must be >= nodes");
  if (value_len < 1) throw ConfigError("value-len must be >= 1");
  if (latches < 1) throw ConfigError("latches must be >= 1");
  if (workload != "mf" && workload != "clustering" && workload != "latency")
    throw ConfigError("unknown workload '" + workload + "'");
  if (workload == "mf" && rank < 1) throw ConfigError("rank must be >= 1");
  if (out_format != "csv" && out_format != "json")
    throw ConfigError("out-format must be csv or json");
  if (transport == "tcp") {
    if (peers.size() != nodes)
      throw ConfigError("tcp transport needs one peer endpoint per node");
    if (rank_id >= nodes) throw ConfigError("rank out of range");
  }
}

std::string RunConfig::serialize() const {
  std::ostringstream out_;
  out_ << "transport = " << transport << '\n'
       << "nodes = " << nodes << '\n'
       << "workers = " << workers << '\n'
       << "keys = " << keys << '\n'
       << "value-len = " << value_len << '\n'
       << "rank = " << rank << '\n'
       << "workload = " << workload << '\n'
       << "location-caches = " << (location_caches ? "true" : "false") << '\n'
       << "latches = " << latches << '\n'
       << "seed = " << seed << '\n'
       << "epochs = " << epochs << '\n';
  if (!out.empty()) out_ << "out = " << out << '\n';
  out_ << "out-format = " << out_format << '\n';
  if (!dump_history.empty()) out_ << "dump-history = " << dump_history << '\n';
  if (!peers.empty()) {
    out_ << "rank-id = " << rank_id << '\n' << "peers = ";
    for (std::size_t i = 0; i < peers.size(); ++i)
      out_ << (i ? "," : "") << peers[i];
    out_ << '\n';
  }
  return out_.str();
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));

    if (key == "transport") base.transport = val;
    else if (key == "nodes") base.nodes = std::uint32_t(parse_u64(val, key));
    else if (key == "workers") base.workers = std::uint32_t(parse_u64(val, key));
    else if (key == "keys") base.keys = parse_u64(val, key);
    else if (key == "value-len") base.value_len = std::uint32_t(parse_u64(val, key));
    else if (key == "rank") base.rank = std::uint32_t(parse_u64(val, key));
    else if (key == "workload") base.workload = val;
    else if (key == "location-caches") base.location_caches = parse_bool(val, key);
    else if (key == "latches") base.latches = std::uint32_t(parse_u64(val, key));
    else if (key == "seed") base.seed = parse_u64(val, key);
    else if (key == "epochs") base.epochs = std::uint32_t(parse_u64(val, key));
    else if (key == "out") base.out = val;
    else if (key == "out-format") base.out_format = val;
    else if (key == "dump-history") base.dump_history = val;
    else if (key == "rank-id") base.rank_id = std::uint32_t(parse_u64(val, key));
    else if (key == "peers") base.peers = split_commas(val);
    else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace dpaps
