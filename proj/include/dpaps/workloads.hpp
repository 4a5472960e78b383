#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dpaps/sim.hpp"
#include "dpaps/tcp.hpp"

namespace dpaps {

// Per-node run statistics. In simulator runs the *_ms columns are measured
// in scheduler steps, not milliseconds; under the TCP runtime they are
// wall-clock milliseconds.
struct StatsRow {
  std::uint32_t node = 0;
  std::uint64_t reads_total = 0;
  std::uint64_t reads_local = 0;
  std::uint64_t reads_nonlocal = 0;
  std::uint64_t relocations = 0;
  double mean_rt_ms = 0.0;
  double mean_block_ms = 0.0;
  double metric = 0.0;
};

struct StatsReport {
  std::vector<StatsRow> rows;
  std::string to_csv() const;
  std::string to_json() const;
  double local_read_fraction() const;
};

StatsRow stats_row(Node& node, double metric);

// Key space + cluster parameters for one workload run; the executor builds
// the cluster accordingly and runs the same program on every worker.
struct ExecSpec {
  std::uint64_t key_count = 1;
  std::uint32_t value_len = 1;
  std::function<Value(Key)> init;
};

class Executor {
 public:
  virtual ~Executor() = default;
  virtual std::uint32_t nodes() const = 0;
  virtual std::uint32_t workers_per_node() const = 0;
  virtual void execute(const ExecSpec& spec, std::function<void(Client&)> program) = 0;
  // Nodes living in this process (all of them for the simulator, exactly one
  // per rank under TCP). Valid after execute().
  virtual std::vector<Node*> local_nodes() = 0;
};

class SimExecutor : public Executor {
 public:
  SimExecutor(std::uint32_t nodes, std::uint32_t workers, std::uint64_t seed = 1,
              std::uint32_t latches = 1000, bool caches = false,
              std::size_t cache_capacity = 0)
      : nodes_(nodes), workers_(workers), seed_(seed), latches_(latches),
        caches_(caches), cache_capacity_(cache_capacity) {}

  void set_record_history(bool on) { record_history_ = on; }

  std::uint32_t nodes() const override { return nodes_; }
  std::uint32_t workers_per_node() const override { return workers_; }
  void execute(const ExecSpec& spec, std::function<void(Client&)> program) override;
  std::vector<Node*> local_nodes() override;

  SimCluster* cluster() { return cluster_.get(); }

 private:
  std::uint32_t nodes_, workers_;
  std::uint64_t seed_;
  std::uint32_t latches_;
  bool caches_;
  std::size_t cache_capacity_;
  bool record_history_ = false;
  std::unique_ptr<SimCluster> cluster_;
};

class TcpExecutor : public Executor {
 public:
  // opt's key-space fields are overwritten by each execute() call.
  explicit TcpExecutor(TcpRuntime::Options opt) : opt_(std::move(opt)) {}

  std::uint32_t nodes() const override { return std::uint32_t(opt_.peers.size()); }
  std::uint32_t workers_per_node() const override { return opt_.workers; }
  void execute(const ExecSpec& spec, std::function<void(Client&)> program) override;
  std::vector<Node*> local_nodes() override;

 private:
  TcpRuntime::Options opt_;
  std::unique_ptr<TcpRuntime> runtime_;
};

// ---------------------------------------------------------------------------
// Matrix factorization with blocked SGD. Keys: row i -> i, column j -> R + j,
// values are the rank-length factor vectors. Column blocks rotate among the
// N*W workers each subepoch with a barrier in between; each worker's row
// range is localized once at startup, the upcoming column block at the start
// of each subepoch, so all factor reads inside a subepoch stay node-local.

struct MfOptions {
  std::uint64_t rows = 100;
  std::uint64_t cols = 100;
  std::uint32_t rank = 5;
  std::uint32_t epochs = 50;
  double eta = 0.05;
  double init_scale = 0.1;
  std::uint64_t seed = 7;
  double target_rmse = 0.0;   // >0: stop after the epoch that reaches it
  bool eval_each_epoch = true;  // requires all workers in one process
};

struct MfResult {
  double rmse = 0.0;
  std::uint32_t epochs_run = 0;
  // Nonlocal factor reads between startup localization and final evaluation;
  // zero when the blocking scheme works.
  std::uint64_t epoch_nonlocal_reads = 0;
  StatsReport report;
};

// Noise-free low-rank ground truth, row-major rows x cols.
std::vector<double> mf_ground_truth(const MfOptions& opt);

// Deterministic per-key factor initializer shared by every node and by the
// oracle below.
Value mf_init_value(const MfOptions& opt, Key key);

MfResult run_dsgd_mf(Executor& ex, const MfOptions& opt);

// Single-threaded replica of the exact computation (same visit order, same
// floating-point operations) for `total_workers` simulated workers.
double mf_oracle_rmse(const MfOptions& opt, std::uint32_t total_workers,
                      std::uint32_t* epochs_run = nullptr);

// ---------------------------------------------------------------------------
// Data clustering access pattern: node n's preferred cluster is the home key
// range of node (n+1) % N, localized once at startup. Each read hits the
// preferred cluster with probability `skew`, otherwise a uniform key.

struct ClusteringOptions {
  std::uint64_t key_count = 1 << 14;
  double skew = 0.9;
  std::uint64_t reads_per_worker = 2000;
  std::uint32_t value_len = 1;
  std::uint64_t seed = 1;
};

struct ClusteringResult {
  double local_fraction = 0.0;
  StatsReport report;
};

ClusteringResult run_data_clustering(Executor& ex, const ClusteringOptions& opt);

// ---------------------------------------------------------------------------
// Latency hiding: each worker walks a private stream of points (consecutive
// key groups). With lookahead 1 the next point's keys are localized
// asynchronously while the current point is processed; a "blocked wait" is a
// localize that was still pending when the worker needed its keys.

struct LatencyOptions {
  std::uint64_t points_per_worker = 50;
  std::uint64_t keys_per_point = 4;
  std::uint32_t value_len = 2;
  std::uint32_t lookahead = 1;  // 0 or 1
  std::uint64_t seed = 1;
};

struct LatencyResult {
  std::uint64_t blocked_waits = 0;
  // Nonlocal reads from the third point (index 2) onward.
  std::uint64_t nonlocal_reads_from_point2 = 0;
  StatsReport report;
};

LatencyResult run_latency_hiding(Executor& ex, const LatencyOptions& opt);

}  // namespace dpaps
