#pragma once

#include <boost/context/continuation.hpp>
#include <deque>
#include <memory>
#include <random>
#include <string>

#include "dpaps/client.hpp"
#include "dpaps/node.hpp"
#include "dpaps/transport.hpp"

namespace dpaps {

// Deterministic single-thread cluster simulator. Worker programs run as
// fibers; one scheduler step either resumes a runnable worker for one quantum
// (until its next client call) or delivers the head message of one channel to
// its receiver's event loop. Per-channel FIFO holds under every schedule;
// the seeded random schedule is fair. Identical seed + identical programs
// give an identical message log.
class SimCluster {
 public:
  struct Options {
    std::uint32_t nodes = 1;
    std::uint32_t workers = 1;  // per node
    std::uint64_t key_count = 16;
    std::uint32_t value_len = 1;
    std::uint32_t latches = 1000;
    bool dense = true;
    bool caches = false;
    std::size_t cache_capacity = 0;
    std::uint64_t seed = 1;
    std::function<Value(Key)> init;
    bool record_history = false;
    bool monitor = false;
    bool audit = false;
  };

  explicit SimCluster(Options opt);
  ~SimCluster();

  Node& node(NodeId n) { return *nodes_[n]; }
  std::uint32_t num_nodes() const { return opt_.nodes; }

  // Registers the program for one worker. All programs must be registered
  // before run()/step().
  void add_worker(WorkerId id, std::function<void(Client&)> program);

  // Runs the seeded random schedule until every worker finished and no
  // message is pending. Throws on protocol errors and deadlock.
  void run();

  // One scheduler step; false when nothing is left to do.
  bool step();

  std::uint64_t steps() const { return step_count_; }

  // --- manual (scripted) driving ---------------------------------------
  std::size_t pending(NodeId from, NodeId to) const;
  void deliver(NodeId from, NodeId to);  // delivers the channel's head message
  void deliver_all();                    // drains all channels, workers parked
  void run_worker_until_parked(WorkerId id);
  bool worker_done(WorkerId id) const;

  // --- instrumentation --------------------------------------------------
  const std::vector<LogEntry>& log() const { return log_; }
  std::string log_as_text() const;
  // Protocol messages (barrier traffic excluded) logged since `since`.
  std::uint64_t message_count(std::size_t since = 0) const;

  HistoryRecorder* history() { return history_.get(); }
  InvariantMonitor* monitor() { return monitor_.get(); }
  ApplyAudit* audit() { return audit_.get(); }

 private:
  struct Endpoint;
  struct SimWorker;
  struct SimHooks;

  std::size_t channel_index(NodeId from, NodeId to) const { return from * opt_.nodes + to; }
  void enqueue(NodeId from, NodeId to, Message msg);
  void deliver_channel(std::size_t ch);
  void resume(SimWorker& w);
  void make_runnable(SimWorker& w);
  void drop_runnable(SimWorker& w);
  SimWorker& worker(WorkerId id);

  Options opt_;
  std::mt19937_64 rng_;
  std::uint64_t step_count_ = 0;

  std::unique_ptr<HistoryRecorder> history_;
  std::unique_ptr<InvariantMonitor> monitor_;
  std::unique_ptr<ApplyAudit> audit_;

  std::vector<std::unique_ptr<Endpoint>> endpoints_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<std::unique_ptr<SimWorker>> workers_;

  std::vector<std::deque<Message>> channels_;
  std::vector<std::uint32_t> active_channels_;  // indices with pending messages
  std::vector<std::int32_t> channel_pos_;       // back-reference, -1 if inactive
  std::vector<std::uint32_t> runnable_;
  std::vector<LogEntry> log_;
};

}  // namespace dpaps
