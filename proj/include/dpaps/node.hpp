#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "dpaps/core.hpp"
#include "dpaps/history.hpp"
#include "dpaps/localstore.hpp"
#include "dpaps/location.hpp"
#include "dpaps/transport.hpp"

namespace dpaps {

// Completion handle for one client operation. Completed at most once; wait()
// returns only after every key's outcome is recorded.
struct OpState {
  WorkerId worker;
  std::uint64_t op_id = 0;
  OpKind kind = OpKind::Pull;
  std::vector<Key> keys;
  std::vector<Value> results;  // pull: aligned with keys
  std::size_t remaining = 0;

  std::mutex m;
  std::condition_variable cv;
  bool done = false;
  std::function<void()> on_done;  // sim wake hook, set before blocking
};
using OpHandle = std::shared_ptr<OpState>;

// Worker-side op submission as seen by the node's routing layer.
struct LocalOp {
  OpKind kind = OpKind::Pull;
  WorkerId worker;
  std::uint64_t op_id = 0;
  std::vector<Key> keys;             // only the occurrences not served on the fast path
  std::vector<Value> updates;        // push: aligned with keys
  std::vector<std::size_t> slots;    // pull: result indices, aligned with keys
  OpHandle handle;
};

// Tracks the single-owner invariant: at every step each key's value lives in
// exactly one of {some node's store, one in-flight handover}. Sim only.
class InvariantMonitor {
 public:
  void on_insert(NodeId node, Key key);
  void on_remove(NodeId node, Key key);
  std::uint64_t violations() const { return violations_; }
  const std::string& first_violation() const { return detail_; }

 private:
  void violate(const std::string& what);
  // +1 while stored, +1 per in-flight handover; must always be exactly 1
  // after the initial insert.
  std::unordered_map<Key, int> stored_;
  std::unordered_map<Key, int> in_flight_;
  std::uint64_t violations_ = 0;
  std::string detail_;
};

struct NodeStats {
  std::atomic<std::uint64_t> reads_total{0};
  std::atomic<std::uint64_t> reads_local{0};
  std::atomic<std::uint64_t> reads_nonlocal{0};
  std::atomic<std::uint64_t> relocations{0};
  std::uint64_t rt_sum = 0;  // relocation time, clock units (event loop only)
  std::uint64_t rt_count = 0;
  std::uint64_t block_sum = 0;
  std::uint64_t block_count = 0;

  double mean_rt() const { return rt_count ? double(rt_sum) / double(rt_count) : 0.0; }
  double mean_block() const {
    return block_count ? double(block_sum) / double(block_count) : 0.0;
  }
};

struct NodeConfig {
  NodeId self = 0;
  std::uint32_t nodes = 1;
  std::uint32_t workers = 1;  // worker threads on this node
  std::uint64_t key_count = 1;
  std::uint32_t value_len = 1;
  std::uint32_t latches = 1000;
  bool dense = true;
  bool caches = false;
  std::size_t cache_capacity = 0;  // 0 = unbounded
  std::function<Value(Key)> init;  // initial value per homed key; default zeros
};

// One parameter-server node: local store, home-node owner table, relocation
// state machine and request routing. Worker threads call submit_*; everything
// else runs on the node's single-consumer event loop (handle_message and the
// local-op sink).
class Node {
 public:
  struct Hooks {
    HistoryRecorder* history = nullptr;
    ApplyAudit* audit = nullptr;
    InvariantMonitor* monitor = nullptr;
    std::function<std::uint64_t()> clock;  // sim steps or wall-clock ms
  };

  Node(NodeConfig cfg, Transport& transport) : Node(std::move(cfg), transport, Hooks{}) {}
  Node(NodeConfig cfg, Transport& transport, Hooks hooks);

  NodeId id() const { return cfg_.self; }
  const NodeConfig& config() const { return cfg_; }
  LocalStore& store() { return store_; }
  NodeStats& stats() { return stats_; }
  LocationCache& cache() { return cache_; }

  // Routes local ops to the event loop. Defaults to a direct call (sim); the
  // TCP runtime replaces it with an inbox post.
  void set_local_sink(std::function<void(LocalOp&&)> sink) { local_sink_ = std::move(sink); }

  // Worker-facing API. Fast path serves locally stored keys via shared
  // memory; the rest is delegated to the event loop.
  OpHandle submit_pull(WorkerId worker, std::vector<Key> keys);
  OpHandle submit_push(WorkerId worker, std::vector<Key> keys, std::vector<Value> updates);
  OpHandle submit_localize(WorkerId worker, std::vector<Key> keys);
  OpHandle submit_barrier(WorkerId worker);

  // Event-loop entry points.
  void handle_message(Message msg);
  void route_local(LocalOp&& op);

  // Routing decision for a non-enqueued key, per the forward strategy.
  std::pair<NodeId, RouteVia> resolve_destination(Key key) const;

  bool relocation_open(Key key) const { return reloc_.count(key) != 0; }

 private:
  struct Deferred {
    enum class Type { LocalPull, LocalPush, Remote, Instruct };
    Type type;
    WorkerId worker;
    std::uint64_t op_id = 0;
    Key key = 0;
    Value update;
    OpHandle handle;
    std::size_t slot = 0;
    Message msg;        // Remote
    NodeId requester = 0;  // Instruct
  };

  struct RelocEntry {
    std::deque<Deferred> queue;
    std::vector<std::pair<OpHandle, std::size_t>> waiters;
    std::uint64_t issue_time = 0;
    std::optional<std::uint64_t> first_block;
  };

  std::uint64_t now() const { return hooks_.clock ? hooks_.clock() : 0; }
  NodeId home(Key key) const { return home_of(key, cfg_.key_count, cfg_.nodes); }

  void emit(NodeId to, Message msg);
  void dispatch_self();

  void handle_request(Message& msg);         // PullReq / PushReq
  void handle_response(Message& msg);        // PullResp / PushResp
  void handle_localize_at_home(Message& msg);
  void handle_instruct(Message& msg);
  void handle_handover(Message& msg);
  void handle_localize_resp(Message& msg);
  void handle_barrier_enter(Message& msg);
  void handle_barrier_release();

  void route_access(LocalOp&& op);
  void route_localize(LocalOp&& op);
  void route_barrier(LocalOp&& op);

  void check_keys(const std::vector<Key>& keys) const;
  void apply_push(WorkerId worker, std::uint64_t op_id, Key key, const Value& update);
  Value apply_pull(WorkerId worker, std::uint64_t op_id, Key key);

  void remove_and_handover(Key key, NodeId requester, const Message& origin);
  void drain(Key key, RelocEntry entry);
  void complete_keys(OpHandle& handle, std::size_t n);
  void finish(OpHandle& handle);

  NodeConfig cfg_;
  Transport& transport_;
  Hooks hooks_;

  LocalStore store_;
  OwnerTable owners_;
  LocationCache cache_;
  NodeStats stats_;

  std::map<Key, RelocEntry> reloc_;

  // Pending remote ops per local worker; event-loop only.
  std::vector<std::unordered_map<std::uint64_t, OpHandle>> pending_;
  std::vector<std::uint64_t> next_op_id_;

  // Barrier state. Node 0 coordinates.
  std::vector<OpHandle> barrier_waiters_;
  std::uint32_t barrier_count_ = 0;

  std::function<void(LocalOp&&)> local_sink_;

  // Inline self-delivery queue; drained after the current handler returns.
  std::deque<Message> self_queue_;
  bool dispatching_ = false;
};

}  // namespace dpaps
