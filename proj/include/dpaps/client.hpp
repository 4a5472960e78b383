#pragma once

#include <vector>

#include "dpaps/node.hpp"

namespace dpaps {

// Blocking behavior of a worker, supplied by the runtime: the simulator
// parks the worker's fiber, the TCP runtime waits on the handle's condvar.
class WorkerHooks {
 public:
  virtual ~WorkerHooks() = default;
  virtual void after_submit() {}            // reschedule point (sim)
  virtual void wait(const OpHandle& h) = 0;  // block until h->done
};

// The worker-facing PS client (pull/push/localize, sync and async). One
// instance per worker thread; not shareable.
class Client {
 public:
  Client(Node& node, WorkerId worker, WorkerHooks& hooks)
      : node_(node), worker_(worker), hooks_(hooks) {}

  WorkerId worker() const { return worker_; }
  Node& node() { return node_; }

  std::vector<Value> pull(const std::vector<Key>& keys);
  void push(const std::vector<Key>& keys, std::vector<Value> updates);
  void localize(const std::vector<Key>& keys);

  OpHandle pull_async(const std::vector<Key>& keys);
  OpHandle push_async(const std::vector<Key>& keys, std::vector<Value> updates);
  OpHandle localize_async(const std::vector<Key>& keys);

  // Blocks until the handle completes; idempotent.
  void wait(const OpHandle& h);

  // True when wait() would have to block right now.
  static bool is_pending(const OpHandle& h);

  // Waits for all of this worker's outstanding async ops, then enters the
  // global barrier. No worker returns until all workers have entered.
  void barrier();

  // Outstanding async ops issued and not yet waited on.
  std::size_t outstanding() const { return outstanding_.size(); }
  void wait_all();

 private:
  void track(const OpHandle& h);

  Node& node_;
  WorkerId worker_;
  WorkerHooks& hooks_;
  std::vector<OpHandle> outstanding_;
};

}  // namespace dpaps
