#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <vector>

#include "dpaps/core.hpp"

namespace dpaps {

enum class OpKind : std::uint8_t { Pull = 0, Push = 1, Localize = 2, Barrier = 3 };
const char* to_string(OpKind kind);

// One (operation, key occurrence) record. An operation over m keys produces
// m of these; `value` is the pushed delta for pushes and the returned value
// for pulls (captured at the owner-side serialization point).
struct KeyEvent {
  WorkerId worker;
  std::uint64_t op_id = 0;
  OpKind kind = OpKind::Pull;
  Key key = 0;
  std::uint64_t invoke_step = 0;
  std::uint64_t apply_seq = 0;   // global serialization order (dense, per apply)
  std::uint64_t apply_step = 0;  // scheduler step of the apply
  std::uint64_t response_step = 0;
  bool applied = false;
  bool responded = false;
  Value value;
};

// Records invocation/apply/response events for the consistency checker.
// Single-threaded by construction: it is only driven from the deterministic
// simulator.
class HistoryRecorder {
 public:
  explicit HistoryRecorder(std::function<std::uint64_t()> clock) : clock_(std::move(clock)) {}

  void on_invoke(WorkerId worker, std::uint64_t op_id, OpKind kind,
                 const std::vector<Key>& keys, const std::vector<Value>* updates);
  void on_apply(WorkerId worker, std::uint64_t op_id, Key key, const Value* pulled);
  void on_response(WorkerId worker, std::uint64_t op_id);

  const std::vector<KeyEvent>& events() const { return events_; }
  std::vector<KeyEvent> take() { return std::move(events_); }

  void dump(std::ostream& out) const;
  static std::vector<KeyEvent> load(std::istream& in);

 private:
  std::function<std::uint64_t()> clock_;
  std::uint64_t next_apply_seq_ = 1;
  std::vector<KeyEvent> events_;
  // (node, worker, op_id) -> event indices, in key order, for apply/response matching
  std::map<std::tuple<NodeId, std::uint32_t, std::uint64_t>, std::vector<std::size_t>> index_;
};

// Counts applied (worker, op_id, key) triples without retaining values; used
// by the exactly-once accounting in large churn runs where a full history
// would be too heavy.
class ApplyAudit {
 public:
  ApplyAudit(std::uint32_t nodes, std::uint32_t workers_per_node)
      : counts_(nodes * workers_per_node), workers_per_node_(workers_per_node) {}

  void on_issue(WorkerId w, std::uint64_t op_id, std::size_t num_keys);
  void on_apply(WorkerId w, std::uint64_t op_id);

  // Zero iff every issued (op, key) was applied exactly once.
  std::uint64_t lost() const;
  std::uint64_t duplicated() const { return duplicated_; }

 private:
  std::size_t slot(WorkerId w) const;
  struct PerWorker {
    std::vector<std::uint8_t> expected;  // keys per op_id
    std::vector<std::uint8_t> applied;
  };
  std::vector<PerWorker> counts_;
  std::uint32_t workers_per_node_ = 0;
  std::uint64_t duplicated_ = 0;
};

}  // namespace dpaps
