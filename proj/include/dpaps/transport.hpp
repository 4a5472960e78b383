#pragma once

#include <cstdint>
#include <vector>

#include "dpaps/core.hpp"

namespace dpaps {

// Message delivery with a per-channel FIFO contract: all messages from one
// node toward one destination node arrive in send order, none lost, none
// duplicated. One implementation is the deterministic in-process simulator,
// the other a TCP transport for multi-process runs.
class Transport {
 public:
  virtual ~Transport() = default;

  // Enqueues msg on this sender's channel to `to`. Never called with
  // to == self; nodes deliver to themselves inline.
  virtual void send(NodeId to, Message msg) = 0;
};

// One line of the sim transport's global message log, used by the
// message-count assertions and the determinism check.
struct LogEntry {
  std::uint64_t step = 0;
  MsgKind kind = MsgKind::PullReq;
  NodeId from = 0;
  NodeId to = 0;
  std::uint32_t num_keys = 0;

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

}  // namespace dpaps
