#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpaps {

using Key = std::uint64_t;
using NodeId = std::uint32_t;

// One parameter value: a fixed-length vector of 64-bit reals. Length is the
// deployment-wide value length V.
using Value = std::vector<double>;

struct WorkerId {
  NodeId node = 0;
  std::uint32_t local = 0;

  friend bool operator==(const WorkerId&, const WorkerId&) = default;
  friend auto operator<=>(const WorkerId&, const WorkerId&) = default;
};

enum class MsgKind : std::uint8_t {
  PullReq = 0,
  PushReq = 1,
  LocalizeReq = 2,
  InstructRelocation = 3,
  Handover = 4,
  PullResp = 5,
  PushResp = 6,
  LocalizeResp = 7,
  BarrierEnter = 8,
  BarrierRelease = 9,
};

const char* to_string(MsgKind kind);

// Typed envelope exchanged between node event loops. `origin_worker`,
// `op_id` and `reply_to` survive forwarding so the node that finally serves
// an operation can respond directly to the requester.
struct Message {
  MsgKind kind = MsgKind::PullReq;
  NodeId sender = 0;
  WorkerId origin_worker;
  std::uint64_t op_id = 0;
  std::vector<Key> keys;
  std::vector<Value> payload;  // aligned with keys when present
  bool has_payload = false;
  NodeId reply_to = 0;
  std::optional<NodeId> owner_hint;

  friend bool operator==(const Message&, const Message&) = default;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RoutingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Static home of a key under a ceil-sized range partition of [0, K) over N
// nodes. Total and surjective onto [0, N) whenever K >= N.
inline NodeId home_of(Key key, std::uint64_t key_count, std::uint32_t nodes) {
  if (key >= key_count) {
    throw std::domain_error("home_of: key " + std::to_string(key) +
                            " out of range [0, " + std::to_string(key_count) + ")");
  }
  const std::uint64_t range = (key_count + nodes - 1) / nodes;
  const std::uint64_t h = key / range;
  return static_cast<NodeId>(h < nodes - 1 ? h : nodes - 1);
}

// Partitions keys by destination, preserving each key's relative order
// within its group (duplicates preserved).
template <typename Resolver>
std::map<NodeId, std::vector<Key>> group_by_destination(const std::vector<Key>& keys,
                                                        Resolver&& resolve) {
  std::map<NodeId, std::vector<Key>> groups;
  for (Key k : keys) {
    groups[resolve(k)].push_back(k);
  }
  return groups;
}

}  // namespace dpaps
