#pragma once

#include <list>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "dpaps/core.hpp"

namespace dpaps {

// Home node's map from key to current owner. Holds entries exactly for the
// keys homed at this node; accessed only by the server event loop.
class OwnerTable {
 public:
  OwnerTable(NodeId self, std::uint64_t key_count, std::uint32_t nodes);

  bool homed_here(Key key) const { return home_of(key, key_count_, nodes_) == self_; }

  NodeId lookup(Key key) const;

  // Returns the displaced owner (target of the relocation instruct).
  NodeId update(Key key, NodeId new_owner);

 private:
  std::uint64_t slot(Key key) const;

  NodeId self_;
  std::uint64_t key_count_;
  std::uint32_t nodes_;
  std::uint64_t first_;  // first key homed here
  std::vector<NodeId> owners_;
};

// Per-node key->owner cache. Entries may be stale; there is no invalidation
// protocol. Unbounded by default, optional LRU bound. Safe for concurrent
// reads by workers and writes by the event loop.
class LocationCache {
 public:
  explicit LocationCache(bool enabled, std::size_t capacity = 0);

  bool enabled() const { return enabled_; }
  std::optional<NodeId> get(Key key) const;
  void put(Key key, NodeId owner);

 private:
  bool enabled_;
  std::size_t capacity_;  // 0 = unbounded
  mutable std::mutex mutex_;
  mutable std::list<Key> lru_;  // front = most recent (only used when bounded)
  struct Entry {
    NodeId owner;
    std::list<Key>::iterator lru_it;
  };
  mutable std::unordered_map<Key, Entry> entries_;
};

enum class RouteVia { Local, Cache, Home };

}  // namespace dpaps
