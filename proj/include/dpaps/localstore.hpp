#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "dpaps/core.hpp"

namespace dpaps {

// Latch-striped in-memory parameter store, shared between the worker threads
// and the server event loop of one node. A key is present iff this node
// currently owns it. Reads return copies; writes are cumulative.
class LocalStore {
 public:
  // Dense variant when the keyspace is contiguous [0, key_count); pass
  // dense=false for the sparse-map variant.
  LocalStore(std::size_t value_len, std::size_t latches, std::uint64_t key_count,
             bool dense = true);

  std::size_t value_len() const { return value_len_; }

  // Copy of the current value, or nullopt if the key is not stored here.
  std::optional<Value> read(Key key) const;

  // Element-wise add under the key's latch. Returns false if the key is not
  // stored here (caller routes remotely).
  bool write_add(Key key, const Value& update);

  // Handover insert. Double insert signals a relocation bug.
  void insert(Key key, Value value);

  // Removes and returns the value (shipped in the Handover message).
  Value remove(Key key);

  bool contains(Key key) const;
  std::uint64_t size() const;

 private:
  std::mutex& latch(Key key) const { return latches_[key % latches_.size()]; }

  std::size_t value_len_;
  bool dense_;

  // Dense variant: one slab, presence bitmap.
  std::vector<double> slab_;
  std::vector<std::uint8_t> present_;

  std::unordered_map<Key, Value> sparse_;

  mutable std::vector<std::mutex> latches_;
  mutable std::mutex size_mutex_;  // guards sparse_ structure and count
  std::uint64_t count_ = 0;
};

}  // namespace dpaps
