#include "dpaps/location.hpp"

namespace dpaps {

OwnerTable::OwnerTable(NodeId self, std::uint64_t key_count, std::uint32_t nodes)
    : self_(self), key_count_(key_count), nodes_(nodes) {
  const std::uint64_t range = (key_count + nodes - 1) / nodes;
  first_ = static_cast<std::uint64_t>(self) * range;
  std::uint64_t last = self == nodes - 1 ? key_count : std::min(key_count, first_ + range);
  const std::uint64_t n = first_ < last ? last - first_ : 0;
  owners_.assign(n, self_);  // initial allocation: every key starts at its home
}

std::uint64_t OwnerTable::slot(Key key) const {
  if (!homed_here(key)) {
    throw RoutingError("key " + std::to_string(key) + " is not homed at node " +
                       std::to_string(self_));
  }
  return key - first_;
}

NodeId OwnerTable::lookup(Key key) const { return owners_[slot(key)]; }

NodeId OwnerTable::update(Key key, NodeId new_owner) {
  NodeId& entry = owners_[slot(key)];
  NodeId previous = entry;
  entry = new_owner;
  return previous;
}

LocationCache::LocationCache(bool enabled, std::size_t capacity)
    : enabled_(enabled), capacity_(capacity) {}

std::optional<NodeId> LocationCache::get(Key key) const {
  if (!enabled_) return std::nullopt;
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  if (capacity_ != 0) lru_.splice(lru_.begin(), lru_, it->second.lru_it);
  return it->second.owner;
}

void LocationCache::put(Key key, NodeId owner) {
  if (!enabled_) return;
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it != entries_.end()) {
    it->second.owner = owner;
    if (capacity_ != 0) lru_.splice(lru_.begin(), lru_, it->second.lru_it);
    return;
  }
  if (capacity_ != 0) {
    if (entries_.size() >= capacity_) {
      entries_.erase(lru_.back());
      lru_.pop_back();
    }
    lru_.push_front(key);
    entries_.emplace(key, Entry{owner, lru_.begin()});
  } else {
    entries_.emplace(key, Entry{owner, lru_.end()});
  }
}

}  // namespace dpaps
