#include "dpaps/localstore.hpp"

#include <cstring>

namespace dpaps {

LocalStore::LocalStore(std::size_t value_len, std::size_t latches, std::uint64_t key_count,
                       bool dense)
    : value_len_(value_len), dense_(dense), latches_(latches == 0 ? 1 : latches) {
  if (value_len_ == 0) throw ConfigError("LocalStore: value length must be >= 1");
  if (dense_) {
    slab_.assign(key_count * value_len_, 0.0);
    present_.assign(key_count, 0);
  }
}

std::optional<Value> LocalStore::read(Key key) const {
  std::lock_guard lock(latch(key));
  if (dense_) {
    if (!present_[key]) return std::nullopt;
    const double* base = slab_.data() + key * value_len_;
    return Value(base, base + value_len_);
  }
  const Value* v = nullptr;
  {
    std::lock_guard slock(size_mutex_);
    auto it = sparse_.find(key);
    if (it == sparse_.end()) return std::nullopt;
    v = &it->second;
  }
  return *v;
}

bool LocalStore::write_add(Key key, const Value& update) {
  if (update.size() != value_len_) {
    throw std::domain_error("write_add: update length " + std::to_string(update.size()) +
                            " != value length " + std::to_string(value_len_));
  }
  std::lock_guard lock(latch(key));
  if (dense_) {
    if (!present_[key]) return false;
    double* base = slab_.data() + key * value_len_;
    for (std::size_t i = 0; i < value_len_; ++i) base[i] += update[i];
    return true;
  }
  Value* v = nullptr;
  {
    std::lock_guard slock(size_mutex_);
    auto it = sparse_.find(key);
    if (it == sparse_.end()) return false;
    v = &it->second;
  }
  for (std::size_t i = 0; i < value_len_; ++i) (*v)[i] += update[i];
  return true;
}

void LocalStore::insert(Key key, Value value) {
  if (value.size() != value_len_) {
    throw std::domain_error("insert: value length mismatch for key " + std::to_string(key));
  }
  std::lock_guard lock(latch(key));
  if (dense_) {
    if (present_[key]) {
      throw ProtocolError("double insert of key " + std::to_string(key));
    }
    std::memcpy(slab_.data() + key * value_len_, value.data(), value_len_ * sizeof(double));
    present_[key] = 1;
    std::lock_guard slock(size_mutex_);
    ++count_;
    return;
  }
  std::lock_guard slock(size_mutex_);
  auto [it, fresh] = sparse_.emplace(key, std::move(value));
  if (!fresh) throw ProtocolError("double insert of key " + std::to_string(key));
  ++count_;
}

Value LocalStore::remove(Key key) {
  std::lock_guard lock(latch(key));
  if (dense_) {
    if (!present_[key]) {
      throw ProtocolError("remove of absent key " + std::to_string(key));
    }
    const double* base = slab_.data() + key * value_len_;
    Value out(base, base + value_len_);
    present_[key] = 0;
    std::lock_guard slock(size_mutex_);
    --count_;
    return out;
  }
  std::lock_guard slock(size_mutex_);
  auto it = sparse_.find(key);
  if (it == sparse_.end()) {
    throw ProtocolError("remove of absent key " + std::to_string(key));
  }
  Value out = std::move(it->second);
  sparse_.erase(it);
  --count_;
  return out;
}

bool LocalStore::contains(Key key) const {
  std::lock_guard lock(latch(key));
  if (dense_) return present_[key] != 0;
  std::lock_guard slock(size_mutex_);
  return sparse_.count(key) != 0;
}

std::uint64_t LocalStore::size() const {
  std::lock_guard slock(size_mutex_);
  return count_;
}

const char* to_string(MsgKind kind) {
  switch (kind) {
    case MsgKind::PullReq: return "PullReq";
    case MsgKind::PushReq: return "PushReq";
    case MsgKind::LocalizeReq: return "LocalizeReq";
    case MsgKind::InstructRelocation: return "InstructRelocation";
    case MsgKind::Handover: return "Handover";
    case MsgKind::PullResp: return "PullResp";
    case MsgKind::PushResp: return "PushResp";
    case MsgKind::LocalizeResp: return "LocalizeResp";
    case MsgKind::BarrierEnter: return "BarrierEnter";
    case MsgKind::BarrierRelease: return "BarrierRelease";
  }
  return "?";
}

}  // namespace dpaps
