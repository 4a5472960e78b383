#include "dpaps/node.hpp"

#include <algorithm>
#include <cassert>

namespace dpaps {

void InvariantMonitor::violate(const std::string& what) {
  ++violations_;
  if (detail_.empty()) detail_ = what;
}

void InvariantMonitor::on_insert(NodeId node, Key key) {
  int& stored = stored_[key];
  int& flying = in_flight_[key];
  if (stored == 0 && flying == 0) {
    stored = 1;  // initial allocation at the home node
    return;
  }
  if (flying != 1 || stored != 0) {
    violate("insert of key " + std::to_string(key) + " at node " + std::to_string(node) +
            ": stored=" + std::to_string(stored) + " in_flight=" + std::to_string(flying));
  }
  flying = 0;
  stored = 1;
}

void InvariantMonitor::on_remove(NodeId node, Key key) {
  int& stored = stored_[key];
  int& flying = in_flight_[key];
  if (stored != 1 || flying != 0) {
    violate("remove of key " + std::to_string(key) + " at node " + std::to_string(node) +
            ": stored=" + std::to_string(stored) + " in_flight=" + std::to_string(flying));
  }
  stored = 0;
  flying = 1;
}

Node::Node(NodeConfig cfg, Transport& transport, Hooks hooks)
    : cfg_(std::move(cfg)),
      transport_(transport),
      hooks_(std::move(hooks)),
      store_(cfg_.value_len, cfg_.latches, cfg_.key_count, cfg_.dense),
      owners_(cfg_.self, cfg_.key_count, cfg_.nodes),
      cache_(cfg_.caches, cfg_.cache_capacity),
      pending_(cfg_.workers),
      next_op_id_(cfg_.workers, 1) {
  local_sink_ = [this](LocalOp&& op) { route_local(std::move(op)); };
  for (Key k = 0; k < cfg_.key_count; ++k) {
    if (home(k) != cfg_.self) continue;
    Value v = cfg_.init ? cfg_.init(k) : Value(cfg_.value_len, 0.0);
    if (hooks_.monitor) hooks_.monitor->on_insert(cfg_.self, k);
    store_.insert(k, std::move(v));
  }
}

std::pair<NodeId, RouteVia> Node::resolve_destination(Key key) const {
  if (store_.contains(key)) return {cfg_.self, RouteVia::Local};
  if (auto cached = cache_.get(key); cached && *cached != cfg_.self) {
    return {*cached, RouteVia::Cache};
  }
  const NodeId h = home(key);
  // When we are the key's home the owner table is authoritative and the
  // request can go straight to the current owner.
  if (h == cfg_.self) return {owners_.lookup(key), RouteVia::Home};
  return {h, RouteVia::Home};
}

// ---------------------------------------------------------------------------
// Worker-facing fast path

static OpHandle make_handle(WorkerId worker, std::uint64_t op_id, OpKind kind,
                            std::vector<Key> keys) {
  auto h = std::make_shared<OpState>();
  h->worker = worker;
  h->op_id = op_id;
  h->kind = kind;
  h->keys = std::move(keys);
  h->remaining = h->keys.size();
  if (kind == OpKind::Pull) h->results.resize(h->keys.size());
  return h;
}

void Node::check_keys(const std::vector<Key>& keys) const {
  for (Key k : keys) {
    if (k >= cfg_.key_count) {
      throw std::domain_error("key " + std::to_string(k) + " out of range [0, " +
                              std::to_string(cfg_.key_count) + ")");
    }
  }
}

void Node::apply_push(WorkerId worker, std::uint64_t op_id, Key key, const Value& update) {
  if (!store_.write_add(key, update)) {
    throw ProtocolError("apply_push: key " + std::to_string(key) + " vanished");
  }
  if (hooks_.history) hooks_.history->on_apply(worker, op_id, key, nullptr);
  if (hooks_.audit) hooks_.audit->on_apply(worker, op_id);
}

Value Node::apply_pull(WorkerId worker, std::uint64_t op_id, Key key) {
  auto v = store_.read(key);
  if (!v) throw ProtocolError("apply_pull: key " + std::to_string(key) + " vanished");
  if (hooks_.history) hooks_.history->on_apply(worker, op_id, key, &*v);
  return std::move(*v);
}

OpHandle Node::submit_pull(WorkerId worker, std::vector<Key> keys) {
  check_keys(keys);
  const std::uint64_t op_id = next_op_id_[worker.local]++;
  if (hooks_.history) hooks_.history->on_invoke(worker, op_id, OpKind::Pull, keys, nullptr);
  auto h = make_handle(worker, op_id, OpKind::Pull, std::move(keys));
  stats_.reads_total += h->keys.size();

  LocalOp rest;
  for (std::size_t i = 0; i < h->keys.size(); ++i) {
    const Key k = h->keys[i];
    if (auto v = store_.read(k)) {
      if (hooks_.history) hooks_.history->on_apply(worker, op_id, k, &*v);
      h->results[i] = std::move(*v);
      ++stats_.reads_local;
      --h->remaining;
    } else {
      rest.keys.push_back(k);
      rest.slots.push_back(i);
      ++stats_.reads_nonlocal;
    }
  }
  if (h->remaining == 0) {
    finish(h);
    return h;
  }
  rest.kind = OpKind::Pull;
  rest.worker = worker;
  rest.op_id = op_id;
  rest.handle = h;
  local_sink_(std::move(rest));
  return h;
}

OpHandle Node::submit_push(WorkerId worker, std::vector<Key> keys, std::vector<Value> updates) {
  if (keys.size() != updates.size()) {
    throw std::domain_error("push: updates not aligned with keys");
  }
  check_keys(keys);
  const std::uint64_t op_id = next_op_id_[worker.local]++;
  if (hooks_.history) hooks_.history->on_invoke(worker, op_id, OpKind::Push, keys, &updates);
  if (hooks_.audit) hooks_.audit->on_issue(worker, op_id, keys.size());
  auto h = make_handle(worker, op_id, OpKind::Push, std::move(keys));

  LocalOp rest;
  for (std::size_t i = 0; i < h->keys.size(); ++i) {
    const Key k = h->keys[i];
    if (store_.write_add(k, updates[i])) {
      if (hooks_.history) hooks_.history->on_apply(worker, op_id, k, nullptr);
      if (hooks_.audit) hooks_.audit->on_apply(worker, op_id);
      --h->remaining;
    } else {
      rest.keys.push_back(k);
      rest.updates.push_back(std::move(updates[i]));
    }
  }
  if (h->remaining == 0) {
    finish(h);
    return h;
  }
  rest.kind = OpKind::Push;
  rest.worker = worker;
  rest.op_id = op_id;
  rest.handle = h;
  local_sink_(std::move(rest));
  return h;
}

OpHandle Node::submit_localize(WorkerId worker, std::vector<Key> keys) {
  check_keys(keys);
  const std::uint64_t op_id = next_op_id_[worker.local]++;
  if (hooks_.history) {
    hooks_.history->on_invoke(worker, op_id, OpKind::Localize, keys, nullptr);
  }
  auto h = make_handle(worker, op_id, OpKind::Localize, std::move(keys));
  LocalOp op;
  op.kind = OpKind::Localize;
  op.worker = worker;
  op.op_id = op_id;
  op.keys = h->keys;
  op.handle = h;
  local_sink_(std::move(op));  // local-key short circuit happens on the event loop
  return h;
}

OpHandle Node::submit_barrier(WorkerId worker) {
  const std::uint64_t op_id = next_op_id_[worker.local]++;
  auto h = make_handle(worker, op_id, OpKind::Barrier, {});
  h->remaining = 1;
  LocalOp op;
  op.kind = OpKind::Barrier;
  op.worker = worker;
  op.op_id = op_id;
  op.handle = h;
  local_sink_(std::move(op));
  return h;
}

// ---------------------------------------------------------------------------
// Event loop

void Node::emit(NodeId to, Message msg) {
  msg.sender = cfg_.self;
  if (to == cfg_.self) {
    self_queue_.push_back(std::move(msg));
    return;
  }
  transport_.send(to, std::move(msg));
}

void Node::dispatch_self() {
  if (dispatching_) return;
  dispatching_ = true;
  while (!self_queue_.empty()) {
    Message m = std::move(self_queue_.front());
    self_queue_.pop_front();
    switch (m.kind) {
      case MsgKind::PullReq:
      case MsgKind::PushReq: handle_request(m); break;
      case MsgKind::LocalizeReq: handle_localize_at_home(m); break;
      case MsgKind::InstructRelocation: handle_instruct(m); break;
      case MsgKind::Handover: handle_handover(m); break;
      case MsgKind::PullResp:
      case MsgKind::PushResp: handle_response(m); break;
      case MsgKind::LocalizeResp: handle_localize_resp(m); break;
      case MsgKind::BarrierEnter: handle_barrier_enter(m); break;
      case MsgKind::BarrierRelease: handle_barrier_release(); break;
    }
  }
  dispatching_ = false;
}

void Node::handle_message(Message msg) {
  self_queue_.push_back(std::move(msg));
  dispatch_self();
}

void Node::route_local(LocalOp&& op) {
  switch (op.kind) {
    case OpKind::Pull:
    case OpKind::Push: route_access(std::move(op)); break;
    case OpKind::Localize: route_localize(std::move(op)); break;
    case OpKind::Barrier: route_barrier(std::move(op)); break;
  }
  dispatch_self();
}

void Node::route_access(LocalOp&& op) {
  const bool is_pull = op.kind == OpKind::Pull;
  // dest -> (keys, payload, served-inline slots)
  std::map<NodeId, Message> out;
  std::size_t served = 0;

  for (std::size_t i = 0; i < op.keys.size(); ++i) {
    const Key k = op.keys[i];
    if (auto it = reloc_.find(k); it != reloc_.end()) {
      if (!it->second.first_block) it->second.first_block = now();
      Deferred d;
      d.type = is_pull ? Deferred::Type::LocalPull : Deferred::Type::LocalPush;
      d.worker = op.worker;
      d.op_id = op.op_id;
      d.key = k;
      d.handle = op.handle;
      if (is_pull) d.slot = op.slots[i];
      else d.update = std::move(op.updates[i]);
      it->second.queue.push_back(std::move(d));
      continue;
    }
    if (store_.contains(k)) {
      // Became local between the worker's fast-path check and routing.
      if (is_pull) op.handle->results[op.slots[i]] = apply_pull(op.worker, op.op_id, k);
      else apply_push(op.worker, op.op_id, k, op.updates[i]);
      ++served;
      continue;
    }
    auto [dest, via] = resolve_destination(k);
    if (dest == cfg_.self) {
      // Home says we own it but the store disagrees and no relocation is
      // open here: single-owner invariant breach.
      throw ProtocolError("route_access: owner table points at self for absent key " +
                          std::to_string(k));
    }
    Message& m = out[dest];
    m.kind = is_pull ? MsgKind::PullReq : MsgKind::PushReq;
    m.origin_worker = op.worker;
    m.op_id = op.op_id;
    m.reply_to = cfg_.self;
    m.keys.push_back(k);
    if (!is_pull) {
      m.payload.push_back(std::move(op.updates[i]));
      m.has_payload = true;
    }
  }

  if (served > 0) complete_keys(op.handle, served);
  if (!op.handle->done) pending_[op.worker.local][op.op_id] = op.handle;
  for (auto& [dest, m] : out) emit(dest, std::move(m));
}

void Node::route_localize(LocalOp&& op) {
  // home -> keys needing a relocation request
  std::map<NodeId, std::vector<Key>> by_home;
  std::size_t served = 0;
  for (std::size_t i = 0; i < op.keys.size(); ++i) {
    const Key k = op.keys[i];
    if (store_.contains(k)) {  // already local: no-op, no messages
      ++served;
      continue;
    }
    auto it = reloc_.find(k);
    if (it != reloc_.end()) {
      it->second.waiters.emplace_back(op.handle, i);
      continue;
    }
    RelocEntry entry;
    entry.issue_time = now();
    entry.waiters.emplace_back(op.handle, i);
    reloc_.emplace(k, std::move(entry));
    by_home[home(k)].push_back(k);
  }
  if (served > 0) complete_keys(op.handle, served);
  if (!op.handle->done) pending_[op.worker.local][op.op_id] = op.handle;

  for (auto& [h, keys] : by_home) {
    Message m;
    m.kind = MsgKind::LocalizeReq;
    m.origin_worker = op.worker;
    m.op_id = op.op_id;
    m.reply_to = cfg_.self;
    m.keys = std::move(keys);
    emit(h, std::move(m));  // self-delivery when this node is the home
  }
}

void Node::handle_localize_at_home(Message& msg) {
  std::map<NodeId, Message> instructs;
  Message degenerate;
  for (Key k : msg.keys) {
    if (!owners_.homed_here(k)) {
      throw RoutingError("localize request for key " + std::to_string(k) +
                         " misrouted to node " + std::to_string(cfg_.self));
    }
    const NodeId prev = owners_.update(k, msg.sender);
    if (prev == msg.sender) {
      degenerate.keys.push_back(k);
      continue;
    }
    Message& m = instructs[prev];
    m.kind = MsgKind::InstructRelocation;
    m.origin_worker = msg.origin_worker;
    m.op_id = msg.op_id;
    m.reply_to = msg.sender;  // the requester, target of the handover
    m.keys.push_back(k);
  }
  for (auto& [prev, m] : instructs) emit(prev, std::move(m));
  if (!degenerate.keys.empty()) {
    degenerate.kind = MsgKind::LocalizeResp;
    degenerate.origin_worker = msg.origin_worker;
    degenerate.op_id = msg.op_id;
    degenerate.reply_to = msg.sender;
    emit(msg.sender, std::move(degenerate));
  }
}

void Node::remove_and_handover(Key key, NodeId requester, const Message& origin) {
  Value v = store_.remove(key);
  if (hooks_.monitor) hooks_.monitor->on_remove(cfg_.self, key);
  Message m;
  m.kind = MsgKind::Handover;
  m.origin_worker = origin.origin_worker;
  m.op_id = origin.op_id;
  m.reply_to = requester;
  m.keys.push_back(key);
  m.payload.push_back(std::move(v));
  m.has_payload = true;
  emit(requester, std::move(m));
}

void Node::handle_instruct(Message& msg) {
  // requester -> handover message under construction
  std::map<NodeId, Message> handovers;
  for (std::size_t i = 0; i < msg.keys.size(); ++i) {
    const Key k = msg.keys[i];
    if (auto it = reloc_.find(k); it != reloc_.end()) {
      // This node is itself waiting for the handover of k (conflict chain):
      // defer the instruct until our own relocation completes.
      Deferred d;
      d.type = Deferred::Type::Instruct;
      d.key = k;
      d.requester = msg.reply_to;
      d.worker = msg.origin_worker;
      d.op_id = msg.op_id;
      it->second.queue.push_back(std::move(d));
      continue;
    }
    if (!store_.contains(k)) {
      throw ProtocolError("relocation instruct for key " + std::to_string(k) +
                          " absent at node " + std::to_string(cfg_.self));
    }
    Value v = store_.remove(k);
    if (hooks_.monitor) hooks_.monitor->on_remove(cfg_.self, k);
    Message& m = handovers[msg.reply_to];
    m.kind = MsgKind::Handover;
    m.origin_worker = msg.origin_worker;
    m.op_id = msg.op_id;
    m.reply_to = msg.reply_to;
    m.keys.push_back(k);
    m.payload.push_back(std::move(v));
    m.has_payload = true;
  }
  for (auto& [req, m] : handovers) emit(req, std::move(m));
}

void Node::handle_handover(Message& msg) {
  for (std::size_t i = 0; i < msg.keys.size(); ++i) {
    const Key k = msg.keys[i];
    auto it = reloc_.find(k);
    if (it == reloc_.end()) {
      throw ProtocolError("handover for key " + std::to_string(k) +
                          " without an open relocation at node " + std::to_string(cfg_.self));
    }
    if (hooks_.monitor) hooks_.monitor->on_insert(cfg_.self, k);
    store_.insert(k, std::move(msg.payload[i]));

    RelocEntry entry = std::move(it->second);
    reloc_.erase(it);

    const std::uint64_t t = now();
    ++stats_.relocations;
    stats_.rt_sum += t - entry.issue_time;
    ++stats_.rt_count;
    if (entry.first_block) {
      stats_.block_sum += t - *entry.first_block;
      ++stats_.block_count;
    }
    if (cache_.enabled()) cache_.put(k, cfg_.self);

    drain(k, std::move(entry));
  }
}

void Node::handle_localize_resp(Message& msg) {
  // Degenerate completion: the home already listed this node as owner.
  for (Key k : msg.keys) {
    auto it = reloc_.find(k);
    if (it == reloc_.end()) continue;
    if (!store_.contains(k)) {
      throw ProtocolError("degenerate localize response for absent key " + std::to_string(k));
    }
    RelocEntry entry = std::move(it->second);
    reloc_.erase(it);
    drain(k, std::move(entry));
  }
}

void Node::drain(Key key, RelocEntry entry) {
  // The queue is drained strictly FIFO. An embedded instruct removes the key
  // again; later entries then take the normal remote path.
  for (auto& [handle, slot] : entry.waiters) {
    complete_keys(handle, 1);
  }
  while (!entry.queue.empty()) {
    Deferred d = std::move(entry.queue.front());
    entry.queue.pop_front();
    switch (d.type) {
      case Deferred::Type::LocalPull:
      case Deferred::Type::LocalPush: {
        const bool is_pull = d.type == Deferred::Type::LocalPull;
        if (store_.contains(d.key)) {
          if (is_pull) d.handle->results[d.slot] = apply_pull(d.worker, d.op_id, d.key);
          else apply_push(d.worker, d.op_id, d.key, d.update);
          complete_keys(d.handle, 1);
        } else {
          LocalOp op;
          op.kind = is_pull ? OpKind::Pull : OpKind::Push;
          op.worker = d.worker;
          op.op_id = d.op_id;
          op.keys.push_back(d.key);
          if (is_pull) op.slots.push_back(d.slot);
          else op.updates.push_back(std::move(d.update));
          op.handle = std::move(d.handle);
          route_access(std::move(op));
        }
        break;
      }
      case Deferred::Type::Remote: {
        handle_request(d.msg);
        break;
      }
      case Deferred::Type::Instruct: {
        Message origin;
        origin.origin_worker = d.worker;
        origin.op_id = d.op_id;
        remove_and_handover(d.key, d.requester, origin);
        break;
      }
    }
  }
}

void Node::handle_request(Message& msg) {
  const bool is_pull = msg.kind == MsgKind::PullReq;
  Message resp;
  std::map<NodeId, Message> forwards;

  for (std::size_t i = 0; i < msg.keys.size(); ++i) {
    const Key k = msg.keys[i];
    if (auto it = reloc_.find(k); it != reloc_.end()) {
      if (!it->second.first_block) it->second.first_block = now();
      Deferred d;
      d.type = Deferred::Type::Remote;
      d.key = k;
      d.msg.kind = msg.kind;
      d.msg.sender = msg.sender;
      d.msg.origin_worker = msg.origin_worker;
      d.msg.op_id = msg.op_id;
      d.msg.reply_to = msg.reply_to;
      d.msg.keys.push_back(k);
      if (msg.has_payload) {
        d.msg.payload.push_back(std::move(msg.payload[i]));
        d.msg.has_payload = true;
      }
      it->second.queue.push_back(std::move(d));
      continue;
    }
    if (store_.contains(k)) {
      resp.keys.push_back(k);
      if (is_pull) {
        resp.payload.push_back(apply_pull(msg.origin_worker, msg.op_id, k));
        resp.has_payload = true;
      } else {
        apply_push(msg.origin_worker, msg.op_id, k, msg.payload[i]);
      }
      continue;
    }
    // Foreign key: forward. At the home we know the owner; elsewhere the home
    // always does.
    NodeId next = owners_.homed_here(k) ? owners_.lookup(k) : home(k);
    if (next == cfg_.self) {
      throw ProtocolError("forward of key " + std::to_string(k) +
                          " would loop at node " + std::to_string(cfg_.self));
    }
    Message& f = forwards[next];
    f.kind = msg.kind;
    f.origin_worker = msg.origin_worker;
    f.op_id = msg.op_id;
    f.reply_to = msg.reply_to;
    f.keys.push_back(k);
    if (msg.has_payload) {
      f.payload.push_back(std::move(msg.payload[i]));
      f.has_payload = true;
    }
  }

  if (!resp.keys.empty()) {
    resp.kind = is_pull ? MsgKind::PullResp : MsgKind::PushResp;
    resp.origin_worker = msg.origin_worker;
    resp.op_id = msg.op_id;
    resp.reply_to = msg.reply_to;
    resp.owner_hint = cfg_.self;
    emit(msg.reply_to, std::move(resp));
  }
  for (auto& [next, f] : forwards) emit(next, std::move(f));
}

void Node::handle_response(Message& msg) {
  if (cache_.enabled() && msg.owner_hint) {
    for (Key k : msg.keys) cache_.put(k, *msg.owner_hint);
  }
  auto& table = pending_[msg.origin_worker.local];
  auto it = table.find(msg.op_id);
  if (it == table.end()) {
    throw ProtocolError("response for unknown op " + std::to_string(msg.op_id));
  }
  OpHandle handle = it->second;
  if (handle->kind == OpKind::Pull) {
    // Fill the next unfilled occurrence of each key, in message order.
    for (std::size_t i = 0; i < msg.keys.size(); ++i) {
      for (std::size_t j = 0; j < handle->keys.size(); ++j) {
        if (handle->keys[j] == msg.keys[i] && handle->results[j].empty()) {
          handle->results[j] = std::move(msg.payload[i]);
          break;
        }
      }
    }
  }
  complete_keys(handle, msg.keys.size());
}

void Node::route_barrier(LocalOp&& op) {
  barrier_waiters_.push_back(op.handle);
  if (cfg_.self == 0) {
    Message m;
    m.kind = MsgKind::BarrierEnter;
    handle_barrier_enter(m);
  } else {
    Message m;
    m.kind = MsgKind::BarrierEnter;
    m.origin_worker = op.worker;
    m.reply_to = cfg_.self;
    emit(0, std::move(m));
  }
}

void Node::handle_barrier_enter(Message&) {
  if (cfg_.self != 0) throw RoutingError("barrier enter at non-coordinator node");
  ++barrier_count_;
  const std::uint32_t total = cfg_.nodes * cfg_.workers;
  if (barrier_count_ < total) return;
  barrier_count_ = 0;
  for (NodeId n = 1; n < cfg_.nodes; ++n) {
    Message m;
    m.kind = MsgKind::BarrierRelease;
    emit(n, std::move(m));
  }
  handle_barrier_release();
}

void Node::handle_barrier_release() {
  std::vector<OpHandle> waiters = std::move(barrier_waiters_);
  barrier_waiters_.clear();
  for (OpHandle& h : waiters) finish(h);
}

void Node::complete_keys(OpHandle& handle, std::size_t n) {
  handle->remaining -= n;
  if (handle->remaining == 0) {
    pending_[handle->worker.local].erase(handle->op_id);
    finish(handle);
  }
}

void Node::finish(OpHandle& handle) {
  if (hooks_.history && handle->kind != OpKind::Barrier) {
    hooks_.history->on_response(handle->worker, handle->op_id);
  }
  std::function<void()> wake;
  {
    std::lock_guard lock(handle->m);
    handle->done = true;
    wake = std::move(handle->on_done);
  }
  handle->cv.notify_all();
  if (wake) wake();
}

}  // namespace dpaps
