#include "dpaps/sim.hpp"

#include <sstream>

namespace dpaps {

namespace ctx = boost::context;

struct SimCluster::Endpoint : Transport {
  SimCluster* sim = nullptr;
  NodeId self = 0;
  void send(NodeId to, Message msg) override { sim->enqueue(self, to, std::move(msg)); }
};

struct SimCluster::SimWorker {
  enum class State { Runnable, Blocked, Done };

  WorkerId id;
  std::uint32_t index = 0;  // position in workers_
  std::function<void(Client&)> program;
  State state = State::Runnable;
  bool started = false;
  std::int32_t runnable_pos = -1;
  ctx::continuation cont;  // resumes the fiber
  ctx::continuation sink;  // fiber side: resumes the scheduler
  std::unique_ptr<SimHooks> hooks;
  std::unique_ptr<Client> client;
  std::exception_ptr error;
};

struct SimCluster::SimHooks : WorkerHooks {
  SimCluster* sim = nullptr;
  SimWorker* w = nullptr;

  void yield() { w->sink = std::move(w->sink).resume(); }

  void after_submit() override { yield(); }

  void wait(const OpHandle& h) override {
    while (!h->done) {
      w->state = SimWorker::State::Blocked;
      SimWorker* worker = w;
      SimCluster* cluster = sim;
      h->on_done = [cluster, worker] { cluster->make_runnable(*worker); };
      yield();
    }
    h->on_done = nullptr;
  }
};

SimCluster::SimCluster(Options opt) : opt_(opt), rng_(opt.seed) {
  if (opt_.nodes == 0 || opt_.workers == 0) throw ConfigError("sim: nodes, workers >= 1");
  if (opt_.record_history) {
    history_ = std::make_unique<HistoryRecorder>([this] { return step_count_; });
  }
  if (opt_.monitor) monitor_ = std::make_unique<InvariantMonitor>();
  if (opt_.audit) audit_ = std::make_unique<ApplyAudit>(opt_.nodes, opt_.workers);

  channels_.resize(std::size_t(opt_.nodes) * opt_.nodes);
  channel_pos_.assign(channels_.size(), -1);

  for (NodeId n = 0; n < opt_.nodes; ++n) {
    auto ep = std::make_unique<Endpoint>();
    ep->sim = this;
    ep->self = n;
    NodeConfig cfg;
    cfg.self = n;
    cfg.nodes = opt_.nodes;
    cfg.workers = opt_.workers;
    cfg.key_count = opt_.key_count;
    cfg.value_len = opt_.value_len;
    cfg.latches = opt_.latches;
    cfg.dense = opt_.dense;
    cfg.caches = opt_.caches;
    cfg.cache_capacity = opt_.cache_capacity;
    cfg.init = opt_.init;
    Node::Hooks hooks;
    hooks.history = history_.get();
    hooks.monitor = monitor_.get();
    hooks.audit = audit_.get();
    hooks.clock = [this] { return step_count_; };
    nodes_.push_back(std::make_unique<Node>(cfg, *ep, hooks));
    endpoints_.push_back(std::move(ep));
  }
}

SimCluster::~SimCluster() = default;

void SimCluster::add_worker(WorkerId id, std::function<void(Client&)> program) {
  if (id.node >= opt_.nodes || id.local >= opt_.workers) {
    throw ConfigError("sim: worker id out of range");
  }
  auto w = std::make_unique<SimWorker>();
  w->id = id;
  w->program = std::move(program);
  w->hooks = std::make_unique<SimHooks>();
  w->hooks->sim = this;
  w->hooks->w = w.get();
  w->client = std::make_unique<Client>(*nodes_[id.node], id, *w->hooks);
  w->index = static_cast<std::uint32_t>(workers_.size());
  workers_.push_back(std::move(w));
  make_runnable(*workers_.back());
}

SimCluster::SimWorker& SimCluster::worker(WorkerId id) {
  for (auto& w : workers_) {
    if (w->id == id) return *w;
  }
  throw ConfigError("sim: unknown worker");
}

void SimCluster::make_runnable(SimWorker& w) {
  if (w.state == SimWorker::State::Done) return;
  w.state = SimWorker::State::Runnable;
  if (w.runnable_pos >= 0) return;
  w.runnable_pos = static_cast<std::int32_t>(runnable_.size());
  runnable_.push_back(w.index);
}

void SimCluster::drop_runnable(SimWorker& w) {
  if (w.runnable_pos < 0) return;
  const auto pos = static_cast<std::size_t>(w.runnable_pos);
  runnable_[pos] = runnable_.back();
  workers_[runnable_[pos]]->runnable_pos = static_cast<std::int32_t>(pos);
  runnable_.pop_back();
  w.runnable_pos = -1;
}

void SimCluster::enqueue(NodeId from, NodeId to, Message msg) {
  if (to >= opt_.nodes) throw ConfigError("send to unknown node " + std::to_string(to));
  const std::size_t ch = channel_index(from, to);
  log_.push_back(LogEntry{step_count_, msg.kind, from, to,
                          static_cast<std::uint32_t>(msg.keys.size())});
  channels_[ch].push_back(std::move(msg));
  if (channel_pos_[ch] < 0) {
    channel_pos_[ch] = static_cast<std::int32_t>(active_channels_.size());
    active_channels_.push_back(static_cast<std::uint32_t>(ch));
  }
}

void SimCluster::deliver_channel(std::size_t ch) {
  Message msg = std::move(channels_[ch].front());
  channels_[ch].pop_front();
  if (channels_[ch].empty()) {
    const auto pos = static_cast<std::size_t>(channel_pos_[ch]);
    active_channels_[pos] = active_channels_.back();
    channel_pos_[active_channels_[pos]] = static_cast<std::int32_t>(pos);
    active_channels_.pop_back();
    channel_pos_[ch] = -1;
  }
  nodes_[ch % opt_.nodes]->handle_message(std::move(msg));
}

void SimCluster::resume(SimWorker& w) {
  if (w.state != SimWorker::State::Runnable) {
    throw ProtocolError("sim: resuming a non-runnable worker");
  }
  if (!w.started) {
    w.started = true;
    SimWorker* wp = &w;
    w.cont = ctx::callcc([wp](ctx::continuation&& sink) {
      wp->sink = std::move(sink);
      try {
        wp->program(*wp->client);
      } catch (const ctx::detail::forced_unwind&) {
        wp->state = SimWorker::State::Done;
        throw;  // stack unwinding during cluster teardown must pass through
      } catch (...) {
        wp->error = std::current_exception();
      }
      wp->state = SimWorker::State::Done;
      return std::move(wp->sink);
    });
  } else {
    w.cont = std::move(w.cont).resume();
  }
  if (w.state == SimWorker::State::Done || w.state == SimWorker::State::Blocked) {
    drop_runnable(w);
  }
  if (w.error) {
    auto err = w.error;
    w.error = nullptr;
    std::rethrow_exception(err);
  }
}

bool SimCluster::step() {
  const std::size_t total = runnable_.size() + active_channels_.size();
  if (total == 0) {
    for (auto& w : workers_) {
      if (w->state != SimWorker::State::Done) {
        throw ProtocolError("sim deadlock: worker (" + std::to_string(w->id.node) + "," +
                            std::to_string(w->id.local) + ") blocked with no pending messages");
      }
    }
    return false;
  }
  ++step_count_;
  const std::size_t pick = rng_() % total;
  if (pick < runnable_.size()) {
    resume(*workers_[runnable_[pick]]);
  } else {
    deliver_channel(active_channels_[pick - runnable_.size()]);
  }
  return true;
}

void SimCluster::run() {
  while (step()) {
  }
}

std::size_t SimCluster::pending(NodeId from, NodeId to) const {
  return channels_[channel_index(from, to)].size();
}

void SimCluster::deliver(NodeId from, NodeId to) {
  const std::size_t ch = channel_index(from, to);
  if (channels_[ch].empty()) {
    throw ProtocolError("sim: deliver on empty channel " + std::to_string(from) + "->" +
                        std::to_string(to));
  }
  ++step_count_;
  deliver_channel(ch);
}

void SimCluster::deliver_all() {
  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t ch = 0; ch < channels_.size(); ++ch) {
      while (!channels_[ch].empty()) {
        ++step_count_;
        deliver_channel(ch);
        progress = true;
      }
    }
  }
}

void SimCluster::run_worker_until_parked(WorkerId id) {
  SimWorker& w = worker(id);
  while (w.state == SimWorker::State::Runnable) {
    ++step_count_;
    resume(w);
  }
}

bool SimCluster::worker_done(WorkerId id) const {
  for (auto& w : workers_) {
    if (w->id == id) return w->state == SimWorker::State::Done;
  }
  throw ConfigError("sim: unknown worker");
}

std::string SimCluster::log_as_text() const {
  std::ostringstream out;
  for (const LogEntry& e : log_) {
    out << e.step << ' ' << to_string(e.kind) << ' ' << e.from << ' ' << e.to << ' '
        << e.num_keys << '\n';
  }
  return out.str();
}

std::uint64_t SimCluster::message_count(std::size_t since) const {
  std::uint64_t n = 0;
  for (std::size_t i = since; i < log_.size(); ++i) {
    if (log_[i].kind == MsgKind::BarrierEnter || log_[i].kind == MsgKind::BarrierRelease) {
      continue;
    }
    ++n;
  }
  return n;
}

}  // namespace dpaps
