#include "dpaps/history.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace dpaps {

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Pull: return "pull";
    case OpKind::Push: return "push";
    case OpKind::Localize: return "localize";
    case OpKind::Barrier: return "barrier";
  }
  return "?";
}

void HistoryRecorder::on_invoke(WorkerId worker, std::uint64_t op_id, OpKind kind,
                                const std::vector<Key>& keys,
                                const std::vector<Value>* updates) {
  auto& idx = index_[{worker.node, worker.local, op_id}];
  for (std::size_t i = 0; i < keys.size(); ++i) {
    KeyEvent ev;
    ev.worker = worker;
    ev.op_id = op_id;
    ev.kind = kind;
    ev.key = keys[i];
    ev.invoke_step = clock_();
    if (updates) ev.value = (*updates)[i];
    idx.push_back(events_.size());
    events_.push_back(std::move(ev));
  }
}

void HistoryRecorder::on_apply(WorkerId worker, std::uint64_t op_id, Key key,
                               const Value* pulled) {
  auto it = index_.find({worker.node, worker.local, op_id});
  if (it == index_.end()) throw ProtocolError("history: apply for unknown op");
  for (std::size_t i : it->second) {
    KeyEvent& ev = events_[i];
    if (ev.key != key || ev.applied) continue;
    ev.applied = true;
    ev.apply_seq = next_apply_seq_++;
    ev.apply_step = clock_();
    if (pulled) ev.value = *pulled;
    return;
  }
  throw ProtocolError("history: duplicate apply for key " + std::to_string(key));
}

void HistoryRecorder::on_response(WorkerId worker, std::uint64_t op_id) {
  auto it = index_.find({worker.node, worker.local, op_id});
  if (it == index_.end()) throw ProtocolError("history: response for unknown op");
  const std::uint64_t now = clock_();
  for (std::size_t i : it->second) {
    events_[i].responded = true;
    events_[i].response_step = now;
  }
}

void HistoryRecorder::dump(std::ostream& out) const {
  for (const KeyEvent& ev : events_) {
    out << ev.worker.node << ' ' << ev.worker.local << ' ' << ev.op_id << ' '
        << to_string(ev.kind) << ' ' << ev.key << ' ' << ev.invoke_step << ' '
        << (ev.applied ? 1 : 0) << ' ' << ev.apply_seq << ' ' << ev.apply_step << ' '
        << (ev.responded ? 1 : 0) << ' ' << ev.response_step;
    for (double v : ev.value) out << ' ' << v;
    out << '\n';
  }
}

std::vector<KeyEvent> HistoryRecorder::load(std::istream& in) {
  std::vector<KeyEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    KeyEvent ev;
    std::string kind;
    int applied = 0;
    int responded = 0;
    ls >> ev.worker.node >> ev.worker.local >> ev.op_id >> kind >> ev.key >>
        ev.invoke_step >> applied >> ev.apply_seq >> ev.apply_step >> responded >>
        ev.response_step;
    if (!ls && !ls.eof()) throw ConfigError("history load: malformed line: " + line);
    ev.applied = applied != 0;
    ev.responded = responded != 0;
    if (kind == "pull") ev.kind = OpKind::Pull;
    else if (kind == "push") ev.kind = OpKind::Push;
    else if (kind == "localize") ev.kind = OpKind::Localize;
    else throw ConfigError("history load: unknown op kind: " + kind);
    double v;
    while (ls >> v) ev.value.push_back(v);
    events.push_back(std::move(ev));
  }
  return events;
}

std::size_t ApplyAudit::slot(WorkerId w) const {
  return static_cast<std::size_t>(w.node) * workers_per_node_ + w.local;
}

void ApplyAudit::on_issue(WorkerId w, std::uint64_t op_id, std::size_t num_keys) {
  auto& pw = counts_[slot(w)];
  if (pw.expected.size() <= op_id) {
    pw.expected.resize(op_id + 1, 0);
    pw.applied.resize(op_id + 1, 0);
  }
  pw.expected[op_id] = static_cast<std::uint8_t>(num_keys);
}

void ApplyAudit::on_apply(WorkerId w, std::uint64_t op_id) {
  auto& pw = counts_[slot(w)];
  if (pw.applied.size() <= op_id) {
    pw.expected.resize(op_id + 1, 0);
    pw.applied.resize(op_id + 1, 0);
  }
  if (++pw.applied[op_id] > pw.expected[op_id]) ++duplicated_;
}

std::uint64_t ApplyAudit::lost() const {
  std::uint64_t lost = 0;
  for (const auto& pw : counts_) {
    for (std::size_t i = 0; i < pw.expected.size(); ++i) {
      if (pw.applied[i] < pw.expected[i]) lost += pw.expected[i] - pw.applied[i];
    }
  }
  return lost;
}

}  // namespace dpaps
