#include "dpaps/checker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace dpaps {

CheckResult check_sequential(const std::vector<KeyEvent>& history, Key key,
                             const Value& initial, double tolerance) {
  std::vector<const KeyEvent*> ops;
  for (const KeyEvent& ev : history) {
    if (ev.key != key) continue;
    if (ev.kind != OpKind::Pull && ev.kind != OpKind::Push) continue;
    if (!ev.applied) {
      Violation v;
      v.what = Violation::What::Incomplete;
      v.key = key;
      v.worker = ev.worker;
      v.op_a = ev.op_id;
      v.detail = "op never applied";
      return {v};
    }
    ops.push_back(&ev);
  }
  std::sort(ops.begin(), ops.end(),
            [](const KeyEvent* a, const KeyEvent* b) { return a->apply_seq < b->apply_seq; });

  // (a) per-worker program order
  std::map<std::pair<NodeId, std::uint32_t>, const KeyEvent*> last;
  for (const KeyEvent* ev : ops) {
    auto& prev = last[{ev->worker.node, ev->worker.local}];
    if (prev != nullptr && prev->op_id >= ev->op_id) {
      Violation v;
      v.what = Violation::What::ProgramOrder;
      v.key = key;
      v.worker = ev->worker;
      v.op_a = ev->op_id;  // issued earlier, applied later
      v.op_b = prev->op_id;
      v.detail = "op " + std::to_string(prev->op_id) + " applied before op " +
                 std::to_string(ev->op_id) + " of the same worker";
      return {v};
    }
    prev = ev;
  }

  // (b) replay in apply order
  Value value = initial;
  for (const KeyEvent* ev : ops) {
    if (value.size() < ev->value.size()) value.resize(ev->value.size(), 0.0);
    if (ev->kind == OpKind::Push) {
      for (std::size_t i = 0; i < ev->value.size(); ++i) value[i] += ev->value[i];
      continue;
    }
    for (std::size_t i = 0; i < ev->value.size(); ++i) {
      if (std::abs(ev->value[i] - value[i]) > tolerance) {
        Violation v;
        v.what = Violation::What::ReadValue;
        v.key = key;
        v.worker = ev->worker;
        v.op_a = ev->op_id;
        v.detail = "pull returned " + std::to_string(ev->value[i]) + " but replay holds " +
                   std::to_string(value[i]) + " at index " + std::to_string(i);
        return {v};
      }
    }
  }
  return {};
}

CheckResult check_all_keys(const std::vector<KeyEvent>& history, std::size_t value_len,
                           double tolerance) {
  std::set<Key> keys;
  for (const KeyEvent& ev : history) keys.insert(ev.key);
  const Value zeros(value_len, 0.0);
  for (Key k : keys) {
    CheckResult r = check_sequential(history, k, zeros, tolerance);
    if (!r.ok()) return r;
  }
  return {};
}

std::vector<StrategyCost> strategy_costs(std::uint32_t nodes, std::uint64_t keys) {
  if (nodes == 0) throw ConfigError("strategy_costs: need at least one node");
  const double n = static_cast<double>(nodes);
  const double k = static_cast<double>(keys);
  return {
      {"static partition", 0, 2, std::nullopt},
      {"broadcast operations", 0, n, 0},
      {"broadcast relocations", k, 2, n},
      {"home node", k / n, 3, 3},
  };
}

}  // namespace dpaps
