#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dpaps/history.hpp"

namespace dpaps {

// Witness of a per-key sequential-consistency violation: either two ops of
// one worker applied against program order, or a pull whose returned value no
// replay in apply order can produce.
struct Violation {
  enum class What { ProgramOrder, ReadValue, Incomplete };
  What what = What::ProgramOrder;
  Key key = 0;
  WorkerId worker;
  std::uint64_t op_a = 0;  // earlier-issued op (applied later)
  std::uint64_t op_b = 0;
  std::string detail;
};

struct CheckResult {
  std::optional<Violation> violation;
  bool ok() const { return !violation.has_value(); }
};

// Per-key sequential consistency over a completed history:
//   (a) every worker's pull/push applies on this key follow op_id order, and
//   (b) replaying all applies in global order reproduces every pull's
//       returned value from the initial value plus the applied pushes.
// Replay is exact for integer-valued pushes; pass a tolerance for float
// workloads.
CheckResult check_sequential(const std::vector<KeyEvent>& history, Key key,
                             const Value& initial, double tolerance = 0.0);

// Convenience: checks every key that appears in the history, zero initial
// values of the given length.
CheckResult check_all_keys(const std::vector<KeyEvent>& history, std::size_t value_len,
                           double tolerance = 0.0);

// Closed-form costs of the location management strategies: storage entries
// per node, messages per remote access, messages per relocation.
struct StrategyCost {
  std::string name;
  double storage_per_node = 0;
  double msgs_remote_access = 0;
  std::optional<double> msgs_relocation;  // nullopt = n/a (static partition)
};

std::vector<StrategyCost> strategy_costs(std::uint32_t nodes, std::uint64_t keys);

}  // namespace dpaps
