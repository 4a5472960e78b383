// Acceptance gate: one line per criterion, exit 0 iff all pass.

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dpaps/checker.hpp"
#include "dpaps/framing.hpp"
#include "dpaps/sim.hpp"
#include "dpaps/workloads.hpp"

using namespace dpaps;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool ok, const std::string& detail = "") {
  std::printf("criterion %2d: %-58s %s\n", idx, name.c_str(), ok ? "PASS" : "FAIL");
  if (!ok) {
    ++g_failures;
    if (!detail.empty()) std::printf("              %s\n", detail.c_str());
  }
}

// --- criterion 1: per-access and per-relocation message counts --------------

bool check_message_counts(std::string& detail) {
  SimCluster::Options o;
  o.nodes = 4;
  o.workers = 1;
  o.key_count = 8;
  o.value_len = 1;
  o.caches = true;
  o.seed = 1;
  SimCluster sim(o);
  const Key k = 3;  // homed at node 1
  std::vector<std::uint64_t> counts;
  std::size_t mark = 0;
  auto phase = [&] {
    counts.push_back(sim.message_count(mark));
    mark = sim.log().size();
  };

  sim.add_worker({0, 0}, [&](Client& c) {
    c.push({0}, {{1.0}});  // local: no traffic (checked by counts[0])
    c.barrier();           // round 0: node 2 localizes key 3
    phase();
    c.pull({k});  // uncached remote access
    phase();
    c.pull({k});  // correct cache
    phase();
    c.barrier();
    c.barrier();  // round 2: node 3 localizes (all roles distinct)
    phase();
    c.pull({k});  // stale cache
    phase();
    c.barrier();
    c.barrier();  // round 4: home localizes (requester == home)
    phase();
  });
  sim.add_worker({1, 0}, [&](Client& c) {
    for (int i = 0; i < 4; ++i) c.barrier();
    c.localize({k});
    c.barrier();
  });
  sim.add_worker({2, 0}, [&](Client& c) {
    c.localize({k});  // owner == home: 2 messages
    for (int i = 0; i < 5; ++i) c.barrier();
  });
  sim.add_worker({3, 0}, [&](Client& c) {
    c.barrier();
    c.barrier();
    c.localize({k});
    c.barrier();
    c.barrier();
    c.barrier();
  });
  sim.run();

  const std::vector<std::uint64_t> want = {2, 3, 2, 3, 4, 2};
  if (counts != want) {
    std::ostringstream s;
    s << "phase counts";
    for (auto c : counts) s << ' ' << c;
    s << ", want 2 3 2 3 4 2";
    detail = s.str();
    return false;
  }

  // Conflict chain: two localizes race for a key owned away from its home.
  SimCluster sim2(o);
  sim2.add_worker({0, 0}, [&](Client& c) { c.localize({k}); });
  sim2.add_worker({2, 0}, [&](Client& c) { c.localize({k}); });
  sim2.add_worker({3, 0}, [&](Client& c) { c.localize({k}); });
  sim2.run_worker_until_parked({0, 0});
  sim2.deliver_all();
  sim2.run_worker_until_parked({0, 0});  // key now at node 0
  const std::size_t m2 = sim2.log().size();
  sim2.run_worker_until_parked({2, 0});  // A
  sim2.run_worker_until_parked({3, 0});  // B
  sim2.deliver(2, 1);
  sim2.deliver(3, 1);  // home points at A, then at B
  sim2.deliver(1, 0);
  sim2.deliver(1, 2);  // instructs, B's deferred at A
  sim2.deliver(0, 2);  // handover to A, chained on to B
  sim2.deliver(2, 3);
  sim2.deliver_all();
  sim2.run_worker_until_parked({2, 0});
  sim2.run_worker_until_parked({3, 0});
  if (sim2.message_count(m2) != 6) {
    detail = "conflict chain used " + std::to_string(sim2.message_count(m2)) +
             " messages, want 6";
    return false;
  }
  if (!sim2.node(3).store().contains(k) || sim2.node(2).store().contains(k)) {
    detail = "conflict chain: key did not end at the second requester";
    return false;
  }
  return true;
}

// --- criteria 2 and 3: randomized schedules ---------------------------------

void random_ops(Client& c, std::uint64_t seed, bool sync) {
  std::mt19937_64 gen(seed + c.worker().node * 997 + c.worker().local * 31);
  std::vector<OpHandle> open;
  for (int i = 0; i < 40; ++i) {
    Key k = gen() % 64;
    switch (gen() % 5) {
      case 0:
      case 1:
        if (sync) c.pull({k});
        else open.push_back(c.pull_async({k}));
        break;
      case 2:
      case 3: {
        std::vector<Value> u{{double(gen() % 7)}};
        if (sync) c.push({k}, std::move(u));
        else open.push_back(c.push_async({k}, std::move(u)));
        break;
      }
      case 4:
        if (sync) c.localize({k});
        else open.push_back(c.localize_async({k}));
        break;
    }
    if (open.size() > 4) {
      c.wait(open.front());
      open.erase(open.begin());
    }
  }
  for (auto& h : open) c.wait(h);
  c.barrier();
}

bool check_schedules(bool sync, bool caches, std::string& detail) {
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    SimCluster::Options o;
    o.nodes = 4;
    o.workers = 2;
    o.key_count = 64;
    o.value_len = 1;
    o.caches = caches;
    o.seed = seed;
    o.record_history = true;
    SimCluster sim(o);
    for (NodeId n = 0; n < 4; ++n)
      for (std::uint16_t w = 0; w < 2; ++w)
        sim.add_worker({n, w},
                       [seed, sync](Client& c) { random_ops(c, seed * 131, sync); });
    sim.run();
    auto res = check_all_keys(sim.history()->events(), 1);
    if (!res.ok()) {
      detail = "seed " + std::to_string(seed) + ": " + res.violation->detail;
      return false;
    }
  }
  return true;
}

// --- criterion 4: scripted staleness violation with a matching witness ------

bool check_staleness_witness(std::string& detail) {
  SimCluster::Options o;
  o.nodes = 3;
  o.workers = 1;
  o.key_count = 6;
  o.value_len = 1;
  o.caches = true;
  o.seed = 1;
  o.record_history = true;
  SimCluster sim(o);
  const Key k = 2;  // homed at node 1

  std::uint64_t op_push1 = 0, op_push2 = 0;
  sim.add_worker({0, 0}, [&](Client& c) {
    c.pull({k});
    c.barrier();
    OpHandle h0 = c.pull_async({k});
    OpHandle h1 = c.push_async({k}, {{1.0}});
    op_push1 = h1->op_id;
    c.wait(h0);
    OpHandle h2 = c.push_async({k}, {{2.0}});
    op_push2 = h2->op_id;
    c.wait(h1);
    c.wait(h2);
    c.barrier();
  });
  sim.add_worker({1, 0}, [&](Client& c) {
    c.barrier();
    c.barrier();
  });
  sim.add_worker({2, 0}, [&](Client& c) {
    c.localize({k});
    c.barrier();
    c.barrier();
  });

  sim.run_worker_until_parked({0, 0});
  sim.deliver_all();
  sim.run_worker_until_parked({0, 0});
  sim.run_worker_until_parked({1, 0});
  sim.run_worker_until_parked({2, 0});
  sim.deliver_all();
  sim.run_worker_until_parked({2, 0});
  sim.deliver_all();
  sim.run_worker_until_parked({1, 0});
  sim.run_worker_until_parked({2, 0});
  sim.run_worker_until_parked({0, 0});  // h0 + h1 chase the stale cache entry

  sim.deliver(0, 1);
  sim.deliver(0, 1);
  sim.deliver(1, 2);  // pull served, hint refreshes the cache
  sim.deliver(2, 0);  // barrier entry queued ahead of the response
  sim.deliver(2, 0);
  sim.run_worker_until_parked({0, 0});  // h2 goes straight to the new owner
  sim.deliver(0, 2);                    // h2 applies before h1
  sim.deliver(1, 2);
  sim.deliver_all();
  sim.run();

  auto res = check_sequential(sim.history()->events(), k, {0.0});
  if (res.ok()) {
    detail = "no violation detected";
    return false;
  }
  const Violation& v = *res.violation;
  if (v.what != Violation::What::ProgramOrder || v.key != k ||
      !(v.worker == WorkerId{0, 0}) || v.op_a != op_push1 || v.op_b != op_push2) {
    detail = "unexpected witness: " + v.detail;
    return false;
  }
  return true;
}

// --- criteria 5 and 6: conservation and single ownership under churn --------

struct ChurnOutcome {
  bool ran = false;
  double stored_sum = 0;
  double pushed_sum = 0;
  std::uint64_t lost = 0;
  std::uint64_t duplicated = 0;
  std::uint64_t monitor_violations = 0;
  std::string monitor_detail;
  bool single_owner = true;
  double seconds = 0;
};

ChurnOutcome run_churn() {
  constexpr std::uint32_t kNodes = 8, kWorkers = 4;
  constexpr std::uint64_t kKeys = 256;
  constexpr int kPushes = 100000;

  SimCluster::Options o;
  o.nodes = kNodes;
  o.workers = kWorkers;
  o.key_count = kKeys;
  o.value_len = 1;
  o.caches = true;
  o.seed = 42;
  o.monitor = true;
  o.audit = true;
  SimCluster sim(o);

  std::atomic<double> pushed{0.0};
  auto start = std::chrono::steady_clock::now();
  for (NodeId n = 0; n < kNodes; ++n) {
    for (std::uint16_t w = 0; w < kWorkers; ++w) {
      sim.add_worker({n, w}, [&pushed](Client& c) {
        std::mt19937_64 gen(c.worker().node * 131 + c.worker().local + 7);
        double total = 0;
        std::vector<OpHandle> open;
        for (int i = 0; i < kPushes; ++i) {
          Key k = gen() % kKeys;
          double delta = double(1 + gen() % 9);
          total += delta;
          open.push_back(c.push_async({k}, {{delta}}));
          if (open.size() > 8) {
            c.wait(open.front());
            open.erase(open.begin());
          }
          if (i % 97 == 0) c.localize({gen() % kKeys});  // churn
        }
        for (auto& h : open) c.wait(h);
        double expect = pushed.load();
        while (!pushed.compare_exchange_weak(expect, expect + total)) {
        }
        c.barrier();
      });
    }
  }
  sim.run();

  ChurnOutcome out;
  out.ran = true;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.pushed_sum = pushed.load();
  for (Key k = 0; k < kKeys; ++k) {
    int holders = 0;
    for (NodeId n = 0; n < kNodes; ++n) {
      if (sim.node(n).store().contains(k)) {
        ++holders;
        out.stored_sum += (*sim.node(n).store().read(k))[0];
      }
    }
    if (holders != 1) out.single_owner = false;
  }
  out.lost = sim.audit()->lost();
  out.duplicated = sim.audit()->duplicated();
  out.monitor_violations = sim.monitor()->violations();
  out.monitor_detail = sim.monitor()->first_violation();
  return out;
}

// --- criterion 7: factorization ---------------------------------------------

bool check_mf(std::string& detail) {
  MfOptions opt;  // 100x100, rank 5, up to 50 epochs by default
  opt.target_rmse = 0.05;
  {
    SimExecutor ex(1, 1, 3);
    MfOptions serial = opt;
    serial.target_rmse = 0;  // fixed-length run for the exact comparison
    serial.epochs = 5;
    auto res = run_dsgd_mf(ex, serial);
    double oracle = mf_oracle_rmse(serial, 1);
    if (std::abs(res.rmse - oracle) > 1e-9) {
      detail = "serial equivalence off by " + std::to_string(std::abs(res.rmse - oracle));
      return false;
    }
    if (res.epoch_nonlocal_reads != 0) {
      detail = "serial run had nonlocal reads";
      return false;
    }
  }
  SimExecutor ex(4, 2, 3);
  auto res = run_dsgd_mf(ex, opt);
  if (!(res.rmse < 0.05) || res.epochs_run > 50) {
    detail = "rmse " + std::to_string(res.rmse) + " after " +
             std::to_string(res.epochs_run) + " epochs";
    return false;
  }
  if (res.epoch_nonlocal_reads != 0) {
    detail = std::to_string(res.epoch_nonlocal_reads) + " nonlocal reads inside subepochs";
    return false;
  }
  return true;
}

// --- criterion 8: access locality -------------------------------------------

bool check_locality(std::string& detail) {
  {
    ClusteringOptions opt;
    opt.key_count = 1 << 14;
    opt.skew = 0.9;
    opt.reads_per_worker = 2000;
    opt.seed = 3;
    SimExecutor ex(8, 2, 3, 1000, true);
    auto res = run_data_clustering(ex, opt);
    if (res.local_fraction < 0.88 || res.local_fraction > 0.92) {
      detail = "skew 0.9 local fraction " + std::to_string(res.local_fraction);
      return false;
    }
  }
  {
    ClusteringOptions opt;
    opt.key_count = 1 << 12;
    opt.skew = 1.0;
    opt.reads_per_worker = 500;
    SimExecutor ex(8, 2, 4);
    auto res = run_data_clustering(ex, opt);
    if (res.local_fraction != 1.0) {
      detail = "skew 1.0 local fraction " + std::to_string(res.local_fraction);
      return false;
    }
  }
  {
    LatencyOptions opt;
    LatencyResult with, without;
    {
      SimExecutor ex(4, 2, 5);
      opt.lookahead = 1;
      with = run_latency_hiding(ex, opt);
    }
    {
      SimExecutor ex(4, 2, 5);
      opt.lookahead = 0;
      without = run_latency_hiding(ex, opt);
    }
    if (with.nonlocal_reads_from_point2 != 0) {
      detail = "prefetching left nonlocal reads after warmup";
      return false;
    }
    if (with.blocked_waits >= without.blocked_waits) {
      detail = "lookahead 1 blocked " + std::to_string(with.blocked_waits) +
               " times, lookahead 0 " + std::to_string(without.blocked_waits);
      return false;
    }
  }
  return true;
}

// --- criterion 9: strategy cost table ---------------------------------------

bool check_costs(std::string& detail) {
  struct Want {
    std::uint32_t n;
    std::uint64_t k;
  };
  for (Want w : {Want{2, 100}, Want{8, 1000}}) {
    auto t = strategy_costs(w.n, w.k);
    const double n = w.n, k = double(w.k);
    bool ok = t.size() == 4 && t[0].name == "static partition" &&
              t[0].storage_per_node == 0 && t[0].msgs_remote_access == 2 &&
              !t[0].msgs_relocation && t[1].name == "broadcast operations" &&
              t[1].storage_per_node == 0 && t[1].msgs_remote_access == n &&
              t[1].msgs_relocation == 0 && t[2].name == "broadcast relocations" &&
              t[2].storage_per_node == k && t[2].msgs_remote_access == 2 &&
              t[2].msgs_relocation == n && t[3].name == "home node" &&
              t[3].storage_per_node == k / n && t[3].msgs_remote_access == 3 &&
              t[3].msgs_relocation == 3;
    if (!ok) {
      detail = "table wrong for nodes=" + std::to_string(w.n) +
               " keys=" + std::to_string(w.k);
      return false;
    }
  }
  return true;
}

// --- criterion 10: framing, determinism, live sockets ------------------------

bool check_framing_roundtrip(std::string& detail) {
  std::mt19937_64 gen(0xACCE97);
  std::uniform_real_distribution<double> val(-1e9, 1e9);
  for (int i = 0; i < 20000; ++i) {
    Message m;
    m.kind = static_cast<MsgKind>(gen() % 10);
    m.sender = std::uint32_t(gen() % 1024);
    m.origin_worker = {std::uint32_t(gen() % 1024), std::uint32_t(gen() % 64)};
    m.op_id = gen();
    m.reply_to = std::uint32_t(gen() % 1024);
    if (gen() % 2) m.owner_hint = std::uint32_t(gen() % 1024);
    const std::size_t nk = gen() % 6;
    for (std::size_t j = 0; j < nk; ++j) m.keys.push_back(gen());
    if (nk && gen() % 2) {
      m.has_payload = true;
      const std::size_t vl = 1 + gen() % 8;
      for (std::size_t j = 0; j < nk; ++j) {
        Value v(vl);
        for (auto& x : v) x = val(gen);
        m.payload.push_back(v);
      }
    }
    if (!(unframe(frame(m)) == m)) {
      detail = "roundtrip mismatch at iteration " + std::to_string(i);
      return false;
    }
  }
  return true;
}

bool check_determinism(std::string& detail) {
  auto once = [] {
    SimCluster::Options o;
    o.nodes = 4;
    o.workers = 2;
    o.key_count = 64;
    o.value_len = 1;
    o.caches = true;
    o.seed = 99;
    SimCluster sim(o);
    for (NodeId n = 0; n < 4; ++n)
      for (std::uint16_t w = 0; w < 2; ++w)
        sim.add_worker({n, w}, [](Client& c) { random_ops(c, 555, false); });
    sim.run();
    return sim.log_as_text();
  };
  std::string a = once(), b = once();
  if (a != b) {
    detail = "same seed produced different message logs";
    return false;
  }
  return true;
}

bool check_tcp_smoke(std::string& detail) {
  std::string child = "tcp_smoke_child";
  char self[4096];
  ssize_t len = ::readlink("/proc/self/exe", self, sizeof(self) - 1);
  if (len > 0) {
    self[len] = 0;
    std::string dir(self);
    dir.resize(dir.find_last_of('/') + 1);
    child = dir + "tcp_smoke_child";
  }

  std::vector<pid_t> pids;
  for (int rank = 0; rank < 2; ++rank) {
    pid_t pid = ::fork();
    if (pid == 0) {
      std::string r = std::to_string(rank);
      ::execl(child.c_str(), child.c_str(), r.c_str(), "23417", nullptr);
      std::perror("execl");
      ::_exit(127);
    }
    pids.push_back(pid);
  }
  bool ok = true;
  for (pid_t pid : pids) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      detail = "child " + std::to_string(pid) + " exited with status " +
               std::to_string(status);
      ok = false;
    }
  }
  return ok;
}

}  // namespace

int main() {
  std::string d;

  d.clear();
  report(1, "message counts per access and relocation", check_message_counts(d), d);

  d.clear();
  report(2, "sequential consistency, synchronous ops, 1000 schedules",
         check_schedules(true, true, d), d);

  d.clear();
  report(3, "sequential consistency, async ops without caches, 1000 schedules",
         check_schedules(false, false, d), d);

  d.clear();
  report(4, "stale-cache schedule yields the expected witness",
         check_staleness_witness(d), d);

  ChurnOutcome churn = run_churn();
  {
    bool ok = churn.ran && churn.stored_sum == churn.pushed_sum && churn.lost == 0 &&
              churn.duplicated == 0 && churn.seconds < 120.0;
    std::ostringstream s;
    s << "stored " << churn.stored_sum << " pushed " << churn.pushed_sum << " lost "
      << churn.lost << " dup " << churn.duplicated << " in " << churn.seconds << "s";
    report(5, "conservation under relocation churn (3.2M pushes)", ok, s.str());
  }
  {
    bool ok = churn.monitor_violations == 0 && churn.single_owner;
    report(6, "single-owner invariant holds throughout the churn run", ok,
           churn.monitor_detail);
  }

  d.clear();
  report(7, "blocked factorization: serial equivalence and convergence",
         check_mf(d), d);

  d.clear();
  report(8, "locality: clustering fractions and prefetch effectiveness",
         check_locality(d), d);

  d.clear();
  report(9, "location strategy cost table", check_costs(d), d);

  d.clear();
  bool f1 = check_framing_roundtrip(d);
  bool f2 = f1 && check_determinism(d);
  bool f3 = f2 && check_tcp_smoke(d);
  report(10, "wire framing, schedule determinism, live TCP smoke", f1 && f2 && f3, d);

  if (g_failures) {
    std::printf("%d criteria FAILED\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
