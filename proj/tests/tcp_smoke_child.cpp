// Helper process for the two-rank TCP smoke test. Usage: tcp_smoke_child
// <rank> <port-base>. Exits 0 when its share of the checks pass.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "dpaps/tcp.hpp"

using namespace dpaps;

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: %s <rank> <port-base>\n", argv[0]);
    return 2;
  }
  const NodeId rank = NodeId(std::atoi(argv[1]));
  const int base = std::atoi(argv[2]);

  constexpr std::uint64_t kKeys = 64;
  constexpr std::uint32_t kWorkers = 2;
  constexpr int kRepeat = 25;

  TcpRuntime::Options opt;
  opt.rank = rank;
  opt.peers = {"127.0.0.1:" + std::to_string(base),
               "127.0.0.1:" + std::to_string(base + 1)};
  opt.workers = kWorkers;
  opt.key_count = kKeys;
  opt.value_len = 1;
  opt.caches = true;
  opt.cache_capacity = 64;

  try {
    TcpRuntime rt(opt);

    std::vector<std::function<void(Client&)>> programs;
    for (std::uint32_t w = 0; w < kWorkers; ++w) {
      programs.push_back([rank, w](Client& c) {
        // Move a few keys around first so relocation runs over real sockets.
        for (Key k = rank * 8 + w * 4; k < rank * 8 + w * 4 + 4; ++k)
          c.localize({(k + kKeys / 2) % kKeys});
        c.barrier();
        for (int i = 0; i < kRepeat; ++i)
          for (Key k = 0; k < kKeys; ++k) c.push({k}, {{1.0}});
        c.barrier();
        if (rank == 0 && w == 0) {
          const double want = 2.0 * kWorkers * kRepeat;
          for (Key k = 0; k < kKeys; ++k) {
            double got = c.pull({k})[0][0];
            if (got != want) {
              std::fprintf(stderr, "key %llu: got %f want %f\n",
                           static_cast<unsigned long long>(k), got, want);
              std::exit(1);
            }
          }
        }
        c.barrier();
      });
    }
    rt.run(std::move(programs));

    if (rt.sent_protocol_messages() == 0) {
      std::fprintf(stderr, "rank %u sent no protocol messages\n", rank);
      return 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rank %u failed: %s\n", rank, e.what());
    return 1;
  }
  return 0;
}
