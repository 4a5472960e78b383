#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "dpaps/client.hpp"
#include "dpaps/node.hpp"

namespace dpaps {

// Multi-process runtime: one process per rank, one TCP connection per node
// pair (both directions), one reader thread per peer feeding the node's FIFO
// inbox, one event-loop thread consuming it, W worker threads. TCP_NODELAY is
// set on every connection.
class TcpRuntime {
 public:
  struct Options {
    NodeId rank = 0;
    std::vector<std::string> peers;  // "host:port" per rank, rank order
    std::uint32_t workers = 1;
    std::uint64_t key_count = 16;
    std::uint32_t value_len = 1;
    std::uint32_t latches = 1000;
    bool dense = true;
    bool caches = false;
    std::size_t cache_capacity = 0;
    std::function<Value(Key)> init;
    int connect_timeout_ms = 10000;
    int barrier_timeout_ms = 60000;
  };

  explicit TcpRuntime(Options opt);
  ~TcpRuntime();

  Node& node() { return *node_; }

  // Runs one program per local worker; returns when all have finished.
  // Programs must end quiescent (finish with a barrier) so no rank still
  // needs this one after shutdown.
  void run(std::vector<std::function<void(Client&)>> programs);

  // Protocol messages sent to other ranks (barrier traffic excluded).
  std::uint64_t sent_protocol_messages() const { return sent_protocol_; }

 private:
  class Endpoint;
  struct CondvarHooks;
  using InboxItem = std::variant<Message, LocalOp>;

  void post(InboxItem&& item);
  void event_loop();
  void reader_loop(NodeId peer, int fd);
  void connect_all();
  void send_frame(NodeId to, const Message& msg);

  Options opt_;
  std::unique_ptr<Endpoint> endpoint_;
  std::unique_ptr<Node> node_;

  int listen_fd_ = -1;
  std::vector<int> peer_fd_;

  std::mutex inbox_mutex_;
  std::condition_variable inbox_cv_;
  std::deque<InboxItem> inbox_;
  std::atomic<bool> running_{true};

  std::thread loop_thread_;
  std::vector<std::thread> reader_threads_;
  std::atomic<std::uint64_t> sent_protocol_{0};
};

}  // namespace dpaps
