#include "dpaps/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>

#include "dpaps/framing.hpp"

namespace dpaps {

namespace {

[[noreturn]] void die(const std::string& what) {
  throw TransportError(what + ": " + std::strerror(errno));
}

void write_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    ssize_t n = ::write(fd, data, len);
    if (n < 0) {
      if (errno == EINTR) continue;
      die("write");
    }
    data += n;
    len -= std::size_t(n);
  }
}

// false on clean EOF / shutdown, throws on error.
bool read_all(int fd, std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    ssize_t n = ::read(fd, data, len);
    if (n == 0) return false;
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;  // shutdown() during teardown surfaces as an error
    }
    data += n;
    len -= std::size_t(n);
  }
  return true;
}

std::pair<std::string, std::uint16_t> split_host_port(const std::string& ep) {
  auto pos = ep.rfind(':');
  if (pos == std::string::npos)
    throw ConfigError("peer endpoint must be host:port, got '" + ep + "'");
  return {ep.substr(0, pos), std::uint16_t(std::stoul(ep.substr(pos + 1)))};
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

// Transport facade handed to the Node; send() only ever runs on the
// event-loop thread, so each connection has a single writer.
class TcpRuntime::Endpoint : public Transport {
 public:
  explicit Endpoint(TcpRuntime& rt) : rt_(rt) {}
  void send(NodeId to, Message msg) override { rt_.send_frame(to, msg); }

 private:
  TcpRuntime& rt_;
};

struct TcpRuntime::CondvarHooks : WorkerHooks {
  explicit CondvarHooks(int barrier_timeout_ms) : barrier_timeout_(barrier_timeout_ms) {}

  void wait(const OpHandle& h) override {
    std::unique_lock lk(h->m);
    if (h->kind == OpKind::Barrier) {
      if (!h->cv.wait_for(lk, std::chrono::milliseconds(barrier_timeout_),
                          [&] { return h->done; })) {
        throw ProtocolError("barrier timed out after " +
                            std::to_string(barrier_timeout_) +
                            "ms; a peer rank likely exited or never started");
      }
      return;
    }
    h->cv.wait(lk, [&] { return h->done; });
  }

  int barrier_timeout_;
};

TcpRuntime::TcpRuntime(Options opt) : opt_(std::move(opt)) {
  if (opt_.rank >= opt_.peers.size())
    throw ConfigError("rank out of range of peer list");
  peer_fd_.assign(opt_.peers.size(), -1);

  endpoint_ = std::make_unique<Endpoint>(*this);
  NodeConfig nc;
  nc.self = opt_.rank;
  nc.nodes = std::uint32_t(opt_.peers.size());
  nc.workers = opt_.workers;
  nc.key_count = opt_.key_count;
  nc.value_len = opt_.value_len;
  nc.latches = opt_.latches;
  nc.dense = opt_.dense;
  nc.caches = opt_.caches;
  nc.cache_capacity = opt_.cache_capacity;
  nc.init = opt_.init;
  Node::Hooks hooks;
  hooks.clock = [] {
    auto t = std::chrono::steady_clock::now().time_since_epoch();
    return std::uint64_t(std::chrono::duration_cast<std::chrono::milliseconds>(t).count());
  };
  node_ = std::make_unique<Node>(nc, *endpoint_, hooks);
  node_->set_local_sink([this](LocalOp&& op) { post(std::move(op)); });

  connect_all();

  loop_thread_ = std::thread([this] { event_loop(); });
  for (NodeId p = 0; p < opt_.peers.size(); ++p) {
    if (p == opt_.rank) continue;
    reader_threads_.emplace_back([this, p] { reader_loop(p, peer_fd_[p]); });
  }
}

TcpRuntime::~TcpRuntime() {
  running_ = false;
  inbox_cv_.notify_all();
  for (int fd : peer_fd_)
    if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
  if (listen_fd_ >= 0) ::close(listen_fd_);
  for (auto& t : reader_threads_) t.join();
  if (loop_thread_.joinable()) loop_thread_.join();
  for (int fd : peer_fd_)
    if (fd >= 0) ::close(fd);
}

void TcpRuntime::connect_all() {
  const std::uint32_t n = std::uint32_t(opt_.peers.size());
  auto [self_host, self_port] = split_host_port(opt_.peers[opt_.rank]);
  (void)self_host;  // always bind all interfaces

  if (opt_.rank + 1 < n) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) die("socket");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(self_port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
      die("bind " + opt_.peers[opt_.rank]);
    if (::listen(listen_fd_, int(n)) < 0) die("listen");
  }

  // Each rank dials every lower rank and accepts from every higher one; the
  // first payload on a fresh connection is the dialer's rank (u32, LE).
  for (NodeId p = 0; p < opt_.rank; ++p) {
    auto [host, port] = split_host_port(opt_.peers[p]);
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0)
      throw TransportError("cannot resolve peer " + opt_.peers[p]);

    int fd = -1;
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::milliseconds(opt_.connect_timeout_ms);
    for (;;) {
      fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd < 0) die("socket");
      if (::connect(fd, res->ai_addr, res->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
      if (std::chrono::steady_clock::now() >= deadline) {
        ::freeaddrinfo(res);
        throw TransportError("timed out connecting to rank " + std::to_string(p) +
                             " at " + opt_.peers[p]);
      }
      ::usleep(50 * 1000);
    }
    ::freeaddrinfo(res);
    set_nodelay(fd);
    std::uint32_t hello = opt_.rank;
    write_all(fd, reinterpret_cast<const std::uint8_t*>(&hello), sizeof(hello));
    peer_fd_[p] = fd;
  }

  for (NodeId p = opt_.rank + 1; p < n; ++p) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) die("accept");
    set_nodelay(fd);
    std::uint32_t hello = 0;
    if (!read_all(fd, reinterpret_cast<std::uint8_t*>(&hello), sizeof(hello)))
      throw TransportError("peer hung up during rank hello");
    if (hello <= opt_.rank || hello >= n)
      throw TransportError("bad rank hello " + std::to_string(hello));
    if (peer_fd_[hello] != -1)
      throw TransportError("duplicate connection from rank " + std::to_string(hello));
    peer_fd_[hello] = fd;
  }
}

void TcpRuntime::send_frame(NodeId to, const Message& msg) {
  if (to == opt_.rank) throw ProtocolError("send to self must stay in-process");
  auto bytes = frame(msg);
  write_all(peer_fd_[to], bytes.data(), bytes.size());
  if (msg.kind != MsgKind::BarrierEnter && msg.kind != MsgKind::BarrierRelease)
    sent_protocol_.fetch_add(1, std::memory_order_relaxed);
}

void TcpRuntime::post(InboxItem&& item) {
  {
    std::lock_guard lk(inbox_mutex_);
    inbox_.push_back(std::move(item));
  }
  inbox_cv_.notify_one();
}

void TcpRuntime::reader_loop(NodeId peer, int fd) {
  std::vector<std::uint8_t> buf;
  for (;;) {
    std::uint32_t len_le = 0;
    if (!read_all(fd, reinterpret_cast<std::uint8_t*>(&len_le), sizeof(len_le))) return;
    if (len_le < kFrameHeaderBytes)
      throw TransportError("frame length " + std::to_string(len_le) + " below minimum");
    buf.resize(len_le);
    std::memcpy(buf.data(), &len_le, sizeof(len_le));
    if (!read_all(fd, buf.data() + 4, len_le - 4)) {
      if (!running_) return;
      throw TransportError("peer " + std::to_string(peer) + " truncated a frame");
    }
    post(unframe(buf));
  }
}

void TcpRuntime::event_loop() {
  for (;;) {
    InboxItem item{Message{}};
    {
      std::unique_lock lk(inbox_mutex_);
      inbox_cv_.wait(lk, [&] { return !inbox_.empty() || !running_; });
      if (inbox_.empty()) return;
      item = std::move(inbox_.front());
      inbox_.pop_front();
    }
    if (std::holds_alternative<Message>(item))
      node_->handle_message(std::move(std::get<Message>(item)));
    else
      node_->route_local(std::move(std::get<LocalOp>(item)));
  }
}

void TcpRuntime::run(std::vector<std::function<void(Client&)>> programs) {
  if (programs.size() != opt_.workers)
    throw ConfigError("expected one program per worker");
  CondvarHooks hooks(opt_.barrier_timeout_ms);
  std::vector<std::thread> threads;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::uint32_t w = 0; w < opt_.workers; ++w) {
    threads.emplace_back([&, w] {
      Client client(*node_, WorkerId{opt_.rank, std::uint16_t(w)}, hooks);
      try {
        programs[w](client);
      } catch (...) {
        std::lock_guard lk(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace dpaps
