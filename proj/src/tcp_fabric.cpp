#include "gtring/tcp_fabric.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>
#include <string>

#include "gtring/errors.hpp"

namespace gtring {

namespace {

void put_be32(std::byte* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::byte>((v >> (24 - 8 * i)) & 0xFFu);
}

void put_be64(std::byte* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::byte>((v >> (56 - 8 * i)) & 0xFFu);
}

std::uint32_t get_be32(const std::byte* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<std::uint32_t>(p[i]);
  return v;
}

std::uint64_t get_be64(const std::byte* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<std::uint64_t>(p[i]);
  return v;
}

void put_le(std::byte* p, std::uint64_t v, int width) {
  for (int i = 0; i < width; ++i) p[i] = static_cast<std::byte>((v >> (8 * i)) & 0xFFu);
}

std::uint64_t get_le(const std::byte* p, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

bool write_all(int fd, const void* data, std::size_t n) {
  const auto* p = static_cast<const char*>(data);
  while (n > 0) {
    const ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

bool read_all(int fd, void* data, std::size_t n) {
  auto* p = static_cast<char*>(data);
  while (n > 0) {
    const ssize_t r = ::recv(fd, p, n, 0);
    if (r == 0) return false;
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

in_addr resolve_ipv4(const std::string& host) {
  in_addr addr{};
  if (host.empty() || host == "0.0.0.0") {
    addr.s_addr = htonl(INADDR_ANY);
    return addr;
  }
  if (::inet_pton(AF_INET, host.c_str(), &addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw TransportError("cannot resolve host '" + host + "'");
  }
  addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

int connect_with_retry(in_addr addr, std::uint16_t port, std::chrono::duration<double> timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError(errno_text("socket"));
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(port);
    sa.sin_addr = addr;
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) == 0) {
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return fd;
    }
    ::close(fd);
    if (std::chrono::steady_clock::now() > deadline) {
      throw TransportTimeout("could not connect to port " + std::to_string(port));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

// Hello: magic, version, rank, listening port (all big-endian u32).
using Hello = std::array<std::byte, 16>;

Hello make_hello(int rank, std::uint16_t port) {
  Hello h{};
  put_be32(h.data(), TcpFabric::kMagic);
  put_be32(h.data() + 4, TcpFabric::kVersion);
  put_be32(h.data() + 8, static_cast<std::uint32_t>(rank));
  put_be32(h.data() + 12, port);
  return h;
}

std::pair<int, std::uint16_t> read_hello(int fd) {
  Hello h{};
  if (!read_all(fd, h.data(), h.size())) throw TransportError("connection closed during handshake");
  if (get_be32(h.data()) != TcpFabric::kMagic) throw TransportError("bad magic in handshake");
  if (get_be32(h.data() + 4) != TcpFabric::kVersion) throw TransportError("protocol version mismatch");
  return {static_cast<int>(get_be32(h.data() + 8)), static_cast<std::uint16_t>(get_be32(h.data() + 12))};
}

void send_hello(int fd, int rank, std::uint16_t port) {
  const Hello h = make_hello(rank, port);
  if (!write_all(fd, h.data(), h.size())) throw TransportError(errno_text("handshake write"));
}

int accept_one(int listen_fd) {
  for (;;) {
    const int fd = ::accept(listen_fd, nullptr, nullptr);
    if (fd >= 0) {
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return fd;
    }
    if (errno != EINTR) throw TransportError(errno_text("accept"));
  }
}

}  // namespace

int TcpFabric::open_listener(const std::string& host, std::uint16_t& port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError(errno_text("socket"));
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port);
  sa.sin_addr = resolve_ipv4(host);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
    const std::string err = errno_text("bind");
    ::close(fd);
    throw TransportError(err);
  }
  if (::listen(fd, 128) != 0) {
    const std::string err = errno_text("listen");
    ::close(fd);
    throw TransportError(err);
  }
  socklen_t len = sizeof sa;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len);
  port = ntohs(sa.sin_port);
  return fd;
}

TcpFabric::TcpFabric(int world_size, int rank, const std::string& host, std::uint16_t port,
                     std::chrono::duration<double> timeout, int listen_fd)
    : world_size_(world_size),
      rank_(rank),
      timeout_(timeout),
      start_(std::chrono::steady_clock::now()),
      peers_(static_cast<std::size_t>(world_size)) {
  if (world_size < 1 || rank < 0 || rank >= world_size) throw ConfigError("tcp fabric: invalid rank or world size");
  try {
    bootstrap(host, port, listen_fd);
  } catch (...) {
    for (auto& p : peers_) {
      if (p.fd >= 0) ::close(p.fd);
    }
    throw;
  }
  for (int r = 0; r < world_size_; ++r) {
    if (r == rank_) continue;
    auto& peer = peers_[static_cast<std::size_t>(r)];
    peer.reader = std::thread([this, r] { reader_loop(r); });
    peer.writer = std::thread([this, r] { writer_loop(r); });
  }
}

void TcpFabric::bootstrap(const std::string& host, std::uint16_t port, int listen_fd) {
  if (world_size_ == 1) {
    if (listen_fd >= 0) ::close(listen_fd);
    return;
  }
  const auto size = static_cast<std::size_t>(world_size_);

  if (rank_ == 0) {
    if (listen_fd < 0) listen_fd = open_listener(host, port);
    std::vector<std::array<std::byte, 8>> table(size);
    for (int i = 1; i < world_size_; ++i) {
      const int fd = accept_one(listen_fd);
      const auto [peer_rank, peer_port] = read_hello(fd);
      if (peer_rank <= 0 || peer_rank >= world_size_ || peers_[static_cast<std::size_t>(peer_rank)].fd >= 0) {
        ::close(fd);
        throw TransportError("unexpected rank " + std::to_string(peer_rank) + " at rendezvous");
      }
      peers_[static_cast<std::size_t>(peer_rank)].fd = fd;
      sockaddr_in sa{};
      socklen_t len = sizeof sa;
      ::getpeername(fd, reinterpret_cast<sockaddr*>(&sa), &len);
      std::memcpy(table[static_cast<std::size_t>(peer_rank)].data(), &sa.sin_addr.s_addr, 4);
      put_be32(table[static_cast<std::size_t>(peer_rank)].data() + 4, peer_port);
    }
    ::close(listen_fd);
    for (int i = 1; i < world_size_; ++i) {
      const int fd = peers_[static_cast<std::size_t>(i)].fd;
      send_hello(fd, 0, 0);
      if (!write_all(fd, table.data(), table.size() * 8)) throw TransportError(errno_text("address table write"));
    }
    return;
  }

  if (listen_fd >= 0) ::close(listen_fd);
  std::uint16_t my_port = 0;
  const int my_listener = open_listener(host.empty() ? "0.0.0.0" : "0.0.0.0", my_port);
  try {
    const int root_fd = connect_with_retry(resolve_ipv4(host.empty() ? "127.0.0.1" : host), port, timeout_);
    peers_[0].fd = root_fd;
    send_hello(root_fd, rank_, my_port);
    read_hello(root_fd);
    std::vector<std::array<std::byte, 8>> table(size);
    if (!read_all(root_fd, table.data(), table.size() * 8)) throw TransportError("address table truncated");

    for (int j = 1; j < rank_; ++j) {
      in_addr addr{};
      std::memcpy(&addr.s_addr, table[static_cast<std::size_t>(j)].data(), 4);
      const auto peer_port = static_cast<std::uint16_t>(get_be32(table[static_cast<std::size_t>(j)].data() + 4));
      const int fd = connect_with_retry(addr, peer_port, timeout_);
      peers_[static_cast<std::size_t>(j)].fd = fd;
      send_hello(fd, rank_, 0);
      read_hello(fd);
    }
    for (int j = rank_ + 1; j < world_size_; ++j) {
      const int fd = accept_one(my_listener);
      const auto [peer_rank, unused] = read_hello(fd);
      (void)unused;
      if (peer_rank <= rank_ || peer_rank >= world_size_ || peers_[static_cast<std::size_t>(peer_rank)].fd >= 0) {
        ::close(fd);
        throw TransportError("unexpected peer rank " + std::to_string(peer_rank));
      }
      peers_[static_cast<std::size_t>(peer_rank)].fd = fd;
      send_hello(fd, rank_, 0);
    }
  } catch (...) {
    ::close(my_listener);
    throw;
  }
  ::close(my_listener);
}

TcpFabric::~TcpFabric() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  writer_cv_.notify_all();
  for (auto& p : peers_) {
    if (p.writer.joinable()) p.writer.join();
  }
  for (auto& p : peers_) {
    if (p.fd >= 0) ::shutdown(p.fd, SHUT_RDWR);
  }
  for (auto& p : peers_) {
    if (p.reader.joinable()) p.reader.join();
    if (p.fd >= 0) ::close(p.fd);
  }
}

void TcpFabric::deliver_locked(const ChannelKey& key, std::span<const std::byte> payload) {
  Channel& ch = channels_[key];
  ++counters_.messages_delivered;
  counters_.bytes_delivered += payload.size();
  if (ch.recvs.empty()) {
    ch.unexpected.emplace_back(payload.begin(), payload.end());
    return;
  }
  auto [req, buffer] = ch.recvs.front();
  ch.recvs.pop_front();
  if (payload.size() > buffer.size()) {
    req->error = "message of " + std::to_string(payload.size()) + " bytes truncated by " +
                 std::to_string(buffer.size()) + "-byte receive buffer";
  } else if (!payload.empty()) {
    std::memcpy(buffer.data(), payload.data(), payload.size());
  }
  req->bytes = payload.size();
  req->completed = true;
}

void TcpFabric::reader_loop(int peer) {
  const int fd = peers_[static_cast<std::size_t>(peer)].fd;
  std::vector<std::byte> frame;
  for (;;) {
    std::array<std::byte, 8> len_bytes{};
    if (!read_all(fd, len_bytes.data(), len_bytes.size())) return;
    const std::uint64_t len = get_be64(len_bytes.data());
    if (len < kEnvelopeHeaderBytes) return;
    frame.resize(len);
    if (!read_all(fd, frame.data(), frame.size())) return;
    ChannelKey key;
    key.ctx = get_le(frame.data(), 8);
    key.src = static_cast<int>(get_le(frame.data() + 8, 4));
    key.dst = static_cast<int>(get_le(frame.data() + 12, 4));
    key.tag = static_cast<int>(static_cast<std::int32_t>(get_le(frame.data() + 16, 4)));
    {
      std::lock_guard lock(mu_);
      deliver_locked(key, std::span<const std::byte>(frame).subspan(kEnvelopeHeaderBytes));
    }
    cv_.notify_all();
  }
}

void TcpFabric::writer_loop(int peer) {
  Peer& p = peers_[static_cast<std::size_t>(peer)];
  for (;;) {
    OutgoingFrame out;
    {
      std::unique_lock lock(mu_);
      writer_cv_.wait(lock, [&] { return stopping_ || !p.outgoing.empty(); });
      if (p.outgoing.empty()) return;
      out = p.outgoing.front();
      p.outgoing.pop_front();
    }
    std::array<std::byte, 8 + kEnvelopeHeaderBytes> head{};
    put_be64(head.data(), kEnvelopeHeaderBytes + out.data.size());
    put_le(head.data() + 8, out.key.ctx, 8);
    put_le(head.data() + 16, static_cast<std::uint32_t>(out.key.src), 4);
    put_le(head.data() + 20, static_cast<std::uint32_t>(out.key.dst), 4);
    put_le(head.data() + 24, static_cast<std::uint32_t>(out.key.tag), 4);
    const bool ok = write_all(p.fd, head.data(), head.size()) &&
                    (out.data.empty() || write_all(p.fd, out.data.data(), out.data.size()));
    {
      std::lock_guard lock(mu_);
      if (!ok) out.req->error = errno_text("frame write");
      out.req->bytes = out.data.size();
      out.req->completed = true;
    }
    cv_.notify_all();
  }
}

RequestPtr TcpFabric::post_send(const ChannelKey& key, std::span<const std::byte> data) {
  if (key.dst < 0 || key.dst >= world_size_ || key.src != rank_) {
    throw DomainError("tcp fabric: invalid send endpoint");
  }
  auto req = std::make_shared<RequestState>(RequestState::Kind::kSend, key);
  {
    std::lock_guard lock(mu_);
    ++counters_.sends_posted;
    if (key.dst == rank_) {
      deliver_locked(key, data);
      req->bytes = data.size();
      req->completed = true;
    } else {
      peers_[static_cast<std::size_t>(key.dst)].outgoing.push_back(OutgoingFrame{req, key, data});
    }
  }
  cv_.notify_all();
  writer_cv_.notify_all();
  return req;
}

RequestPtr TcpFabric::post_recv(const ChannelKey& key, std::span<std::byte> data) {
  if (key.src < 0 || key.src >= world_size_ || key.dst != rank_) {
    throw DomainError("tcp fabric: invalid receive endpoint");
  }
  auto req = std::make_shared<RequestState>(RequestState::Kind::kRecv, key);
  {
    std::lock_guard lock(mu_);
    ++counters_.recvs_posted;
    Channel& ch = channels_[key];
    if (ch.unexpected.empty()) {
      ch.recvs.emplace_back(req, data);
      return req;
    }
    const std::vector<std::byte> payload = std::move(ch.unexpected.front());
    ch.unexpected.pop_front();
    if (payload.size() > data.size()) {
      req->error = "message of " + std::to_string(payload.size()) + " bytes truncated by " +
                   std::to_string(data.size()) + "-byte receive buffer";
    } else if (!payload.empty()) {
      std::memcpy(data.data(), payload.data(), payload.size());
    }
    req->bytes = payload.size();
    req->completed = true;
  }
  return req;
}

bool TcpFabric::await_ready(RequestState& req) {
  if (!wait_for(req, timeout_)) {
    const ChannelKey& k = req.channel;
    throw TransportTimeout(std::string(req.kind == RequestState::Kind::kSend ? "send" : "receive") + " on (src " +
                           std::to_string(k.src) + ", dst " + std::to_string(k.dst) + ", tag " +
                           std::to_string(k.tag) + ") did not complete within " + std::to_string(timeout_.count()) +
                           " s");
  }
  return true;
}

void TcpFabric::await_suspend(RequestState&, std::coroutine_handle<>) {
  throw std::logic_error("tcp fabric never suspends");
}

bool TcpFabric::test(const RequestState& req) const {
  std::lock_guard lock(mu_);
  return req.completed;
}

bool TcpFabric::wait_for(RequestState& req, std::chrono::duration<double> timeout) {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return req.completed; });
}

Task<void> TcpFabric::run_all(std::vector<std::function<Task<void>()>> bodies) {
  std::vector<std::exception_ptr> errors(bodies.size());
  std::vector<std::thread> threads;
  threads.reserve(bodies.size());
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    threads.emplace_back([&, i] {
      try {
        sync_wait(bodies[i]());
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  co_return;
}

double TcpFabric::now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

FabricCounters TcpFabric::counters() const {
  std::lock_guard lock(mu_);
  return counters_;
}

}  // namespace gtring
