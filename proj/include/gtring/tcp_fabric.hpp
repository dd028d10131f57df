#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "gtring/fabric.hpp"

namespace gtring {

/// Multi-process fabric: one OS process per rank over TCP.
///
/// Bootstrap: rank 0 listens on the rendezvous address; every other rank
/// opens its own listener, connects to rank 0 and announces (rank, port).
/// Rank 0 answers with the address table, then ranks build a full mesh
/// (rank r dials every 0 < j < r and accepts every j > r).
///
/// Wire format, per connection: 4-byte magic "GTRP", 4-byte version
/// (big-endian), followed by frames. A frame is an 8-byte big-endian length L
/// followed by L bytes: a 20-byte little-endian envelope header (u64 context,
/// u32 source, u32 destination, i32 tag) and the payload.
class TcpFabric final : public Fabric {
 public:
  static constexpr std::uint32_t kMagic = 0x47545250u;  // "GTRP"
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kEnvelopeHeaderBytes = 20;

  /// Binds a listening socket; port 0 picks an ephemeral port, written back.
  static int open_listener(const std::string& host, std::uint16_t& port);

  /// For rank 0, listen_fd may carry a socket already bound to the rendezvous
  /// address (ownership passes to the fabric); otherwise rank 0 binds it.
  TcpFabric(int world_size, int rank, const std::string& host, std::uint16_t port,
            std::chrono::duration<double> timeout, int listen_fd = -1);
  ~TcpFabric() override;

  TcpFabric(const TcpFabric&) = delete;
  TcpFabric& operator=(const TcpFabric&) = delete;

  int rank() const noexcept { return rank_; }
  int world_size() const override { return world_size_; }

  RequestPtr post_send(const ChannelKey& key, std::span<const std::byte> data) override;
  RequestPtr post_recv(const ChannelKey& key, std::span<std::byte> data) override;

  bool await_ready(RequestState& req) override;
  void await_suspend(RequestState& req, std::coroutine_handle<> h) override;
  bool test(const RequestState& req) const override;
  bool wait_for(RequestState& req, std::chrono::duration<double> timeout) override;

  Task<void> run_all(std::vector<std::function<Task<void>()>> bodies) override;

  double now() const override;
  ClockKind clock() const override { return ClockKind::kMonotonic; }
  FabricCounters counters() const override;

 private:
  struct OutgoingFrame {
    RequestPtr req;
    ChannelKey key;
    std::span<const std::byte> data;
  };
  struct Peer {
    int fd = -1;
    std::thread reader;
    std::thread writer;
    std::deque<OutgoingFrame> outgoing;  // guarded by mu_
  };
  struct Channel {
    std::deque<std::vector<std::byte>> unexpected;
    std::deque<std::pair<RequestPtr, std::span<std::byte>>> recvs;
  };

  void bootstrap(const std::string& host, std::uint16_t port, int listen_fd);
  void reader_loop(int peer);
  void writer_loop(int peer);
  void deliver_locked(const ChannelKey& key, std::span<const std::byte> payload);

  int world_size_;
  int rank_;
  std::chrono::duration<double> timeout_;
  std::chrono::steady_clock::time_point start_;

  std::vector<Peer> peers_;
  bool stopping_ = false;

  mutable std::mutex mu_;
  std::condition_variable cv_;         // request completion
  std::condition_variable writer_cv_;  // outgoing queues
  std::map<ChannelKey, Channel> channels_;
  FabricCounters counters_;
};

}  // namespace gtring
