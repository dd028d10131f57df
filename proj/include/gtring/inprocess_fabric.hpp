#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>

#include "gtring/fabric.hpp"

namespace gtring {

/// Shared-memory fabric: every rank (and every lane) is a thread of this
/// process. Transfers are rendezvous: a send stays pending until its matching
/// receive is posted, then the payload is copied straight into the receive
/// buffer. Waits block the calling thread and throw TransportTimeout after
/// the configured timeout, which is how stalls surface.
class InProcessFabric final : public Fabric {
 public:
  InProcessFabric(int world_size, std::chrono::duration<double> timeout);

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

  /// Runs one thread per body and joins them; rethrows the first failure.
  static void run_threads(std::vector<std::function<void()>> bodies);

 private:
  struct PendingSend {
    RequestPtr req;
    std::span<const std::byte> data;
  };
  struct PendingRecv {
    RequestPtr req;
    std::span<std::byte> data;
  };
  struct Channel {
    std::deque<PendingSend> sends;
    std::deque<PendingRecv> recvs;
  };

  void check_key(const ChannelKey& key) const;
  void deliver(const PendingSend& send, const PendingRecv& recv);

  int world_size_;
  std::chrono::duration<double> timeout_;
  std::chrono::steady_clock::time_point start_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<ChannelKey, Channel> channels_;
  FabricCounters counters_;
};

}  // namespace gtring
