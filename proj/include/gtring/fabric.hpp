#pragma once

#include <chrono>
#include <compare>
#include <coroutine>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gtring/task.hpp"

namespace gtring {

/// Exact matching key of a point-to-point message. Ranks are world ranks;
/// ctx separates communicators so split groups never see each other's traffic.
struct ChannelKey {
  std::uint64_t ctx = 0;
  int src = 0;
  int dst = 0;
  int tag = 0;

  friend auto operator<=>(const ChannelKey&, const ChannelKey&) = default;
};

enum class ClockKind { kMonotonic, kVirtual };

std::string to_string(ClockKind clock);

/// Shared completion state of one in-flight send or receive.
struct RequestState {
  enum class Kind { kSend, kRecv };

  RequestState(Kind k, ChannelKey key) : kind(k), channel(key) {}

  Kind kind;
  ChannelKey channel;
  bool completed = false;  // guarded by the owning fabric
  bool waited = false;
  std::size_t bytes = 0;   // bytes delivered (receives) or handed over (sends)
  std::string error;       // non-empty when the transfer failed
  std::coroutine_handle<> waiter;
};

using RequestPtr = std::shared_ptr<RequestState>;

/// Traffic totals kept by every fabric (exactly-once bookkeeping).
struct FabricCounters {
  std::uint64_t sends_posted = 0;
  std::uint64_t recvs_posted = 0;
  std::uint64_t messages_delivered = 0;
  std::uint64_t bytes_delivered = 0;
};

/// Endpoint-level message transport shared by the communicators of one
/// process. Implementations: in-process threads, simulated time, TCP.
///
/// Send buffers are borrowed, not copied, until the send completes; receive
/// buffers are written in place. Neither side allocates payload memory.
class Fabric {
 public:
  virtual ~Fabric() = default;

  virtual int world_size() const = 0;

  virtual RequestPtr post_send(const ChannelKey& key, std::span<const std::byte> data) = 0;
  virtual RequestPtr post_recv(const ChannelKey& key, std::span<std::byte> data) = 0;

  /// Blocking fabrics wait here for completion (or throw TransportTimeout) and
  /// return true. Event-driven fabrics report completion without blocking.
  virtual bool await_ready(RequestState& req) = 0;
  /// Parks a suspended coroutine until req completes (event-driven fabrics only).
  virtual void await_suspend(RequestState& req, std::coroutine_handle<> h) = 0;

  /// Non-blocking completion probe.
  virtual bool test(const RequestState& req) const = 0;
  /// Blocks up to timeout; returns completion. Not available on event-driven fabrics.
  virtual bool wait_for(RequestState& req, std::chrono::duration<double> timeout) = 0;

  /// Runs the tasks concurrently and completes when all have; the first
  /// failure is rethrown after every task has finished.
  virtual Task<void> run_all(std::vector<std::function<Task<void>()>> bodies) = 0;

  /// Seconds since the fabric was created, on the clock reported by clock().
  virtual double now() const = 0;
  virtual ClockKind clock() const = 0;

  virtual FabricCounters counters() const = 0;
};

/// co_await target for a single request.
class WaitAwaiter {
 public:
  WaitAwaiter(Fabric& fabric, RequestPtr req) : fabric_(&fabric), req_(std::move(req)) {}

  bool await_ready() { return fabric_->await_ready(*req_); }
  void await_suspend(std::coroutine_handle<> h) { fabric_->await_suspend(*req_, h); }
  std::size_t await_resume();

 private:
  Fabric* fabric_;
  RequestPtr req_;
};

}  // namespace gtring
