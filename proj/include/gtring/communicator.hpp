#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "gtring/fabric.hpp"
#include "gtring/index_tensor.hpp"
#include "gtring/task.hpp"

namespace gtring {

/// Handle for an in-flight isend/irecv. Waiting twice is a ContractViolation.
class PendingOp {
 public:
  PendingOp() = default;
  explicit PendingOp(RequestPtr state) : state_(std::move(state)) {}

  bool valid() const noexcept { return static_cast<bool>(state_); }
  const RequestPtr& state() const noexcept { return state_; }

 private:
  RequestPtr state_;
};

// Tags at or above this value are reserved for collectives.
inline constexpr int kReservedTagBase = 1 << 24;

/// Group of ranks over a fabric, MPI-communicator style. Cheap to copy.
class Communicator {
 public:
  /// The world communicator as seen from world_rank.
  static Communicator world(std::shared_ptr<Fabric> fabric, int world_rank);

  int rank() const noexcept { return rank_; }
  int size() const noexcept { return static_cast<int>(members_.size()); }
  int world_rank() const noexcept { return members_[static_cast<std::size_t>(rank_)]; }
  int world_rank_of(int rank) const;
  std::uint64_t context() const noexcept { return ctx_; }
  Fabric& fabric() const noexcept { return *fabric_; }
  const std::shared_ptr<Fabric>& fabric_ptr() const noexcept { return fabric_; }

  PendingOp isend(std::span<const std::byte> payload, int dest, int tag);
  PendingOp irecv(std::span<std::byte> buffer, int source, int tag);

  /// co_await comm.wait(op) yields the delivered byte count.
  WaitAwaiter wait(PendingOp& op);
  /// Blocking wait for threaded fabrics.
  std::size_t wait_blocking(PendingOp& op);
  /// Bounded wait for threaded fabrics; false on timeout (op stays pending).
  bool wait_for(PendingOp& op, std::chrono::duration<double> timeout);
  bool test(const PendingOp& op) const;

  /// Collective: ranks sharing color form a new communicator ordered by
  /// (key, parent rank).
  Task<Communicator> split(int color, int key);

 private:
  Communicator(std::shared_ptr<Fabric> fabric, std::uint64_t ctx, std::vector<int> members, int rank);

  ChannelKey key_to(int dest, int tag) const;
  ChannelKey key_from(int source, int tag) const;
  void check_rank(int r, const char* what) const;
  void mark_waited(PendingOp& op) const;

  std::shared_ptr<Fabric> fabric_;
  std::uint64_t ctx_ = 0;
  std::vector<int> members_;
  int rank_ = 0;
  std::uint64_t split_seq_ = 0;
};

/// Entrywise sum of every rank's slice, accumulated in rank order 0, 1, 2, ...
/// Root receives the sum (meas_count summed as well); other ranks get nullopt.
Task<std::optional<GtSlice>> reduce_sum(Communicator& comm, const GtSlice& local, int root);

/// Variable-size gather; root receives one buffer per rank in rank order.
Task<std::vector<std::vector<std::byte>>> gather_bytes(Communicator& comm, std::span<const std::byte> local,
                                                       int root);

Task<void> barrier(Communicator& comm);

}  // namespace gtring
