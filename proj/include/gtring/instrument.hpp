#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace gtring {

/// Point-in-time copy of the engine's counters and timers.
struct CounterSet {
  std::uint64_t envelopes_sent = 0;
  std::uint64_t envelopes_received = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t accumulations_applied = 0;
  // Payloads whose origin lane differs from the consuming lane.
  std::uint64_t foreign_lane_payloads = 0;
  // GSigma-sized allocations made on behalf of the lane.
  std::uint64_t gsigma_allocations = 0;
  // GSigma-sized allocations observed between the first and last ring step.
  std::uint64_t allocations_in_ring_loop = 0;
  // Ring steps after which the lane's three buffers were not the original three.
  std::uint64_t buffer_identity_violations = 0;

  double wait_s = 0;
  double accumulate_s = 0;
  double total_s = 0;

  CounterSet& operator+=(const CounterSet& other);
  friend bool operator==(const CounterSet&, const CounterSet&) = default;
};

void to_json(nlohmann::json& j, const CounterSet& c);
void from_json(const nlohmann::json& j, CounterSet& c);

/// Column order used by counters.csv.
std::vector<std::string> counter_columns();
std::vector<std::string> counter_values(const CounterSet& c);

/// Counters of one rank, one slot per lane. Updates are relaxed atomics so
/// lanes may record from their own threads; when disabled every update is a
/// single branch and snapshots stay zero.
class RankInstrument {
 public:
  RankInstrument(int lanes, bool enabled);

  bool enabled() const noexcept { return enabled_; }
  int lanes() const noexcept { return static_cast<int>(slots_.size()); }

  void count_send(int lane, std::uint64_t bytes);
  void count_recv(int lane, std::uint64_t bytes);
  void count_accumulation(int lane);
  void count_foreign_payload(int lane);
  void count_allocation(int lane);
  void count_ring_loop_allocations(int lane, std::uint64_t n);
  void count_identity_violation(int lane);
  void add_wait(int lane, double seconds);
  void add_accumulate(int lane, double seconds);
  void add_total(int lane, double seconds);

  /// Allocations recorded so far for a lane, regardless of enabled().
  std::uint64_t allocations(int lane) const;

  CounterSet snapshot_lane(int lane) const;
  CounterSet snapshot_rank() const;

 private:
  struct Slot {
    std::atomic<std::uint64_t> envelopes_sent{0};
    std::atomic<std::uint64_t> envelopes_received{0};
    std::atomic<std::uint64_t> bytes_sent{0};
    std::atomic<std::uint64_t> bytes_received{0};
    std::atomic<std::uint64_t> accumulations_applied{0};
    std::atomic<std::uint64_t> foreign_lane_payloads{0};
    std::atomic<std::uint64_t> gsigma_allocations{0};
    std::atomic<std::uint64_t> allocations_in_ring_loop{0};
    std::atomic<std::uint64_t> buffer_identity_violations{0};
    std::atomic<double> wait_s{0};
    std::atomic<double> accumulate_s{0};
    std::atomic<double> total_s{0};
  };

  Slot& slot(int lane);
  const Slot& slot(int lane) const;

  bool enabled_;
  std::vector<Slot> slots_;
};

/// Sum of a set of snapshots (e.g. all lanes of a rank, all ranks of a run).
CounterSet sum_counters(std::span<const CounterSet> sets);

}  // namespace gtring
