#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gtring/communicator.hpp"
#include "gtring/config.hpp"
#include "gtring/fabric.hpp"
#include "gtring/index_tensor.hpp"
#include "gtring/instrument.hpp"
#include "gtring/memory_model.hpp"
#include "gtring/task.hpp"
#include "json.hpp"

namespace gtring {

inline constexpr int kRecvTag = 1000;
inline constexpr int kSendTag = 1000;
inline constexpr int kLaneTagStride = 1000;

/// One rank's view of the ring layout.
struct RingTopology {
  int world_size = 1;
  int subring_size = 1;
  int lanes = 1;
  Direction direction = Direction::kForward;
  int my_rank = 0;  // rank inside the sub-ring

  /// Throws ConfigError unless S >= 1 divides the world, 1 <= lanes < stride
  /// (DomainError unless my_rank is inside the sub-ring).
  static RingTopology make(int world_size, int subring_size, int lanes, Direction direction, int my_rank);

  int left() const noexcept { return (my_rank - 1 + subring_size) % subring_size; }
  int right() const noexcept { return (my_rank + 1) % subring_size; }
};

struct LaneRing {
  int left = 0;   // receive from
  int right = 0;  // send to
  int recv_tag = 0;
  int send_tag = 0;

  friend bool operator==(const LaneRing&, const LaneRing&) = default;
};

/// Neighbours and tags of lane t. Under the alternate policy odd lanes run
/// the ring the other way round.
LaneRing lane_ring_id(const RingTopology& topology, int lane);

/// Consecutive groups of s world ranks: color r / s, key r mod s.
Task<Communicator> build_subrings(Communicator& world, int s);

/// The three G_sigma-sized buffers of a lane: generated, send and receive.
/// They are allocated once and afterwards only exchanged by handle swap.
class LaneState {
 public:
  LaneState(const CombinedIndexSpace& space, int lane, RankInstrument* instrument, MemoryTracker* tracker);
  ~LaneState();

  LaneState(const LaneState&) = delete;
  LaneState& operator=(const LaneState&) = delete;

  int lane() const noexcept { return lane_; }
  GSigma& gsigma() noexcept { return bufs_[0]; }
  GSigma& send() noexcept { return bufs_[1]; }
  GSigma& recv() noexcept { return bufs_[2]; }

  std::uint64_t measurements_done = 0;

  /// GSigma-sized allocations made through this lane's buffers so far.
  std::uint64_t allocations() const noexcept { return observer_.count.load(); }
  /// True while the three buffers still own the storage they were created with.
  bool buffers_intact() const;

 private:
  struct Observer final : AllocationObserver {
    int lane = 0;
    RankInstrument* instrument = nullptr;
    MemoryTracker* tracker = nullptr;
    std::atomic<std::uint64_t> count{0};
    std::atomic<std::uint64_t> tracked_bytes{0};
    void on_gsigma_allocation(std::size_t matrix_bytes) override;
  };

  int lane_;
  Observer observer_;
  std::vector<GSigma> bufs_;
  std::vector<const void*> initial_ids_;
};

/// Payload accumulated by a rank, tagged with the lane that consumed it.
struct OriginRecord {
  int consumer_lane = 0;
  Origin origin;
  friend bool operator==(const OriginRecord&, const OriginRecord&) = default;
};

/// Where each lane currently is; read to name a stalled lane.
struct LaneProgress {
  std::atomic<std::uint64_t> measurement{0};
  std::atomic<int> step{-1};
  std::atomic<int> phase{0};  // 0 idle, 1 generate, 2 wait receive, 3 wait send, 4 finished
};

/// Rank-local state shared by the lanes of one rank.
struct MeasurementContext {
  std::uint64_t seed = 0;
  ValueMode mode = ValueMode::kFloat;
  int world_rank = 0;
  int subring = 0;
  int ring_steps = 0;  // S - 1
  GtSlice* slice = nullptr;  // null: communication only
  std::mutex* slice_mu = nullptr;
  RankInstrument* instrument = nullptr;
  std::vector<OriginRecord>* origins = nullptr;  // optional, guarded by slice_mu
  LaneProgress* progress = nullptr;              // optional, indexed by lane
  bool drop_sends = false;                       // test hook: never send
};

/// One measurement of one lane: generate, accumulate, then ring_steps
/// exchange steps (receive from left, send to right, accumulate, swap).
Task<void> run_measurement(const RingTopology& topology, LaneState& lane, Communicator& subring,
                           const MeasurementContext& ctx);

struct EngineOptions {
  bool instrument = true;
  bool record_origins = false;
  /// Replaces S - 1 as the number of ring steps (negative controls).
  std::optional<int> ring_steps_override;
  /// (world rank, lane) that never sends; used to provoke a stall.
  std::optional<std::pair<int, int>> drop_sends;
};

struct RankReport {
  int world_rank = 0;
  int subring = 0;
  int subring_rank = 0;
  std::uint32_t slice_lo = 0;
  std::uint32_t slice_hi = 0;
  std::uint64_t meas_count = 0;  // accumulations into the local slice
  std::vector<CounterSet> lanes;
  std::uint64_t peak_bytes = 0;
  std::uint64_t peak_gt_bytes = 0;
  std::uint64_t peak_gsigma_bytes = 0;
  std::vector<MemorySample> memory;
  std::vector<OriginRecord> origins;
  double ring_elapsed_s = 0;  // longest lane

  CounterSet totals() const { return sum_counters(lanes); }
};

void to_json(nlohmann::json& j, const RankReport& r);
void from_json(const nlohmann::json& j, RankReport& r);

struct ExperimentReport {
  ExperimentConfig config;
  ClockKind clock = ClockKind::kMonotonic;
  /// Full reduced tensor (absent in communication-only runs).
  std::optional<GtSlice> tensor;
  std::vector<RankReport> ranks;  // by world rank
  CounterSet totals;
  FabricCounters fabric;
  MemoryPlan memory_plan;
  double ring_elapsed_s = 0;  // longest lane over all ranks, fabric clock
  double elapsed_s = 0;       // whole run, fabric clock
};

/// FNV-1a over the tensor's bytes.
std::uint64_t tensor_checksum(const GtSlice& tensor);

nlohmann::json report_json(const ExperimentReport& report);

/// Plan for the configured run; memory overrides replace the run's own shape.
MemoryPlan plan_for(const ExperimentConfig& config);

/// Launches world_size ranks of k lanes each on the configured transport,
/// runs M measurements per lane, reduces slices across sub-rings and
/// assembles the report. Throws DeadlockError naming the stalled lane.
ExperimentReport run_experiment(const ExperimentConfig& config, const EngineOptions& options = {});

}  // namespace gtring
