#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <vector>

#include "json.hpp"

namespace gtring {

enum class Algorithm { kOriginal, kDistributed };

inline constexpr std::uint32_t kBuffersPerLaneOriginal = 1;
inline constexpr std::uint32_t kBuffersPerLaneDistributed = 3;
// Send and receive buffers only, without the generated G_sigma itself.
inline constexpr std::uint32_t kBuffersPerLaneAlternate = 2;

std::uint64_t bytes_for_entries(std::uint64_t entries, std::uint64_t entry_bytes);

/// Largest share of total bytes when split as evenly as possible over p ranks.
std::uint64_t slice_bytes(std::uint64_t total, std::uint64_t p);

/// Largest G_t slice in bytes when an axis of length n (n^2 entries per axis
/// index) is split over p ranks.
std::uint64_t axis_slice_bytes(std::uint32_t n, std::uint32_t p);

/// matrix_bytes * 2 (spin up and down) * buffers per lane * k.
std::uint64_t gsigma_total_bytes(Algorithm algorithm, std::uint32_t lanes, std::uint64_t matrix_bytes);
std::uint64_t gsigma_total_bytes(std::uint32_t buffers_per_lane, std::uint32_t lanes, std::uint64_t matrix_bytes);

/// (L2/L1)^3 (F2/F1)^3. Throws DomainError unless every input is positive.
double gt_growth_ratio(double l1, double f1, double l2, double f2);

struct MemoryPlan {
  std::uint64_t gt_bytes_total = 0;
  std::uint64_t gt_bytes_per_rank = 0;
  std::uint64_t gsigma_matrix_bytes = 0;  // one spin matrix
  std::uint32_t lanes = 1;
  std::uint32_t ranks = 1;  // p, ranks sharing one copy of G_t

  std::uint32_t buffers_per_lane_original = kBuffersPerLaneOriginal;
  std::uint32_t buffers_per_lane_distributed = kBuffersPerLaneDistributed;
  std::uint32_t buffers_per_lane_alternate = kBuffersPerLaneAlternate;

  std::uint64_t gsigma_original = 0;
  std::uint64_t gsigma_distributed = 0;
  std::uint64_t gsigma_distributed_alternate = 0;

  std::uint64_t total_original = 0;
  std::uint64_t total_distributed = 0;
  std::uint64_t total_distributed_alternate = 0;

  /// Smallest lane count at which the distributed total is no longer below
  /// the original total (0 when it is never below).
  std::uint32_t break_even_lanes = 0;
};

/// Per-rank plan. When axis_n is given the slice is the largest balanced
/// axis block; otherwise the byte total is split directly.
MemoryPlan make_memory_plan(std::uint64_t gt_bytes_total, std::uint32_t ranks, std::uint32_t lanes,
                            std::uint64_t gsigma_matrix_bytes, std::optional<std::uint32_t> axis_n = std::nullopt);

void to_json(nlohmann::json& j, const MemoryPlan& plan);

enum class MemoryCategory { kGt, kGSigma };

struct MemorySample {
  double time_s = 0;
  int rank = 0;
  std::uint64_t live_bytes = 0;
};

/// Live tracked bytes of one rank (G_t slice plus lane buffers) with a sample
/// recorded at every change. Safe to update from several lanes.
class MemoryTracker {
 public:
  MemoryTracker(int rank, std::function<double()> clock);

  void allocate(MemoryCategory category, std::uint64_t bytes);
  void release(MemoryCategory category, std::uint64_t bytes);

  std::uint64_t live_bytes() const;
  std::uint64_t peak_bytes() const;
  std::uint64_t peak_bytes(MemoryCategory category) const;
  std::vector<MemorySample> series() const;

 private:
  void record_locked();

  int rank_;
  std::function<double()> clock_;
  mutable std::mutex mu_;
  std::uint64_t live_[2] = {0, 0};
  std::uint64_t peak_[2] = {0, 0};
  std::uint64_t peak_total_ = 0;
  std::vector<MemorySample> series_;
};

}  // namespace gtring
