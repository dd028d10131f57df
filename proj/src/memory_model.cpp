#include "gtring/memory_model.hpp"

#include "gtring/errors.hpp"
#include "gtring/index_tensor.hpp"

namespace gtring {

std::uint64_t bytes_for_entries(std::uint64_t entries, std::uint64_t entry_bytes) { return entries * entry_bytes; }

std::uint64_t slice_bytes(std::uint64_t total, std::uint64_t p) {
  if (p == 0) throw DomainError("slice_bytes: p must be >= 1");
  return total / p + (total % p != 0 ? 1 : 0);
}

std::uint64_t axis_slice_bytes(std::uint32_t n, std::uint32_t p) {
  const PartitionPlan plan = make_partition(n, p);
  return std::uint64_t{plan.ranges.front().size()} * n * n * kEntryBytes;
}

std::uint64_t gsigma_total_bytes(std::uint32_t buffers_per_lane, std::uint32_t lanes, std::uint64_t matrix_bytes) {
  if (lanes == 0) throw DomainError("gsigma_total_bytes: lanes must be >= 1");
  return matrix_bytes * 2 * buffers_per_lane * lanes;
}

std::uint64_t gsigma_total_bytes(Algorithm algorithm, std::uint32_t lanes, std::uint64_t matrix_bytes) {
  return gsigma_total_bytes(
      algorithm == Algorithm::kOriginal ? kBuffersPerLaneOriginal : kBuffersPerLaneDistributed, lanes, matrix_bytes);
}

double gt_growth_ratio(double l1, double f1, double l2, double f2) {
  if (!(l1 > 0) || !(f1 > 0) || !(l2 > 0) || !(f2 > 0)) {
    throw DomainError("gt_growth_ratio: inputs must be positive");
  }
  const double l = l2 / l1;
  const double f = f2 / f1;
  return l * l * l * f * f * f;
}

MemoryPlan make_memory_plan(std::uint64_t gt_bytes_total, std::uint32_t ranks, std::uint32_t lanes,
                            std::uint64_t gsigma_matrix_bytes, std::optional<std::uint32_t> axis_n) {
  if (ranks == 0) throw DomainError("memory plan: ranks must be >= 1");
  if (lanes == 0) throw DomainError("memory plan: lanes must be >= 1");
  MemoryPlan plan;
  plan.gt_bytes_total = gt_bytes_total;
  plan.gt_bytes_per_rank = axis_n ? axis_slice_bytes(*axis_n, ranks) : slice_bytes(gt_bytes_total, ranks);
  plan.gsigma_matrix_bytes = gsigma_matrix_bytes;
  plan.lanes = lanes;
  plan.ranks = ranks;
  plan.gsigma_original = gsigma_total_bytes(plan.buffers_per_lane_original, lanes, gsigma_matrix_bytes);
  plan.gsigma_distributed = gsigma_total_bytes(plan.buffers_per_lane_distributed, lanes, gsigma_matrix_bytes);
  plan.gsigma_distributed_alternate =
      gsigma_total_bytes(plan.buffers_per_lane_alternate, lanes, gsigma_matrix_bytes);
  plan.total_original = plan.gt_bytes_total + plan.gsigma_original;
  plan.total_distributed = plan.gt_bytes_per_rank + plan.gsigma_distributed;
  plan.total_distributed_alternate = plan.gt_bytes_per_rank + plan.gsigma_distributed_alternate;

  // distributed - original grows by 4 m per lane; find where it reaches zero.
  const std::uint64_t saving = plan.gt_bytes_total - plan.gt_bytes_per_rank;
  const std::uint64_t per_lane = 4 * gsigma_matrix_bytes;
  if (per_lane == 0) {
    plan.break_even_lanes = 0;
  } else if (saving == 0) {
    plan.break_even_lanes = 1;
  } else {
    plan.break_even_lanes = static_cast<std::uint32_t>(saving / per_lane + (saving % per_lane != 0 ? 1 : 0));
  }
  return plan;
}

void to_json(nlohmann::json& j, const MemoryPlan& p) {
  j = nlohmann::json{{"gt_bytes_total", p.gt_bytes_total},
                     {"gt_bytes_per_rank", p.gt_bytes_per_rank},
                     {"gsigma_matrix_bytes", p.gsigma_matrix_bytes},
                     {"lanes", p.lanes},
                     {"ranks", p.ranks},
                     {"buffers_per_lane",
                      {{"original", p.buffers_per_lane_original},
                       {"distributed", p.buffers_per_lane_distributed},
                       {"distributed_alternate_convention", p.buffers_per_lane_alternate}}},
                     {"gsigma_bytes",
                      {{"original", p.gsigma_original},
                       {"distributed", p.gsigma_distributed},
                       {"distributed_alternate_convention", p.gsigma_distributed_alternate}}},
                     {"total_bytes_per_rank",
                      {{"original", p.total_original},
                       {"distributed", p.total_distributed},
                       {"distributed_alternate_convention", p.total_distributed_alternate}}},
                     {"break_even_lanes", p.break_even_lanes},
                     {"buffer_convention_note",
                      "distributed figures count 3 G_sigma-sized buffers per lane (generated, send, receive); "
                      "the alternate convention counts only the 2 communication buffers"}};
}

MemoryTracker::MemoryTracker(int rank, std::function<double()> clock) : rank_(rank), clock_(std::move(clock)) {}

void MemoryTracker::record_locked() {
  const std::uint64_t total = live_[0] + live_[1];
  if (total > peak_total_) peak_total_ = total;
  series_.push_back({clock_ ? clock_() : 0.0, rank_, total});
}

void MemoryTracker::allocate(MemoryCategory category, std::uint64_t bytes) {
  std::lock_guard lock(mu_);
  const auto c = static_cast<std::size_t>(category);
  live_[c] += bytes;
  if (live_[c] > peak_[c]) peak_[c] = live_[c];
  record_locked();
}

void MemoryTracker::release(MemoryCategory category, std::uint64_t bytes) {
  std::lock_guard lock(mu_);
  const auto c = static_cast<std::size_t>(category);
  if (bytes > live_[c]) throw ContractViolation("memory tracker: releasing more than is live");
  live_[c] -= bytes;
  record_locked();
}

std::uint64_t MemoryTracker::live_bytes() const {
  std::lock_guard lock(mu_);
  return live_[0] + live_[1];
}

std::uint64_t MemoryTracker::peak_bytes() const {
  std::lock_guard lock(mu_);
  return peak_total_;
}

std::uint64_t MemoryTracker::peak_bytes(MemoryCategory category) const {
  std::lock_guard lock(mu_);
  return peak_[static_cast<std::size_t>(category)];
}

std::vector<MemorySample> MemoryTracker::series() const {
  std::lock_guard lock(mu_);
  return series_;
}

}  // namespace gtring
