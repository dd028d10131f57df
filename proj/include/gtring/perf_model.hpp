#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gtring/config.hpp"
#include "gtring/sim_fabric.hpp"
#include "json.hpp"

namespace gtring {

struct MessageCounts {
  std::uint64_t per_rank_send = 0;
  std::uint64_t per_rank_recv = 0;
  std::uint64_t total = 0;
  std::uint64_t per_link = 0;

  friend bool operator==(const MessageCounts&, const MessageCounts&) = default;
};

/// Messages of one lane for one measurement in a ring of s ranks.
MessageCounts message_counts(std::uint64_t s);

/// msg_bytes * s * n_meas / elapsed. Throws DomainError unless elapsed > 0.
double effective_bandwidth(double msg_bytes, double s, double n_meas, double elapsed);

struct SweepPoint {
  std::uint32_t s = 0;
  std::uint64_t n_meas = 0;
  double msg_bytes = 0;
  double elapsed_s = 0;
  double eff_bw_Bps = 0;
  double predicted_s = 0;
  int ranks_per_node = 0;
};

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
};

void to_json(nlohmann::json& j, const LinearFit& fit);

/// Ordinary least squares y = slope x + intercept. Throws DomainError with
/// fewer than two distinct x values.
LinearFit fit_linear(std::span<const double> x, std::span<const double> y);
LinearFit fit_linear(std::span<const SweepPoint> points);

/// Busiest resource of one ring step.
struct StepLoad {
  LinkClass link = LinkClass::kIntraNode;
  // Messages serialized on that resource per step.
  std::uint32_t load = 0;
  double step_s = 0;
};

/// Counts, for one ring step of every lane of every sub-ring in a world of
/// world_size ranks, the messages each resource carries: a private link per
/// ordered intra-node pair, and per node one NIC shared by everything that
/// enters or leaves the node. Returns the resource with the longest step.
StepLoad slowest_step(std::uint32_t s, std::uint32_t world_size, std::uint32_t lanes, Direction direction,
                      double msg_bytes, const SimLinkConfig& link);

/// n_meas (s - 1) (latency + load msg_bytes / bandwidth) of the slowest resource.
double predict_elapsed(std::uint32_t s, std::uint64_t n_meas, double msg_bytes, const SimLinkConfig& link,
                       std::uint32_t lanes = 1, Direction direction = Direction::kForward,
                       std::uint32_t world_size = 0);

/// Fraction of the slowest link's bandwidth one ring stream receives: 1 / load.
double utilization_factor(std::uint32_t s, const SimLinkConfig& link, std::uint32_t lanes = 1,
                          Direction direction = Direction::kForward, std::uint32_t world_size = 0);

}  // namespace gtring
