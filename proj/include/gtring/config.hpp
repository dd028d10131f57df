#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "gtring/index_tensor.hpp"
#include "gtring/sim_fabric.hpp"
#include "json.hpp"

namespace gtring {

enum class TransportKind { kInProcess, kSim, kTcp };
enum class Direction { kForward, kAlternate };

std::string to_string(TransportKind t);
std::string to_string(Direction d);
std::string to_string(ValueMode m);
TransportKind parse_transport(const std::string& s);
Direction parse_direction(const std::string& s);
ValueMode parse_value_mode(const std::string& s);

struct RendezvousConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0: ephemeral

  friend bool operator==(const RendezvousConfig&, const RendezvousConfig&) = default;
};

/// Overrides for the closed-form memory report (e.g. a production-sized
/// tensor); when absent the run's own shape is used.
struct MemoryOverrides {
  std::optional<std::uint64_t> gt_entries;
  std::optional<std::uint64_t> gsigma_matrix_bytes;

  friend bool operator==(const MemoryOverrides&, const MemoryOverrides&) = default;
};

/// JSON schema (unknown keys are rejected at every level):
///   n_k, n_w                 index space (N = n_k n_w)
///   world_size, subring_size, lanes, measurements
///   seed                     generator seed
///   value_mode               "float" | "integer"
///   transport                "inprocess" | "sim" | "tcp"
///   direction                "forward" | "alternate"
///   accumulate               false runs the communication pattern only
///   link                     {nic_bandwidth_Bps, intra_bandwidth_Bps, latency_s,
///                             ranks_per_node, charged_message_bytes?}
///   rendezvous               {host, port}
///   deadlock_timeout_s       stall detection for real transports
///   memory                   {gt_entries?, gsigma_matrix_bytes?}
///   output_dir
struct ExperimentConfig {
  std::uint32_t n_k = 2;
  std::uint32_t n_w = 2;
  std::uint32_t world_size = 2;
  std::uint32_t subring_size = 2;
  std::uint32_t lanes = 1;
  std::uint64_t measurements = 1;
  std::uint64_t seed = 0;
  ValueMode value_mode = ValueMode::kFloat;
  TransportKind transport = TransportKind::kInProcess;
  Direction direction = Direction::kForward;
  bool accumulate = true;
  SimLinkConfig link;
  RendezvousConfig rendezvous;
  double deadlock_timeout_s = 30.0;
  MemoryOverrides memory;
  std::string output_dir = "out";

  std::uint32_t n() const { return n_k * n_w; }
  CombinedIndexSpace space() const { return CombinedIndexSpace(n_k, n_w); }
  ExperimentShape shape() const { return {world_size, subring_size, lanes, measurements}; }

  /// Throws ConfigError naming the offending field.
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Strict parse plus validate(); throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

}  // namespace gtring
