#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gtring/accuracy.hpp"
#include "gtring/config.hpp"
#include "gtring/memory_model.hpp"
#include "gtring/perf_model.hpp"
#include "gtring/ring_engine.hpp"

namespace gtring {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitVerification = 3;
inline constexpr int kExitDeadlock = 4;

/// Writes report.json, counters.csv and memory.csv.
ExperimentReport cmd_run(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                         const EngineOptions& options = {});

/// Writes error_report.json.
ErrorReport cmd_verify(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                       const VerifyOptions& options = {});

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<std::string> rejected;  // one diagnostic per rejected sub-ring size
  std::optional<LinearFit> fit;       // absent with fewer than two distinct sizes
};

/// Runs the configured experiment on the simulated transport once per
/// sub-ring size and fits elapsed time against S. With single_subring each
/// row uses a world of exactly S ranks; otherwise sizes that do not divide
/// the configured world are rejected. Writes sweep.csv and fit.json.
SweepResult cmd_sweep(const ExperimentConfig& config, const std::vector<std::uint32_t>& sizes,
                      const std::filesystem::path& out_dir, bool single_subring);

/// Writes memory_plan.json.
MemoryPlan cmd_memreport(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Writes prediction.csv (closed-form model only, nothing is run).
std::vector<SweepPoint> cmd_predict(const ExperimentConfig& config, const std::vector<std::uint32_t>& sizes,
                                    const std::filesystem::path& out_dir, bool single_subring);

/// Command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gtring
