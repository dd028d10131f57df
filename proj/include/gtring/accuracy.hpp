#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gtring/config.hpp"
#include "gtring/index_tensor.hpp"
#include "json.hpp"

namespace gtring {

inline constexpr double kAccuracyThreshold = 5e-7;

/// ||ref - test||_1 / ||ref||_1 over the flattened entries.
/// Throws ContractViolation on length mismatch, NormalizationError when ref is all zero.
double l1_error(std::span<const double> ref, std::span<const double> test);
/// ||ref - test||_2 / ||ref||_2 over the flattened entries.
double l2_error(std::span<const double> ref, std::span<const double> test);

struct ErrorMetrics {
  double l1_real = 0;
  double l1_imag = 0;
  double l2_real = 0;
  double l2_imag = 0;

  /// True when all four values are below threshold.
  bool passes(double threshold = kAccuracyThreshold) const;
};

/// Both metrics on the real parts and on the imaginary parts separately.
ErrorMetrics compare_tensors(const GtSlice& ref, const GtSlice& test);

struct ErrorReport {
  ErrorMetrics mean;
  ErrorMetrics stddev;  // sample standard deviation; zero for a single run
  std::vector<ErrorMetrics> per_run;
  bool pass = false;
  int runs = 0;
  double threshold = kAccuracyThreshold;
};

void to_json(nlohmann::json& j, const ErrorMetrics& m);
void to_json(nlohmann::json& j, const ErrorReport& r);

/// Mean and sample standard deviation of each metric; pass iff every run passes.
ErrorReport summarize(std::span<const ErrorMetrics> runs, double threshold = kAccuracyThreshold);

struct VerifyOptions {
  int runs = 5;
  /// Test hook: adds 1 to the real part of this flattened entry of each
  /// distributed result before comparing.
  std::optional<std::size_t> corrupt_entry;
};

/// Runs the distributed experiment and the serial oracle for seeds
/// seed, seed + 1, ... and compares them.
ErrorReport verify(const ExperimentConfig& config, const VerifyOptions& options = {});

}  // namespace gtring
