#include "gtring/accuracy.hpp"

#include <cmath>

#include "gtring/errors.hpp"
#include "gtring/ring_engine.hpp"

namespace gtring {

namespace {

void check_lengths(std::span<const double> ref, std::span<const double> test) {
  if (ref.size() != test.size()) throw ContractViolation("error metric: tensors differ in size");
}

std::vector<double> component(const GtSlice& t, bool imag) {
  std::vector<double> out;
  out.reserve(t.entry_count());
  for (const Complex& z : t.data()) out.push_back(imag ? z.imag() : z.real());
  return out;
}

}  // namespace

double l1_error(std::span<const double> ref, std::span<const double> test) {
  check_lengths(ref, test);
  double num = 0;
  double den = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    num += std::abs(ref[i] - test[i]);
    den += std::abs(ref[i]);
  }
  if (den == 0) throw NormalizationError("l1_error: reference is all zero");
  return num / den;
}

double l2_error(std::span<const double> ref, std::span<const double> test) {
  check_lengths(ref, test);
  double num = 0;
  double den = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = ref[i] - test[i];
    num += d * d;
    den += ref[i] * ref[i];
  }
  if (den == 0) throw NormalizationError("l2_error: reference is all zero");
  return std::sqrt(num) / std::sqrt(den);
}

bool ErrorMetrics::passes(double threshold) const {
  return l1_real < threshold && l1_imag < threshold && l2_real < threshold && l2_imag < threshold;
}

ErrorMetrics compare_tensors(const GtSlice& ref, const GtSlice& test) {
  if (!(ref.space() == test.space()) || ref.lo() != test.lo() || ref.hi() != test.hi()) {
    throw ContractViolation("compare_tensors: tensors differ in shape");
  }
  const auto ref_re = component(ref, false);
  const auto ref_im = component(ref, true);
  const auto test_re = component(test, false);
  const auto test_im = component(test, true);
  return {l1_error(ref_re, test_re), l1_error(ref_im, test_im), l2_error(ref_re, test_re),
          l2_error(ref_im, test_im)};
}

void to_json(nlohmann::json& j, const ErrorMetrics& m) {
  j = nlohmann::json{{"l1_real", m.l1_real}, {"l1_imag", m.l1_imag}, {"l2_real", m.l2_real}, {"l2_imag", m.l2_imag}};
}

void to_json(nlohmann::json& j, const ErrorReport& r) {
  j = nlohmann::json{{"l1_real", r.mean.l1_real},
                     {"l1_imag", r.mean.l1_imag},
                     {"l2_real", r.mean.l2_real},
                     {"l2_imag", r.mean.l2_imag},
                     {"stddev", r.stddev},
                     {"per_run", r.per_run},
                     {"threshold", r.threshold},
                     {"pass", r.pass},
                     {"runs", r.runs}};
}

ErrorReport summarize(std::span<const ErrorMetrics> runs, double threshold) {
  ErrorReport rep;
  rep.runs = static_cast<int>(runs.size());
  rep.threshold = threshold;
  rep.per_run.assign(runs.begin(), runs.end());
  if (runs.empty()) return rep;

  double ErrorMetrics::*fields[] = {&ErrorMetrics::l1_real, &ErrorMetrics::l1_imag, &ErrorMetrics::l2_real,
                                    &ErrorMetrics::l2_imag};
  const auto n = static_cast<double>(runs.size());
  for (auto f : fields) {
    double mean = 0;
    for (const auto& m : runs) mean += m.*f;
    mean /= n;
    double var = 0;
    for (const auto& m : runs) var += (m.*f - mean) * (m.*f - mean);
    rep.mean.*f = mean;
    rep.stddev.*f = runs.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
  }
  rep.pass = true;
  for (const auto& m : runs) rep.pass = rep.pass && m.passes(threshold);
  return rep;
}

ErrorReport verify(const ExperimentConfig& config, const VerifyOptions& options) {
  if (!config.accumulate) throw ConfigError("accumulate: verification needs accumulate = true");
  if (options.runs < 1) throw ConfigError("runs: must be >= 1");
  std::vector<ErrorMetrics> metrics;
  for (int i = 0; i < options.runs; ++i) {
    ExperimentConfig cfg = config;
    cfg.seed = config.seed + static_cast<std::uint64_t>(i);
    ExperimentReport report = run_experiment(cfg);
    GtSlice& test = *report.tensor;
    if (options.corrupt_entry) {
      if (*options.corrupt_entry >= test.entry_count()) throw DomainError("corrupt_entry: index outside the tensor");
      test.data()[*options.corrupt_entry] += Complex(1.0, 0.0);
    }
    const GtSlice ref = oracle_accumulate(cfg.seed, cfg.shape(), cfg.space(), cfg.value_mode);
    metrics.push_back(compare_tensors(ref, test));
  }
  return summarize(metrics);
}

}  // namespace gtring
