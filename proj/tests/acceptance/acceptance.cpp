// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "gtring/accuracy.hpp"
#include "gtring/commands.hpp"
#include "gtring/errors.hpp"
#include "gtring/memory_model.hpp"
#include "gtring/perf_model.hpp"
#include "gtring/ring_engine.hpp"

using namespace gtring;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kCriterion1WallLimitS = 30.0;
constexpr double kCriterion2WallLimitS = 60.0;
constexpr double kErrorThreshold = 5e-7;
constexpr double kMemoryRelTol = 0.01;
constexpr double kMinRSquared = 0.99;
constexpr double kBandwidthRelTol = 0.10;
constexpr double kSweepVirtualLimitS = 120.0;
constexpr double kPredictionRelTol = 0.05;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail << std::endl;
  if (!o.pass) ++failures;
}

void check(int id, const std::string& name, const std::function<Outcome()>& body) {
  try {
    report(id, name, body());
  } catch (const std::exception& e) {
    report(id, name, {false, std::string("exception: ") + e.what()});
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool bitwise_equal(const GtSlice& a, const GtSlice& b) {
  return a.entry_count() == b.entry_count() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

bool within(double value, double target, double rel) { return std::abs(value - target) <= rel * std::abs(target); }

struct LawCheck {
  bool ok = true;
  std::string first_violation;
};

// Per-rank message and accumulation laws for one finished run.
LawCheck check_laws(const ExperimentReport& rep) {
  const auto& c = rep.config;
  const std::uint64_t sends = std::uint64_t{c.subring_size - 1} * c.measurements * c.lanes;
  const std::uint64_t accs = std::uint64_t{c.subring_size} * c.measurements * c.lanes;
  for (const auto& r : rep.ranks) {
    const CounterSet t = r.totals();
    if (t.envelopes_sent != sends || t.envelopes_received != sends || t.accumulations_applied != accs) {
      std::ostringstream os;
      os << "rank " << r.world_rank << " sent " << t.envelopes_sent << " received " << t.envelopes_received
         << " accumulated " << t.accumulations_applied << " (expected " << sends << "/" << sends << "/" << accs << ")";
      return {false, os.str()};
    }
  }
  return {};
}

ExperimentConfig desk(std::uint32_t n_k, std::uint32_t n_w, std::uint32_t world, std::uint32_t s, std::uint32_t k,
                      std::uint64_t m) {
  ExperimentConfig c;
  c.n_k = n_k;
  c.n_w = n_w;
  c.world_size = world;
  c.subring_size = s;
  c.lanes = k;
  c.measurements = m;
  c.seed = 20240917;
  c.value_mode = ValueMode::kIntegerLattice;
  c.transport = TransportKind::kInProcess;
  c.deadlock_timeout_s = 30;
  return c;
}

struct GridResult {
  int runs = 0;
  int skipped = 0;
  int mismatches = 0;
  std::string first_mismatch;
  LawCheck laws;
  int alloc_violations = 0;
  std::string first_alloc_violation;
  double wall_s = 0;
};

// Criterion-1 grid, shared with criteria 3 and 8.
GridResult run_grid() {
  GridResult g;
  const auto t0 = std::chrono::steady_clock::now();
  const std::pair<std::uint32_t, std::uint32_t> spaces[] = {{2, 2}, {2, 3}, {2, 4}};
  for (auto [n_k, n_w] : spaces) {
    for (std::uint32_t world : {2u, 4u, 6u}) {
      for (std::uint32_t s = 1; s <= world; ++s) {
        if (world % s != 0) continue;
        for (std::uint32_t k : {1u, 2u, 3u}) {
          for (std::uint64_t m : {1ull, 5ull}) {
            if (s > n_k * n_w) {
              ++g.skipped;
              continue;
            }
            const ExperimentConfig c = desk(n_k, n_w, world, s, k, m);
            const ExperimentReport rep = run_experiment(c);
            ++g.runs;
            const GtSlice ref = oracle_accumulate(c.seed, c.shape(), c.space(), c.value_mode);
            std::ostringstream tag;
            tag << "N=" << c.n() << " world=" << world << " S=" << s << " k=" << k << " M=" << m;
            if (!rep.tensor || !bitwise_equal(*rep.tensor, ref)) {
              if (g.mismatches++ == 0) g.first_mismatch = tag.str();
            }
            const LawCheck laws = check_laws(rep);
            if (!laws.ok && g.laws.ok) g.laws = {false, tag.str() + ": " + laws.first_violation};
            for (const auto& r : rep.ranks) {
              for (std::size_t t = 0; t < r.lanes.size(); ++t) {
                const CounterSet& lane = r.lanes[t];
                if (lane.gsigma_allocations != 3 || lane.allocations_in_ring_loop != 0 ||
                    lane.buffer_identity_violations != 0) {
                  if (g.alloc_violations++ == 0) {
                    std::ostringstream os;
                    os << tag.str() << " rank " << r.world_rank << " lane " << t << ": " << lane.gsigma_allocations
                       << " allocations, " << lane.allocations_in_ring_loop << " inside the ring loop, "
                       << lane.buffer_identity_violations << " identity violations";
                    g.first_alloc_violation = os.str();
                  }
                }
              }
            }
          }
        }
      }
    }
  }
  g.wall_s = seconds_since(t0);
  return g;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gtring_acceptance_" + std::to_string(::getpid())) / name;
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig sweep_config() {
  ExperimentConfig c;
  c.n_k = 1;
  c.n_w = 1;
  c.world_size = 60;
  c.subring_size = 60;
  c.lanes = 1;
  c.measurements = 1400;
  c.accumulate = false;
  c.transport = TransportKind::kSim;
  c.link.ranks_per_node = 6;
  c.link.charged_message_bytes = 1'700'000;
  return c;
}

}  // namespace

int main() {
  std::cout.precision(6);
  const GridResult grid = run_grid();

  check(1, "oracle equivalence", [&] {
    std::ostringstream os;
    os << grid.runs << " configurations bitwise equal to the oracle, " << grid.mismatches << " mismatches, "
       << grid.skipped << " skipped (S > N), wall " << grid.wall_s << " s (limit " << kCriterion1WallLimitS << " s)";
    if (grid.mismatches > 0) os << "; first mismatch " << grid.first_mismatch;
    return Outcome{grid.mismatches == 0 && grid.runs > 0 && grid.wall_s < kCriterion1WallLimitS, os.str()};
  });

  check(2, "accuracy gate", [] {
    ExperimentConfig c = desk(2, 3, 6, 3, 7, 100);
    c.value_mode = ValueMode::kFloat;
    const auto t0 = std::chrono::steady_clock::now();
    const ErrorReport r = verify(c, {5, std::nullopt});
    const double wall = seconds_since(t0);
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << "L1 re " << r.mean.l1_real << " +- " << r.stddev.l1_real << ", L1 im " << r.mean.l1_imag
       << " +- " << r.stddev.l1_imag << ", L2 re " << r.mean.l2_real << " +- " << r.stddev.l2_real << ", L2 im "
       << r.mean.l2_imag << " +- " << r.stddev.l2_imag << std::defaultfloat << " over " << r.runs
       << " seeds (threshold " << kErrorThreshold << "), wall " << wall << " s";
    bool all_below = r.runs == 5;
    for (const auto& m : r.per_run) {
      all_below = all_below && m.l1_real < kErrorThreshold && m.l1_imag < kErrorThreshold &&
                  m.l2_real < kErrorThreshold && m.l2_imag < kErrorThreshold;
    }
    return Outcome{all_below && wall < kCriterion2WallLimitS, os.str()};
  });

  check(3, "exactly-once and message laws", [&] {
    std::string detail = std::to_string(grid.runs) + " configurations satisfy sends = receives = (S-1)Mk, "
                                                     "accumulations = SMk on every rank";
    if (!grid.laws.ok) detail = "violation: " + grid.laws.first_violation;
    return Outcome{grid.laws.ok && grid.runs > 0, detail};
  });

  check(4, "memory model reproduction", [] {
    ExperimentConfig c = desk(2, 3, 6, 3, 7, 1);
    c.memory.gt_entries = 212'336'640;
    c.memory.gsigma_matrix_bytes = 170'000'000;
    const MemoryPlan p = cmd_memreport(c, scratch("memreport"));
    const bool ok = within(static_cast<double>(p.gt_bytes_total), 3.40e9, kMemoryRelTol) &&
                    within(static_cast<double>(p.gt_bytes_per_rank), 1.13e9, kMemoryRelTol) &&
                    within(static_cast<double>(p.gsigma_original), 2.38e9, kMemoryRelTol) &&
                    within(static_cast<double>(p.gsigma_distributed), 7.14e9, kMemoryRelTol);
    std::ostringstream os;
    os << "total " << p.gt_bytes_total / 1e9 << " GB (3.40), slice p=3 " << p.gt_bytes_per_rank / 1e9
       << " GB (1.13), original G_sigma k=7 " << p.gsigma_original / 1e9 << " GB (2.38), distributed G_sigma k=7 "
       << p.gsigma_distributed / 1e9 << " GB (7.14), tolerance " << kMemoryRelTol * 100 << "%";
    return Outcome{ok, os.str()};
  });

  check(5, "memory reduction law", [] {
    bool ok = true;
    std::ostringstream os;
    for (auto [n_k, n_w] : {std::pair{2u, 3u}, std::pair{2u, 2u}}) {
      const std::uint64_t n = n_k * n_w;
      const std::uint64_t total = n * n * n * 16;
      const std::uint64_t plane = n * n * 16;
      for (std::uint32_t p : {1u, 2u, 3u, 6u}) {
        if (p > n) continue;
        ExperimentConfig c = desk(n_k, n_w, 6, p, 1, 1);
        c.transport = TransportKind::kSim;
        const ExperimentReport rep = run_experiment(c);
        std::uint64_t peak = 0;
        for (const auto& r : rep.ranks) peak = std::max(peak, r.peak_gt_bytes);
        const double share = static_cast<double>(total) / p;
        const bool here = static_cast<double>(peak) >= share && static_cast<double>(peak) < share + plane;
        ok = ok && here;
        os << "N=" << n << " p=" << p << " peak " << peak << " B vs total/p " << share << " B" << (here ? "" : " (X)")
           << "; ";
      }
    }
    return Outcome{ok, os.str() + "remainder bound one K3 plane"};
  });

  SweepResult sweep;
  std::string sweep_error;
  try {
    sweep = cmd_sweep(sweep_config(), {6, 12, 24, 36, 60}, scratch("sweep"), true);
  } catch (const std::exception& e) {
    sweep_error = e.what();
  }

  check(6, "linear scaling", [&] {
    if (!sweep_error.empty() || !sweep.fit || sweep.points.size() != 5) {
      return Outcome{false, "sweep did not complete: " + sweep_error};
    }
    const SweepPoint& last = sweep.points.back();
    const ExperimentConfig c = sweep_config();
    const double util = utilization_factor(60, c.link, c.lanes, c.direction, 60);
    const double target = c.link.nic_bandwidth_Bps * util;
    double virtual_total = 0;
    for (const auto& p : sweep.points) virtual_total += p.elapsed_s;
    const bool ok = sweep.fit->r_squared >= kMinRSquared && within(last.eff_bw_Bps, target, kBandwidthRelTol) &&
                    virtual_total < kSweepVirtualLimitS;
    std::ostringstream os;
    os << "r^2 " << sweep.fit->r_squared << " (min " << kMinRSquared << "), S=60 effective bandwidth "
       << last.eff_bw_Bps / 1e9 << " GB/s vs " << target / 1e9 << " GB/s (NIC x utilization " << util
       << ", tolerance " << kBandwidthRelTol * 100 << "%), sweep virtual time " << virtual_total << " s";
    return Outcome{ok, os.str()};
  });

  check(7, "prediction cross-validation", [&] {
    if (!sweep_error.empty() || sweep.points.empty()) return Outcome{false, "sweep did not complete: " + sweep_error};
    double worst = 0;
    std::ostringstream os;
    for (const auto& p : sweep.points) {
      const double rel = std::abs(p.predicted_s - p.elapsed_s) / p.elapsed_s;
      worst = std::max(worst, rel);
      os << "S=" << p.s << " " << p.elapsed_s << "/" << p.predicted_s << " s; ";
    }
    os << "worst deviation " << worst * 100 << "% (limit " << kPredictionRelTol * 100 << "%)";
    return Outcome{worst <= kPredictionRelTol, os.str()};
  });

  check(8, "allocation discipline", [&] {
    int extra_runs = 0;
    int violations = grid.alloc_violations;
    std::string first = grid.first_alloc_violation;
    for (auto tr : {TransportKind::kSim, TransportKind::kTcp}) {
      ExperimentConfig c = desk(2, 3, 6, 3, 3, 4);
      c.transport = tr;
      const ExperimentReport rep = run_experiment(c);
      ++extra_runs;
      for (const auto& r : rep.ranks) {
        for (const auto& lane : r.lanes) {
          if (lane.gsigma_allocations != 3 || lane.allocations_in_ring_loop != 0 || lane.buffer_identity_violations != 0) {
            if (violations++ == 0) first = to_string(tr) + " rank " + std::to_string(r.world_rank);
          }
        }
      }
    }
    std::string detail = std::to_string(grid.runs + extra_runs) +
                         " runs: every lane made exactly 3 G_sigma-sized allocations, none inside the ring loop";
    if (violations > 0) detail = std::to_string(violations) + " violating lanes; first: " + first;
    return Outcome{violations == 0, detail};
  });

  check(9, "lane isolation and direction invariance", [] {
    bool ok = true;
    std::uint64_t records = 0;
    std::ostringstream os;
    for (std::uint32_t k : {2u, 3u, 4u}) {
      for (std::uint32_t s : {2u, 3u, 6u}) {
        std::optional<std::uint64_t> sum[2];
        for (auto dir : {Direction::kForward, Direction::kAlternate}) {
          ExperimentConfig c = desk(2, 3, 6, s, k, 3);
          c.direction = dir;
          EngineOptions opt;
          opt.record_origins = true;
          const ExperimentReport rep = run_experiment(c, opt);
          for (const auto& r : rep.ranks) {
            if (r.totals().foreign_lane_payloads != 0) ok = false;
            for (const auto& rec : r.origins) {
              ++records;
              if (static_cast<std::uint32_t>(rec.consumer_lane) != rec.origin.lane) ok = false;
            }
          }
          sum[dir == Direction::kAlternate] = tensor_checksum(*rep.tensor);
        }
        if (sum[0] != sum[1]) {
          ok = false;
          os << "k=" << k << " S=" << s << " tensors differ across directions; ";
        }
      }
    }
    os << records << " consumed payloads checked, origin lane equals consumer lane"
       << (ok ? "; tensors bitwise identical across direction policies" : "");
    return Outcome{ok, os.str()};
  });

  check(10, "negative controls", [] {
    std::ostringstream os;
    ExperimentConfig c = desk(2, 3, 6, 3, 2, 3);
    c.value_mode = ValueMode::kFloat;
    VerifyOptions vo;
    vo.runs = 1;
    vo.corrupt_entry = 7;
    const ErrorReport corrupted = cmd_verify(c, scratch("corrupt"), vo);
    const bool verify_caught = !corrupted.pass;
    os << "corrupted entry: verify " << (verify_caught ? "fails" : "still passes") << " (L1 re "
       << corrupted.mean.l1_real << "); ";

    const ExperimentConfig ci = desk(2, 3, 6, 3, 2, 3);
    EngineOptions opt;
    opt.ring_steps_override = static_cast<int>(ci.subring_size) - 2;
    const ExperimentReport short_run = run_experiment(ci, opt);
    const bool laws_caught = !check_laws(short_run).ok;
    const GtSlice ref = oracle_accumulate(ci.seed, ci.shape(), ci.space(), ci.value_mode);
    const bool oracle_caught = !bitwise_equal(*short_run.tensor, ref);
    os << "S-2 ring steps: message laws " << (laws_caught ? "violated" : "still hold") << ", oracle equality "
       << (oracle_caught ? "broken" : "still holds");
    return Outcome{verify_caught && laws_caught && oracle_caught, os.str()};
  });

  fs::remove_all(fs::temp_directory_path() / ("gtring_acceptance_" + std::to_string(::getpid())));
  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAIL") << std::endl;
  return failures == 0 ? 0 : 1;
}
