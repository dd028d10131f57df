#include "gtring/commands.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "gtring/errors.hpp"

namespace gtring {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f.precision(17);
  return f;
}

void write_json(const fs::path& path, const nlohmann::json& j) { open_out(path) << j.dump(2) << "\n"; }

std::string join(const std::vector<std::string>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i != 0) s += ',';
    s += xs[i];
  }
  return s;
}

double message_bytes(const ExperimentConfig& c) {
  if (c.link.charged_message_bytes) return static_cast<double>(*c.link.charged_message_bytes);
  const double n = c.n();
  return static_cast<double>(GSigma::kHeaderBytes) + 2 * n * n * kEntryBytes;
}

std::string gb(std::uint64_t bytes) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << static_cast<double>(bytes) / 1e9 << " GB";
  return os.str();
}

}  // namespace

ExperimentReport cmd_run(const ExperimentConfig& config, const fs::path& out_dir, const EngineOptions& options) {
  ExperimentReport report = run_experiment(config, options);
  fs::create_directories(out_dir);
  write_json(out_dir / "report.json", report_json(report));

  auto counters = open_out(out_dir / "counters.csv");
  counters << "world_rank,lane," << join(counter_columns()) << "\n";
  for (const auto& r : report.ranks) {
    for (std::size_t t = 0; t < r.lanes.size(); ++t) {
      counters << r.world_rank << ',' << t << ',' << join(counter_values(r.lanes[t])) << "\n";
    }
  }

  auto memory = open_out(out_dir / "memory.csv");
  memory << "time_s,rank,live_bytes\n";
  for (const auto& r : report.ranks) {
    for (const auto& s : r.memory) memory << s.time_s << ',' << r.world_rank << ',' << s.live_bytes << "\n";
  }
  return report;
}

ErrorReport cmd_verify(const ExperimentConfig& config, const fs::path& out_dir, const VerifyOptions& options) {
  ErrorReport report = verify(config, options);
  fs::create_directories(out_dir);
  write_json(out_dir / "error_report.json", report);
  return report;
}

SweepResult cmd_sweep(const ExperimentConfig& config, const std::vector<std::uint32_t>& sizes,
                      const fs::path& out_dir, bool single_subring) {
  if (sizes.empty()) throw ConfigError("subrings: the list of sub-ring sizes is empty");
  SweepResult result;
  for (std::uint32_t s : sizes) {
    ExperimentConfig row = config;
    row.transport = TransportKind::kSim;
    row.subring_size = s;
    if (single_subring) row.world_size = s;
    try {
      row.validate();
    } catch (const ConfigError& e) {
      result.rejected.push_back("S=" + std::to_string(s) + " rejected: " + e.what());
      continue;
    }
    const ExperimentReport report = run_experiment(row);
    SweepPoint p;
    p.s = s;
    p.n_meas = row.measurements;
    p.msg_bytes = message_bytes(row);
    p.elapsed_s = report.ring_elapsed_s;
    p.eff_bw_Bps = p.elapsed_s > 0 ? effective_bandwidth(p.msg_bytes, s, static_cast<double>(p.n_meas), p.elapsed_s)
                                   : 0.0;
    p.predicted_s = predict_elapsed(s, row.measurements, p.msg_bytes, row.link, row.lanes, row.direction,
                                    row.world_size);
    p.ranks_per_node = row.link.ranks_per_node;
    result.points.push_back(p);
  }

  std::set<std::uint32_t> distinct;
  for (const auto& p : result.points) distinct.insert(p.s);
  if (distinct.size() >= 2) result.fit = fit_linear(result.points);

  fs::create_directories(out_dir);
  auto csv = open_out(out_dir / "sweep.csv");
  csv << "S,n_meas,msg_bytes,elapsed_s,eff_bw_Bps,predicted_s\n";
  for (const auto& p : result.points) {
    csv << p.s << ',' << p.n_meas << ',' << p.msg_bytes << ',' << p.elapsed_s << ',' << p.eff_bw_Bps << ','
        << p.predicted_s << "\n";
  }
  nlohmann::json fit = nlohmann::json::object();
  if (result.fit) {
    fit = *result.fit;
  } else {
    fit["error"] = "fewer than two distinct sub-ring sizes";
  }
  fit["rejected"] = result.rejected;
  fit["clock"] = to_string(ClockKind::kVirtual);
  write_json(out_dir / "fit.json", fit);
  return result;
}

MemoryPlan cmd_memreport(const ExperimentConfig& config, const fs::path& out_dir) {
  const MemoryPlan plan = plan_for(config);
  fs::create_directories(out_dir);
  write_json(out_dir / "memory_plan.json", plan);
  return plan;
}

std::vector<SweepPoint> cmd_predict(const ExperimentConfig& config, const std::vector<std::uint32_t>& sizes,
                                    const fs::path& out_dir, bool single_subring) {
  if (sizes.empty()) throw ConfigError("subrings: the list of sub-ring sizes is empty");
  std::vector<SweepPoint> points;
  fs::create_directories(out_dir);
  auto csv = open_out(out_dir / "prediction.csv");
  csv << "S,n_meas,msg_bytes,predicted_s,slowest_link,load,utilization\n";
  for (std::uint32_t s : sizes) {
    const std::uint32_t world = single_subring ? s : config.world_size;
    if (s < 1 || world % s != 0) {
      throw ConfigError("subrings: " + std::to_string(s) + " does not divide world_size " + std::to_string(world));
    }
    SweepPoint p;
    p.s = s;
    p.n_meas = config.measurements;
    p.msg_bytes = message_bytes(config);
    p.predicted_s = predict_elapsed(s, config.measurements, p.msg_bytes, config.link, config.lanes,
                                    config.direction, world);
    p.ranks_per_node = config.link.ranks_per_node;
    const StepLoad step = slowest_step(s, world, config.lanes, config.direction, p.msg_bytes, config.link);
    csv << p.s << ',' << p.n_meas << ',' << p.msg_bytes << ',' << p.predicted_s << ','
        << (step.link == LinkClass::kNic ? "nic" : "intra") << ',' << step.load << ','
        << (step.load == 0 ? 1.0 : 1.0 / step.load) << "\n";
    points.push_back(p);
  }
  return points;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sub-ring pipeline broadcast for distributed G_t accumulation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string transport;
  std::uint64_t seed = 0;
  std::string out_dir;
  int runs = 5;
  std::vector<std::uint32_t> subrings;
  bool single_subring = false;
  std::size_t corrupt_entry = 0;
  int ring_steps = 0;
  std::vector<int> drop_sends;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--transport", transport, "inprocess | sim | tcp");
    sub->add_option("--seed", seed, "generator seed");
    sub->add_option("--out", out_dir, "output directory");
  };

  CLI::App* run = app.add_subcommand("run", "run one experiment");
  CLI::App* ver = app.add_subcommand("verify", "compare against the serial oracle");
  CLI::App* sweep = app.add_subcommand("sweep", "simulated sub-ring size sweep with a linear fit");
  CLI::App* mem = app.add_subcommand("memreport", "closed-form memory plan");
  CLI::App* pred = app.add_subcommand("predict", "closed-form elapsed-time prediction");
  for (CLI::App* sub : {run, ver, sweep, mem, pred}) add_common(sub);

  ver->add_option("--runs", runs, "number of seeds (default 5)");
  for (CLI::App* sub : {sweep, pred}) {
    sub->add_option("--subrings", subrings, "comma-separated sub-ring sizes")->delimiter(',')->required();
    sub->add_flag("--single-subring", single_subring, "use a world of exactly S ranks for each size");
  }
  // Test hooks.
  ver->add_option("--corrupt-entry", corrupt_entry)->group("");
  run->add_option("--ring-steps", ring_steps)->group("");
  run->add_option("--drop-sends", drop_sends)->delimiter(':')->expected(2)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitConfig;
  }

  try {
    ExperimentConfig cfg = load_config(config_path);
    for (CLI::App* sub : {run, ver, sweep, mem, pred}) {
      if (!sub->parsed()) continue;
      if (sub->count("--transport") > 0) cfg.transport = parse_transport(transport);
      if (sub->count("--seed") > 0) cfg.seed = seed;
      if (sub->count("--out") > 0) cfg.output_dir = out_dir;
    }
    cfg.validate();
    const fs::path dir = cfg.output_dir;

    if (run->parsed()) {
      EngineOptions opt;
      if (run->count("--ring-steps") > 0) opt.ring_steps_override = ring_steps;
      if (drop_sends.size() == 2) opt.drop_sends = std::make_pair(drop_sends[0], drop_sends[1]);
      const ExperimentReport r = cmd_run(cfg, dir, opt);
      out << "run complete: " << r.ranks.size() << " ranks, " << r.totals.envelopes_sent << " envelopes, "
          << "ring phase " << r.ring_elapsed_s << " s (" << to_string(r.clock) << " clock); wrote "
          << (dir / "report.json").string() << "\n";
      return kExitOk;
    }
    if (ver->parsed()) {
      VerifyOptions opt;
      opt.runs = runs;
      if (ver->count("--corrupt-entry") > 0) opt.corrupt_entry = corrupt_entry;
      const ErrorReport r = cmd_verify(cfg, dir, opt);
      out << std::scientific << std::setprecision(3);
      out << "L1 real " << r.mean.l1_real << " +- " << r.stddev.l1_real << "\n"
          << "L1 imag " << r.mean.l1_imag << " +- " << r.stddev.l1_imag << "\n"
          << "L2 real " << r.mean.l2_real << " +- " << r.stddev.l2_real << "\n"
          << "L2 imag " << r.mean.l2_imag << " +- " << r.stddev.l2_imag << "\n"
          << (r.pass ? "PASS" : "FAIL") << " (threshold " << r.threshold << ", " << r.runs << " runs)\n";
      return r.pass ? kExitOk : kExitVerification;
    }
    if (sweep->parsed()) {
      const SweepResult r = cmd_sweep(cfg, subrings, dir, single_subring);
      for (const auto& msg : r.rejected) err << msg << "\n";
      for (const auto& p : r.points) {
        out << "S=" << p.s << " elapsed " << p.elapsed_s << " s, predicted " << p.predicted_s << " s, "
            << p.eff_bw_Bps / 1e9 << " GB/s\n";
      }
      if (r.fit) {
        out << "fit: elapsed = " << r.fit->slope << " S + " << r.fit->intercept << ", r^2 = " << r.fit->r_squared
            << "\n";
      }
      return kExitOk;
    }
    if (mem->parsed()) {
      const MemoryPlan p = cmd_memreport(cfg, dir);
      out << "G_t total            " << gb(p.gt_bytes_total) << "\n"
          << "G_t per rank (p=" << p.ranks << ")   " << gb(p.gt_bytes_per_rank) << "\n"
          << "G_sigma original     " << gb(p.gsigma_original) << " (k=" << p.lanes << ")\n"
          << "G_sigma distributed  " << gb(p.gsigma_distributed) << " (3 buffers per lane)\n"
          << "G_sigma alternate    " << gb(p.gsigma_distributed_alternate) << " (2 buffers per lane)\n"
          << "total original       " << gb(p.total_original) << "\n"
          << "total distributed    " << gb(p.total_distributed) << "\n"
          << "break-even lanes     " << p.break_even_lanes << "\n";
      return kExitOk;
    }
    if (pred->parsed()) {
      const auto points = cmd_predict(cfg, subrings, dir, single_subring);
      for (const auto& p : points) out << "S=" << p.s << " predicted " << p.predicted_s << " s\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DeadlockError& e) {
    err << "deadlock: " << e.what() << "\n";
    return kExitDeadlock;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace gtring
