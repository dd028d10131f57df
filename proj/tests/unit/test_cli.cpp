#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtring/accuracy.hpp"
#include "gtring/commands.hpp"
#include "gtring/errors.hpp"

using namespace gtring;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gtring_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

nlohmann::json small_json(const fs::path& out) {
  return {{"n_k", 2},          {"n_w", 2},           {"world_size", 4},         {"subring_size", 2},
          {"lanes", 2},        {"measurements", 2},  {"seed", 3},               {"value_mode", "integer"},
          {"transport", "sim"}, {"output_dir", out.string()}};
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gtring_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

}  // namespace

TEST(Config, DefaultsAreValid) { EXPECT_NO_THROW(ExperimentConfig{}.validate()); }

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c;
  c.n_k = 3;
  c.world_size = 6;
  c.subring_size = 3;
  c.lanes = 4;
  c.measurements = 9;
  c.seed = 1ull << 40;
  c.value_mode = ValueMode::kIntegerLattice;
  c.transport = TransportKind::kTcp;
  c.direction = Direction::kAlternate;
  c.accumulate = false;
  c.link.charged_message_bytes = 1'700'000;
  c.link.latency_s = 1e-5;
  c.rendezvous.port = 4242;
  c.deadlock_timeout_s = 2.5;
  c.memory.gt_entries = 212'336'640;
  c.output_dir = "elsewhere";
  nlohmann::json j = c;
  EXPECT_EQ(parse_config(j), c);
}

TEST(Config, UnknownKeysRejectedWithPath) {
  nlohmann::json j = ExperimentConfig{};
  j["lanez"] = 2;
  try {
    parse_config(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lanez"), std::string::npos);
  }
  j = ExperimentConfig{};
  j["link"]["bandwith"] = 1;
  try {
    parse_config(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("link.bandwith"), std::string::npos) << e.what();
  }
}

TEST(Config, TypeAndRangeErrors) {
  auto with = [](const char* key, nlohmann::json v) {
    nlohmann::json j = ExperimentConfig{};
    j[key] = std::move(v);
    return j;
  };
  EXPECT_THROW(parse_config(with("lanes", -1)), ConfigError);
  EXPECT_THROW(parse_config(with("lanes", "two")), ConfigError);
  EXPECT_THROW(parse_config(with("accumulate", 1)), ConfigError);
  EXPECT_THROW(parse_config(with("transport", "mpi")), ConfigError);
  EXPECT_THROW(parse_config(with("subring_size", 3)), ConfigError);
  EXPECT_THROW(parse_config(with("measurements", 0)), ConfigError);
  EXPECT_THROW(parse_config(with("lanes", 1000)), ConfigError);
  EXPECT_THROW(parse_config(with("deadlock_timeout_s", 0)), ConfigError);
  EXPECT_THROW(parse_config(nlohmann::json::array()), ConfigError);
  EXPECT_NO_THROW(parse_config(with("accumulate", false)));
}

TEST(Config, SubringLargerThanAxisRejectedOnlyWhenAccumulating) {
  ExperimentConfig c;
  c.n_k = 1;
  c.n_w = 2;
  c.world_size = 4;
  c.subring_size = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c.accumulate = false;
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, LoadFromFileErrors) {
  const fs::path dir = scratch_dir("load");
  EXPECT_THROW(load_config((dir / "missing.json").string()), ConfigError);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(load_config((dir / "bad.json").string()), ConfigError);
  fs::remove_all(dir);
}

TEST(Accuracy, MetricExamples) {
  const std::vector<double> ref{1, 2, 3};
  EXPECT_EQ(l1_error(ref, ref), 0.0);
  EXPECT_EQ(l2_error(ref, ref), 0.0);
  const std::vector<double> off{1, 2, 4};
  EXPECT_DOUBLE_EQ(l1_error(ref, off), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(l2_error(ref, off), 1.0 / std::sqrt(14.0));
  const std::vector<double> zero{0, 0, 0};
  EXPECT_THROW(l1_error(zero, ref), NormalizationError);
  EXPECT_THROW(l2_error(zero, ref), NormalizationError);
  EXPECT_THROW(l1_error(ref, std::vector<double>{1, 2}), ContractViolation);
}

TEST(Accuracy, SummaryMeanAndSampleStddev) {
  const std::vector<ErrorMetrics> runs{{1e-9, 2e-9, 3e-9, 4e-9}, {3e-9, 2e-9, 3e-9, 4e-9}};
  const ErrorReport r = summarize(runs);
  EXPECT_DOUBLE_EQ(r.mean.l1_real, 2e-9);
  EXPECT_DOUBLE_EQ(r.stddev.l1_real, std::sqrt(2.0) * 1e-9);
  EXPECT_EQ(r.stddev.l1_imag, 0.0);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.runs, 2);
  const std::vector<ErrorMetrics> bad{{1e-9, 1e-9, 1e-9, 6e-7}};
  EXPECT_FALSE(summarize(bad).pass);
}

TEST(Accuracy, VerifyPassesAndCorruptionFails) {
  ExperimentConfig c;
  c.n_k = 2;
  c.n_w = 2;
  c.world_size = 4;
  c.subring_size = 2;
  c.lanes = 2;
  c.measurements = 3;
  c.transport = TransportKind::kSim;
  const ErrorReport good = verify(c, {2, std::nullopt});
  EXPECT_TRUE(good.pass);
  EXPECT_EQ(good.per_run.size(), 2u);
  EXPECT_LT(good.mean.l2_real, 1e-13);
  const ErrorReport bad = verify(c, {1, 5});
  EXPECT_FALSE(bad.pass);
  EXPECT_GT(bad.mean.l1_real, kAccuracyThreshold);
}

TEST(Cli, RunWritesArtifacts) {
  const fs::path dir = scratch_dir("run");
  const auto cfg = write_config(dir, small_json(dir / "out"));
  const auto r = cli({"run", "--config", cfg.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto report = nlohmann::json::parse(std::ifstream(dir / "out" / "report.json"));
  EXPECT_TRUE(report.contains("config"));
  const auto counters = read_lines(dir / "out" / "counters.csv");
  ASSERT_EQ(counters.size(), 1u + 4 * 2);
  EXPECT_EQ(counters[0].rfind("world_rank,lane,envelopes_sent", 0), 0u);
  const auto memory = read_lines(dir / "out" / "memory.csv");
  EXPECT_EQ(memory[0], "time_s,rank,live_bytes");
  EXPECT_GT(memory.size(), 4u);
  fs::remove_all(dir);
}

TEST(Cli, OutAndSeedOverrides) {
  const fs::path dir = scratch_dir("override");
  const auto cfg = write_config(dir, small_json(dir / "ignored"));
  const auto r = cli({"run", "--config", cfg.string(), "--out", (dir / "mine").string(), "--seed", "99",
                      "--transport", "inprocess"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto report = nlohmann::json::parse(std::ifstream(dir / "mine" / "report.json"));
  EXPECT_EQ(report["config"]["seed"], 99);
  EXPECT_EQ(report["config"]["transport"], "inprocess");
  EXPECT_FALSE(fs::exists(dir / "ignored"));
  fs::remove_all(dir);
}

TEST(Cli, VerifyExitCodes) {
  const fs::path dir = scratch_dir("verify");
  auto j = small_json(dir / "out");
  j["value_mode"] = "float";
  const auto cfg = write_config(dir, j);
  const auto ok = cli({"verify", "--config", cfg.string(), "--runs", "2"});
  EXPECT_EQ(ok.code, kExitOk) << ok.err;
  const auto report = nlohmann::json::parse(std::ifstream(dir / "out" / "error_report.json"));
  EXPECT_EQ(report["pass"], true);
  EXPECT_EQ(report["runs"], 2);
  const auto bad = cli({"verify", "--config", cfg.string(), "--runs", "1", "--corrupt-entry", "0"});
  EXPECT_EQ(bad.code, kExitVerification);
  fs::remove_all(dir);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const fs::path dir = scratch_dir("cfgerr");
  auto j = small_json(dir / "out");
  j["subring_size"] = 3;
  const auto cfg = write_config(dir, j);
  EXPECT_EQ(cli({"run", "--config", cfg.string()}).code, kExitConfig);
  EXPECT_EQ(cli({"run", "--config", (dir / "nope.json").string()}).code, kExitConfig);
  EXPECT_EQ(cli({"run"}).code, kExitConfig);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitConfig);
  const auto good = write_config(dir, small_json(dir / "out"));
  EXPECT_EQ(cli({"run", "--config", good.string(), "--transport", "carrier-pigeon"}).code, kExitConfig);
  fs::remove_all(dir);
}

TEST(Cli, DeadlockExitsFour) {
  const fs::path dir = scratch_dir("deadlock");
  const auto cfg = write_config(dir, small_json(dir / "out"));
  const auto r = cli({"run", "--config", cfg.string(), "--drop-sends", "1:0"});
  EXPECT_EQ(r.code, kExitDeadlock);
  EXPECT_NE(r.err.find("lane 0"), std::string::npos) << r.err;
  fs::remove_all(dir);
}

TEST(Cli, MemreportWritesPlan) {
  const fs::path dir = scratch_dir("mem");
  auto j = small_json(dir / "out");
  j["memory"] = {{"gt_entries", 212'336'640}, {"gsigma_matrix_bytes", 170'000'000}};
  j["world_size"] = 6;
  j["subring_size"] = 3;
  j["lanes"] = 7;
  const auto cfg = write_config(dir, j);
  const auto r = cli({"memreport", "--config", cfg.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto plan = nlohmann::json::parse(std::ifstream(dir / "out" / "memory_plan.json"));
  EXPECT_EQ(plan["gt_bytes_total"], 3'397'386'240ull);
  EXPECT_EQ(plan["gsigma_bytes"]["distributed"], 7'140'000'000ull);
  fs::remove_all(dir);
}

TEST(Cli, SweepAndPredict) {
  const fs::path dir = scratch_dir("sweep");
  auto j = small_json(dir / "out");
  j["n_k"] = 1;
  j["n_w"] = 1;
  j["accumulate"] = false;
  j["lanes"] = 1;
  j["measurements"] = 5;
  j["world_size"] = 12;
  const auto cfg = write_config(dir, j);
  const auto r = cli({"sweep", "--config", cfg.string(), "--subrings", "2,3,5,6,12"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.err.find("5"), std::string::npos);
  const auto rows = read_lines(dir / "out" / "sweep.csv");
  EXPECT_EQ(rows[0], "S,n_meas,msg_bytes,elapsed_s,eff_bw_Bps,predicted_s");
  EXPECT_EQ(rows.size(), 1u + 4);
  EXPECT_TRUE(fs::exists(dir / "out" / "fit.json"));

  const auto p = cli({"predict", "--config", cfg.string(), "--subrings", "6,12,60", "--single-subring"});
  ASSERT_EQ(p.code, kExitOk) << p.err;
  const auto pred = read_lines(dir / "out" / "prediction.csv");
  EXPECT_EQ(pred.size(), 1u + 3);
  fs::remove_all(dir);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(cli({"--help"}).code, kExitOk); }
