#include "gtring/ring_engine.hpp"

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <csignal>
#include <cstring>
#include <iostream>
#include <sstream>

#include "gtring/errors.hpp"
#include "gtring/inprocess_fabric.hpp"
#include "gtring/sim_fabric.hpp"
#include "gtring/tcp_fabric.hpp"

namespace gtring {

RingTopology RingTopology::make(int world_size, int subring_size, int lanes, Direction direction, int my_rank) {
  if (subring_size < 1 || world_size < 1 || world_size % subring_size != 0) {
    throw ConfigError("ring topology: sub-ring size " + std::to_string(subring_size) +
                      " does not divide world size " + std::to_string(world_size));
  }
  if (lanes < 1 || lanes >= kLaneTagStride) {
    throw ConfigError("ring topology: lanes must be in [1, " + std::to_string(kLaneTagStride) + ")");
  }
  if (my_rank < 0 || my_rank >= subring_size) throw DomainError("ring topology: rank outside the sub-ring");
  return RingTopology{world_size, subring_size, lanes, direction, my_rank};
}

LaneRing lane_ring_id(const RingTopology& topology, int lane) {
  if (lane < 0 || lane >= topology.lanes) throw DomainError("lane " + std::to_string(lane) + " out of range");
  LaneRing ring{topology.left(), topology.right(), kRecvTag + lane, kSendTag + lane};
  if (topology.direction == Direction::kAlternate && lane % 2 == 1) std::swap(ring.left, ring.right);
  return ring;
}

Task<Communicator> build_subrings(Communicator& world, int s) {
  if (s < 1 || world.size() % s != 0) {
    throw ConfigError("sub-ring size " + std::to_string(s) + " does not divide world size " +
                      std::to_string(world.size()));
  }
  co_return co_await world.split(world.rank() / s, world.rank() % s);
}

void LaneState::Observer::on_gsigma_allocation(std::size_t matrix_bytes) {
  count.fetch_add(1);
  tracked_bytes.fetch_add(matrix_bytes);
  if (instrument != nullptr) instrument->count_allocation(lane);
  if (tracker != nullptr) tracker->allocate(MemoryCategory::kGSigma, matrix_bytes);
}

LaneState::LaneState(const CombinedIndexSpace& space, int lane, RankInstrument* instrument, MemoryTracker* tracker)
    : lane_(lane) {
  observer_.lane = lane;
  observer_.instrument = instrument;
  observer_.tracker = tracker;
  bufs_.reserve(3);
  for (int i = 0; i < 3; ++i) bufs_.emplace_back(space, &observer_);
  for (const auto& b : bufs_) initial_ids_.push_back(b.storage_id());
  std::sort(initial_ids_.begin(), initial_ids_.end());
}

LaneState::~LaneState() {
  if (observer_.tracker != nullptr) observer_.tracker->release(MemoryCategory::kGSigma, observer_.tracked_bytes.load());
}

bool LaneState::buffers_intact() const {
  std::vector<const void*> ids;
  for (const auto& b : bufs_) ids.push_back(b.storage_id());
  std::sort(ids.begin(), ids.end());
  return ids == initial_ids_;
}

namespace {

enum Phase { kIdle = 0, kGenerate = 1, kWaitRecv = 2, kWaitSend = 3, kFinished = 4 };

void set_phase(const MeasurementContext& ctx, int lane, int phase, int step) {
  if (ctx.progress == nullptr) return;
  LaneProgress& p = ctx.progress[lane];
  p.phase.store(phase);
  p.step.store(step);
}

void consume(const MeasurementContext& ctx, int lane, const GSigma& g, Fabric& fabric) {
  const Origin origin = g.origin();
  if (static_cast<int>(origin.lane) != lane && ctx.instrument != nullptr) {
    ctx.instrument->count_foreign_payload(lane);
  }
  const double t0 = fabric.now();
  {
    std::lock_guard lock(*ctx.slice_mu);
    if (ctx.slice != nullptr) {
      accumulate_g4(*ctx.slice, g);
    }
    if (ctx.origins != nullptr) ctx.origins->push_back({lane, origin});
  }
  if (ctx.instrument != nullptr) {
    ctx.instrument->add_accumulate(lane, fabric.now() - t0);
    ctx.instrument->count_accumulation(lane);
  }
}

}  // namespace

Task<void> run_measurement(const RingTopology& topology, LaneState& lane, Communicator& subring,
                           const MeasurementContext& ctx) {
  Fabric& fabric = subring.fabric();
  const int t = lane.lane();
  const LaneRing ring = lane_ring_id(topology, t);
  RankInstrument* inst = ctx.instrument;

  set_phase(ctx, t, kGenerate, -1);
  const Origin origin{static_cast<std::uint32_t>(ctx.subring), static_cast<std::uint32_t>(topology.my_rank),
                      static_cast<std::uint32_t>(t), lane.measurements_done,
                      static_cast<std::uint32_t>(ctx.world_rank)};
  fill_gsigma(lane.gsigma(), ctx.seed, origin, ctx.mode);
  consume(ctx, t, lane.gsigma(), fabric);
  swap(lane.gsigma(), lane.send());

  const std::uint64_t allocations_before = lane.allocations();
  for (int step = 0; step < ctx.ring_steps; ++step) {
    PendingOp recv = subring.irecv(lane.recv().bytes(), ring.left, ring.recv_tag);
    PendingOp send;
    if (!ctx.drop_sends) {
      send = subring.isend(lane.send().bytes(), ring.right, ring.send_tag);
    }

    set_phase(ctx, t, kWaitRecv, step);
    double w0 = fabric.now();
    const std::size_t got = co_await subring.wait(recv);
    if (inst != nullptr) {
      inst->add_wait(t, fabric.now() - w0);
      inst->count_recv(t, got);
    }
    if (got != lane.recv().wire_bytes() || !lane.recv().header_valid()) {
      throw TransportError("lane " + std::to_string(t) + " received a malformed G_sigma payload");
    }
    consume(ctx, t, lane.recv(), fabric);

    if (send.valid()) {
      set_phase(ctx, t, kWaitSend, step);
      w0 = fabric.now();
      const std::size_t sent = co_await subring.wait(send);
      if (inst != nullptr) {
        inst->add_wait(t, fabric.now() - w0);
        inst->count_send(t, sent);
      }
    }
    swap(lane.send(), lane.recv());
    if (inst != nullptr && !lane.buffers_intact()) inst->count_identity_violation(t);
  }
  if (inst != nullptr) inst->count_ring_loop_allocations(t, lane.allocations() - allocations_before);
  ++lane.measurements_done;
  set_phase(ctx, t, kIdle, -1);
}

void to_json(nlohmann::json& j, const RankReport& r) {
  nlohmann::json memory = nlohmann::json::array();
  for (const auto& s : r.memory) memory.push_back({s.time_s, s.live_bytes});
  nlohmann::json origins = nlohmann::json::array();
  for (const auto& o : r.origins) {
    origins.push_back({o.consumer_lane, o.origin.subring, o.origin.rank, o.origin.lane, o.origin.measurement,
                       o.origin.world_rank});
  }
  j = nlohmann::json{{"world_rank", r.world_rank},
                     {"subring", r.subring},
                     {"subring_rank", r.subring_rank},
                     {"slice_lo", r.slice_lo},
                     {"slice_hi", r.slice_hi},
                     {"meas_count", r.meas_count},
                     {"lanes", r.lanes},
                     {"peak_bytes", r.peak_bytes},
                     {"peak_gt_bytes", r.peak_gt_bytes},
                     {"peak_gsigma_bytes", r.peak_gsigma_bytes},
                     {"memory", memory},
                     {"origins", origins},
                     {"ring_elapsed_s", r.ring_elapsed_s}};
}

void from_json(const nlohmann::json& j, RankReport& r) {
  j.at("world_rank").get_to(r.world_rank);
  j.at("subring").get_to(r.subring);
  j.at("subring_rank").get_to(r.subring_rank);
  j.at("slice_lo").get_to(r.slice_lo);
  j.at("slice_hi").get_to(r.slice_hi);
  j.at("meas_count").get_to(r.meas_count);
  j.at("lanes").get_to(r.lanes);
  j.at("peak_bytes").get_to(r.peak_bytes);
  j.at("peak_gt_bytes").get_to(r.peak_gt_bytes);
  j.at("peak_gsigma_bytes").get_to(r.peak_gsigma_bytes);
  r.memory.clear();
  for (const auto& s : j.at("memory")) r.memory.push_back({s.at(0).get<double>(), r.world_rank, s.at(1).get<std::uint64_t>()});
  r.origins.clear();
  for (const auto& o : j.at("origins")) {
    OriginRecord rec;
    rec.consumer_lane = o.at(0).get<int>();
    rec.origin.subring = o.at(1).get<std::uint32_t>();
    rec.origin.rank = o.at(2).get<std::uint32_t>();
    rec.origin.lane = o.at(3).get<std::uint32_t>();
    rec.origin.measurement = o.at(4).get<std::uint64_t>();
    rec.origin.world_rank = o.at(5).get<std::uint32_t>();
    r.origins.push_back(rec);
  }
  j.at("ring_elapsed_s").get_to(r.ring_elapsed_s);
}

std::uint64_t tensor_checksum(const GtSlice& tensor) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::byte b : std::as_bytes(tensor.data())) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ull;
  }
  return h;
}

MemoryPlan plan_for(const ExperimentConfig& config) {
  const std::uint64_t n = config.n();
  const std::uint64_t entries = config.memory.gt_entries.value_or(n * n * n);
  const std::uint64_t matrix = config.memory.gsigma_matrix_bytes.value_or(n * n * kEntryBytes);
  std::optional<std::uint32_t> axis;
  if (!config.memory.gt_entries && config.subring_size <= n) axis = static_cast<std::uint32_t>(n);
  return make_memory_plan(bytes_for_entries(entries, kEntryBytes), config.subring_size, config.lanes, matrix, axis);
}

nlohmann::json report_json(const ExperimentReport& report) {
  nlohmann::json ranks = nlohmann::json::array();
  for (const auto& r : report.ranks) {
    ranks.push_back({{"world_rank", r.world_rank},
                     {"subring", r.subring},
                     {"subring_rank", r.subring_rank},
                     {"slice", {r.slice_lo, r.slice_hi}},
                     {"meas_count", r.meas_count},
                     {"counters", r.totals()},
                     {"lanes", r.lanes},
                     {"memory",
                      {{"peak_bytes", r.peak_bytes},
                       {"peak_gt_bytes", r.peak_gt_bytes},
                       {"peak_gsigma_bytes", r.peak_gsigma_bytes}}},
                     {"ring_elapsed_s", r.ring_elapsed_s}});
  }
  nlohmann::json tensor = {{"present", report.tensor.has_value()}};
  if (report.tensor) {
    std::ostringstream hex;
    hex << std::hex << tensor_checksum(*report.tensor);
    tensor["n"] = report.tensor->space().size();
    tensor["entries"] = report.tensor->entry_count();
    tensor["meas_count"] = report.tensor->meas_count();
    tensor["checksum_fnv1a"] = hex.str();
  }
  return {{"config", report.config},
          {"clock", to_string(report.clock)},
          {"tensor", tensor},
          {"totals", report.totals},
          {"fabric",
           {{"sends_posted", report.fabric.sends_posted},
            {"recvs_posted", report.fabric.recvs_posted},
            {"messages_delivered", report.fabric.messages_delivered},
            {"bytes_delivered", report.fabric.bytes_delivered}}},
          {"ranks", ranks},
          {"memory_plan", report.memory_plan},
          {"timings", {{"ring_elapsed_s", report.ring_elapsed_s}, {"elapsed_s", report.elapsed_s}}}};
}

namespace {

// Lane progress for every local rank plus the first stall that was reported.
class StallRegistry {
 public:
  StallRegistry(int world_size, int lanes)
      : lanes_(lanes), progress_(std::make_unique<LaneProgress[]>(static_cast<std::size_t>(world_size * lanes))),
        world_size_(world_size) {}

  LaneProgress* for_rank(int world_rank) { return &progress_[static_cast<std::size_t>(world_rank * lanes_)]; }

  void record(const std::string& message) {
    std::lock_guard lock(mu_);
    if (first_.empty()) first_ = message;
  }

  std::string first() const {
    std::lock_guard lock(mu_);
    return first_;
  }

  std::string describe() const {
    static const char* kPhase[] = {"between measurements", "generating", "waiting on receive", "waiting on send",
                                   "finished"};
    std::ostringstream os;
    bool any = false;
    for (int r = 0; r < world_size_; ++r) {
      for (int t = 0; t < lanes_; ++t) {
        const LaneProgress& p = progress_[static_cast<std::size_t>(r * lanes_ + t)];
        const int phase = p.phase.load();
        if (phase == kFinished) continue;
        if (any) os << "; ";
        any = true;
        os << "rank " << r << " lane " << t << " measurement " << p.measurement.load() << " step " << p.step.load()
           << " " << kPhase[phase];
      }
    }
    if (!any) os << "all lanes finished; stalled in a collective";
    return os.str();
  }

 private:
  int lanes_;
  std::unique_ptr<LaneProgress[]> progress_;
  int world_size_;
  mutable std::mutex mu_;
  std::string first_;
};

struct RankShared {
  const ExperimentConfig* config = nullptr;
  const EngineOptions* options = nullptr;
  StallRegistry* stalls = nullptr;
  std::optional<ExperimentReport>* out = nullptr;  // filled by world rank 0
};

struct LaneArgs {
  RingTopology topology;
  LaneState* lane = nullptr;
  Communicator* subring = nullptr;
  MeasurementContext ctx;
  std::uint64_t measurements = 0;
  StallRegistry* stalls = nullptr;
};

Task<void> lane_main(LaneArgs a) {
  Fabric& fabric = a.subring->fabric();
  const int t = a.lane->lane();
  const double start = fabric.now();
  try {
    for (std::uint64_t m = 0; m < a.measurements; ++m) {
      if (a.ctx.progress != nullptr) a.ctx.progress[t].measurement.store(m);
      co_await run_measurement(a.topology, *a.lane, *a.subring, a.ctx);
    }
  } catch (const TransportTimeout& e) {
    std::string msg = "rank " + std::to_string(a.ctx.world_rank) + " lane " + std::to_string(t) + " stalled";
    if (a.ctx.progress != nullptr) {
      const LaneProgress& p = a.ctx.progress[t];
      msg += " at measurement " + std::to_string(p.measurement.load()) + " step " + std::to_string(p.step.load());
    }
    msg += ": " + std::string(e.what());
    a.stalls->record(msg);
    throw DeadlockError(msg);
  }
  if (a.ctx.progress != nullptr) a.ctx.progress[t].phase.store(kFinished);
  if (a.ctx.instrument != nullptr) a.ctx.instrument->add_total(t, fabric.now() - start);
}

template <typename T>
std::span<const std::byte> pod_bytes(const std::vector<T>& v) {
  return std::as_bytes(std::span<const T>(v));
}

Task<void> rank_body(std::shared_ptr<Fabric> fabric, int world_rank, RankShared shared) {
  const ExperimentConfig& cfg = *shared.config;
  const EngineOptions& opt = *shared.options;
  const int s = static_cast<int>(cfg.subring_size);
  const int k = static_cast<int>(cfg.lanes);
  const CombinedIndexSpace space = cfg.space();
  const double run_start = fabric->now();

  try {
    Communicator world = Communicator::world(fabric, world_rank);
    Communicator subring = co_await build_subrings(world, s);
    Communicator position = co_await world.split(world_rank % s, world_rank / s);
    const RingTopology topology =
        RingTopology::make(static_cast<int>(cfg.world_size), s, k, cfg.direction, subring.rank());

    MemoryTracker tracker(world_rank, [f = fabric.get()] { return f->now(); });
    RankInstrument instrument(k, opt.instrument);
    std::optional<GtSlice> slice;
    if (cfg.accumulate) {
      const AxisRange range = make_partition(space.size(), static_cast<std::uint32_t>(s))
                                  .ranges[static_cast<std::size_t>(subring.rank())];
      slice.emplace(space, range.lo, range.hi);
      tracker.allocate(MemoryCategory::kGt, slice->byte_size());
    }

    std::mutex slice_mu;
    std::vector<OriginRecord> origins;
    LaneProgress* progress = shared.stalls->for_rank(world_rank);
    double ring_elapsed = 0;
    {
      std::vector<std::unique_ptr<LaneState>> lanes;
      for (int t = 0; t < k; ++t) lanes.push_back(std::make_unique<LaneState>(space, t, &instrument, &tracker));

      MeasurementContext ctx;
      ctx.seed = cfg.seed;
      ctx.mode = cfg.value_mode;
      ctx.world_rank = world_rank;
      ctx.subring = world_rank / s;
      ctx.ring_steps = opt.ring_steps_override.value_or(s - 1);
      ctx.slice = slice ? &*slice : nullptr;
      ctx.slice_mu = &slice_mu;
      ctx.instrument = &instrument;
      ctx.origins = opt.record_origins ? &origins : nullptr;
      ctx.progress = progress;

      std::vector<std::function<Task<void>()>> bodies;
      for (int t = 0; t < k; ++t) {
        LaneArgs args{topology, lanes[static_cast<std::size_t>(t)].get(), &subring, ctx, cfg.measurements,
                      shared.stalls};
        args.ctx.drop_sends = opt.drop_sends && opt.drop_sends->first == world_rank && opt.drop_sends->second == t;
        bodies.emplace_back([args] { return lane_main(args); });
      }
      co_await fabric->run_all(std::move(bodies));
      for (int t = 0; t < k; ++t) ring_elapsed = std::max(ring_elapsed, instrument.snapshot_lane(t).total_s);
    }

    std::optional<GtSlice> reduced;
    if (slice) reduced = co_await reduce_sum(position, *slice, 0);

    RankReport rr;
    rr.world_rank = world_rank;
    rr.subring = world_rank / s;
    rr.subring_rank = subring.rank();
    rr.slice_lo = slice ? slice->lo() : 0;
    rr.slice_hi = slice ? slice->hi() : 0;
    rr.meas_count = slice ? slice->meas_count() : 0;
    for (int t = 0; t < k; ++t) rr.lanes.push_back(instrument.snapshot_lane(t));
    rr.peak_bytes = tracker.peak_bytes();
    rr.peak_gt_bytes = tracker.peak_bytes(MemoryCategory::kGt);
    rr.peak_gsigma_bytes = tracker.peak_bytes(MemoryCategory::kGSigma);
    rr.memory = tracker.series();
    rr.origins = std::move(origins);
    rr.ring_elapsed_s = ring_elapsed;
    const std::string meta = nlohmann::json(rr).dump();

    std::vector<std::byte> slice_payload;
    if (reduced) {
      const std::uint64_t count = reduced->meas_count();
      slice_payload.resize(sizeof count + reduced->byte_size());
      std::memcpy(slice_payload.data(), &count, sizeof count);
      std::memcpy(slice_payload.data() + sizeof count, reduced->data().data(), reduced->byte_size());
    }

    auto metas = co_await gather_bytes(world, std::as_bytes(std::span<const char>(meta.data(), meta.size())), 0);
    auto slices = co_await gather_bytes(world, slice_payload, 0);
    co_await barrier(world);

    if (world_rank != 0) co_return;

    ExperimentReport report;
    report.config = cfg;
    report.clock = fabric->clock();
    report.memory_plan = plan_for(cfg);
    for (const auto& m : metas) {
      const std::string text(reinterpret_cast<const char*>(m.data()), m.size());
      report.ranks.push_back(nlohmann::json::parse(text).get<RankReport>());
    }
    for (const auto& r : report.ranks) {
      report.totals += r.totals();
      report.ring_elapsed_s = std::max(report.ring_elapsed_s, r.ring_elapsed_s);
    }
    if (cfg.accumulate) {
      GtSlice full = GtSlice::full(space);
      auto out = full.data();
      for (std::size_t r = 0; r < slices.size(); ++r) {
        const auto& payload = slices[r];
        if (payload.empty()) continue;
        const RankReport& rr_r = report.ranks[r];
        std::uint64_t count = 0;
        std::memcpy(&count, payload.data(), sizeof count);
        const std::size_t offset = std::size_t{rr_r.slice_lo} * space.size() * space.size();
        const std::size_t bytes = payload.size() - sizeof count;
        if (offset * kEntryBytes + bytes > full.byte_size()) {
          throw ContractViolation("reduced slice from rank " + std::to_string(r) + " does not fit the tensor");
        }
        std::memcpy(out.data() + offset, payload.data() + sizeof count, bytes);
        if (rr_r.slice_lo == 0) full.set_meas_count(count);
      }
      report.tensor = std::move(full);
    }
    report.fabric = fabric->counters();
    report.elapsed_s = fabric->now() - run_start;
    *shared.out = std::move(report);
  } catch (const TransportTimeout& e) {
    const std::string msg = "rank " + std::to_string(world_rank) + " stalled outside the ring: " + e.what();
    shared.stalls->record(msg);
    throw DeadlockError(msg);
  }
}

ExperimentReport run_local(const ExperimentConfig& cfg, const EngineOptions& opt) {
  const int w = static_cast<int>(cfg.world_size);
  StallRegistry stalls(w, static_cast<int>(cfg.lanes));
  std::optional<ExperimentReport> out;
  RankShared shared{&cfg, &opt, &stalls, &out};

  std::vector<std::function<Task<void>()>> roots;
  if (cfg.transport == TransportKind::kSim) {
    auto fabric = std::make_shared<SimFabric>(w, cfg.link);
    for (int r = 0; r < w; ++r) roots.emplace_back([fabric, r, shared] { return rank_body(fabric, r, shared); });
    fabric->run(std::move(roots), [&stalls] { return stalls.describe(); });
  } else {
    auto fabric = std::make_shared<InProcessFabric>(w, std::chrono::duration<double>(cfg.deadlock_timeout_s));
    for (int r = 0; r < w; ++r) roots.emplace_back([fabric, r, shared] { return rank_body(fabric, r, shared); });
    try {
      sync_wait(fabric->run_all(std::move(roots)));
    } catch (const DeadlockError&) {
      throw DeadlockError(stalls.first());
    }
  }
  if (!out) throw std::logic_error("experiment finished without a report");
  return std::move(*out);
}

constexpr int kChildDeadlockExit = 4;
constexpr int kChildFailureExit = 1;

ExperimentReport run_tcp(const ExperimentConfig& cfg, const EngineOptions& opt) {
  const int w = static_cast<int>(cfg.world_size);
  const auto timeout = std::chrono::duration<double>(cfg.deadlock_timeout_s);
  std::uint16_t port = cfg.rendezvous.port;
  const int listen_fd = TcpFabric::open_listener(cfg.rendezvous.host, port);

  std::cout.flush();
  std::cerr.flush();
  std::vector<pid_t> children;
  for (int r = 1; r < w; ++r) {
    const pid_t pid = ::fork();
    if (pid < 0) {
      for (pid_t c : children) ::kill(c, SIGTERM);
      for (pid_t c : children) ::waitpid(c, nullptr, 0);
      ::close(listen_fd);
      throw TransportError("fork failed");
    }
    if (pid == 0) {
      ::close(listen_fd);
      int code = 0;
      try {
        StallRegistry stalls(w, static_cast<int>(cfg.lanes));
        std::optional<ExperimentReport> out;
        RankShared shared{&cfg, &opt, &stalls, &out};
        auto fabric = std::make_shared<TcpFabric>(w, r, cfg.rendezvous.host, port, timeout);
        sync_wait(rank_body(fabric, r, shared));
      } catch (const DeadlockError& e) {
        std::cerr << "rank " << r << ": " << e.what() << "\n";
        code = kChildDeadlockExit;
      } catch (const std::exception& e) {
        std::cerr << "rank " << r << ": " << e.what() << "\n";
        code = kChildFailureExit;
      }
      std::cerr.flush();
      ::_exit(code);
    }
    children.push_back(pid);
  }

  auto reap = [&children] {
    int worst = 0;
    for (pid_t c : children) {
      int status = 0;
      ::waitpid(c, &status, 0);
      const int code = WIFEXITED(status) ? WEXITSTATUS(status) : kChildFailureExit;
      if (code == kChildDeadlockExit || (worst == 0 && code != 0)) worst = code;
    }
    return worst;
  };

  std::optional<ExperimentReport> out;
  try {
    StallRegistry stalls(w, static_cast<int>(cfg.lanes));
    RankShared shared{&cfg, &opt, &stalls, &out};
    auto fabric = std::make_shared<TcpFabric>(w, 0, cfg.rendezvous.host, port, timeout, listen_fd);
    sync_wait(rank_body(fabric, 0, shared));
  } catch (...) {
    reap();
    throw;
  }
  const int worst = reap();
  if (worst == kChildDeadlockExit) throw DeadlockError("a rank process reported a stall");
  if (worst != 0) throw TransportError("a rank process failed with exit code " + std::to_string(worst));
  if (!out) throw std::logic_error("experiment finished without a report");
  return std::move(*out);
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, const EngineOptions& options) {
  config.validate();
  if (config.transport == TransportKind::kTcp) return run_tcp(config, options);
  return run_local(config, options);
}

}  // namespace gtring
