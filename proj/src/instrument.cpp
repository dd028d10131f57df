#include "gtring/instrument.hpp"

#include <sstream>

#include "gtring/errors.hpp"

namespace gtring {

CounterSet& CounterSet::operator+=(const CounterSet& o) {
  envelopes_sent += o.envelopes_sent;
  envelopes_received += o.envelopes_received;
  bytes_sent += o.bytes_sent;
  bytes_received += o.bytes_received;
  accumulations_applied += o.accumulations_applied;
  foreign_lane_payloads += o.foreign_lane_payloads;
  gsigma_allocations += o.gsigma_allocations;
  allocations_in_ring_loop += o.allocations_in_ring_loop;
  buffer_identity_violations += o.buffer_identity_violations;
  wait_s += o.wait_s;
  accumulate_s += o.accumulate_s;
  total_s += o.total_s;
  return *this;
}

void to_json(nlohmann::json& j, const CounterSet& c) {
  j = nlohmann::json{{"envelopes_sent", c.envelopes_sent},
                     {"envelopes_received", c.envelopes_received},
                     {"bytes_sent", c.bytes_sent},
                     {"bytes_received", c.bytes_received},
                     {"accumulations_applied", c.accumulations_applied},
                     {"foreign_lane_payloads", c.foreign_lane_payloads},
                     {"gsigma_allocations", c.gsigma_allocations},
                     {"allocations_in_ring_loop", c.allocations_in_ring_loop},
                     {"buffer_identity_violations", c.buffer_identity_violations},
                     {"wait_s", c.wait_s},
                     {"accumulate_s", c.accumulate_s},
                     {"total_s", c.total_s}};
}

void from_json(const nlohmann::json& j, CounterSet& c) {
  j.at("envelopes_sent").get_to(c.envelopes_sent);
  j.at("envelopes_received").get_to(c.envelopes_received);
  j.at("bytes_sent").get_to(c.bytes_sent);
  j.at("bytes_received").get_to(c.bytes_received);
  j.at("accumulations_applied").get_to(c.accumulations_applied);
  j.at("foreign_lane_payloads").get_to(c.foreign_lane_payloads);
  j.at("gsigma_allocations").get_to(c.gsigma_allocations);
  j.at("allocations_in_ring_loop").get_to(c.allocations_in_ring_loop);
  j.at("buffer_identity_violations").get_to(c.buffer_identity_violations);
  j.at("wait_s").get_to(c.wait_s);
  j.at("accumulate_s").get_to(c.accumulate_s);
  j.at("total_s").get_to(c.total_s);
}

std::vector<std::string> counter_columns() {
  return {"envelopes_sent",        "envelopes_received",     "bytes_sent",
          "bytes_received",        "accumulations_applied",  "foreign_lane_payloads",
          "gsigma_allocations",    "allocations_in_ring_loop", "buffer_identity_violations",
          "wait_s",                "accumulate_s",           "total_s"};
}

std::vector<std::string> counter_values(const CounterSet& c) {
  auto real = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  return {std::to_string(c.envelopes_sent),
          std::to_string(c.envelopes_received),
          std::to_string(c.bytes_sent),
          std::to_string(c.bytes_received),
          std::to_string(c.accumulations_applied),
          std::to_string(c.foreign_lane_payloads),
          std::to_string(c.gsigma_allocations),
          std::to_string(c.allocations_in_ring_loop),
          std::to_string(c.buffer_identity_violations),
          real(c.wait_s),
          real(c.accumulate_s),
          real(c.total_s)};
}

RankInstrument::RankInstrument(int lanes, bool enabled)
    : enabled_(enabled), slots_(static_cast<std::size_t>(lanes < 0 ? 0 : lanes)) {
  if (lanes < 1) throw ConfigError("instrument needs at least one lane");
}

RankInstrument::Slot& RankInstrument::slot(int lane) {
  if (lane < 0 || lane >= lanes()) throw DomainError("instrument: lane out of range");
  return slots_[static_cast<std::size_t>(lane)];
}

const RankInstrument::Slot& RankInstrument::slot(int lane) const {
  if (lane < 0 || lane >= lanes()) throw DomainError("instrument: lane out of range");
  return slots_[static_cast<std::size_t>(lane)];
}

namespace {
constexpr auto kRelaxed = std::memory_order_relaxed;
}

void RankInstrument::count_send(int lane, std::uint64_t bytes) {
  if (!enabled_) return;
  Slot& s = slot(lane);
  s.envelopes_sent.fetch_add(1, kRelaxed);
  s.bytes_sent.fetch_add(bytes, kRelaxed);
}

void RankInstrument::count_recv(int lane, std::uint64_t bytes) {
  if (!enabled_) return;
  Slot& s = slot(lane);
  s.envelopes_received.fetch_add(1, kRelaxed);
  s.bytes_received.fetch_add(bytes, kRelaxed);
}

void RankInstrument::count_accumulation(int lane) {
  if (enabled_) slot(lane).accumulations_applied.fetch_add(1, kRelaxed);
}

void RankInstrument::count_foreign_payload(int lane) {
  if (enabled_) slot(lane).foreign_lane_payloads.fetch_add(1, kRelaxed);
}

void RankInstrument::count_allocation(int lane) { slot(lane).gsigma_allocations.fetch_add(1, kRelaxed); }

void RankInstrument::count_ring_loop_allocations(int lane, std::uint64_t n) {
  if (enabled_ && n > 0) slot(lane).allocations_in_ring_loop.fetch_add(n, kRelaxed);
}

void RankInstrument::count_identity_violation(int lane) {
  if (enabled_) slot(lane).buffer_identity_violations.fetch_add(1, kRelaxed);
}

void RankInstrument::add_wait(int lane, double seconds) {
  if (enabled_) slot(lane).wait_s.fetch_add(seconds, kRelaxed);
}

void RankInstrument::add_accumulate(int lane, double seconds) {
  if (enabled_) slot(lane).accumulate_s.fetch_add(seconds, kRelaxed);
}

void RankInstrument::add_total(int lane, double seconds) {
  if (enabled_) slot(lane).total_s.fetch_add(seconds, kRelaxed);
}

std::uint64_t RankInstrument::allocations(int lane) const { return slot(lane).gsigma_allocations.load(kRelaxed); }

CounterSet RankInstrument::snapshot_lane(int lane) const {
  const Slot& s = slot(lane);
  CounterSet c;
  if (!enabled_) return c;
  c.envelopes_sent = s.envelopes_sent.load(kRelaxed);
  c.envelopes_received = s.envelopes_received.load(kRelaxed);
  c.bytes_sent = s.bytes_sent.load(kRelaxed);
  c.bytes_received = s.bytes_received.load(kRelaxed);
  c.accumulations_applied = s.accumulations_applied.load(kRelaxed);
  c.foreign_lane_payloads = s.foreign_lane_payloads.load(kRelaxed);
  c.gsigma_allocations = s.gsigma_allocations.load(kRelaxed);
  c.allocations_in_ring_loop = s.allocations_in_ring_loop.load(kRelaxed);
  c.buffer_identity_violations = s.buffer_identity_violations.load(kRelaxed);
  c.wait_s = s.wait_s.load(kRelaxed);
  c.accumulate_s = s.accumulate_s.load(kRelaxed);
  c.total_s = s.total_s.load(kRelaxed);
  return c;
}

CounterSet RankInstrument::snapshot_rank() const {
  CounterSet total;
  for (int t = 0; t < lanes(); ++t) total += snapshot_lane(t);
  return total;
}

CounterSet sum_counters(std::span<const CounterSet> sets) {
  CounterSet total;
  for (const auto& s : sets) total += s;
  return total;
}

}  // namespace gtring
