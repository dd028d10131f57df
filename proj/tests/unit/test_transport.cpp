#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cstring>
#include <mutex>
#include <thread>

#include "gtring/communicator.hpp"
#include "gtring/errors.hpp"
#include "gtring/inprocess_fabric.hpp"
#include "gtring/sim_fabric.hpp"
#include "gtring/tcp_fabric.hpp"

using namespace gtring;
using namespace std::chrono_literals;

namespace {

std::vector<std::byte> bytes_of(const std::string& s) {
  std::vector<std::byte> out(s.size());
  std::memcpy(out.data(), s.data(), s.size());
  return out;
}

std::string string_of(std::span<const std::byte> b) { return std::string(reinterpret_cast<const char*>(b.data()), b.size()); }

void run_ranks(int n, const std::function<void(int)>& body) {
  std::vector<std::function<void()>> bodies;
  for (int r = 0; r < n; ++r) bodies.push_back([&body, r] { body(r); });
  InProcessFabric::run_threads(std::move(bodies));
}

GtSlice constant_slice(const CombinedIndexSpace& s, Complex v, std::uint64_t meas) {
  GtSlice t = GtSlice::full(s);
  for (auto& z : t.data()) z = v;
  t.set_meas_count(meas);
  return t;
}

}  // namespace

TEST(InProcess, SelfSendLoopback) {
  auto fabric = std::make_shared<InProcessFabric>(1, 2s);
  Communicator c = Communicator::world(fabric, 0);
  const auto msg = bytes_of("loopback");
  std::vector<std::byte> buf(msg.size());
  PendingOp s = c.isend(msg, 0, 7);
  PendingOp r = c.irecv(buf, 0, 7);
  EXPECT_EQ(c.wait_blocking(r), msg.size());
  c.wait_blocking(s);
  EXPECT_EQ(string_of(buf), "loopback");
}

TEST(InProcess, SamePairAndTagIsFifo) {
  auto fabric = std::make_shared<InProcessFabric>(2, 5s);
  run_ranks(2, [&](int r) {
    Communicator c = Communicator::world(fabric, r);
    if (r == 0) {
      std::vector<std::vector<std::byte>> msgs;
      std::vector<PendingOp> ops;
      for (int i = 0; i < 5; ++i) msgs.push_back(bytes_of("m" + std::to_string(i)));
      for (auto& m : msgs) ops.push_back(c.isend(m, 1, 3));
      for (auto& op : ops) c.wait_blocking(op);
    } else {
      for (int i = 0; i < 5; ++i) {
        std::vector<std::byte> buf(2);
        PendingOp op = c.irecv(buf, 0, 3);
        c.wait_blocking(op);
        EXPECT_EQ(string_of(buf), "m" + std::to_string(i));
      }
    }
  });
}

TEST(InProcess, TagMismatchNeverMatches) {
  auto fabric = std::make_shared<InProcessFabric>(2, 0.2s);
  Communicator a = Communicator::world(fabric, 0);
  Communicator b = Communicator::world(fabric, 1);
  const auto msg = bytes_of("x");
  std::vector<std::byte> buf(1);
  PendingOp s = a.isend(msg, 1, 1);
  PendingOp r = b.irecv(buf, 0, 2);
  EXPECT_FALSE(b.wait_for(r, 50ms));
  EXPECT_FALSE(b.test(r));
  EXPECT_THROW(b.wait_blocking(r), TransportTimeout);
  EXPECT_FALSE(a.test(s));
}

TEST(InProcess, DoubleWaitIsContractViolation) {
  auto fabric = std::make_shared<InProcessFabric>(1, 1s);
  Communicator c = Communicator::world(fabric, 0);
  const auto msg = bytes_of("a");
  std::vector<std::byte> buf(1);
  PendingOp s = c.isend(msg, 0, 1);
  PendingOp r = c.irecv(buf, 0, 1);
  c.wait_blocking(r);
  c.wait_blocking(s);
  EXPECT_THROW(c.wait_blocking(r), ContractViolation);
  EXPECT_THROW(c.wait_blocking(s), ContractViolation);
}

TEST(InProcess, RankOutsideCommunicatorIsDomainError) {
  auto fabric = std::make_shared<InProcessFabric>(2, 1s);
  Communicator c = Communicator::world(fabric, 0);
  const auto msg = bytes_of("a");
  std::vector<std::byte> buf(1);
  EXPECT_THROW(c.isend(msg, 2, 1), DomainError);
  EXPECT_THROW(c.isend(msg, -1, 1), DomainError);
  EXPECT_THROW(c.irecv(buf, 5, 1), DomainError);
}

TEST(InProcess, PayloadLargerThanReceiveFails) {
  auto fabric = std::make_shared<InProcessFabric>(1, 1s);
  Communicator c = Communicator::world(fabric, 0);
  const auto msg = bytes_of("too long");
  std::vector<std::byte> buf(3);
  PendingOp s = c.isend(msg, 0, 1);
  PendingOp r = c.irecv(buf, 0, 1);
  EXPECT_THROW(c.wait_blocking(r), TransportError);
}

TEST(InProcess, SplitIntoSubringsOfThree) {
  auto fabric = std::make_shared<InProcessFabric>(6, 5s);
  std::mutex mu;
  std::vector<std::tuple<int, int, int, int>> seen(6);
  run_ranks(6, [&](int r) {
    Communicator w = Communicator::world(fabric, r);
    Communicator sub = sync_wait(w.split(r / 3, r));
    std::lock_guard lock(mu);
    seen[r] = {sub.size(), sub.rank(), sub.world_rank_of(0), sub.world_rank_of(2)};
  });
  for (int r = 0; r < 6; ++r) {
    EXPECT_EQ(seen[r], std::make_tuple(3, r % 3, (r / 3) * 3, (r / 3) * 3 + 2)) << r;
  }
}

TEST(InProcess, SplitTwelveIntoHalvesAndIsolateTraffic) {
  auto fabric = std::make_shared<InProcessFabric>(12, 5s);
  std::vector<int> got(12, -1);
  run_ranks(12, [&](int r) {
    Communicator w = Communicator::world(fabric, r);
    Communicator sub = sync_wait(w.split(r / 6, r));
    EXPECT_EQ(sub.size(), 6);
    EXPECT_EQ(sub.rank(), r % 6);
    // Same (local source, tag) in both halves must stay inside each half.
    std::int32_t out = r;
    std::int32_t in = -1;
    const int right = (sub.rank() + 1) % 6;
    const int left = (sub.rank() + 5) % 6;
    PendingOp rr = sub.irecv(std::as_writable_bytes(std::span(&in, 1)), left, 9);
    PendingOp ss = sub.isend(std::as_bytes(std::span(&out, 1)), right, 9);
    sub.wait_blocking(rr);
    sub.wait_blocking(ss);
    got[r] = in;
  });
  for (int r = 0; r < 12; ++r) EXPECT_EQ(got[r], (r / 6) * 6 + (r % 6 + 5) % 6) << r;
}

TEST(InProcess, ReduceSingleRankIsIdentity) {
  auto fabric = std::make_shared<InProcessFabric>(1, 1s);
  Communicator c = Communicator::world(fabric, 0);
  const CombinedIndexSpace s(2, 2);
  GtSlice local = constant_slice(s, Complex(1.5, -2), 3);
  auto out = sync_wait(reduce_sum(c, local, 0));
  ASSERT_TRUE(out.has_value());
  EXPECT_TRUE(std::equal(out->data().begin(), out->data().end(), local.data().begin()));
  EXPECT_EQ(out->meas_count(), 3u);
}

TEST(InProcess, ReduceOfOnesGivesTwos) {
  auto fabric = std::make_shared<InProcessFabric>(2, 5s);
  const CombinedIndexSpace s(2, 2);
  std::optional<GtSlice> root_out;
  bool other_empty = false;
  run_ranks(2, [&](int r) {
    Communicator c = Communicator::world(fabric, r);
    auto out = sync_wait(reduce_sum(c, constant_slice(s, Complex(1, 1), 1), 0));
    if (r == 0) root_out = std::move(out);
    else other_empty = !out.has_value();
  });
  ASSERT_TRUE(root_out.has_value());
  EXPECT_TRUE(other_empty);
  for (const auto& z : root_out->data()) EXPECT_EQ(z, Complex(2, 2));
  EXPECT_EQ(root_out->meas_count(), 2u);
}

TEST(InProcess, GatherPreservesRankOrder) {
  auto fabric = std::make_shared<InProcessFabric>(4, 5s);
  std::vector<std::vector<std::byte>> at_root;
  run_ranks(4, [&](int r) {
    Communicator c = Communicator::world(fabric, r);
    const auto mine = bytes_of(std::string(static_cast<std::size_t>(r + 1), static_cast<char>('a' + r)));
    auto all = sync_wait(gather_bytes(c, mine, 2));
    if (r == 2) at_root = std::move(all);
    sync_wait(barrier(c));
  });
  ASSERT_EQ(at_root.size(), 4u);
  EXPECT_EQ(string_of(at_root[0]), "a");
  EXPECT_EQ(string_of(at_root[3]), "dddd");
}

namespace {

struct SimProbe {
  std::vector<double> done_at;
};

Task<void> sim_sender(Communicator c, std::vector<int> dests, std::size_t len) {
  std::vector<std::byte> payload(len, std::byte{1});
  std::vector<PendingOp> ops;
  for (int d : dests) ops.push_back(c.isend(payload, d, 5));
  for (auto& op : ops) co_await c.wait(op);
}

Task<void> sim_receiver(Communicator c, int src, std::size_t len, SimProbe* probe, int slot) {
  std::vector<std::byte> buf(len);
  PendingOp op = c.irecv(buf, src, 5);
  co_await c.wait(op);
  probe->done_at[static_cast<std::size_t>(slot)] = c.fabric().now();
}

Task<void> sim_ring_step(Communicator c, std::size_t len, SimProbe* probe) {
  std::vector<std::byte> out(len);
  std::vector<std::byte> in(len);
  const int n = c.size();
  PendingOp r = c.irecv(in, (c.rank() + n - 1) % n, 5);
  PendingOp s = c.isend(out, (c.rank() + 1) % n, 5);
  co_await c.wait(r);
  co_await c.wait(s);
  probe->done_at[static_cast<std::size_t>(c.rank())] = c.fabric().now();
}

SimLinkConfig charged(std::uint64_t bytes) {
  SimLinkConfig link;
  link.charged_message_bytes = bytes;
  return link;
}

}  // namespace

TEST(Sim, SingleInterNodeMessage) {
  auto fabric = std::make_shared<SimFabric>(12, charged(170'000'000));
  SimProbe probe{std::vector<double>(1)};
  fabric->run({[&] { return sim_sender(Communicator::world(fabric, 0), {6}, 8); },
               [&] { return sim_receiver(Communicator::world(fabric, 6), 0, 8, &probe, 0); }});
  EXPECT_NEAR(probe.done_at[0], 170e6 / 12.5e9 + 5e-6, 1e-12);
  EXPECT_EQ(fabric->clock(), ClockKind::kVirtual);
}

TEST(Sim, TwoMessagesShareOneNic) {
  auto fabric = std::make_shared<SimFabric>(18, charged(170'000'000));
  SimProbe probe{std::vector<double>(2)};
  fabric->run({[&] { return sim_sender(Communicator::world(fabric, 0), {6, 12}, 8); },
               [&] { return sim_receiver(Communicator::world(fabric, 6), 0, 8, &probe, 0); },
               [&] { return sim_receiver(Communicator::world(fabric, 12), 0, 8, &probe, 1); }});
  const double m = 170e6 / 12.5e9;
  EXPECT_NEAR(std::min(probe.done_at[0], probe.done_at[1]), 5e-6 + m, 1e-12);
  EXPECT_NEAR(std::max(probe.done_at[0], probe.done_at[1]), 5e-6 + 2 * m, 1e-12);
}

TEST(Sim, SingleNodeRingStepUsesPrivateLinks) {
  auto fabric = std::make_shared<SimFabric>(6, charged(170'000'000));
  SimProbe probe{std::vector<double>(6)};
  std::vector<std::function<Task<void>()>> roots;
  for (int r = 0; r < 6; ++r) roots.push_back([&, r] { return sim_ring_step(Communicator::world(fabric, r), 8, &probe); });
  fabric->run(std::move(roots));
  for (double t : probe.done_at) EXPECT_NEAR(t, 5e-6 + 170e6 / 25e9, 1e-12);
}

TEST(Sim, ReservedTagsAreNotCharged) {
  SimLinkConfig link = charged(170'000'000);
  auto fabric = std::make_shared<SimFabric>(12, link, true);
  fabric->run({[&]() -> Task<void> {
                 Communicator c = Communicator::world(fabric, 0);
                 std::vector<std::byte> b(100);
                 PendingOp op = c.isend(b, 6, kReservedTagBase + 1);
                 co_await c.wait(op);
               },
               [&]() -> Task<void> {
                 Communicator c = Communicator::world(fabric, 6);
                 std::vector<std::byte> b(100);
                 PendingOp op = c.irecv(b, 0, kReservedTagBase + 1);
                 co_await c.wait(op);
               }});
  EXPECT_NEAR(fabric->now(), 5e-6 + 100 / 12.5e9, 1e-12);
}

TEST(Sim, LogIsTimeOrderedAndDeterministic) {
  auto run_once = [] {
    auto fabric = std::make_shared<SimFabric>(12, charged(1'000'000), true);
    SimProbe probe{std::vector<double>(12)};
    std::vector<std::function<Task<void>()>> roots;
    for (int r = 0; r < 12; ++r) {
      roots.push_back([&, r] { return sim_ring_step(Communicator::world(fabric, r), 64, &probe); });
    }
    fabric->run(std::move(roots));
    return fabric->log();
  };
  const auto log = run_once();
  ASSERT_FALSE(log.empty());
  for (std::size_t i = 1; i < log.size(); ++i) EXPECT_LE(log[i - 1].time, log[i].time);
  const auto again = run_once();
  ASSERT_EQ(again.size(), log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    EXPECT_EQ(again[i].time, log[i].time);
    EXPECT_EQ(again[i].src, log[i].src);
    EXPECT_EQ(again[i].dst, log[i].dst);
  }
}

TEST(Sim, UnmatchedReceiveIsDeadlock) {
  auto fabric = std::make_shared<SimFabric>(2, SimLinkConfig{});
  SimProbe probe{std::vector<double>(1)};
  EXPECT_THROW(fabric->run({[&] { return sim_receiver(Communicator::world(fabric, 1), 0, 8, &probe, 0); }},
                           [] { return std::string("rank 1 waiting"); }),
               DeadlockError);
}

TEST(Sim, InvalidLinkRejected) {
  SimLinkConfig link;
  link.nic_bandwidth_Bps = 0;
  EXPECT_THROW(link.validate(), ConfigError);
  link = SimLinkConfig{};
  link.ranks_per_node = 0;
  EXPECT_THROW(link.validate(), ConfigError);
}

TEST(Tcp, RingExchangeSplitAndReduceAcrossThreads) {
  constexpr int kRanks = 3;
  std::uint16_t port = 0;
  const int listen_fd = TcpFabric::open_listener("127.0.0.1", port);
  ASSERT_GT(port, 0);
  const CombinedIndexSpace s(1, 2);
  std::vector<std::int32_t> got(kRanks, -1);
  std::optional<GtSlice> reduced;
  run_ranks(kRanks, [&](int r) {
    auto fabric = std::make_shared<TcpFabric>(kRanks, r, "127.0.0.1", port, 10s, r == 0 ? listen_fd : -1);
    Communicator w = Communicator::world(fabric, r);
    std::int32_t out = 100 + r;
    std::int32_t in = -1;
    PendingOp rr = w.irecv(std::as_writable_bytes(std::span(&in, 1)), (r + kRanks - 1) % kRanks, 1000);
    PendingOp ss = w.isend(std::as_bytes(std::span(&out, 1)), (r + 1) % kRanks, 1000);
    w.wait_blocking(rr);
    w.wait_blocking(ss);
    got[r] = in;

    Communicator sub = sync_wait(w.split(0, kRanks - r));
    EXPECT_EQ(sub.rank(), kRanks - 1 - r);
    auto sum = sync_wait(reduce_sum(w, constant_slice(s, Complex(r, 1), 1), 0));
    if (r == 0) reduced = std::move(sum);
    sync_wait(barrier(w));
  });
  for (int r = 0; r < kRanks; ++r) EXPECT_EQ(got[r], 100 + (r + kRanks - 1) % kRanks);
  ASSERT_TRUE(reduced.has_value());
  for (const auto& z : reduced->data()) EXPECT_EQ(z, Complex(3, 3));
  EXPECT_EQ(reduced->meas_count(), 3u);
}
