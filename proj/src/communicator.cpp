#include "gtring/communicator.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <string>
#include <tuple>

#include "gtring/errors.hpp"

namespace gtring {

namespace {

constexpr int kSplitTag = kReservedTagBase + 1;
constexpr int kReduceHeaderTag = kReservedTagBase + 2;
constexpr int kReduceDataTag = kReservedTagBase + 3;
constexpr int kGatherSizeTag = kReservedTagBase + 4;
constexpr int kGatherDataTag = kReservedTagBase + 5;
constexpr int kBarrierTag = kReservedTagBase + 6;

constexpr std::uint64_t kWorldContext = 1;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

template <typename T>
std::span<const std::byte> bytes_of(const T& v) {
  return std::as_bytes(std::span<const T>(&v, 1));
}

template <typename T>
std::span<std::byte> writable_bytes_of(T& v) {
  return std::as_writable_bytes(std::span<T>(&v, 1));
}

}  // namespace

std::string to_string(ClockKind clock) { return clock == ClockKind::kVirtual ? "virtual" : "monotonic"; }

std::size_t WaitAwaiter::await_resume() {
  if (!req_->error.empty()) throw TransportError(req_->error);
  return req_->bytes;
}

Communicator::Communicator(std::shared_ptr<Fabric> fabric, std::uint64_t ctx, std::vector<int> members, int rank)
    : fabric_(std::move(fabric)), ctx_(ctx), members_(std::move(members)), rank_(rank) {}

Communicator Communicator::world(std::shared_ptr<Fabric> fabric, int world_rank) {
  const int n = fabric->world_size();
  if (world_rank < 0 || world_rank >= n) {
    throw DomainError("world rank " + std::to_string(world_rank) + " outside [0, " + std::to_string(n) + ")");
  }
  std::vector<int> members(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) members[static_cast<std::size_t>(i)] = i;
  return Communicator(std::move(fabric), kWorldContext, std::move(members), world_rank);
}

int Communicator::world_rank_of(int rank) const {
  check_rank(rank, "rank");
  return members_[static_cast<std::size_t>(rank)];
}

void Communicator::check_rank(int r, const char* what) const {
  if (r < 0 || r >= size()) {
    throw DomainError(std::string(what) + " " + std::to_string(r) + " outside communicator of size " +
                      std::to_string(size()));
  }
}

ChannelKey Communicator::key_to(int dest, int tag) const {
  return ChannelKey{ctx_, world_rank(), members_[static_cast<std::size_t>(dest)], tag};
}

ChannelKey Communicator::key_from(int source, int tag) const {
  return ChannelKey{ctx_, members_[static_cast<std::size_t>(source)], world_rank(), tag};
}

PendingOp Communicator::isend(std::span<const std::byte> payload, int dest, int tag) {
  check_rank(dest, "destination");
  return PendingOp(fabric_->post_send(key_to(dest, tag), payload));
}

PendingOp Communicator::irecv(std::span<std::byte> buffer, int source, int tag) {
  check_rank(source, "source");
  return PendingOp(fabric_->post_recv(key_from(source, tag), buffer));
}

void Communicator::mark_waited(PendingOp& op) const {
  if (!op.valid()) throw ContractViolation("wait on an empty PendingOp");
  if (op.state()->waited) throw ContractViolation("PendingOp waited twice");
  op.state()->waited = true;
}

WaitAwaiter Communicator::wait(PendingOp& op) {
  mark_waited(op);
  return WaitAwaiter(*fabric_, op.state());
}

std::size_t Communicator::wait_blocking(PendingOp& op) {
  mark_waited(op);
  fabric_->await_ready(*op.state());
  if (!op.state()->error.empty()) throw TransportError(op.state()->error);
  return op.state()->bytes;
}

bool Communicator::wait_for(PendingOp& op, std::chrono::duration<double> timeout) {
  if (!op.valid()) throw ContractViolation("wait on an empty PendingOp");
  if (op.state()->waited) throw ContractViolation("PendingOp waited twice");
  if (!fabric_->wait_for(*op.state(), timeout)) return false;
  op.state()->waited = true;
  if (!op.state()->error.empty()) throw TransportError(op.state()->error);
  return true;
}

bool Communicator::test(const PendingOp& op) const {
  if (!op.valid()) throw ContractViolation("test on an empty PendingOp");
  return fabric_->test(*op.state());
}

Task<Communicator> Communicator::split(int color, int key) {
  const std::uint64_t seq = split_seq_++;
  const int n = size();
  const std::array<std::int64_t, 2> mine{color, key};
  std::vector<std::array<std::int64_t, 2>> all(static_cast<std::size_t>(n));
  all[static_cast<std::size_t>(rank_)] = mine;

  std::vector<PendingOp> ops;
  ops.reserve(2 * static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    if (r != rank_) ops.push_back(irecv(writable_bytes_of(all[static_cast<std::size_t>(r)]), r, kSplitTag));
  }
  for (int r = 0; r < n; ++r) {
    if (r != rank_) ops.push_back(isend(bytes_of(mine), r, kSplitTag));
  }
  for (auto& op : ops) co_await wait(op);

  std::vector<std::tuple<std::int64_t, int>> group;  // (key, parent rank)
  for (int r = 0; r < n; ++r) {
    if (all[static_cast<std::size_t>(r)][0] == color) group.emplace_back(all[static_cast<std::size_t>(r)][1], r);
  }
  std::sort(group.begin(), group.end());

  std::vector<int> members;
  int my_index = 0;
  for (const auto& [k, parent_rank] : group) {
    if (parent_rank == rank_) my_index = static_cast<int>(members.size());
    members.push_back(members_[static_cast<std::size_t>(parent_rank)]);
  }
  const std::uint64_t ctx =
      splitmix64(ctx_ ^ splitmix64(seq * 0x100000001B3ull ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(color))));
  co_return Communicator(fabric_, ctx, std::move(members), my_index);
}

namespace {

struct SliceHeader {
  std::uint64_t lo;
  std::uint64_t hi;
  std::uint64_t n;
  std::uint64_t meas_count;
};

}  // namespace

Task<std::optional<GtSlice>> reduce_sum(Communicator& comm, const GtSlice& local, int root) {
  if (root < 0 || root >= comm.size()) throw DomainError("reduce_sum: root outside communicator");
  if (comm.size() == 1) co_return local;

  const SliceHeader mine{local.lo(), local.hi(), local.space().size(), local.meas_count()};

  if (comm.rank() != root) {
    PendingOp header = comm.isend(bytes_of(mine), root, kReduceHeaderTag);
    PendingOp data = comm.isend(std::as_bytes(local.data()), root, kReduceDataTag);
    co_await comm.wait(header);
    co_await comm.wait(data);
    co_return std::nullopt;
  }

  const auto n = static_cast<std::size_t>(comm.size());
  std::vector<SliceHeader> headers(n);
  std::vector<PendingOp> header_ops(n);
  for (int r = 0; r < comm.size(); ++r) {
    if (r != root) header_ops[static_cast<std::size_t>(r)] =
        comm.irecv(writable_bytes_of(headers[static_cast<std::size_t>(r)]), r, kReduceHeaderTag);
  }
  for (int r = 0; r < comm.size(); ++r) {
    if (r == root) continue;
    co_await comm.wait(header_ops[static_cast<std::size_t>(r)]);
    const SliceHeader& h = headers[static_cast<std::size_t>(r)];
    if (h.lo != mine.lo || h.hi != mine.hi || h.n != mine.n) {
      throw ContractViolation("reduce_sum: rank " + std::to_string(r) + " contributed a slice of different shape");
    }
  }

  std::vector<std::vector<Complex>> parts(n);
  std::vector<PendingOp> data_ops(n);
  for (int r = 0; r < comm.size(); ++r) {
    if (r == root) continue;
    auto& part = parts[static_cast<std::size_t>(r)];
    part.resize(local.entry_count());
    data_ops[static_cast<std::size_t>(r)] = comm.irecv(std::as_writable_bytes(std::span<Complex>(part)), r,
                                                       kReduceDataTag);
  }
  for (int r = 0; r < comm.size(); ++r) {
    if (r != root) co_await comm.wait(data_ops[static_cast<std::size_t>(r)]);
  }

  GtSlice sum(local.space(), local.lo(), local.hi());
  auto out = sum.data();
  std::uint64_t count = 0;
  for (int r = 0; r < comm.size(); ++r) {
    std::span<const Complex> part =
        r == root ? local.data() : std::span<const Complex>(parts[static_cast<std::size_t>(r)]);
    if (r == 0) {
      std::copy(part.begin(), part.end(), out.begin());
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += part[i];
    }
    count += r == root ? mine.meas_count : headers[static_cast<std::size_t>(r)].meas_count;
  }
  sum.set_meas_count(count);
  co_return sum;
}

Task<std::vector<std::vector<std::byte>>> gather_bytes(Communicator& comm, std::span<const std::byte> local,
                                                       int root) {
  if (root < 0 || root >= comm.size()) throw DomainError("gather_bytes: root outside communicator");
  const std::uint64_t my_size = local.size();
  if (comm.rank() != root) {
    PendingOp size_op = comm.isend(bytes_of(my_size), root, kGatherSizeTag);
    PendingOp data_op = comm.isend(local, root, kGatherDataTag);
    co_await comm.wait(size_op);
    co_await comm.wait(data_op);
    co_return std::vector<std::vector<std::byte>>{};
  }

  const auto n = static_cast<std::size_t>(comm.size());
  std::vector<std::uint64_t> sizes(n, 0);
  std::vector<PendingOp> ops(n);
  for (int r = 0; r < comm.size(); ++r) {
    if (r != root) ops[static_cast<std::size_t>(r)] =
        comm.irecv(writable_bytes_of(sizes[static_cast<std::size_t>(r)]), r, kGatherSizeTag);
  }
  for (int r = 0; r < comm.size(); ++r) {
    if (r != root) co_await comm.wait(ops[static_cast<std::size_t>(r)]);
  }
  std::vector<std::vector<std::byte>> out(n);
  for (int r = 0; r < comm.size(); ++r) {
    auto& buf = out[static_cast<std::size_t>(r)];
    if (r == root) {
      buf.assign(local.begin(), local.end());
    } else {
      buf.resize(sizes[static_cast<std::size_t>(r)]);
      ops[static_cast<std::size_t>(r)] = comm.irecv(buf, r, kGatherDataTag);
    }
  }
  for (int r = 0; r < comm.size(); ++r) {
    if (r != root) co_await comm.wait(ops[static_cast<std::size_t>(r)]);
  }
  co_return out;
}

Task<void> barrier(Communicator& comm) {
  if (comm.size() == 1) co_return;
  std::byte token{0};
  if (comm.rank() != 0) {
    PendingOp arrive = comm.isend(std::span<const std::byte>(&token, 1), 0, kBarrierTag);
    co_await comm.wait(arrive);
    std::byte release{0};
    PendingOp leave = comm.irecv(std::span<std::byte>(&release, 1), 0, kBarrierTag);
    co_await comm.wait(leave);
    co_return;
  }
  std::vector<std::byte> tokens(static_cast<std::size_t>(comm.size()));
  std::vector<PendingOp> ops;
  for (int r = 1; r < comm.size(); ++r) {
    ops.push_back(comm.irecv(std::span<std::byte>(&tokens[static_cast<std::size_t>(r)], 1), r, kBarrierTag));
  }
  for (auto& op : ops) co_await comm.wait(op);
  ops.clear();
  for (int r = 1; r < comm.size(); ++r) ops.push_back(comm.isend(std::span<const std::byte>(&token, 1), r, kBarrierTag));
  for (auto& op : ops) co_await comm.wait(op);
}

}  // namespace gtring
