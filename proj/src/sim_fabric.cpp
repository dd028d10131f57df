#include "gtring/sim_fabric.hpp"

#include <algorithm>
#include <cstring>
#include <exception>
#include <sstream>
#include <tuple>

#include "gtring/communicator.hpp"
#include "gtring/errors.hpp"

namespace gtring {

void SimLinkConfig::validate() const {
  if (!(nic_bandwidth_Bps > 0) || !(intra_bandwidth_Bps > 0)) {
    throw ConfigError("link bandwidths must be strictly positive");
  }
  if (!(latency_s > 0)) throw ConfigError("link latency must be strictly positive");
  if (ranks_per_node < 1) throw ConfigError("ranks_per_node must be >= 1");
  if (charged_message_bytes && *charged_message_bytes == 0) {
    throw ConfigError("charged_message_bytes must be positive when set");
  }
}

struct SimFabric::Message {
  ChannelKey key;
  RequestPtr send_req;
  std::span<const std::byte> data;
  std::uint64_t charged = 0;
  bool arrived = false;
};

struct SimFabric::Join {
  std::size_t remaining = 0;
  std::coroutine_handle<> waiter;
  std::exception_ptr error;
};

struct SimFabric::Detached {
  struct promise_type {
    promise_type(SimFabric* self, std::uint64_t id, const std::function<Task<void>()>&, const std::shared_ptr<Join>&) {
      self->live_roots_[id] = std::coroutine_handle<promise_type>::from_promise(*this);
    }
    Detached get_return_object() noexcept { return {}; }
    std::suspend_never initial_suspend() noexcept { return {}; }
    std::suspend_never final_suspend() noexcept { return {}; }
    void return_void() noexcept {}
    void unhandled_exception() noexcept { std::terminate(); }
  };
};

namespace {

struct JoinAwaiter {
  std::size_t* remaining;
  std::coroutine_handle<>* waiter;
  bool await_ready() const noexcept { return *remaining == 0; }
  void await_suspend(std::coroutine_handle<> h) noexcept { *waiter = h; }
  void await_resume() const noexcept {}
};

}  // namespace

std::size_t SimFabric::KeyHash::operator()(const ChannelKey& k) const noexcept {
  std::uint64_t h = k.ctx * 0x9E3779B97F4A7C15ull;
  h ^= (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.src)) << 32) ^ static_cast<std::uint32_t>(k.dst);
  h *= 0xBF58476D1CE4E5B9ull;
  h ^= static_cast<std::uint32_t>(k.tag);
  h *= 0x94D049BB133111EBull;
  return static_cast<std::size_t>(h ^ (h >> 29));
}

bool SimFabric::EventLater::operator()(const Event& a, const Event& b) const noexcept {
  return std::tie(a.time, a.src, a.dst, a.tag, a.seq) > std::tie(b.time, b.src, b.dst, b.tag, b.seq);
}

SimFabric::SimFabric(int world_size, SimLinkConfig link, bool record_log)
    : world_size_(world_size), link_(link), record_log_(record_log) {
  if (world_size < 1) throw ConfigError("simulated fabric needs at least one rank");
  link_.validate();
  intra_free_.assign(static_cast<std::size_t>(world_size) * static_cast<std::size_t>(world_size), 0.0);
  nic_free_.assign(static_cast<std::size_t>(link_.node_of(world_size - 1) + 1), 0.0);
}

SimFabric::~SimFabric() { discard_stalled(); }

void SimFabric::discard_stalled() {
  // Newest first: lane programs go before the rank programs that own their state.
  while (!live_roots_.empty()) {
    auto it = std::prev(live_roots_.end());
    auto h = it->second;
    live_roots_.erase(it);
    h.destroy();
  }
  channels_.clear();
  ready_.clear();
}

RequestPtr SimFabric::post_send(const ChannelKey& key, std::span<const std::byte> data) {
  if (key.src < 0 || key.src >= world_size_ || key.dst < 0 || key.dst >= world_size_) {
    throw DomainError("simulated fabric: rank outside world");
  }
  auto req = std::make_shared<RequestState>(RequestState::Kind::kSend, key);
  auto msg = std::make_shared<Message>();
  msg->key = key;
  msg->send_req = req;
  msg->data = data;
  msg->charged = (key.tag < kReservedTagBase && link_.charged_message_bytes) ? *link_.charged_message_bytes
                                                                            : data.size();
  channels_[key].sends.push_back(msg);
  events_.push(Event{now_, key.src, key.dst, key.tag, next_seq_++, false, std::move(msg)});
  ++counters_.sends_posted;
  return req;
}

RequestPtr SimFabric::post_recv(const ChannelKey& key, std::span<std::byte> data) {
  if (key.src < 0 || key.src >= world_size_ || key.dst < 0 || key.dst >= world_size_) {
    throw DomainError("simulated fabric: rank outside world");
  }
  auto req = std::make_shared<RequestState>(RequestState::Kind::kRecv, key);
  Channel& ch = channels_[key];
  ch.recvs.emplace_back(req, data);
  ++counters_.recvs_posted;
  match(ch);
  return req;
}

void SimFabric::complete(RequestState& req) {
  req.completed = true;
  if (req.waiter) {
    ready_.push_back(std::exchange(req.waiter, {}));
  }
}

void SimFabric::transmit(const std::shared_ptr<Message>& msg) {
  const int src = msg->key.src;
  const int dst = msg->key.dst;
  const LinkClass cls = link_.link_class(src, dst);
  const double occupancy = static_cast<double>(msg->charged) / link_.bandwidth(cls);
  double start = 0;
  double end = 0;
  if (cls == LinkClass::kIntraNode) {
    double& free_at = intra_free_[static_cast<std::size_t>(src) * static_cast<std::size_t>(world_size_) +
                                  static_cast<std::size_t>(dst)];
    start = std::max(now_, free_at);
    end = start + occupancy;
    free_at = end;
  } else {
    // Egress and ingress are queued independently on the two NICs; the
    // message is complete once both have served it.
    double& out_nic = nic_free_[static_cast<std::size_t>(link_.node_of(src))];
    double& in_nic = nic_free_[static_cast<std::size_t>(link_.node_of(dst))];
    const double egress = std::max(now_, out_nic);
    out_nic = egress + occupancy;
    const double ingress = std::max(now_, in_nic);
    in_nic = ingress + occupancy;
    start = std::max(egress, ingress);
    end = start + occupancy;
  }
  const double arrival = end + link_.latency_s;
  if (record_log_) {
    log_.push_back({now_, SimLogEntry::Kind::kTransmit, src, dst, msg->key.tag, msg->charged, start, arrival});
  }
  events_.push(Event{arrival, src, dst, msg->key.tag, next_seq_++, true, msg});
}

void SimFabric::match(Channel& ch) {
  while (!ch.sends.empty() && !ch.recvs.empty() && ch.sends.front()->arrived) {
    std::shared_ptr<Message> msg = std::move(ch.sends.front());
    ch.sends.pop_front();
    auto [recv_req, buffer] = ch.recvs.front();
    ch.recvs.pop_front();

    if (msg->data.size() > buffer.size()) {
      const std::string err = "message of " + std::to_string(msg->data.size()) + " bytes truncated by " +
                              std::to_string(buffer.size()) + "-byte receive buffer";
      msg->send_req->error = err;
      recv_req->error = err;
    } else if (!msg->data.empty()) {
      std::memcpy(buffer.data(), msg->data.data(), msg->data.size());
    }
    msg->send_req->bytes = msg->data.size();
    recv_req->bytes = msg->data.size();
    ++counters_.messages_delivered;
    counters_.bytes_delivered += msg->data.size();
    if (record_log_) {
      log_.push_back({now_, SimLogEntry::Kind::kDeliver, msg->key.src, msg->key.dst, msg->key.tag, msg->charged,
                      now_, now_});
    }
    complete(*recv_req);
    complete(*msg->send_req);
  }
}

void SimFabric::advance() {
  for (;;) {
    while (!ready_.empty()) {
      auto h = ready_.front();
      ready_.pop_front();
      h.resume();
    }
    if (events_.empty()) break;
    Event ev = events_.top();
    events_.pop();
    now_ = ev.time;
    if (!ev.arrival) {
      transmit(ev.msg);
      continue;
    }
    ev.msg->arrived = true;
    if (record_log_) {
      log_.push_back({now_, SimLogEntry::Kind::kArrive, ev.src, ev.dst, ev.tag, ev.msg->charged, now_, now_});
    }
    match(channels_[ev.msg->key]);
  }
}

bool SimFabric::wait_for(RequestState& req, std::chrono::duration<double>) {
  advance();
  return req.completed;
}

SimFabric::Detached SimFabric::drive(SimFabric* self, std::uint64_t id, std::function<Task<void>()> body,
                                     std::shared_ptr<Join> join) {
  try {
    co_await body();
  } catch (...) {
    if (!join->error) join->error = std::current_exception();
  }
  self->live_roots_.erase(id);
  if (--join->remaining == 0 && join->waiter) {
    self->ready_.push_back(std::exchange(join->waiter, {}));
  }
}

void SimFabric::spawn(std::function<Task<void>()> body, std::shared_ptr<Join> join) {
  drive(this, next_root_id_++, std::move(body), std::move(join));
}

Task<void> SimFabric::run_all(std::vector<std::function<Task<void>()>> bodies) {
  auto join = std::make_shared<Join>();
  join->remaining = bodies.size();
  for (auto& body : bodies) spawn(std::move(body), join);
  co_await JoinAwaiter{&join->remaining, &join->waiter};
  if (join->error) std::rethrow_exception(join->error);
}

void SimFabric::run(std::vector<std::function<Task<void>()>> roots, const std::function<std::string()>& describe_stall) {
  auto join = std::make_shared<Join>();
  join->remaining = roots.size();
  for (auto& root : roots) spawn(std::move(root), join);
  advance();
  if (join->remaining > 0) {
    std::ostringstream msg;
    msg << "simulation stalled at t=" << now_ << " s with " << join->remaining << " program(s) blocked";
    if (describe_stall) msg << ": " << describe_stall();
    discard_stalled();
    throw DeadlockError(msg.str());
  }
  if (join->error) std::rethrow_exception(join->error);
}

}  // namespace gtring
