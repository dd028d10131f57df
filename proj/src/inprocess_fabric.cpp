#include "gtring/inprocess_fabric.hpp"

#include <cstring>
#include <exception>
#include <string>
#include <thread>

#include "gtring/errors.hpp"

namespace gtring {

InProcessFabric::InProcessFabric(int world_size, std::chrono::duration<double> timeout)
    : world_size_(world_size), timeout_(timeout), start_(std::chrono::steady_clock::now()) {
  if (world_size < 1) throw ConfigError("in-process fabric needs at least one rank");
}

void InProcessFabric::check_key(const ChannelKey& key) const {
  if (key.src < 0 || key.src >= world_size_ || key.dst < 0 || key.dst >= world_size_) {
    throw DomainError("in-process fabric: rank outside world");
  }
}

void InProcessFabric::deliver(const PendingSend& send, const PendingRecv& recv) {
  if (send.data.size() > recv.data.size()) {
    const std::string msg = "message of " + std::to_string(send.data.size()) + " bytes truncated by " +
                            std::to_string(recv.data.size()) + "-byte receive buffer";
    send.req->error = msg;
    recv.req->error = msg;
  } else if (!send.data.empty()) {
    std::memcpy(recv.data.data(), send.data.data(), send.data.size());
  }
  send.req->bytes = send.data.size();
  recv.req->bytes = send.data.size();
  send.req->completed = true;
  recv.req->completed = true;
  ++counters_.messages_delivered;
  counters_.bytes_delivered += send.data.size();
}

RequestPtr InProcessFabric::post_send(const ChannelKey& key, std::span<const std::byte> data) {
  check_key(key);
  auto req = std::make_shared<RequestState>(RequestState::Kind::kSend, key);
  {
    std::lock_guard lock(mu_);
    ++counters_.sends_posted;
    Channel& ch = channels_[key];
    if (!ch.recvs.empty()) {
      PendingRecv recv = ch.recvs.front();
      ch.recvs.pop_front();
      deliver(PendingSend{req, data}, recv);
    } else {
      ch.sends.push_back(PendingSend{req, data});
      return req;
    }
  }
  cv_.notify_all();
  return req;
}

RequestPtr InProcessFabric::post_recv(const ChannelKey& key, std::span<std::byte> data) {
  check_key(key);
  auto req = std::make_shared<RequestState>(RequestState::Kind::kRecv, key);
  {
    std::lock_guard lock(mu_);
    ++counters_.recvs_posted;
    Channel& ch = channels_[key];
    if (!ch.sends.empty()) {
      PendingSend send = ch.sends.front();
      ch.sends.pop_front();
      deliver(send, PendingRecv{req, data});
    } else {
      ch.recvs.push_back(PendingRecv{req, data});
      return req;
    }
  }
  cv_.notify_all();
  return req;
}

bool InProcessFabric::await_ready(RequestState& req) {
  if (!wait_for(req, timeout_)) {
    const ChannelKey& k = req.channel;
    throw TransportTimeout(std::string(req.kind == RequestState::Kind::kSend ? "send" : "receive") +
                           " on (src " + std::to_string(k.src) + ", dst " + std::to_string(k.dst) + ", tag " +
                           std::to_string(k.tag) + ") did not complete within " +
                           std::to_string(timeout_.count()) + " s");
  }
  return true;
}

void InProcessFabric::await_suspend(RequestState&, std::coroutine_handle<>) {
  throw std::logic_error("in-process fabric never suspends");
}

bool InProcessFabric::test(const RequestState& req) const {
  std::lock_guard lock(mu_);
  return req.completed;
}

bool InProcessFabric::wait_for(RequestState& req, std::chrono::duration<double> timeout) {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return req.completed; });
}

void InProcessFabric::run_threads(std::vector<std::function<void()>> bodies) {
  std::vector<std::exception_ptr> errors(bodies.size());
  std::vector<std::thread> threads;
  threads.reserve(bodies.size());
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    threads.emplace_back([&, i] {
      try {
        bodies[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Task<void> InProcessFabric::run_all(std::vector<std::function<Task<void>()>> bodies) {
  std::vector<std::function<void()>> thread_bodies;
  thread_bodies.reserve(bodies.size());
  for (auto& body : bodies) {
    thread_bodies.emplace_back([&body] { sync_wait(body()); });
  }
  run_threads(std::move(thread_bodies));
  co_return;
}

double InProcessFabric::now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

FabricCounters InProcessFabric::counters() const {
  std::lock_guard lock(mu_);
  return counters_;
}

}  // namespace gtring
