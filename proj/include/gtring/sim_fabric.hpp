#pragma once

#include <coroutine>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "gtring/fabric.hpp"

namespace gtring {

enum class LinkClass { kIntraNode, kNic };

/// Link parameters of the simulated machine. Ranks are placed on nodes in
/// consecutive blocks of ranks_per_node.
struct SimLinkConfig {
  double nic_bandwidth_Bps = 12.5e9;
  double intra_bandwidth_Bps = 25e9;
  double latency_s = 5e-6;
  int ranks_per_node = 6;
  /// When set, ring traffic (non-reserved tags) is charged this many bytes
  /// per message instead of its actual length.
  std::optional<std::uint64_t> charged_message_bytes;

  /// Throws ConfigError unless bandwidths, latency and ranks_per_node are positive.
  void validate() const;

  int node_of(int rank) const { return rank / ranks_per_node; }
  LinkClass link_class(int src, int dst) const {
    return node_of(src) == node_of(dst) ? LinkClass::kIntraNode : LinkClass::kNic;
  }
  double bandwidth(LinkClass c) const { return c == LinkClass::kNic ? nic_bandwidth_Bps : intra_bandwidth_Bps; }

  friend bool operator==(const SimLinkConfig&, const SimLinkConfig&) = default;
};

struct SimLogEntry {
  enum class Kind { kTransmit, kArrive, kDeliver };
  double time = 0;  // virtual time at which the event was processed
  Kind kind = Kind::kTransmit;
  int src = 0;
  int dst = 0;
  int tag = 0;
  std::uint64_t bytes = 0;  // charged bytes
  double start = 0;         // transmission start on the link
  double end = 0;           // arrival at the destination (transmission end + latency)
};

/// Deterministic discrete-event fabric. All ranks run as coroutines on the
/// calling thread; virtual time advances only when every runnable coroutine
/// is blocked.
///
/// Link model: every ordered intra-node pair owns a private link; each node
/// owns one NIC shared by its inbound and outbound traffic. A message occupies
/// its link for bytes / bandwidth (FIFO, store-and-forward) and arrives
/// latency seconds after leaving it. Inter-node traffic queues separately on
/// the sender's NIC and on the receiver's NIC and leaves once both have
/// served it. Sends ready at the same instant are
/// served in (source, destination, tag) order. A send completes when its
/// payload has been delivered into the matching receive.
class SimFabric final : public Fabric {
 public:
  SimFabric(int world_size, SimLinkConfig link, bool record_log = false);
  ~SimFabric() override;

  SimFabric(const SimFabric&) = delete;
  SimFabric& operator=(const SimFabric&) = delete;

  int world_size() const override { return world_size_; }

  RequestPtr post_send(const ChannelKey& key, std::span<const std::byte> data) override;
  RequestPtr post_recv(const ChannelKey& key, std::span<std::byte> data) override;

  bool await_ready(RequestState& req) override { return req.completed; }
  void await_suspend(RequestState& req, std::coroutine_handle<> h) override { req.waiter = h; }
  bool test(const RequestState& req) const override { return req.completed; }
  /// Advances the simulation until quiescent, then reports completion.
  bool wait_for(RequestState& req, std::chrono::duration<double> timeout) override;

  Task<void> run_all(std::vector<std::function<Task<void>()>> bodies) override;

  double now() const override { return now_; }
  ClockKind clock() const override { return ClockKind::kVirtual; }
  FabricCounters counters() const override { return counters_; }

  /// Starts the root programs and drives the event loop to quiescence.
  /// Throws DeadlockError (with describe_stall()'s text appended) if any root
  /// is still blocked when no events remain.
  void run(std::vector<std::function<Task<void>()>> roots, const std::function<std::string()>& describe_stall = {});

  /// Processes runnable coroutines and queued events until none remain.
  void advance();

  /// Destroys the frames of programs that can no longer make progress.
  void discard_stalled();

  const std::vector<SimLogEntry>& log() const noexcept { return log_; }
  const SimLinkConfig& link_config() const noexcept { return link_; }

 private:
  struct Message;
  struct Join;
  struct Detached;
  struct Channel {
    std::deque<std::shared_ptr<Message>> sends;
    std::deque<std::pair<RequestPtr, std::span<std::byte>>> recvs;
  };
  struct KeyHash {
    std::size_t operator()(const ChannelKey& k) const noexcept;
  };
  struct Event {
    double time;
    int src;
    int dst;
    int tag;
    std::uint64_t seq;
    bool arrival;
    std::shared_ptr<Message> msg;
  };
  struct EventLater {
    bool operator()(const Event& a, const Event& b) const noexcept;
  };

  void spawn(std::function<Task<void>()> body, std::shared_ptr<Join> join);
  static Detached drive(SimFabric* self, std::uint64_t id, std::function<Task<void>()> body,
                        std::shared_ptr<Join> join);
  void complete(RequestState& req);
  void transmit(const std::shared_ptr<Message>& msg);
  void match(Channel& ch);

  int world_size_;
  SimLinkConfig link_;
  bool record_log_;
  double now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_root_id_ = 0;

  std::unordered_map<ChannelKey, Channel, KeyHash> channels_;
  std::priority_queue<Event, std::vector<Event>, EventLater> events_;
  std::deque<std::coroutine_handle<>> ready_;
  std::map<std::uint64_t, std::coroutine_handle<>> live_roots_;
  std::vector<double> intra_free_;
  std::vector<double> nic_free_;
  std::vector<SimLogEntry> log_;
  FabricCounters counters_;
};

}  // namespace gtring
