#pragma once

// Fan-out of caption emissions to viewer connections.
//
// The hub is transport-agnostic: a transport feeds it inbound frames per
// connection, pulls encoded outbound frames with pop(), and closes the
// connection when wants_close() says so. All members are thread-safe.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "capfuse/fusion.hpp"
#include "capfuse/preferences.hpp"
#include "capfuse/protocol.hpp"

namespace capfuse {

inline constexpr std::size_t kOutboundCapacity = 256;
inline constexpr std::size_t kSnapshotFinals = 50;

struct Outbound {
  enum class Kind { control, ping, revision, final };

  Kind kind = Kind::control;
  /// Segment id for revision and final frames.
  std::string segment_id;
  /// Number of finals the client holds once this frame is written
  /// (final frames and snapshots only).
  std::optional<std::uint64_t> cursor;
  std::string frame;
};

/// Per-connection queue bounded at `capacity` frames.
///
/// A queued revision is replaced by a newer one for the same segment and
/// removed when that segment's final arrives. When the queue is full the
/// oldest revision is evicted to make room; a new revision with nothing to
/// evict is dropped, as is a ping. A final or control frame that still finds
/// no room means the client cannot keep up: push() returns false.
class OutboundQueue {
 public:
  explicit OutboundQueue(std::size_t capacity = kOutboundCapacity) : capacity_(capacity) {}

  bool push(Outbound item);
  std::optional<Outbound> pop();

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t capacity() const { return capacity_; }
  /// Revisions coalesced, evicted or discarded so far.
  std::uint64_t revisions_dropped() const { return revisions_dropped_; }
  const std::deque<Outbound>& items() const { return items_; }
  void clear() { items_.clear(); }

 private:
  bool evict_one_revision();

  std::size_t capacity_;
  std::deque<Outbound> items_;
  std::uint64_t revisions_dropped_ = 0;
};

/// Resume tokens are "<session id>:<cursor>".
std::string make_resume_token(std::string_view session_id, std::uint64_t cursor);
std::optional<std::pair<std::string, std::uint64_t>> parse_resume_token(std::string_view token);

struct ClientSession {
  std::string session_id;
  std::string resume_token;
  std::uint64_t last_acked_final = 0;
  PreferenceProfile profile;
  std::optional<std::string> profile_name;
  bool connected = false;
};

class Hub {
 public:
  using ConnectionId = std::uint64_t;
  /// Called (outside the hub lock) when a connection has new frames to send.
  using Wakeup = std::function<void(ConnectionId)>;

  /// `store` is optional; without it named profiles start from defaults and
  /// are not persisted.
  explicit Hub(std::shared_ptr<ProfileStore> store = nullptr, std::size_t queue_capacity = kOutboundCapacity,
               std::uint64_t seed = std::random_device{}());

  void set_wakeup(Wakeup wakeup);

  ConnectionId connect();
  void disconnect(ConnectionId id);

  /// Handles one client frame.
  void receive(ConnectionId id, std::string_view frame);

  /// Records the emission and queues a rendered segment frame for every
  /// established connection.
  void publish(const Emission& emission);

  /// Queues a ping on every established connection.
  void ping_all();

  std::optional<std::string> pop(ConnectionId id);
  /// The connection has been told to go away and its queue has drained.
  bool wants_close(ConnectionId id) const;
  bool has_pending(ConnectionId id) const;

  std::size_t connection_count() const;
  std::size_t finals_published() const;
  std::optional<ClientSession> session_of(ConnectionId id) const;
  std::optional<ClientSession> session(std::string_view session_id) const;
  std::uint64_t revisions_dropped(ConnectionId id) const;

 private:
  struct Connection {
    OutboundQueue queue;
    std::optional<std::string> session_id;
    bool closing = false;
  };

  Connection* find(ConnectionId id);
  const Connection* find(ConnectionId id) const;
  void send(ConnectionId id, Connection& c, Outbound item);
  void send_control(ConnectionId id, Connection& c, const ServerMessage& msg);
  void send_error(ConnectionId id, Connection& c, std::string code, std::string detail);
  void handle_hello(ConnectionId id, Connection& c, const HelloMsg& hello);
  void handle_prefs(ConnectionId id, Connection& c, const PrefsMsg& prefs);
  SnapshotMsg snapshot_for(const ClientSession& s, std::uint64_t after) const;
  std::string new_session_id();

  mutable std::mutex mutex_;
  std::shared_ptr<ProfileStore> store_;
  std::size_t queue_capacity_;
  std::mt19937_64 rng_;
  Wakeup wakeup_;
  std::vector<ConnectionId> to_wake_;

  ConnectionId next_connection_ = 1;
  std::unordered_map<ConnectionId, Connection> connections_;
  std::map<std::string, ClientSession, std::less<>> sessions_;
  std::vector<CaptionSegment> finals_;
  std::map<std::string, CaptionSegment> open_;
};

}  // namespace capfuse
