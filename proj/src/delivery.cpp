#include "capfuse/delivery.hpp"

#include <algorithm>
#include <charconv>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "capfuse/errors.hpp"

namespace capfuse {

bool OutboundQueue::evict_one_revision() {
  auto it = std::find_if(items_.begin(), items_.end(), [](const Outbound& o) { return o.kind == Outbound::Kind::revision; });
  if (it == items_.end()) return false;
  items_.erase(it);
  ++revisions_dropped_;
  return true;
}

bool OutboundQueue::push(Outbound item) {
  if (item.kind == Outbound::Kind::revision) {
    for (auto& queued : items_) {
      if (queued.kind == Outbound::Kind::revision && queued.segment_id == item.segment_id) {
        queued = std::move(item);
        ++revisions_dropped_;
        return true;
      }
    }
  } else if (item.kind == Outbound::Kind::final) {
    const auto before = items_.size();
    std::erase_if(items_, [&item](const Outbound& o) {
      return o.kind == Outbound::Kind::revision && o.segment_id == item.segment_id;
    });
    revisions_dropped_ += before - items_.size();
  }

  if (items_.size() < capacity_) {
    items_.push_back(std::move(item));
    return true;
  }
  switch (item.kind) {
    case Outbound::Kind::ping:
      return true;
    case Outbound::Kind::revision:
      if (evict_one_revision()) {
        items_.push_back(std::move(item));
      } else {
        ++revisions_dropped_;
      }
      return true;
    case Outbound::Kind::final:
    case Outbound::Kind::control:
      if (!evict_one_revision()) return false;
      items_.push_back(std::move(item));
      return true;
  }
  return false;
}

std::optional<Outbound> OutboundQueue::pop() {
  if (items_.empty()) return std::nullopt;
  auto item = std::move(items_.front());
  items_.pop_front();
  return item;
}

std::string make_resume_token(std::string_view session_id, std::uint64_t cursor) {
  return fmt::format("{}:{}", session_id, cursor);
}

std::optional<std::pair<std::string, std::uint64_t>> parse_resume_token(std::string_view token) {
  const auto colon = token.find(':');
  if (colon != 16) return std::nullopt;
  const auto id = token.substr(0, colon);
  if (!std::all_of(id.begin(), id.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); })) {
    return std::nullopt;
  }
  const auto digits = token.substr(colon + 1);
  std::uint64_t cursor = 0;
  const auto* end = digits.data() + digits.size();
  auto [ptr, ec] = std::from_chars(digits.data(), end, cursor);
  if (digits.empty() || ec != std::errc{} || ptr != end) return std::nullopt;
  return std::make_pair(std::string(id), cursor);
}

Hub::Hub(std::shared_ptr<ProfileStore> store, std::size_t queue_capacity, std::uint64_t seed)
    : store_(std::move(store)), queue_capacity_(queue_capacity), rng_(seed) {}

void Hub::set_wakeup(Wakeup wakeup) {
  std::lock_guard lock(mutex_);
  wakeup_ = std::move(wakeup);
}

Hub::Connection* Hub::find(ConnectionId id) {
  auto it = connections_.find(id);
  return it == connections_.end() ? nullptr : &it->second;
}

const Hub::Connection* Hub::find(ConnectionId id) const {
  auto it = connections_.find(id);
  return it == connections_.end() ? nullptr : &it->second;
}

namespace {

// Runs `body` under the hub lock, then wakes the connections it queued
// frames for once the lock is released.
template <class Body>
void locked_then_wake(std::mutex& m, std::vector<std::uint64_t>& pending, const Hub::Wakeup& wakeup, Body&& body) {
  std::vector<std::uint64_t> wake;
  Hub::Wakeup w;
  {
    std::lock_guard lock(m);
    body();
    wake.swap(pending);
    w = wakeup;
  }
  if (!w) return;
  std::sort(wake.begin(), wake.end());
  wake.erase(std::unique(wake.begin(), wake.end()), wake.end());
  for (auto id : wake) w(id);
}

}  // namespace

Hub::ConnectionId Hub::connect() {
  std::lock_guard lock(mutex_);
  const auto id = next_connection_++;
  connections_.emplace(id, Connection{OutboundQueue(queue_capacity_), std::nullopt, false});
  return id;
}

void Hub::disconnect(ConnectionId id) {
  std::lock_guard lock(mutex_);
  auto it = connections_.find(id);
  if (it == connections_.end()) return;
  if (it->second.session_id) {
    if (auto s = sessions_.find(*it->second.session_id); s != sessions_.end()) s->second.connected = false;
  }
  connections_.erase(it);
}

void Hub::send(ConnectionId id, Connection& c, Outbound item) {
  if (c.closing) return;
  if (!c.queue.push(std::move(item))) {
    spdlog::warn("connection {} cannot keep up with finals; disconnecting", id);
    c.queue.clear();
    c.queue.push(Outbound{Outbound::Kind::control, {}, std::nullopt,
                          encode_server(ErrorMsg{"too_slow", "outbound queue full of undelivered finals"})});
    c.closing = true;
    if (c.session_id) {
      if (auto s = sessions_.find(*c.session_id); s != sessions_.end()) s->second.connected = false;
      c.session_id.reset();
    }
  }
  to_wake_.push_back(id);
}

void Hub::send_control(ConnectionId id, Connection& c, const ServerMessage& msg) {
  send(id, c, Outbound{Outbound::Kind::control, {}, std::nullopt, encode_server(msg)});
}

void Hub::send_error(ConnectionId id, Connection& c, std::string code, std::string detail) {
  send_control(id, c, ErrorMsg{std::move(code), std::move(detail)});
}

std::string Hub::new_session_id() {
  for (;;) {
    auto id = fmt::format("{:016x}", rng_());
    if (!sessions_.contains(id)) return id;
  }
}

SnapshotMsg Hub::snapshot_for(const ClientSession& s, std::uint64_t after) const {
  SnapshotMsg snap;
  for (auto i = static_cast<std::size_t>(after); i < finals_.size(); ++i) {
    snap.segments.push_back(make_segment_msg(finals_[i], s.profile));
  }
  if (!open_.empty()) snap.open = make_segment_msg(open_.rbegin()->second, s.profile);
  snap.cursor = make_resume_token(s.session_id, finals_.size());
  return snap;
}

void Hub::handle_hello(ConnectionId id, Connection& c, const HelloMsg& hello) {
  if (c.session_id) {
    send_error(id, c, "already_established", "hello already received on this connection");
    return;
  }
  if (hello.v != kProtocolVersion) {
    send_error(id, c, "bad_version", fmt::format("unsupported protocol version {}; expected {}", hello.v, kProtocolVersion));
    c.closing = true;
    return;
  }

  ClientSession* session = nullptr;
  bool resumed = false;
  std::optional<std::string> warning;
  if (hello.resume) {
    const auto parsed = parse_resume_token(*hello.resume);
    auto it = parsed ? sessions_.find(parsed->first) : sessions_.end();
    if (it != sessions_.end() && parsed->second <= finals_.size()) {
      session = &it->second;
      resumed = true;
      for (auto& [other_id, other] : connections_) {
        if (other_id != id && other.session_id == session->session_id) {
          other.session_id.reset();
          other.closing = true;
          to_wake_.push_back(other_id);
        }
      }
    } else {
      warning = "invalid_resume_token";
    }
  }

  std::optional<std::string> name;
  if (hello.profile) {
    if (valid_profile_name(*hello.profile)) {
      name = *hello.profile;
    } else {
      send_error(id, c, "invalid_preference", "profile");
    }
  }

  if (!session) {
    ClientSession fresh;
    fresh.session_id = new_session_id();
    if (name && store_) fresh.profile = store_->load(*name).profile;
    session = &sessions_.emplace(fresh.session_id, std::move(fresh)).first->second;
  }
  if (name) session->profile_name = name;

  if (hello.prefs) {
    try {
      session->profile = apply_patch(session->profile, validate_patch(*hello.prefs));
      if (session->profile_name && store_) store_->persist(*session->profile_name, session->profile);
    } catch (const InvalidPreference& e) {
      send_error(id, c, "invalid_preference", e.field());
    } catch (const StorageFailure& e) {
      spdlog::warn("profile not persisted: {}", e.what());
    }
  }

  session->connected = true;
  c.session_id = session->session_id;

  send_control(id, c, HelloAckMsg{session->session_id, session->profile, resumed, warning});
  const std::uint64_t after =
      resumed ? std::min<std::uint64_t>(session->last_acked_final, finals_.size())
              : finals_.size() - std::min(finals_.size(), kSnapshotFinals);
  auto snap = snapshot_for(*session, after);
  session->resume_token = snap.cursor;
  send(id, c, Outbound{Outbound::Kind::control, {}, finals_.size(), encode_server(snap)});
}

void Hub::handle_prefs(ConnectionId id, Connection& c, const PrefsMsg& prefs) {
  if (!c.session_id) {
    send_error(id, c, "no_session", "send hello first");
    return;
  }
  auto& session = sessions_.at(*c.session_id);
  try {
    session.profile = apply_patch(session.profile, validate_patch(prefs.patch));
  } catch (const InvalidPreference& e) {
    send_error(id, c, "invalid_preference", e.field());
    return;
  }
  if (session.profile_name && store_) {
    try {
      store_->persist(*session.profile_name, session.profile);
    } catch (const StorageFailure& e) {
      spdlog::warn("profile not persisted: {}", e.what());
    }
  }
  send_control(id, c, PrefsAckMsg{session.profile});
}

void Hub::receive(ConnectionId id, std::string_view frame) {
  locked_then_wake(mutex_, to_wake_, wakeup_, [&] {
    auto* c = find(id);
    if (!c || c->closing) return;
    ClientMessage msg;
    try {
      msg = decode_client(frame);
    } catch (const ProtocolError& e) {
      send_error(id, *c, "bad_message", e.what());
      return;
    }
    if (const auto* hello = std::get_if<HelloMsg>(&msg)) {
      handle_hello(id, *c, *hello);
    } else if (const auto* prefs = std::get_if<PrefsMsg>(&msg)) {
      handle_prefs(id, *c, *prefs);
    }
  });
}

void Hub::publish(const Emission& emission) {
  locked_then_wake(mutex_, to_wake_, wakeup_, [&] {
    const auto& seg = emission.segment;
    const bool final = emission.kind == EmissionKind::segment_final;
    if (final) {
      finals_.push_back(seg);
      open_.erase(seg.segment_id);
    } else {
      open_[seg.segment_id] = seg;
    }
    for (auto& [id, c] : connections_) {
      if (!c.session_id || c.closing) continue;
      const auto& session = sessions_.at(*c.session_id);
      Outbound item;
      item.kind = final ? Outbound::Kind::final : Outbound::Kind::revision;
      item.segment_id = seg.segment_id;
      if (final) item.cursor = finals_.size();
      item.frame = encode_server(make_segment_msg(seg, session.profile));
      send(id, c, std::move(item));
    }
  });
}

void Hub::ping_all() {
  locked_then_wake(mutex_, to_wake_, wakeup_, [&] {
    for (auto& [id, c] : connections_) {
      if (c.session_id && !c.closing) send(id, c, Outbound{Outbound::Kind::ping, {}, std::nullopt, encode_server(PingMsg{})});
    }
  });
}

std::optional<std::string> Hub::pop(ConnectionId id) {
  std::lock_guard lock(mutex_);
  auto* c = find(id);
  if (!c) return std::nullopt;
  auto item = c->queue.pop();
  if (!item) return std::nullopt;
  if (item->cursor && c->session_id) {
    auto& s = sessions_.at(*c->session_id);
    s.last_acked_final = std::max(s.last_acked_final, *item->cursor);
  }
  return std::move(item->frame);
}

bool Hub::wants_close(ConnectionId id) const {
  std::lock_guard lock(mutex_);
  const auto* c = find(id);
  return !c || (c->closing && c->queue.empty());
}

bool Hub::has_pending(ConnectionId id) const {
  std::lock_guard lock(mutex_);
  const auto* c = find(id);
  return c && !c->queue.empty();
}

std::size_t Hub::connection_count() const {
  std::lock_guard lock(mutex_);
  return connections_.size();
}

std::size_t Hub::finals_published() const {
  std::lock_guard lock(mutex_);
  return finals_.size();
}

std::optional<ClientSession> Hub::session_of(ConnectionId id) const {
  std::lock_guard lock(mutex_);
  const auto* c = find(id);
  if (!c || !c->session_id) return std::nullopt;
  return sessions_.at(*c->session_id);
}

std::optional<ClientSession> Hub::session(std::string_view session_id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Hub::revisions_dropped(ConnectionId id) const {
  std::lock_guard lock(mutex_);
  const auto* c = find(id);
  return c ? c->queue.revisions_dropped() : 0;
}

}  // namespace capfuse
