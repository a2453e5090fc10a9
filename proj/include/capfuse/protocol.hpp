#pragma once

// Client protocol frames: one JSON object per text frame.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "capfuse/cue_model.hpp"
#include "capfuse/preferences.hpp"

namespace capfuse {

inline constexpr int kProtocolVersion = 1;

struct HelloMsg {
  int v = kProtocolVersion;
  std::optional<std::string> resume;
  /// Patch applied to the starting profile; validated by the hub.
  std::optional<nlohmann::json> prefs;
  /// Named stored profile to start from and persist changes to.
  std::optional<std::string> profile;

  bool operator==(const HelloMsg&) const = default;
};

struct PrefsMsg {
  nlohmann::json patch = nlohmann::json::object();
  bool operator==(const PrefsMsg&) const = default;
};

struct PongMsg {
  bool operator==(const PongMsg&) const = default;
};

using ClientMessage = std::variant<HelloMsg, PrefsMsg, PongMsg>;

struct AnnotationMsg {
  CueKind cat = CueKind::tone;
  std::string label;
  std::int64_t anchor = 0;
  double conf = 0.0;

  bool operator==(const AnnotationMsg&) const = default;
};

struct SegmentMsg {
  std::string id;
  SegmentState state = SegmentState::open;
  std::int64_t rev = 0;
  Timestamp t0 = 0;
  Timestamp t1 = 0;
  std::string plain;
  std::string rendered;
  std::vector<AnnotationMsg> annotations;
  /// Token texts; annotation anchors index into this list.
  std::vector<std::string> tokens;

  bool operator==(const SegmentMsg&) const = default;
};

struct HelloAckMsg {
  std::string session;
  PreferenceProfile prefs;
  bool resumed = false;
  /// Set to "invalid_resume_token" when a resume was refused.
  std::optional<std::string> warning;

  bool operator==(const HelloAckMsg&) const = default;
};

struct SnapshotMsg {
  std::vector<SegmentMsg> segments;
  std::optional<SegmentMsg> open;
  std::string cursor;

  bool operator==(const SnapshotMsg&) const = default;
};

struct PrefsAckMsg {
  PreferenceProfile prefs;
  bool operator==(const PrefsAckMsg&) const = default;
};

struct ErrorMsg {
  std::string code;
  std::string detail;
  bool operator==(const ErrorMsg&) const = default;
};

struct PingMsg {
  bool operator==(const PingMsg&) const = default;
};

using ServerMessage = std::variant<HelloAckMsg, SnapshotMsg, SegmentMsg, PrefsAckMsg, ErrorMsg, PingMsg>;

/// Throws ProtocolError for anything that is not a well-formed message.
ClientMessage decode_client(std::string_view frame);
std::string encode_client(const ClientMessage& msg);

ServerMessage decode_server(std::string_view frame);
std::string encode_server(const ServerMessage& msg);

nlohmann::ordered_json to_json(const SegmentMsg& msg);
SegmentMsg segment_msg_from_json(const nlohmann::json& j);

/// Segment frame rendered for one viewer. Structured annotations are always
/// complete; only `rendered` honours the profile.
SegmentMsg make_segment_msg(const CaptionSegment& segment, const PreferenceProfile& profile);

}  // namespace capfuse
