#include "capfuse/protocol.hpp"

#include "capfuse/errors.hpp"

namespace capfuse {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& what) { throw ProtocolError(what); }

json parse_object(std::string_view frame) {
  json j = json::parse(frame.begin(), frame.end(), nullptr, false);
  if (j.is_discarded()) bad("frame is not valid JSON");
  if (!j.is_object()) bad("frame is not a JSON object");
  return j;
}

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) bad(std::string("missing field '") + name + "'");
  return *it;
}

std::string string_field(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) bad(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

std::int64_t int_field(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_number_integer()) bad(std::string("field '") + name + "' must be an integer");
  return v.get<std::int64_t>();
}

bool bool_field(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_boolean()) bad(std::string("field '") + name + "' must be a boolean");
  return v.get<bool>();
}

PreferenceProfile profile_field(const json& j, const char* name) {
  try {
    return profile_from_json(field(j, name));
  } catch (const InvalidPreference& e) {
    bad(std::string("field '") + name + "': " + e.what());
  }
}

ojson annotation_json(const AnnotationMsg& a) {
  ojson j;
  j["cat"] = to_string(a.cat);
  j["label"] = a.label;
  j["anchor"] = a.anchor;
  j["conf"] = a.conf;
  return j;
}

AnnotationMsg annotation_from_json(const json& j) {
  if (!j.is_object()) bad("annotation must be an object");
  AnnotationMsg a;
  auto cat = cue_kind_from_string(string_field(j, "cat"));
  if (!cat) bad("annotation 'cat' must be tone or gesture");
  a.cat = *cat;
  a.label = string_field(j, "label");
  a.anchor = int_field(j, "anchor");
  if (a.anchor < 0) bad("annotation 'anchor' must be non-negative");
  const auto& conf = field(j, "conf");
  if (!conf.is_number()) bad("annotation 'conf' must be a number");
  a.conf = conf.get<double>();
  return a;
}

}  // namespace

ClientMessage decode_client(std::string_view frame) {
  const json j = parse_object(frame);
  const auto type = string_field(j, "type");
  if (type == "hello") {
    HelloMsg m;
    const auto v = int_field(j, "v");
    if (v < INT32_MIN || v > INT32_MAX) bad("field 'v' out of range");
    m.v = static_cast<int>(v);
    if (auto it = j.find("resume"); it != j.end() && !it->is_null()) {
      if (!it->is_string()) bad("field 'resume' must be a string");
      m.resume = it->get<std::string>();
    }
    if (auto it = j.find("prefs"); it != j.end() && !it->is_null()) {
      if (!it->is_object()) bad("field 'prefs' must be an object");
      m.prefs = *it;
    }
    if (auto it = j.find("profile"); it != j.end() && !it->is_null()) {
      if (!it->is_string()) bad("field 'profile' must be a string");
      m.profile = it->get<std::string>();
    }
    return m;
  }
  if (type == "prefs") {
    const auto& patch = field(j, "patch");
    if (!patch.is_object()) bad("field 'patch' must be an object");
    return PrefsMsg{patch};
  }
  if (type == "pong") return PongMsg{};
  bad("unknown client message type '" + type + "'");
}

std::string encode_client(const ClientMessage& msg) {
  ojson j;
  std::visit(
      [&j](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, HelloMsg>) {
          j["type"] = "hello";
          j["v"] = m.v;
          if (m.resume) j["resume"] = *m.resume;
          if (m.prefs) j["prefs"] = ojson::parse(m.prefs->dump());
          if (m.profile) j["profile"] = *m.profile;
        } else if constexpr (std::is_same_v<T, PrefsMsg>) {
          j["type"] = "prefs";
          j["patch"] = ojson::parse(m.patch.dump());
        } else {
          j["type"] = "pong";
        }
      },
      msg);
  return j.dump();
}

ojson to_json(const SegmentMsg& m) {
  ojson j;
  j["type"] = "segment";
  j["id"] = m.id;
  j["state"] = to_string(m.state);
  j["rev"] = m.rev;
  j["t0"] = m.t0;
  j["t1"] = m.t1;
  j["plain"] = m.plain;
  j["rendered"] = m.rendered;
  j["annotations"] = ojson::array();
  for (const auto& a : m.annotations) j["annotations"].push_back(annotation_json(a));
  j["tokens"] = m.tokens;
  return j;
}

SegmentMsg segment_msg_from_json(const json& j) {
  if (!j.is_object()) bad("segment must be an object");
  if (string_field(j, "type") != "segment") bad("expected a segment message");
  SegmentMsg m;
  m.id = string_field(j, "id");
  const auto state = string_field(j, "state");
  if (state == "open") {
    m.state = SegmentState::open;
  } else if (state == "final") {
    m.state = SegmentState::final;
  } else {
    bad("segment 'state' must be open or final");
  }
  m.rev = int_field(j, "rev");
  m.t0 = int_field(j, "t0");
  m.t1 = int_field(j, "t1");
  m.plain = string_field(j, "plain");
  m.rendered = string_field(j, "rendered");
  const auto& anns = field(j, "annotations");
  if (!anns.is_array()) bad("segment 'annotations' must be an array");
  for (const auto& a : anns) m.annotations.push_back(annotation_from_json(a));
  const auto& tokens = field(j, "tokens");
  if (!tokens.is_array()) bad("segment 'tokens' must be an array");
  for (const auto& t : tokens) {
    if (!t.is_string()) bad("segment 'tokens' must hold strings");
    m.tokens.push_back(t.get<std::string>());
  }
  return m;
}

ServerMessage decode_server(std::string_view frame) {
  const json j = parse_object(frame);
  const auto type = string_field(j, "type");
  if (type == "hello_ack") {
    HelloAckMsg m;
    m.session = string_field(j, "session");
    m.prefs = profile_field(j, "prefs");
    m.resumed = bool_field(j, "resumed");
    if (j.contains("warning")) m.warning = string_field(j, "warning");
    return m;
  }
  if (type == "snapshot") {
    SnapshotMsg m;
    const auto& segs = field(j, "segments");
    if (!segs.is_array()) bad("snapshot 'segments' must be an array");
    for (const auto& s : segs) m.segments.push_back(segment_msg_from_json(s));
    const auto& open = field(j, "open");
    if (!open.is_null()) m.open = segment_msg_from_json(open);
    m.cursor = string_field(j, "cursor");
    return m;
  }
  if (type == "segment") return segment_msg_from_json(j);
  if (type == "prefs_ack") return PrefsAckMsg{profile_field(j, "prefs")};
  if (type == "error") return ErrorMsg{string_field(j, "code"), string_field(j, "detail")};
  if (type == "ping") return PingMsg{};
  bad("unknown server message type '" + type + "'");
}

std::string encode_server(const ServerMessage& msg) {
  ojson j;
  std::visit(
      [&j](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, HelloAckMsg>) {
          j["type"] = "hello_ack";
          j["session"] = m.session;
          j["prefs"] = to_json(m.prefs);
          j["resumed"] = m.resumed;
          if (m.warning) j["warning"] = *m.warning;
        } else if constexpr (std::is_same_v<T, SnapshotMsg>) {
          j["type"] = "snapshot";
          j["segments"] = ojson::array();
          for (const auto& s : m.segments) j["segments"].push_back(to_json(s));
          j["open"] = m.open ? to_json(*m.open) : ojson(nullptr);
          j["cursor"] = m.cursor;
        } else if constexpr (std::is_same_v<T, SegmentMsg>) {
          j = to_json(m);
        } else if constexpr (std::is_same_v<T, PrefsAckMsg>) {
          j["type"] = "prefs_ack";
          j["prefs"] = to_json(m.prefs);
        } else if constexpr (std::is_same_v<T, ErrorMsg>) {
          j["type"] = "error";
          j["code"] = m.code;
          j["detail"] = m.detail;
        } else {
          j["type"] = "ping";
        }
      },
      msg);
  return j.dump();
}

SegmentMsg make_segment_msg(const CaptionSegment& segment, const PreferenceProfile& profile) {
  SegmentMsg m;
  m.id = segment.segment_id;
  m.state = segment.state;
  m.rev = segment.revision;
  m.t0 = segment.t_start;
  m.t1 = segment.t_end;
  m.plain = plain_text(segment);
  m.rendered = render_segment_text(segment, profile);
  for (const auto& a : segment.annotations) {
    m.annotations.push_back(
        AnnotationMsg{a.category, std::string(a.label.name()), static_cast<std::int64_t>(a.anchor), a.confidence});
  }
  for (const auto& t : segment.tokens) m.tokens.push_back(t.text);
  return m;
}

}  // namespace capfuse
