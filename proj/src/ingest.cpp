#include "capfuse/ingest.hpp"

#include <cmath>

#include <json.hpp>

#include "capfuse/errors.hpp"

namespace capfuse {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void schema(const std::string& field, const std::string& what) {
  throw DecodeError(DecodeError::Kind::schema_violation, field, "schema violation at '" + field + "': " + what);
}

const json& require(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) schema(field, "missing");
  return *it;
}

std::string get_string(const json& obj, const char* field) {
  const auto& v = require(obj, field);
  if (!v.is_string()) schema(field, "expected string");
  return v.get<std::string>();
}

std::int64_t get_int(const json& obj, const char* field) {
  const auto& v = require(obj, field);
  if (!v.is_number_integer()) schema(field, "expected integer");
  if (v.is_number_unsigned()) {
    const auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) schema(field, "integer out of range");
    return static_cast<std::int64_t>(u);
  }
  return v.get<std::int64_t>();
}

Timestamp get_time(const json& obj, const char* field) {
  const auto t = get_int(obj, field);
  if (t < 0) schema(field, "negative timestamp");
  return t;
}

double get_real(const json& obj, const char* field) {
  const auto& v = require(obj, field);
  if (!v.is_number()) schema(field, "expected number");
  const auto x = v.get<double>();
  if (!std::isfinite(x)) schema(field, "not finite");
  return x;
}

double get_unit(const json& obj, const char* field) {
  const auto x = get_real(obj, field);
  if (x < 0.0 || x > 1.0) schema(field, "outside [0,1]");
  return x;
}

double get_nonneg(const json& obj, const char* field) {
  const auto x = get_real(obj, field);
  if (x < 0.0) schema(field, "negative");
  return x;
}

void check_token_text(const std::string& text) {
  if (text.empty()) schema("text", "empty");
  if (text.find_first_of("\r\n") != std::string::npos) schema("text", "embedded newline");
  auto is_space = [](char c) { return c == ' ' || c == '\t'; };
  if (is_space(text.front()) || is_space(text.back())) schema("text", "leading or trailing whitespace");
  if (text.find("  ") != std::string::npos || text.find('\t') != std::string::npos) {
    schema("text", "irregular internal whitespace");
  }
}

TranscriptToken decode_token(const json& obj) {
  TranscriptToken tok;
  tok.source_seq = get_int(obj, "seq");
  if (tok.source_seq <= 0) schema("seq", "must be positive");
  tok.t_start = get_time(obj, "t0");
  tok.t_end = get_time(obj, "t1");
  if (tok.t_end < tok.t_start) schema("t1", "t1 before t0");
  tok.text = get_string(obj, "text");
  check_token_text(tok.text);
  tok.speaker_id = get_string(obj, "speaker");
  const auto stability = stability_from_string(get_string(obj, "stability"));
  if (!stability) schema("stability", "expected partial or final");
  tok.stability = *stability;
  tok.confidence = get_unit(obj, "conf");
  return tok;
}

CueEvent decode_cue(const json& obj, Source src) {
  CueEvent cue;
  cue.source_seq = get_int(obj, "seq");
  if (cue.source_seq <= 0) schema("seq", "must be positive");
  cue.t_start = get_time(obj, "t0");
  cue.t_end = get_time(obj, "t1");
  if (cue.t_end < cue.t_start) schema("t1", "t1 before t0");
  const auto kind = cue_kind_from_string(get_string(obj, "kind"));
  if (!kind) schema("kind", "expected tone or gesture");
  const auto expected = src == Source::gesture ? CueKind::gesture : CueKind::tone;
  if (*kind != expected) schema("kind", "kind does not match source");
  cue.kind = *kind;
  const auto label = get_string(obj, "label");
  try {
    cue.label = validate_label(cue.kind, label);
  } catch (const UnknownLabel& e) {
    throw DecodeError(DecodeError::Kind::unknown_label, "label", e.what());
  }
  cue.confidence = get_unit(obj, "conf");
  cue.source_id = std::string(to_string(src));
  return cue;
}

ProsodyFrame decode_frame(const json& obj) {
  ProsodyFrame f;
  f.t = get_time(obj, "t");
  f.rms_energy = get_unit(obj, "rms");
  f.f0_mean = get_nonneg(obj, "f0m");
  f.f0_var = get_nonneg(obj, "f0v");
  f.rate = get_nonneg(obj, "rate");
  return f;
}

}  // namespace

std::string_view to_string(Source s) {
  switch (s) {
    case Source::asr: return "asr";
    case Source::affect: return "affect";
    case Source::gesture: return "gesture";
    case Source::prosody: return "prosody";
  }
  return "asr";
}

std::optional<Source> source_from_string(std::string_view s) {
  for (auto src : kAllSources) {
    if (to_string(src) == s) return src;
  }
  return std::nullopt;
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::gap: return "gap";
    case RejectReason::late: return "late";
    case RejectReason::out_of_order: return "out_of_order";
    case RejectReason::watermark_regress: return "watermark_regress";
  }
  return "gap";
}

const char* to_string(DecodeError::Kind kind) {
  switch (kind) {
    case DecodeError::Kind::malformed_json: return "malformed_json";
    case DecodeError::Kind::unsupported_version: return "unsupported_version";
    case DecodeError::Kind::schema_violation: return "schema_violation";
    case DecodeError::Kind::unknown_label: return "unknown_label";
  }
  return "malformed_json";
}

Timestamp IngestEvent::start_time() const {
  return std::visit(
      [](const auto& p) -> Timestamp {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, WatermarkBeat> || std::is_same_v<T, ProsodyFrame>) {
          return p.t;
        } else {
          return p.t_start;
        }
      },
      payload);
}

Timestamp IngestEvent::end_time() const {
  return std::visit(
      [](const auto& p) -> Timestamp {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, WatermarkBeat> || std::is_same_v<T, ProsodyFrame>) {
          return p.t;
        } else {
          return p.t_end;
        }
      },
      payload);
}

std::int64_t IngestEvent::seq() const {
  if (const auto* t = std::get_if<TranscriptToken>(&payload)) return t->source_seq;
  if (const auto* c = std::get_if<CueEvent>(&payload)) return c->source_seq;
  return 0;
}

IngestEvent decode_event(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);

  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DecodeError(DecodeError::Kind::malformed_json, "", std::string("malformed json: ") + e.what());
  }
  if (!obj.is_object()) {
    throw DecodeError(DecodeError::Kind::malformed_json, "", "malformed json: record is not an object");
  }

  IngestEvent ev;
  ev.version = static_cast<int>(get_int(obj, "v"));
  if (ev.version != kIngestVersion) {
    throw DecodeError(DecodeError::Kind::unsupported_version, "v",
                      "unsupported version " + std::to_string(ev.version));
  }
  const auto src = source_from_string(get_string(obj, "src"));
  if (!src) schema("src", "unknown source");
  ev.source = *src;

  const auto type = get_string(obj, "type");
  if (type == "token") {
    if (ev.source != Source::asr) schema("type", "tokens only come from asr");
    ev.payload = decode_token(obj);
  } else if (type == "cue") {
    if (ev.source != Source::affect && ev.source != Source::gesture) schema("type", "cues only come from affect or gesture");
    ev.payload = decode_cue(obj, ev.source);
  } else if (type == "watermark") {
    ev.payload = WatermarkBeat{ev.source, get_time(obj, "t")};
  } else if (type == "frame") {
    if (ev.source != Source::prosody) schema("type", "frames only come from prosody");
    ev.payload = decode_frame(obj);
  } else {
    schema("type", "unknown type '" + type + "'");
  }
  return ev;
}

std::string encode_event(const IngestEvent& event) {
  ordered_json j;
  j["v"] = event.version;
  j["src"] = to_string(event.source);
  std::visit(
      [&j, &event](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TranscriptToken>) {
          j["type"] = "token";
          j["seq"] = p.source_seq;
          j["t0"] = p.t_start;
          j["t1"] = p.t_end;
          j["text"] = p.text;
          j["speaker"] = p.speaker_id;
          j["stability"] = to_string(p.stability);
          j["conf"] = p.confidence;
        } else if constexpr (std::is_same_v<T, CueEvent>) {
          j["type"] = "cue";
          j["seq"] = p.source_seq;
          j["t0"] = p.t_start;
          j["t1"] = p.t_end;
          j["kind"] = to_string(p.kind);
          j["label"] = p.label.name();
          j["conf"] = p.confidence;
        } else if constexpr (std::is_same_v<T, WatermarkBeat>) {
          j["type"] = "watermark";
          j["t"] = p.t;
        } else {
          (void)event;
          j["type"] = "frame";
          j["t"] = p.t;
          j["rms"] = p.rms_energy;
          j["f0m"] = p.f0_mean;
          j["f0v"] = p.f0_var;
          j["rate"] = p.rate;
        }
      },
      event.payload);
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

OrderVerdict check_stream_order(SourceState& state, const IngestEvent& event) {
  auto reject = [&state](RejectReason r) {
    ++state.dropped_count;
    return OrderVerdict::reject(r);
  };

  if (const auto* beat = std::get_if<WatermarkBeat>(&event.payload)) {
    if (beat->t < state.watermark) return reject(RejectReason::watermark_regress);
    state.watermark = beat->t;
    return OrderVerdict::accept();
  }

  const auto t = event.start_time();
  if (std::holds_alternative<ProsodyFrame>(event.payload)) {
    if (state.seen_event && t <= state.last_t) return reject(RejectReason::out_of_order);
    if (t < state.watermark) return reject(RejectReason::late);
    state.last_t = t;
    state.seen_event = true;
    return OrderVerdict::accept();
  }

  if (event.seq() != state.last_seq + 1) return reject(RejectReason::gap);
  if (state.seen_event && t < state.last_t) return reject(RejectReason::out_of_order);
  if (t < state.watermark) return reject(RejectReason::late);
  state.last_seq = event.seq();
  state.last_t = t;
  state.seen_event = true;
  return OrderVerdict::accept();
}

}  // namespace capfuse
