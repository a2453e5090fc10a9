#pragma once

// Ingest wire format (NDJSON, one object per line) and per-source ordering.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "capfuse/cue_model.hpp"

namespace capfuse {

/// Logical event sources. `prosody` carries raw prosody frames for the
/// built-in tone detector; its derived tone cues enter fusion on that lane.
enum class Source : std::uint8_t { asr = 0, affect = 1, gesture = 2, prosody = 3 };

inline constexpr std::size_t kSourceCount = 4;
inline constexpr std::array<Source, kSourceCount> kAllSources = {Source::asr, Source::affect, Source::gesture,
                                                                 Source::prosody};

std::string_view to_string(Source s);
std::optional<Source> source_from_string(std::string_view s);
/// Merge priority used when event start times tie: asr < affect < gesture < prosody.
inline int source_priority(Source s) { return static_cast<int>(s); }

struct WatermarkBeat {
  Source source = Source::asr;
  Timestamp t = 0;

  bool operator==(const WatermarkBeat&) const = default;
};

struct ProsodyFrame {
  Timestamp t = 0;
  double rms_energy = 0.0;
  double f0_mean = 0.0;
  double f0_var = 0.0;
  double rate = 0.0;

  bool operator==(const ProsodyFrame&) const = default;
};

using IngestPayload = std::variant<TranscriptToken, CueEvent, WatermarkBeat, ProsodyFrame>;

struct IngestEvent {
  int version = 1;
  Source source = Source::asr;
  IngestPayload payload;

  bool operator==(const IngestEvent&) const = default;

  bool is_watermark() const { return std::holds_alternative<WatermarkBeat>(payload); }
  /// Start time of the payload (watermark time for beats, frame time for frames).
  Timestamp start_time() const;
  /// End time of the payload; equals start_time() for beats and frames.
  Timestamp end_time() const;
  /// Source sequence number, or 0 for payloads without one.
  std::int64_t seq() const;
};

inline constexpr int kIngestVersion = 1;

/// Parses one NDJSON record. Throws DecodeError.
IngestEvent decode_event(std::string_view line);

/// Serializes an event in the canonical key order (no trailing newline).
std::string encode_event(const IngestEvent& event);

struct SourceState {
  std::int64_t last_seq = 0;
  Timestamp last_t = 0;
  std::int64_t dropped_count = 0;
  Timestamp watermark = 0;
  bool seen_event = false;
};

enum class RejectReason { gap, late, out_of_order, watermark_regress };
std::string_view to_string(RejectReason r);

struct OrderVerdict {
  bool accepted = true;
  RejectReason reason = RejectReason::gap;

  static OrderVerdict accept() { return {}; }
  static OrderVerdict reject(RejectReason r) { return {false, r}; }
};

/// Accepts iff seq == last_seq + 1, start >= previous start, and start >= the
/// source's own watermark. Watermark beats must not regress. Updates `state`
/// on accept; increments dropped_count on reject.
OrderVerdict check_stream_order(SourceState& state, const IngestEvent& event);

}  // namespace capfuse
