#pragma once

// Event-time fusion of the transcript and cue streams.
//
// Events are buffered per lane until the fusion watermark (minimum over the
// lane watermarks) passes them. Tokens behind the watermark are committed to
// caption segments in source order; a segment is finalized once it can no
// longer grow and the watermark has passed its end by grace_ms, at which
// point every cue that could overlap it has arrived and is attached.
//
// The final output depends only on the accepted events, never on how the
// lanes were interleaved or how the watermarks were scheduled.

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "capfuse/cue_model.hpp"
#include "capfuse/ingest.hpp"

namespace capfuse {

struct FusionConfig {
  Timestamp gap_ms = 700;
  std::size_t max_tokens = 12;
  std::size_t max_chars = 60;
  Timestamp grace_ms = 250;
  double tone_conf_min = 0.6;
  double overlap_min_frac = 0.5;
  Timestamp overlap_min_ms = 300;
  Timestamp tone_repeat_suppress_ms = 5000;
  Timestamp gesture_dedup_ms = 1000;
  /// Per-lane buffered event bound before the oldest are dropped.
  std::size_t buffer_limit = 10000;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

enum class EmissionKind { segment_open, segment_revised, segment_final };
std::string_view to_string(EmissionKind k);

struct Emission {
  EmissionKind kind = EmissionKind::segment_open;
  CaptionSegment segment;
  /// Wall-clock microseconds, stamped by the pipeline.
  std::int64_t emitted_at_us = 0;
};

enum class SegmentDecision { append, close_then_open };

/// Closure rule: close before appending when the pause is at least gap_ms,
/// the last token ends a sentence, or the segment would exceed max_tokens or
/// max_chars (plain text, tags excluded).
SegmentDecision segment_tokens(std::span<const TranscriptToken> open_tokens, const TranscriptToken& incoming,
                               const FusionConfig& config);

bool ends_sentence(const TranscriptToken& token);

/// A cue waiting to be attached, with the lane it arrived on.
struct PendingCue {
  Source lane = Source::affect;
  CueEvent cue;
};

struct ToneMemory {
  CueLabel label;
  Timestamp segment_end = 0;
};

/// Cross-segment state for tone suppression and gesture de-duplication.
struct HysteresisState {
  std::optional<ToneMemory> last_tone;
  /// Doubled midpoints of attached gestures, per label, recent ones only.
  std::map<std::string, std::deque<Timestamp>> gesture_mid2;
};

struct AttachOutcome {
  std::vector<Annotation> annotations;
  std::size_t attached = 0;
  std::size_t dropped = 0;
  std::size_t gestures_in_gap = 0;
};

/// Attaches at most one tone and any number of gestures to a closing
/// segment. Removes consumed and expired cues from `pending` and updates the
/// hysteresis state.
AttachOutcome attach_cues(const CaptionSegment& segment, std::vector<PendingCue>& pending, HysteresisState& hysteresis,
                          const FusionConfig& config);

struct FusionStats {
  std::uint64_t cues_accepted = 0;
  std::uint64_t cues_attached = 0;
  std::uint64_t cues_dropped = 0;
  std::uint64_t gestures_in_gap = 0;
  std::uint64_t partials_replaced = 0;
  std::uint64_t segments_final = 0;
  std::array<std::uint64_t, kSourceCount> overflow_dropped{};
};

class FusionEngine {
 public:
  explicit FusionEngine(FusionConfig config = {},
                        std::vector<Source> lanes = {Source::asr, Source::affect, Source::gesture});

  /// Buffers a token or cue, or records a watermark beat. Never emits.
  /// Events are expected to have passed check_stream_order for their lane.
  void ingest(Source lane, const IngestPayload& payload);
  void ingest(const IngestEvent& event) { ingest(event.source, event.payload); }

  /// Recomputes the fusion watermark, commits eligible tokens, finalizes
  /// segments that are complete and past grace, and reports open-segment
  /// changes. Idempotent when nothing changed.
  std::vector<Emission> advance();

  /// End of session: commits everything buffered and finalizes all segments.
  std::vector<Emission> finish();

  Timestamp fusion_watermark() const { return watermark_; }
  Timestamp lane_watermark(Source lane) const;
  bool has_lane(Source lane) const { return lanes_[index(lane)].active; }
  const FusionStats& stats() const { return stats_; }
  /// Cues received but not yet attached or dropped.
  std::size_t cues_pending() const;
  std::size_t buffered(Source lane) const;
  const FusionConfig& config() const { return config_; }

 private:
  struct Lane {
    bool active = false;
    Timestamp watermark = 0;
    std::deque<TranscriptToken> tokens;
    std::deque<CueEvent> cues;
  };

  struct Working {
    CaptionSegment segment;  // committed tokens only
    bool emitted = false;
    std::vector<TranscriptToken> last_view;
  };

  static std::size_t index(Source s) { return static_cast<std::size_t>(s); }

  void apply_revision(const TranscriptToken& token);
  void enforce_bound(Lane& lane, Source which);
  void commit(const TranscriptToken& token);
  bool certainly_closed(const CaptionSegment& segment) const;
  std::vector<TranscriptToken> preview_tail(std::span<const TranscriptToken> committed) const;
  void expire_pending();
  void finalize(Working& w, std::vector<Emission>& out);
  void report_view(Working& w, std::vector<TranscriptToken> view, std::vector<Emission>& out);
  std::vector<Emission> step(bool flush);
  std::uint64_t take_segment_number();

  FusionConfig config_;
  std::array<Lane, kSourceCount> lanes_{};
  Timestamp watermark_ = 0;
  std::vector<PendingCue> pending_;
  HysteresisState hysteresis_;
  std::deque<Working> closing_;
  std::optional<Working> open_;
  std::optional<Working> preview_;
  std::optional<std::uint64_t> reserved_number_;
  std::uint64_t segment_counter_ = 0;
  FusionStats stats_;
};

}  // namespace capfuse
