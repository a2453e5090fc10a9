#pragma once

// Shared caption vocabulary: tokens, cues, segments, annotations, and the
// bracketed tag grammar ("[concerned]", "[pointing gesture]").

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace capfuse {

/// Milliseconds since the session epoch.
using Timestamp = std::int64_t;

enum class Stability { partial, final };
enum class CueKind { tone, gesture };
enum class Verbosity { off, minimal, verbose };

std::string_view to_string(Stability s);
std::string_view to_string(CueKind k);
std::string_view to_string(Verbosity v);
std::optional<Stability> stability_from_string(std::string_view s);
std::optional<CueKind> cue_kind_from_string(std::string_view s);
std::optional<Verbosity> verbosity_from_string(std::string_view s);

struct TranscriptToken {
  std::int64_t source_seq = 0;
  std::string text;
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  std::string speaker_id;
  Stability stability = Stability::final;
  double confidence = 1.0;

  bool operator==(const TranscriptToken&) const = default;
};

/// A member of the closed tone or gesture vocabulary. Only obtainable
/// through validate_label, so a CueLabel is always canonical.
class CueLabel {
 public:
  CueLabel() = default;

  CueKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  bool is_neutral() const { return kind_ == CueKind::tone && name_ == "neutral"; }

  bool operator==(const CueLabel&) const = default;

 private:
  friend CueLabel validate_label(CueKind kind, std::string_view name);
  CueLabel(CueKind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

  CueKind kind_ = CueKind::tone;
  std::string name_ = "neutral";
};

struct CueEvent {
  std::int64_t source_seq = 0;
  CueKind kind = CueKind::tone;
  CueLabel label;
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  double confidence = 0.0;
  std::string source_id;

  bool operator==(const CueEvent&) const = default;
};

struct Annotation {
  CueKind category = CueKind::tone;
  CueLabel label;
  std::size_t anchor = 0;
  double confidence = 0.0;
  std::vector<std::int64_t> origin;

  bool operator==(const Annotation&) const = default;
};

enum class SegmentState { open, final };
std::string_view to_string(SegmentState s);

struct CaptionSegment {
  std::string segment_id;
  std::vector<TranscriptToken> tokens;
  std::vector<Annotation> annotations;
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  SegmentState state = SegmentState::open;
  std::uint32_t revision = 0;

  bool operator==(const CaptionSegment&) const = default;
};

/// "seg-" followed by the zero-padded 6-digit counter.
std::string make_segment_id(std::uint64_t counter);

/// The closed vocabularies, in declaration order.
std::span<const std::string_view> tone_vocabulary();
std::span<const std::string_view> gesture_vocabulary();

/// Canonicalizes `name` (case-insensitive) into a vocabulary member.
/// Throws UnknownLabel when the name is outside the vocabulary for `kind`.
CueLabel validate_label(CueKind kind, std::string_view name);

/// Renders one tag. Neutral tone and Verbosity::off produce "".
std::string format_tag(const CueLabel& label, Verbosity verbosity);
inline std::string format_tag(const Annotation& a, Verbosity verbosity) {
  return format_tag(a.label, verbosity);
}

/// Inverse of format_tag for both the minimal and the verbose surface forms.
/// Throws NotATag or UnknownSurface.
CueLabel parse_tag(std::string_view text);

struct RenderOptions {
  Verbosity verbosity = Verbosity::minimal;
  bool show_tone = true;
  bool show_gestures = true;

  static RenderOptions verbose_all() { return {Verbosity::verbose, true, true}; }
  static RenderOptions plain() { return {Verbosity::off, true, true}; }
};

/// Joins token texts with single spaces, placing the tone tag before token 0
/// and every gesture tag directly after its anchor token.
std::string render_segment_text(const CaptionSegment& segment, const RenderOptions& options);

/// Space-joined token texts without any tags.
std::string plain_text(const CaptionSegment& segment);

/// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view s);

}  // namespace capfuse
