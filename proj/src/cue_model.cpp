#include "capfuse/cue_model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>

#include <spdlog/spdlog.h>

#include "capfuse/errors.hpp"

namespace capfuse {
namespace {

constexpr std::array<std::string_view, 7> kTones = {
    "neutral", "excited", "concerned", "confused", "urgent", "sarcastic", "calm"};

constexpr std::array<std::string_view, 5> kGestures = {
    "nods", "shrugs", "pointing", "head-shake", "hand-raise"};

struct GestureSurface {
  std::string_view name;
  std::string_view minimal;  // "[points]"
  std::string_view noun;     // "[pointing gesture]"
};

constexpr std::array<GestureSurface, 5> kGestureSurfaces = {{
    {"nods", "nods", "nod"},
    {"shrugs", "shrugs", "shrug"},
    {"pointing", "points", "pointing"},
    {"head-shake", "shakes head", "head-shake"},
    {"hand-raise", "raises hand", "hand-raise"},
}};

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

const GestureSurface* gesture_surface(std::string_view name) {
  for (const auto& g : kGestureSurfaces) {
    if (g.name == name) return &g;
  }
  return nullptr;
}

}  // namespace

std::string_view to_string(Stability s) { return s == Stability::partial ? "partial" : "final"; }
std::string_view to_string(CueKind k) { return k == CueKind::tone ? "tone" : "gesture"; }
std::string_view to_string(SegmentState s) { return s == SegmentState::open ? "open" : "final"; }

std::string_view to_string(Verbosity v) {
  switch (v) {
    case Verbosity::off: return "off";
    case Verbosity::minimal: return "minimal";
    case Verbosity::verbose: return "verbose";
  }
  return "minimal";
}

std::optional<Stability> stability_from_string(std::string_view s) {
  if (s == "partial") return Stability::partial;
  if (s == "final") return Stability::final;
  return std::nullopt;
}

std::optional<CueKind> cue_kind_from_string(std::string_view s) {
  if (s == "tone") return CueKind::tone;
  if (s == "gesture") return CueKind::gesture;
  return std::nullopt;
}

std::optional<Verbosity> verbosity_from_string(std::string_view s) {
  const auto lower = lowercase(s);
  if (lower == "off") return Verbosity::off;
  if (lower == "minimal") return Verbosity::minimal;
  if (lower == "verbose") return Verbosity::verbose;
  return std::nullopt;
}

std::string make_segment_id(std::uint64_t counter) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "seg-%06llu", static_cast<unsigned long long>(counter));
  return buf;
}

std::span<const std::string_view> tone_vocabulary() { return kTones; }
std::span<const std::string_view> gesture_vocabulary() { return kGestures; }

CueLabel validate_label(CueKind kind, std::string_view name) {
  const auto canonical = lowercase(name);
  const auto vocab = kind == CueKind::tone ? tone_vocabulary() : gesture_vocabulary();
  if (std::find(vocab.begin(), vocab.end(), canonical) == vocab.end()) {
    throw UnknownLabel(std::string(to_string(kind)), std::string(name));
  }
  return CueLabel(kind, canonical);
}

std::string format_tag(const CueLabel& label, Verbosity verbosity) {
  if (verbosity == Verbosity::off) return {};
  if (label.is_neutral()) {
    spdlog::debug("format_tag called with tone/neutral; suppressed");
    return {};
  }
  if (label.kind() == CueKind::tone) {
    return verbosity == Verbosity::minimal ? "[" + label.name() + "]" : "[" + label.name() + " tone]";
  }
  const auto* g = gesture_surface(label.name());
  if (g == nullptr) return {};
  if (verbosity == Verbosity::minimal) return "[" + std::string(g->minimal) + "]";
  return "[" + std::string(g->noun) + " gesture]";
}

CueLabel parse_tag(std::string_view text) {
  if (text.size() < 2 || text.front() != '[' || text.back() != ']') {
    throw NotATag(std::string(text));
  }
  const auto inner = text.substr(1, text.size() - 2);

  constexpr std::string_view tone_suffix = " tone";
  constexpr std::string_view gesture_suffix = " gesture";

  auto tone_name = inner;
  if (tone_name.ends_with(tone_suffix)) tone_name.remove_suffix(tone_suffix.size());
  // neutral has no surface form.
  if (tone_name != "neutral" && std::find(kTones.begin(), kTones.end(), tone_name) != kTones.end()) {
    return validate_label(CueKind::tone, tone_name);
  }

  for (const auto& g : kGestureSurfaces) {
    if (inner == g.minimal) return validate_label(CueKind::gesture, g.name);
    if (inner.ends_with(gesture_suffix) && inner.substr(0, inner.size() - gesture_suffix.size()) == g.noun) {
      return validate_label(CueKind::gesture, g.name);
    }
  }
  throw UnknownSurface(std::string(text));
}

std::string plain_text(const CaptionSegment& segment) {
  std::string out;
  for (const auto& token : segment.tokens) {
    if (!out.empty()) out += ' ';
    out += token.text;
  }
  return out;
}

std::string render_segment_text(const CaptionSegment& segment, const RenderOptions& options) {
  const bool tags_on = options.verbosity != Verbosity::off;
  std::vector<std::string> pieces;
  pieces.reserve(segment.tokens.size() + segment.annotations.size());

  auto push = [&pieces](std::string piece) {
    if (!piece.empty()) pieces.push_back(std::move(piece));
  };

  if (tags_on && options.show_tone) {
    for (const auto& a : segment.annotations) {
      if (a.category == CueKind::tone) push(format_tag(a, options.verbosity));
    }
  }
  for (std::size_t i = 0; i < segment.tokens.size(); ++i) {
    push(segment.tokens[i].text);
    if (!tags_on || !options.show_gestures) continue;
    for (const auto& a : segment.annotations) {
      if (a.category == CueKind::gesture && a.anchor == i) push(format_tag(a, options.verbosity));
    }
  }

  std::string out;
  for (const auto& p : pieces) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

}  // namespace capfuse
