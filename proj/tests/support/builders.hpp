#pragma once

// Small constructors for test fixtures.

#include <string>
#include <string_view>
#include <vector>

#include "capfuse/cue_model.hpp"
#include "capfuse/ingest.hpp"

namespace build {

inline capfuse::TranscriptToken tok(std::string text, capfuse::Timestamp t0, capfuse::Timestamp t1,
                                    std::int64_t seq = 1, capfuse::Stability st = capfuse::Stability::final) {
  capfuse::TranscriptToken t;
  t.source_seq = seq;
  t.text = std::move(text);
  t.t_start = t0;
  t.t_end = t1;
  t.speaker_id = "S1";
  t.stability = st;
  t.confidence = 0.9;
  return t;
}

inline capfuse::CueEvent cue(capfuse::CueKind kind, std::string_view label, capfuse::Timestamp t0,
                             capfuse::Timestamp t1, double conf, std::int64_t seq = 1) {
  capfuse::CueEvent c;
  c.source_seq = seq;
  c.kind = kind;
  c.label = capfuse::validate_label(kind, label);
  c.t_start = t0;
  c.t_end = t1;
  c.confidence = conf;
  c.source_id = kind == capfuse::CueKind::tone ? "affect" : "gesture";
  return c;
}

inline capfuse::CueEvent tone(std::string_view label, capfuse::Timestamp t0, capfuse::Timestamp t1, double conf,
                              std::int64_t seq = 1) {
  return cue(capfuse::CueKind::tone, label, t0, t1, conf, seq);
}

inline capfuse::CueEvent gesture(std::string_view label, capfuse::Timestamp t0, capfuse::Timestamp t1,
                                 double conf = 0.9, std::int64_t seq = 1) {
  return cue(capfuse::CueKind::gesture, label, t0, t1, conf, seq);
}

inline capfuse::Annotation ann(capfuse::CueKind kind, std::string_view label, std::size_t anchor = 0,
                               double conf = 0.9) {
  return capfuse::Annotation{kind, capfuse::validate_label(kind, label), anchor, conf, {}};
}

/// Tokens laid out back to back, 300 ms each, starting at `t0`.
inline capfuse::CaptionSegment segment(const std::vector<std::string>& words,
                                       std::vector<capfuse::Annotation> annotations = {},
                                       capfuse::Timestamp t0 = 0) {
  capfuse::CaptionSegment s;
  s.segment_id = capfuse::make_segment_id(1);
  capfuse::Timestamp t = t0;
  std::int64_t seq = 1;
  for (const auto& w : words) {
    s.tokens.push_back(tok(w, t, t + 300, seq++));
    t += 300;
  }
  s.t_start = t0;
  s.t_end = t;
  s.annotations = std::move(annotations);
  return s;
}

inline capfuse::IngestEvent ev(capfuse::TranscriptToken t) {
  return {capfuse::kIngestVersion, capfuse::Source::asr, std::move(t)};
}

inline capfuse::IngestEvent ev(capfuse::Source src, capfuse::CueEvent c) {
  c.source_id = std::string(capfuse::to_string(src));
  return {capfuse::kIngestVersion, src, std::move(c)};
}

inline capfuse::IngestEvent beat(capfuse::Source src, capfuse::Timestamp t) {
  return {capfuse::kIngestVersion, src, capfuse::WatermarkBeat{src, t}};
}

}  // namespace build
