#include "capfuse/fusion.hpp"

#include <algorithm>
#include <limits>
#include <tuple>

#include <spdlog/spdlog.h>

#include "capfuse/errors.hpp"

namespace capfuse {
namespace {

constexpr Timestamp kForever = std::numeric_limits<Timestamp>::max() / 4;

bool overlaps(const TranscriptToken& a, const TranscriptToken& b) {
  if (a.t_start == b.t_start && a.t_end == b.t_end) return true;
  return a.t_start < b.t_end && b.t_start < a.t_end;
}

std::size_t joined_length(std::span<const TranscriptToken> tokens) {
  std::size_t n = 0;
  for (const auto& t : tokens) n += utf8_length(t.text);
  return tokens.empty() ? 0 : n + tokens.size() - 1;
}

Timestamp overlap_ms(const CueEvent& cue, const CaptionSegment& seg) {
  return std::max<Timestamp>(0, std::min(cue.t_end, seg.t_end) - std::max(cue.t_start, seg.t_start));
}

bool tone_candidate(const CueEvent& cue, const CaptionSegment& seg, const FusionConfig& cfg) {
  if (cue.kind != CueKind::tone || cue.label.is_neutral()) return false;
  if (cue.confidence < cfg.tone_conf_min) return false;
  const Timestamp duration = cue.t_end - cue.t_start;
  if (duration < cfg.overlap_min_ms) {
    return cue.t_start >= seg.t_start && cue.t_end <= seg.t_end;
  }
  const Timestamp ov = overlap_ms(cue, seg);
  return ov >= cfg.overlap_min_ms && static_cast<double>(ov) >= cfg.overlap_min_frac * static_cast<double>(duration);
}

// Higher confidence first, then earlier start, then smaller label name.
bool tone_preferred(const PendingCue& a, const PendingCue& b) {
  if (a.cue.confidence != b.cue.confidence) return a.cue.confidence > b.cue.confidence;
  if (a.cue.t_start != b.cue.t_start) return a.cue.t_start < b.cue.t_start;
  if (a.cue.label.name() != b.cue.label.name()) return a.cue.label.name() < b.cue.label.name();
  if (a.lane != b.lane) return source_priority(a.lane) < source_priority(b.lane);
  return a.cue.source_seq < b.cue.source_seq;
}

std::size_t nearest_token(const CaptionSegment& seg, Timestamp cue_mid2) {
  std::size_t best = 0;
  Timestamp best_dist = kForever;
  for (std::size_t i = 0; i < seg.tokens.size(); ++i) {
    const Timestamp mid2 = seg.tokens[i].t_start + seg.tokens[i].t_end;
    const Timestamp dist = mid2 > cue_mid2 ? mid2 - cue_mid2 : cue_mid2 - mid2;
    if (dist < best_dist) {
      best = i;
      best_dist = dist;
    }
  }
  return best;
}

}  // namespace

void FusionConfig::validate() const {
  auto fail = [](const std::string& field) { throw ConfigError("fusion." + field + " must be positive"); };
  if (gap_ms <= 0) fail("gap_ms");
  if (max_tokens == 0) fail("max_tokens");
  if (max_chars == 0) fail("max_chars");
  if (grace_ms <= 0) fail("grace_ms");
  if (!(tone_conf_min > 0.0)) fail("tone_conf_min");
  if (!(overlap_min_frac > 0.0) || overlap_min_frac > 1.0) {
    throw ConfigError("fusion.overlap_min_frac must be in (0, 1]");
  }
  if (overlap_min_ms <= 0) fail("overlap_min_ms");
  if (tone_repeat_suppress_ms <= 0) fail("tone_repeat_suppress_ms");
  if (gesture_dedup_ms <= 0) fail("gesture_dedup_ms");
  if (buffer_limit == 0) fail("buffer_limit");
}

std::string_view to_string(EmissionKind k) {
  switch (k) {
    case EmissionKind::segment_open: return "segment_open";
    case EmissionKind::segment_revised: return "segment_revised";
    case EmissionKind::segment_final: return "segment_final";
  }
  return "segment_open";
}

bool ends_sentence(const TranscriptToken& token) {
  if (token.text.empty()) return false;
  const char c = token.text.back();
  return c == '.' || c == '?' || c == '!';
}

SegmentDecision segment_tokens(std::span<const TranscriptToken> open_tokens, const TranscriptToken& incoming,
                               const FusionConfig& config) {
  if (open_tokens.empty()) return SegmentDecision::append;
  const auto& last = open_tokens.back();
  if (incoming.t_start - last.t_end >= config.gap_ms) return SegmentDecision::close_then_open;
  if (ends_sentence(last)) return SegmentDecision::close_then_open;
  if (open_tokens.size() + 1 > config.max_tokens) return SegmentDecision::close_then_open;
  if (joined_length(open_tokens) + 1 + utf8_length(incoming.text) > config.max_chars) {
    return SegmentDecision::close_then_open;
  }
  return SegmentDecision::append;
}

AttachOutcome attach_cues(const CaptionSegment& segment, std::vector<PendingCue>& pending, HysteresisState& hysteresis,
                          const FusionConfig& config) {
  AttachOutcome out;
  std::vector<bool> consumed(pending.size(), false);

  // Tone: one winner at anchor 0, subject to same-label suppression.
  std::optional<std::size_t> winner;
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (!tone_candidate(pending[i].cue, segment, config)) continue;
    if (!winner || tone_preferred(pending[i], pending[*winner])) winner = i;
  }
  if (winner) {
    const auto& cue = pending[*winner].cue;
    consumed[*winner] = true;
    const auto& last = hysteresis.last_tone;
    const bool suppressed = last && last->label == cue.label &&
                            segment.t_start - last->segment_end < config.tone_repeat_suppress_ms;
    if (suppressed) {
      ++out.dropped;
    } else {
      out.annotations.push_back(Annotation{CueKind::tone, cue.label, 0, cue.confidence, {cue.source_seq}});
      hysteresis.last_tone = ToneMemory{cue.label, segment.t_end};
      ++out.attached;
    }
  }

  // Gestures: midpoint inside the segment span, anchored at the nearest token.
  std::vector<std::size_t> gestures;
  for (std::size_t i = 0; i < pending.size(); ++i) {
    const auto& cue = pending[i].cue;
    if (cue.kind != CueKind::gesture) continue;
    const Timestamp mid2 = cue.t_start + cue.t_end;
    if (mid2 >= 2 * segment.t_start && mid2 <= 2 * segment.t_end) gestures.push_back(i);
  }
  std::sort(gestures.begin(), gestures.end(), [&pending](std::size_t a, std::size_t b) {
    const auto& x = pending[a];
    const auto& y = pending[b];
    return std::tuple(x.cue.t_start, source_priority(x.lane), x.cue.source_seq) <
           std::tuple(y.cue.t_start, source_priority(y.lane), y.cue.source_seq);
  });

  const Timestamp window2 = 2 * config.gesture_dedup_ms;
  for (auto& [label, mids] : hysteresis.gesture_mid2) {
    // Segments only move forward, so anything this old can never match again.
    while (!mids.empty() && mids.front() + window2 < 2 * segment.t_start) mids.pop_front();
  }

  std::vector<Annotation> gesture_annotations;
  for (auto i : gestures) {
    const auto& cue = pending[i].cue;
    consumed[i] = true;
    const Timestamp mid2 = cue.t_start + cue.t_end;
    auto& mids = hysteresis.gesture_mid2[cue.label.name()];
    const bool duplicate = std::any_of(mids.begin(), mids.end(), [&](Timestamp m) {
      return (m > mid2 ? m - mid2 : mid2 - m) < window2;
    });
    if (duplicate) {
      ++out.dropped;
      continue;
    }
    mids.insert(std::upper_bound(mids.begin(), mids.end(), mid2), mid2);
    gesture_annotations.push_back(
        Annotation{CueKind::gesture, cue.label, nearest_token(segment, mid2), cue.confidence, {cue.source_seq}});
    ++out.attached;
  }
  std::stable_sort(gesture_annotations.begin(), gesture_annotations.end(),
                   [](const Annotation& a, const Annotation& b) { return a.anchor < b.anchor; });
  for (auto& a : gesture_annotations) out.annotations.push_back(std::move(a));

  // Drop consumed cues and cues that ended before this segment began.
  std::vector<PendingCue> kept;
  kept.reserve(pending.size());
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (consumed[i]) continue;
    if (pending[i].cue.t_end < segment.t_start) {
      ++out.dropped;
      if (pending[i].cue.kind == CueKind::gesture) ++out.gestures_in_gap;
      continue;
    }
    kept.push_back(std::move(pending[i]));
  }
  pending = std::move(kept);
  return out;
}

FusionEngine::FusionEngine(FusionConfig config, std::vector<Source> lanes) : config_(config) {
  config_.validate();
  lanes_[index(Source::asr)].active = true;
  for (auto s : lanes) lanes_[index(s)].active = true;
}

Timestamp FusionEngine::lane_watermark(Source lane) const { return lanes_[index(lane)].watermark; }

std::size_t FusionEngine::buffered(Source lane) const {
  const auto& l = lanes_[index(lane)];
  return l.tokens.size() + l.cues.size();
}

std::size_t FusionEngine::cues_pending() const {
  std::size_t n = pending_.size();
  for (const auto& l : lanes_) n += l.cues.size();
  return n;
}

void FusionEngine::ingest(Source lane_id, const IngestPayload& payload) {
  auto& lane = lanes_[index(lane_id)];

  if (const auto* beat = std::get_if<WatermarkBeat>(&payload)) {
    if (lane.active) lane.watermark = std::max(lane.watermark, beat->t);
    return;
  }
  if (const auto* token = std::get_if<TranscriptToken>(&payload)) {
    if (lane_id != Source::asr) {
      spdlog::warn("token on non-asr lane {} ignored", to_string(lane_id));
      return;
    }
    apply_revision(*token);
    lane.tokens.push_back(*token);
    enforce_bound(lane, lane_id);
    return;
  }
  if (const auto* cue = std::get_if<CueEvent>(&payload)) {
    ++stats_.cues_accepted;
    if (!lane.active || lane_id == Source::asr) {
      ++stats_.cues_dropped;
      return;
    }
    lane.cues.push_back(*cue);
    enforce_bound(lane, lane_id);
  }
}

// A new hypothesis replaces the trailing partial tokens it overlaps.
void FusionEngine::apply_revision(const TranscriptToken& token) {
  auto& buf = lanes_[index(Source::asr)].tokens;
  while (!buf.empty() && buf.back().stability == Stability::partial && overlaps(buf.back(), token)) {
    buf.pop_back();
    ++stats_.partials_replaced;
  }
}

void FusionEngine::enforce_bound(Lane& lane, Source which) {
  while (lane.tokens.size() + lane.cues.size() > config_.buffer_limit) {
    if (!lane.tokens.empty()) {
      lane.tokens.pop_front();
    } else {
      lane.cues.pop_front();
      ++stats_.cues_dropped;
    }
    if (stats_.overflow_dropped[index(which)]++ == 0) {
      spdlog::warn("{} buffer exceeded {} events without watermark progress; dropping oldest", to_string(which),
                   config_.buffer_limit);
    }
  }
}

std::uint64_t FusionEngine::take_segment_number() { return ++segment_counter_; }

void FusionEngine::commit(const TranscriptToken& token) {
  if (open_ && segment_tokens(open_->segment.tokens, token, config_) == SegmentDecision::append) {
    open_->segment.tokens.push_back(token);
    open_->segment.t_end = token.t_end;
    return;
  }
  if (open_) {
    closing_.push_back(std::move(*open_));
    open_.reset();
  }
  if (preview_) {
    open_ = std::move(*preview_);
    preview_.reset();
  } else {
    open_ = Working{};
    open_->segment.segment_id = make_segment_id(take_segment_number());
  }
  open_->segment.tokens.assign(1, token);
  open_->segment.t_start = token.t_start;
  open_->segment.t_end = token.t_end;
}

bool FusionEngine::certainly_closed(const CaptionSegment& segment) const {
  const auto& last = segment.tokens.back();
  if (ends_sentence(last) || segment.tokens.size() >= config_.max_tokens ||
      joined_length(segment.tokens) + 2 > config_.max_chars) {
    return true;
  }
  const auto& asr = lanes_[index(Source::asr)];
  if (!asr.tokens.empty()) {
    const auto& next = asr.tokens.front();
    if (next.stability == Stability::final) {
      return segment_tokens(segment.tokens, next, config_) == SegmentDecision::close_then_open;
    }
    // A partial may still be replaced, but never by a token starting earlier.
    return next.t_start - last.t_end >= config_.gap_ms;
  }
  return asr.watermark - last.t_end >= config_.gap_ms;
}

std::vector<TranscriptToken> FusionEngine::preview_tail(std::span<const TranscriptToken> committed) const {
  std::vector<TranscriptToken> view(committed.begin(), committed.end());
  for (const auto& token : lanes_[index(Source::asr)].tokens) {
    if (segment_tokens(view, token, config_) == SegmentDecision::close_then_open) break;
    view.push_back(token);
  }
  return view;
}

void FusionEngine::report_view(Working& w, std::vector<TranscriptToken> view, std::vector<Emission>& out) {
  if (view.empty() || view == w.last_view) return;
  Emission e;
  if (w.emitted) {
    ++w.segment.revision;
    e.kind = EmissionKind::segment_revised;
  } else {
    w.emitted = true;
    e.kind = EmissionKind::segment_open;
  }
  e.segment.segment_id = w.segment.segment_id;
  e.segment.tokens = view;
  e.segment.t_start = view.front().t_start;
  e.segment.t_end = view.back().t_end;
  e.segment.state = SegmentState::open;
  e.segment.revision = w.segment.revision;
  w.last_view = std::move(view);
  out.push_back(std::move(e));
}

void FusionEngine::finalize(Working& w, std::vector<Emission>& out) {
  auto& seg = w.segment;
  for (auto& t : seg.tokens) t.stability = Stability::final;
  seg.t_start = seg.tokens.front().t_start;
  seg.t_end = seg.tokens.back().t_end;

  const auto outcome = attach_cues(seg, pending_, hysteresis_, config_);
  seg.annotations = outcome.annotations;
  stats_.cues_attached += outcome.attached;
  stats_.cues_dropped += outcome.dropped;
  stats_.gestures_in_gap += outcome.gestures_in_gap;

  if (w.emitted) ++seg.revision;
  seg.state = SegmentState::final;
  ++stats_.segments_final;
  out.push_back(Emission{EmissionKind::segment_final, seg, 0});
}

void FusionEngine::expire_pending() {
  const auto& asr = lanes_[index(Source::asr)];
  Timestamp horizon = asr.watermark;
  if (!asr.tokens.empty()) horizon = std::min(horizon, asr.tokens.front().t_start);
  if (open_) horizon = std::min(horizon, open_->segment.t_start);
  if (!closing_.empty()) horizon = std::min(horizon, closing_.front().segment.t_start);

  std::erase_if(pending_, [&](const PendingCue& p) {
    if (p.cue.t_end >= horizon) return false;
    ++stats_.cues_dropped;
    if (p.cue.kind == CueKind::gesture) ++stats_.gestures_in_gap;
    return true;
  });
}

std::vector<Emission> FusionEngine::step(bool flush) {
  std::vector<Emission> out;

  Timestamp w = kForever;
  for (const auto& lane : lanes_) {
    if (lane.active) w = std::min(w, lane.watermark);
  }
  watermark_ = std::max(watermark_, w);
  const Timestamp eligible = flush ? kForever : watermark_;

  for (auto src : {Source::affect, Source::gesture, Source::prosody}) {
    auto& lane = lanes_[index(src)];
    while (!lane.cues.empty() && lane.cues.front().t_start < eligible) {
      pending_.push_back(PendingCue{src, std::move(lane.cues.front())});
      lane.cues.pop_front();
    }
  }

  auto& tokens = lanes_[index(Source::asr)].tokens;
  while (!tokens.empty()) {
    const auto& t = tokens.front();
    const bool ready = t.t_end <= eligible && (t.stability == Stability::final || t.t_start < eligible);
    if (!ready) break;
    commit(t);
    tokens.pop_front();
  }

  if (open_ && (flush || certainly_closed(open_->segment))) {
    closing_.push_back(std::move(*open_));
    open_.reset();
  }

  while (!closing_.empty() && (flush || eligible - closing_.front().segment.t_end >= config_.grace_ms)) {
    finalize(closing_.front(), out);
    closing_.pop_front();
  }
  for (auto& w : closing_) report_view(w, w.segment.tokens, out);

  if (open_) {
    report_view(*open_, preview_tail(open_->segment.tokens), out);
  } else if (auto tail = preview_tail({}); !tail.empty()) {
    if (!preview_) {
      preview_ = Working{};
      preview_->segment.segment_id = make_segment_id(take_segment_number());
    }
    report_view(*preview_, std::move(tail), out);
  }

  if (flush) {
    stats_.cues_dropped += pending_.size();
    for (const auto& p : pending_) {
      if (p.cue.kind == CueKind::gesture) ++stats_.gestures_in_gap;
    }
    pending_.clear();
  } else {
    expire_pending();
  }
  return out;
}

std::vector<Emission> FusionEngine::advance() { return step(false); }

std::vector<Emission> FusionEngine::finish() { return step(true); }

}  // namespace capfuse
