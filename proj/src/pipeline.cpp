#include "capfuse/pipeline.hpp"

#include <spdlog/spdlog.h>

#include "capfuse/errors.hpp"

namespace capfuse {
namespace {

std::vector<Source> fusion_lanes(bool prosody) {
  std::vector<Source> lanes{Source::asr, Source::affect, Source::gesture};
  if (prosody) lanes.push_back(Source::prosody);
  return lanes;
}

}  // namespace

std::string transcript_line(const CaptionSegment& segment) {
  return std::to_string(segment.t_start) + ".." + std::to_string(segment.t_end) + "|" +
         render_segment_text(segment, RenderOptions::verbose_all());
}

Pipeline::Pipeline(EngineConfig config, bool prosody_lane, std::shared_ptr<Metrics> metrics, const Clock& clock)
    : config_(std::move(config)),
      prosody_lane_(prosody_lane),
      metrics_(metrics ? std::move(metrics) : std::make_shared<Metrics>()),
      clock_(clock),
      engine_(config_.fusion, fusion_lanes(prosody_lane)),
      detector_(config_.prosody) {}

OrderVerdict Pipeline::offer(const IngestEvent& event, std::string_view raw) {
  const auto idx = static_cast<std::size_t>(event.source);
  metrics_->event_in(event.source);

  if (std::holds_alternative<ProsodyFrame>(event.payload) && !prosody_lane_) {
    metrics_->rejected(event.source, "no_prosody_lane");
    return OrderVerdict::reject(RejectReason::out_of_order);
  }

  const auto verdict = check_stream_order(states_[idx], event);
  if (!verdict.accepted) {
    metrics_->rejected(event.source, to_string(verdict.reason));
    return verdict;
  }
  metrics_->accepted(event.source);
  if (accept_sink_) accept_sink_(event, raw);

  route(event);
  drain(engine_.advance());
  return verdict;
}

void Pipeline::route(const IngestEvent& event) {
  const auto idx = static_cast<std::size_t>(event.source);

  if (const auto* beat = std::get_if<WatermarkBeat>(&event.payload)) {
    last_beat_[idx] = std::max(last_beat_[idx], beat->t);
    engine_.ingest(event);
    return;
  }
  if (const auto* frame = std::get_if<ProsodyFrame>(&event.payload)) {
    last_beat_[idx] = std::max(last_beat_[idx], frame->t);
    if (auto cue = detector_.push(*frame)) {
      if (cue->t_start < engine_.lane_watermark(Source::prosody)) {
        spdlog::debug("prosody cue at {} is behind the forced lane watermark; dropped", cue->t_start);
      } else {
        engine_.ingest(Source::prosody, *cue);
      }
    }
    engine_.ingest(Source::prosody, WatermarkBeat{Source::prosody, detector_.watermark()});
    return;
  }
  if (const auto* token = std::get_if<TranscriptToken>(&event.payload)) {
    token_arrival_us_.emplace(token->source_seq, clock_.now_us());
  }
  engine_.ingest(event);
}

std::optional<DecodeError> Pipeline::offer_line(std::string_view line) {
  try {
    offer(decode_event(line), line);
  } catch (const DecodeError& e) {
    metrics_->decode_error(to_string(e.kind()));
    spdlog::debug("rejected line: {}", e.what());
    return e;
  }
  return std::nullopt;
}

void Pipeline::tick(Timestamp session_now) {
  bool moved = false;
  for (auto s : kAllSources) {
    if (s == Source::prosody && !prosody_lane_) continue;
    const auto idx = static_cast<std::size_t>(s);
    if (session_now - last_beat_[idx] < config_.ingest.stall_ms) continue;
    const Timestamp forced = session_now - config_.ingest.stall_ms;
    if (forced <= states_[idx].watermark) continue;
    states_[idx].watermark = forced;
    engine_.ingest(s, WatermarkBeat{s, forced});
    moved = true;
  }
  if (moved) drain(engine_.advance());
}

void Pipeline::finish() { drain(engine_.finish()); }

void Pipeline::drain(std::vector<Emission> emissions) {
  const auto now = clock_.now_us();
  for (auto& e : emissions) {
    e.emitted_at_us = now;
    if (e.kind == EmissionKind::segment_final) {
      const auto& last = e.segment.tokens.back();
      std::optional<std::int64_t> reference;
      if (session_to_wall_) reference = session_to_wall_(last.t_end);
      if (!reference) {
        if (auto it = token_arrival_us_.find(last.source_seq); it != token_arrival_us_.end()) reference = it->second;
      }
      const double latency_ms = reference ? static_cast<double>(now - *reference) / 1000.0 : 0.0;
      metrics_->segment_final(latency_ms);
      transcript_.push_back(transcript_line(e.segment));
      std::erase_if(token_arrival_us_, [&last](const auto& kv) { return kv.first <= last.source_seq; });
    }
    if (emission_sink_) emission_sink_(e);
  }
  metrics_->fusion_snapshot(engine_.stats(), engine_.cues_pending());
}

}  // namespace capfuse
