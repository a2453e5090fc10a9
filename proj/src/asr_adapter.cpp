#include "capfuse/asr_adapter.hpp"

#include <algorithm>

namespace capfuse {
namespace {

std::string clean(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  s = s.substr(first, last - first + 1);
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    const bool space = c == ' ' || c == '\t' || c == '\r' || c == '\n';
    if (space) {
      if (!out.empty() && out.back() != ' ') out += ' ';
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace

AsrAdapter::AsrAdapter(std::string speaker_id, Timestamp keepalive_ms)
    : speaker_(std::move(speaker_id)), keepalive_ms_(keepalive_ms) {}

IngestEvent AsrAdapter::beat(Timestamp t) {
  watermark_ = t;
  last_beat_at_ = t;
  return IngestEvent{kIngestVersion, Source::asr, WatermarkBeat{Source::asr, t}};
}

std::vector<IngestEvent> AsrAdapter::on_hypothesis(const Hypothesis& hypothesis) {
  std::vector<RecognizedWord> words;
  for (const auto& w : hypothesis.words) {
    auto text = clean(w.text);
    if (text.empty() || w.t_start < watermark_ || w.t_end < w.t_start) continue;
    words.push_back(RecognizedWord{std::move(text), w.t_start, w.t_end, std::clamp(w.confidence, 0.0, 1.0)});
  }

  std::vector<IngestEvent> out;
  if (!hypothesis.is_final) {
    if (words.empty()) return out;
    // One phrase token per interim result; it overlaps and so replaces the
    // previous interim phrase.
    TranscriptToken tok;
    tok.source_seq = next_seq_++;
    tok.t_start = interim_outstanding_ ? std::min(interim_start_, words.front().t_start) : words.front().t_start;
    tok.t_end = std::max(words.back().t_end, tok.t_start);
    tok.speaker_id = speaker_;
    tok.stability = Stability::partial;
    double conf = 1.0;
    for (const auto& w : words) {
      if (!tok.text.empty()) tok.text += ' ';
      tok.text += w.text;
      conf = std::min(conf, w.confidence);
    }
    tok.confidence = conf;
    interim_outstanding_ = true;
    interim_start_ = tok.t_start;
    out.push_back(IngestEvent{kIngestVersion, Source::asr, std::move(tok)});
    return out;
  }

  Timestamp end = watermark_;
  for (const auto& w : words) {
    TranscriptToken tok;
    tok.source_seq = next_seq_++;
    tok.text = w.text;
    tok.t_start = w.t_start;
    tok.t_end = w.t_end;
    tok.speaker_id = speaker_;
    tok.stability = Stability::final;
    tok.confidence = w.confidence;
    end = std::max(end, w.t_end);
    out.push_back(IngestEvent{kIngestVersion, Source::asr, std::move(tok)});
  }
  interim_outstanding_ = false;
  if (end > watermark_) out.push_back(beat(end));
  return out;
}

std::vector<IngestEvent> AsrAdapter::on_keepalive(Timestamp processed_until) {
  std::vector<IngestEvent> out;
  if (!connected_) return out;
  Timestamp target = processed_until;
  if (interim_outstanding_) target = std::min(target, interim_start_);
  if (target > watermark_ && processed_until - last_beat_at_ >= keepalive_ms_) out.push_back(beat(target));
  return out;
}

}  // namespace capfuse
