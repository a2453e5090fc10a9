#include "checks.hpp"

#include <array>
#include <map>
#include <random>

#include <fmt/format.h>

#include "capfuse/clock.hpp"
#include "capfuse/pipeline.hpp"
#include "capfuse/replay.hpp"
#include "session_gen.hpp"

namespace checks {

using namespace capfuse;

std::vector<Emission> stream(const std::vector<IngestEvent>& events, const EngineConfig& config) {
  auto lines = gen::to_lines(events);
  auto tail = terminal_watermarks(lines, false);
  lines.insert(lines.end(), tail.begin(), tail.end());

  ManualClock clock;
  Pipeline pipeline(config, false, nullptr, clock);
  std::vector<Emission> out;
  pipeline.on_emission([&out](const Emission& e) { out.push_back(e); });
  for (const auto& l : lines) pipeline.offer(l.event, l.raw);
  pipeline.finish();
  return out;
}

std::vector<CaptionSegment> finals_of(const std::vector<Emission>& emissions) {
  std::vector<CaptionSegment> out;
  for (const auto& e : emissions) {
    if (e.kind == EmissionKind::segment_final) out.push_back(e.segment);
  }
  return out;
}

std::vector<std::string> transcript_of(const std::vector<CaptionSegment>& finals) {
  std::vector<std::string> out;
  for (const auto& s : finals) out.push_back(transcript_line(s));
  return out;
}

std::vector<std::string> emission_order_violations(const std::vector<Emission>& emissions) {
  struct Seen {
    std::uint32_t revision = 0;
    bool final = false;
  };
  std::map<std::string, Seen> seen;
  std::vector<std::string> problems;
  for (const auto& e : emissions) {
    const auto& id = e.segment.segment_id;
    auto it = seen.find(id);
    if (it != seen.end()) {
      if (it->second.final) problems.push_back(fmt::format("{} emitted after its final", id));
      if (e.segment.revision <= it->second.revision) {
        problems.push_back(fmt::format("{} revision {} after {}", id, e.segment.revision, it->second.revision));
      }
    } else if (e.kind == EmissionKind::segment_revised) {
      problems.push_back(fmt::format("{} revised before it was opened", id));
    }
    auto& s = seen[id];
    s.revision = e.segment.revision;
    s.final = s.final || e.kind == EmissionKind::segment_final;
  }
  for (const auto& [id, s] : seen) {
    if (!s.final) problems.push_back(fmt::format("{} never finalized", id));
  }
  return problems;
}

std::vector<std::string> final_output_violations(const std::vector<CaptionSegment>& finals,
                                                 const std::vector<IngestEvent>& events, const FusionConfig& config) {
  std::map<std::pair<int, std::int64_t>, CueEvent> cues;
  for (const auto& e : events) {
    if (const auto* c = std::get_if<CueEvent>(&e.payload)) cues[{static_cast<int>(e.source), c->source_seq}] = *c;
  }

  std::vector<std::string> problems;
  struct LastTone {
    std::string label;
    Timestamp end;
  };
  std::optional<LastTone> last_tone;
  for (std::size_t i = 0; i < finals.size(); ++i) {
    const auto& seg = finals[i];
    if (i > 0) {
      const auto& prev = finals[i - 1];
      if (seg.t_start < prev.t_start) problems.push_back(fmt::format("{} starts before {}", seg.segment_id, prev.segment_id));
      if (seg.t_start < prev.t_end) problems.push_back(fmt::format("{} overlaps {}", seg.segment_id, prev.segment_id));
    }
    std::size_t tones = 0;
    for (const auto& a : seg.annotations) {
      if (a.category == CueKind::tone) {
        ++tones;
        if (last_tone && last_tone->label == a.label.name() && seg.t_start - last_tone->end < config.tone_repeat_suppress_ms) {
          problems.push_back(fmt::format("{} repeats [{}] {} ms after the last one", seg.segment_id, a.label.name(),
                                         seg.t_start - last_tone->end));
        }
        last_tone = LastTone{a.label.name(), seg.t_end};
      }
      if (a.origin.size() != 1) {
        problems.push_back(fmt::format("{} annotation without a single origin", seg.segment_id));
        continue;
      }
      const int lane = a.category == CueKind::tone ? static_cast<int>(Source::affect) : static_cast<int>(Source::gesture);
      auto it = cues.find({lane, a.origin[0]});
      if (it == cues.end()) {
        problems.push_back(fmt::format("{} annotation origin {} unknown", seg.segment_id, a.origin[0]));
        continue;
      }
      const auto& c = it->second;
      if (a.category == CueKind::tone) {
        if (c.t_end <= seg.t_start || c.t_start >= seg.t_end) {
          const bool contained_short = c.t_start >= seg.t_start && c.t_end <= seg.t_end;
          if (!contained_short) problems.push_back(fmt::format("{} tone origin outside the span", seg.segment_id));
        }
      } else {
        const auto mid2 = c.t_start + c.t_end;
        if (mid2 < 2 * seg.t_start || mid2 > 2 * seg.t_end) {
          problems.push_back(fmt::format("{} gesture midpoint outside the span", seg.segment_id));
        }
      }
    }
    if (tones > 1) problems.push_back(fmt::format("{} has {} tone tags", seg.segment_id, tones));
    if (i > 0 && tones == 1) {
      const auto& prev = finals[i - 1];
      for (const auto& pa : prev.annotations) {
        if (pa.category != CueKind::tone) continue;
        for (const auto& a : seg.annotations) {
          if (a.category == CueKind::tone && a.label == pa.label &&
              seg.t_start - prev.t_end < config.tone_repeat_suppress_ms) {
            problems.push_back(fmt::format("{} and {} both carry [{}]", prev.segment_id, seg.segment_id, a.label.name()));
          }
        }
      }
    }
  }
  return problems;
}

std::vector<IngestEvent> reshuffle(const std::vector<IngestEvent>& events, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::array<std::vector<IngestEvent>, kSourceCount> lanes;
  const double keep = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (const auto& e : events) {
    if (e.is_watermark() && !std::bernoulli_distribution(keep)(rng)) continue;
    lanes[static_cast<std::size_t>(e.source)].push_back(e);
  }
  std::vector<IngestEvent> out;
  std::array<std::size_t, kSourceCount> next{};
  std::size_t remaining = 0;
  for (const auto& l : lanes) remaining += l.size();
  while (remaining > 0) {
    auto k = std::uniform_int_distribution<std::size_t>(0, remaining - 1)(rng);
    std::size_t lane = 0;
    while (k >= lanes[lane].size() - next[lane]) {
      k -= lanes[lane].size() - next[lane];
      ++lane;
    }
    out.push_back(lanes[lane][next[lane]++]);
    --remaining;
  }
  return out;
}

}  // namespace checks
