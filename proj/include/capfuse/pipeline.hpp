#pragma once

// Ingest checks + prosody detection + fusion + metrics, driven one event at
// a time. Used by headless replay, the recorder, and the live server.

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "capfuse/clock.hpp"
#include "capfuse/config.hpp"
#include "capfuse/errors.hpp"
#include "capfuse/fusion.hpp"
#include "capfuse/ingest.hpp"
#include "capfuse/metrics.hpp"
#include "capfuse/prosody.hpp"

namespace capfuse {

/// `t0..t1|text` with verbose tags and every category shown.
std::string transcript_line(const CaptionSegment& segment);

class Pipeline {
 public:
  using EmissionSink = std::function<void(const Emission&)>;
  /// Receives every accepted event with its original line (empty when the
  /// event did not come from a line).
  using AcceptSink = std::function<void(const IngestEvent&, std::string_view raw)>;
  /// Maps a session timestamp to wall-clock microseconds, if known.
  using SessionToWall = std::function<std::optional<std::int64_t>(Timestamp)>;

  Pipeline(EngineConfig config, bool prosody_lane, std::shared_ptr<Metrics> metrics, const Clock& clock);

  void on_emission(EmissionSink sink) { emission_sink_ = std::move(sink); }
  void on_accept(AcceptSink sink) { accept_sink_ = std::move(sink); }
  void set_session_to_wall(SessionToWall f) { session_to_wall_ = std::move(f); }

  /// Ordering check, then fusion. Returns the ordering verdict.
  OrderVerdict offer(const IngestEvent& event, std::string_view raw = {});

  /// Decodes and offers one line. Decode failures are counted and returned
  /// as the error; nothing is thrown.
  std::optional<DecodeError> offer_line(std::string_view line);

  /// Liveness: advances the watermark of every lane that has not beaten for
  /// stall_ms to now - stall_ms.
  void tick(Timestamp session_now);

  /// Finalizes everything still open.
  void finish();

  const FusionEngine& engine() const { return engine_; }
  const SourceState& source_state(Source s) const { return states_[static_cast<std::size_t>(s)]; }
  std::shared_ptr<Metrics> metrics() const { return metrics_; }
  const std::vector<std::string>& transcript() const { return transcript_; }
  bool prosody_lane() const { return prosody_lane_; }

 private:
  void route(const IngestEvent& event);
  void drain(std::vector<Emission> emissions);

  EngineConfig config_;
  bool prosody_lane_;
  std::shared_ptr<Metrics> metrics_;
  const Clock& clock_;
  FusionEngine engine_;
  ToneDetector detector_;
  std::array<SourceState, kSourceCount> states_{};
  std::array<Timestamp, kSourceCount> last_beat_{};
  std::unordered_map<std::int64_t, std::int64_t> token_arrival_us_;
  std::vector<std::string> transcript_;
  EmissionSink emission_sink_;
  AcceptSink accept_sink_;
  SessionToWall session_to_wall_;
};

}  // namespace capfuse
