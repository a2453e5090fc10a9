#pragma once

// Maps a third-party streaming recognizer session onto the asr token stream.
//
// Interim hypotheses become partial tokens (fusion replaces earlier partials
// they overlap); final hypotheses become final tokens followed by a
// watermark at the hypothesis end. During silence the service keepalive
// advances the watermark, at most once per keepalive period.

#include <cstdint>
#include <string>
#include <vector>

#include "capfuse/ingest.hpp"

namespace capfuse {

struct RecognizedWord {
  std::string text;
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  double confidence = 1.0;
};

struct Hypothesis {
  std::vector<RecognizedWord> words;
  bool is_final = false;
};

class AsrAdapter {
 public:
  explicit AsrAdapter(std::string speaker_id = "S1", Timestamp keepalive_ms = 500);

  /// Tokens (and, for final hypotheses, a watermark) for one hypothesis.
  std::vector<IngestEvent> on_hypothesis(const Hypothesis& hypothesis);

  /// The service reports it has processed audio up to `processed_until`.
  /// Emits a watermark when at least keepalive_ms passed since the last one
  /// and no interim words are outstanding.
  std::vector<IngestEvent> on_keepalive(Timestamp processed_until);

  /// The service dropped. The asr source stops beating; other sources and
  /// the liveness policy keep fusion moving.
  void on_disconnect() { connected_ = false; }
  bool connected() const { return connected_; }

  Timestamp watermark() const { return watermark_; }

 private:
  IngestEvent beat(Timestamp t);

  std::string speaker_;
  Timestamp keepalive_ms_;
  std::int64_t next_seq_ = 1;
  Timestamp watermark_ = 0;
  Timestamp last_beat_at_ = 0;
  bool interim_outstanding_ = false;
  Timestamp interim_start_ = 0;
  bool connected_ = true;
};

}  // namespace capfuse
