#pragma once

// Toy vocal-tone detector: z-scores of 1 s prosody windows against running
// session statistics, mapped to a tone label by a first-match rule table.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "capfuse/cue_model.hpp"
#include "capfuse/ingest.hpp"

namespace capfuse {

/// Thresholds of the rule table. Rule order is fixed:
/// excited, urgent, calm, concerned.
struct ToneRules {
  double excited_energy = 1.0;
  double excited_f0var = 1.0;
  double urgent_energy = 1.0;
  double urgent_rate = 1.0;
  double calm_energy = -1.0;
  double calm_rate = -0.5;
  double concerned_f0var = 1.5;
  double concerned_energy_max = 1.0;
  std::size_t window_frames = 10;
  Timestamp frame_hop_ms = 100;
  Timestamp baseline_ms = 5000;
};

struct ProsodyZ {
  double energy = 0.0;
  double f0_mean = 0.0;
  double f0_var = 0.0;
  double rate = 0.0;
};

struct ToneDecision {
  CueLabel label;
  double confidence = 0.0;
};

/// Applies the rule table; std::nullopt means neutral (nothing to tag).
/// confidence = min(1, max|z| / 3).
std::optional<ToneDecision> classify_tone(const ProsodyZ& z, const ToneRules& rules = {});

/// Welford running mean and variance.
class RunningStats {
 public:
  void add(double x);
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double stddev() const;
  /// (x - mean) / stddev, or 0 when the spread is zero.
  double z(double x) const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Groups frames into non-overlapping windows and emits a tone cue per
/// window whose rule fires. Windows are scored against statistics of all
/// frames seen before the window; no cue is produced while the session is
/// younger than the baseline period.
class ToneDetector {
 public:
  explicit ToneDetector(ToneRules rules = {});

  /// Returns a cue when `frame` completes a window that classifies as non-neutral.
  std::optional<CueEvent> push(const ProsodyFrame& frame);

  /// Earliest start any future cue can have.
  Timestamp watermark() const { return next_window_start_; }

 private:
  ToneRules rules_;
  std::vector<ProsodyFrame> window_;
  std::array<RunningStats, 4> stats_;
  std::optional<Timestamp> session_start_;
  Timestamp next_window_start_ = 0;
  std::int64_t next_seq_ = 1;
};

}  // namespace capfuse
