#pragma once

// Engine configuration loaded from a small TOML-style file:
//
//   [fusion]
//   gap_ms = 700
//   tone_conf_min = 0.6
//
//   [prosody]
//   excited_energy = 1.0
//
//   [ingest]
//   stall_ms = 2000
//   prosody_lane = false
//
// Key names match the struct fields. Unknown sections or keys are errors.

#include <filesystem>
#include <string_view>

#include "capfuse/fusion.hpp"
#include "capfuse/prosody.hpp"

namespace capfuse {

struct IngestPolicy {
  /// A source without a beat for this long has its watermark advanced to now - stall_ms.
  Timestamp stall_ms = 2000;
  /// Live mode only: run the prosody detector lane. Replay enables it when
  /// the session contains frames.
  bool prosody_lane = false;
};

struct EngineConfig {
  FusionConfig fusion;
  ToneRules prosody;
  IngestPolicy ingest;
};

/// Throws ConfigError (with line numbers) on syntax, key, or range errors.
EngineConfig parse_config(std::string_view text);
/// Throws ConfigError naming the path when the file cannot be read.
EngineConfig load_config(const std::filesystem::path& path);

}  // namespace capfuse
