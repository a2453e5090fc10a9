#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "capfuse/fusion.hpp"
#include "capfuse/ingest.hpp"

namespace capfuse {

struct LatencySummary {
  double p50 = 0.0;
  double p95 = 0.0;
  double max = 0.0;
  std::size_t samples = 0;
};

/// Nearest-rank percentiles; all zero for an empty sample.
LatencySummary summarize_latency(std::vector<double> samples_ms);

struct MetricsReport {
  std::array<std::uint64_t, kSourceCount> events_in{};
  std::array<std::uint64_t, kSourceCount> events_accepted{};
  std::array<std::uint64_t, kSourceCount> events_rejected_by_source{};
  std::map<std::string, std::uint64_t> events_rejected;
  std::uint64_t decode_errors = 0;
  std::uint64_t source_disconnects = 0;
  std::uint64_t segments_final = 0;
  LatencySummary finalization_latency_ms;
  std::uint64_t cues_accepted = 0;
  std::uint64_t cues_attached = 0;
  std::uint64_t cues_dropped = 0;
  std::uint64_t cues_pending = 0;
  std::uint64_t gestures_in_gap = 0;
  std::uint64_t buffer_overflow_dropped = 0;

  nlohmann::ordered_json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

/// Thread-safe accumulator behind the metrics endpoint and replay reports.
class Metrics {
 public:
  void event_in(Source s);
  void accepted(Source s);
  void rejected(Source s, std::string_view reason);
  void decode_error(std::string_view reason);
  void source_disconnected();
  void segment_final(double latency_ms);
  void fusion_snapshot(const FusionStats& stats, std::size_t cues_pending);

  MetricsReport report() const;

 private:
  mutable std::mutex mutex_;
  MetricsReport counts_;
  std::vector<double> latencies_ms_;
};

}  // namespace capfuse
