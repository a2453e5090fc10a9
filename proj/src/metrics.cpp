#include "capfuse/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace capfuse {
namespace {

double nearest_rank(const std::vector<double>& sorted, double pct) {
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

template <typename Array>
nlohmann::ordered_json per_source(const Array& values) {
  nlohmann::ordered_json j;
  for (auto s : kAllSources) j[std::string(to_string(s))] = values[static_cast<std::size_t>(s)];
  return j;
}

template <typename Array>
void read_per_source(const nlohmann::json& j, Array& out) {
  for (auto s : kAllSources) out[static_cast<std::size_t>(s)] = j.value(std::string(to_string(s)), 0ULL);
}

}  // namespace

LatencySummary summarize_latency(std::vector<double> samples) {
  LatencySummary s;
  s.samples = samples.size();
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  s.p50 = nearest_rank(samples, 50);
  s.p95 = nearest_rank(samples, 95);
  s.max = samples.back();
  return s;
}

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["events_in"] = per_source(events_in);
  j["events_accepted"] = per_source(events_accepted);
  j["events_rejected_by_source"] = per_source(events_rejected_by_source);
  j["events_rejected"] = nlohmann::ordered_json::object();
  for (const auto& [reason, n] : events_rejected) j["events_rejected"][reason] = n;
  j["decode_errors"] = decode_errors;
  j["source_disconnects"] = source_disconnects;
  j["segments_final"] = segments_final;
  j["finalization_latency_ms"] = {{"p50", finalization_latency_ms.p50},
                                  {"p95", finalization_latency_ms.p95},
                                  {"max", finalization_latency_ms.max},
                                  {"samples", finalization_latency_ms.samples}};
  j["cues_accepted"] = cues_accepted;
  j["cues_attached"] = cues_attached;
  j["cues_dropped"] = cues_dropped;
  j["cues_pending"] = cues_pending;
  j["gestures_in_gap"] = gestures_in_gap;
  j["buffer_overflow_dropped"] = buffer_overflow_dropped;
  return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  read_per_source(j.at("events_in"), r.events_in);
  read_per_source(j.at("events_accepted"), r.events_accepted);
  read_per_source(j.at("events_rejected_by_source"), r.events_rejected_by_source);
  for (const auto& [reason, n] : j.at("events_rejected").items()) r.events_rejected[reason] = n.get<std::uint64_t>();
  r.decode_errors = j.at("decode_errors").get<std::uint64_t>();
  r.source_disconnects = j.at("source_disconnects").get<std::uint64_t>();
  r.segments_final = j.at("segments_final").get<std::uint64_t>();
  const auto& lat = j.at("finalization_latency_ms");
  r.finalization_latency_ms = {lat.at("p50").get<double>(), lat.at("p95").get<double>(), lat.at("max").get<double>(),
                               lat.at("samples").get<std::size_t>()};
  r.cues_accepted = j.at("cues_accepted").get<std::uint64_t>();
  r.cues_attached = j.at("cues_attached").get<std::uint64_t>();
  r.cues_dropped = j.at("cues_dropped").get<std::uint64_t>();
  r.cues_pending = j.at("cues_pending").get<std::uint64_t>();
  r.gestures_in_gap = j.at("gestures_in_gap").get<std::uint64_t>();
  r.buffer_overflow_dropped = j.at("buffer_overflow_dropped").get<std::uint64_t>();
  return r;
}

void Metrics::event_in(Source s) {
  std::lock_guard g(mutex_);
  ++counts_.events_in[static_cast<std::size_t>(s)];
}

void Metrics::accepted(Source s) {
  std::lock_guard g(mutex_);
  ++counts_.events_accepted[static_cast<std::size_t>(s)];
}

void Metrics::rejected(Source s, std::string_view reason) {
  std::lock_guard g(mutex_);
  ++counts_.events_rejected_by_source[static_cast<std::size_t>(s)];
  ++counts_.events_rejected[std::string(reason)];
}

void Metrics::decode_error(std::string_view reason) {
  std::lock_guard g(mutex_);
  ++counts_.decode_errors;
  ++counts_.events_rejected[std::string(reason)];
}

void Metrics::source_disconnected() {
  std::lock_guard g(mutex_);
  ++counts_.source_disconnects;
}

void Metrics::segment_final(double latency_ms) {
  std::lock_guard g(mutex_);
  ++counts_.segments_final;
  latencies_ms_.push_back(latency_ms);
}

void Metrics::fusion_snapshot(const FusionStats& stats, std::size_t cues_pending) {
  std::lock_guard g(mutex_);
  counts_.cues_accepted = stats.cues_accepted;
  counts_.cues_attached = stats.cues_attached;
  counts_.cues_dropped = stats.cues_dropped;
  counts_.cues_pending = cues_pending;
  counts_.gestures_in_gap = stats.gestures_in_gap;
  std::uint64_t overflow = 0;
  for (auto n : stats.overflow_dropped) overflow += n;
  counts_.buffer_overflow_dropped = overflow;
}

MetricsReport Metrics::report() const {
  std::lock_guard g(mutex_);
  MetricsReport r = counts_;
  r.finalization_latency_ms = summarize_latency(latencies_ms_);
  return r;
}

}  // namespace capfuse
