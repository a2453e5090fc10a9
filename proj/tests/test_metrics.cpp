#include <doctest.h>

#include <random>

#include "capfuse/metrics.hpp"
#include "capfuse/replay.hpp"
#include "support/session_gen.hpp"

using namespace capfuse;

TEST_SUITE("metrics") {
  TEST_CASE("nearest-rank percentiles") {
    const auto empty = summarize_latency({});
    CHECK(empty.samples == 0);
    CHECK(empty.p50 == 0.0);
    CHECK(empty.p95 == 0.0);
    CHECK(empty.max == 0.0);

    const auto one = summarize_latency({7.0});
    CHECK(one.p50 == 7.0);
    CHECK(one.p95 == 7.0);
    CHECK(one.max == 7.0);

    std::vector<double> hundred;
    for (int i = 100; i >= 1; --i) hundred.push_back(i);
    const auto s = summarize_latency(hundred);
    CHECK(s.samples == 100);
    CHECK(s.p50 == 50.0);
    CHECK(s.p95 == 95.0);
    CHECK(s.max == 100.0);

    // ceil(0.5 * 5) = 3rd, ceil(0.95 * 5) = 5th
    const auto five = summarize_latency({10, 40, 20, 50, 30});
    CHECK(five.p50 == 30.0);
    CHECK(five.p95 == 50.0);
  }

  TEST_CASE("percentiles are ordered on random samples") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(0.0, 1000.0);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> v(1 + rng() % 300);
      for (auto& x : v) x = d(rng);
      const auto s = summarize_latency(v);
      CHECK(s.p50 <= s.p95);
      CHECK(s.p95 <= s.max);
      CHECK(s.max == *std::max_element(v.begin(), v.end()));
    }
  }

  TEST_CASE("report JSON round-trips") {
    MetricsReport r;
    r.events_in = {10, 4, 3, 2};
    r.events_accepted = {9, 4, 2, 2};
    r.events_rejected_by_source = {1, 0, 1, 0};
    r.events_rejected = {{"gap", 1}, {"late", 1}};
    r.decode_errors = 3;
    r.source_disconnects = 1;
    r.segments_final = 5;
    r.finalization_latency_ms = {12.5, 40.0, 41.0, 5};
    r.cues_accepted = 8;
    r.cues_attached = 5;
    r.cues_dropped = 2;
    r.cues_pending = 1;
    r.gestures_in_gap = 1;
    r.buffer_overflow_dropped = 0;

    const auto text = r.to_json().dump();
    const auto back = MetricsReport::from_json(nlohmann::json::parse(text));
    CHECK(back.to_json().dump() == text);
    CHECK(back.events_rejected.at("gap") == 1);
    CHECK(back.finalization_latency_ms.p95 == 40.0);
  }

  TEST_CASE("counters balance over replayed sessions") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
      auto session = gen::generate(rng);
      auto lines = gen::to_lines(session.events);
      // Inject a stale duplicate so some events are rejected.
      if (lines.size() > 4) lines.push_back(lines[2]);
      ManualClock clock;
      const auto result = run_replay(lines, 0.0, EngineConfig{}, clock);
      const auto& m = result.metrics;
      std::uint64_t rejected_total = 0;
      for (const auto& [reason, n] : m.events_rejected) rejected_total += n;
      std::uint64_t by_source = 0;
      for (auto s : kAllSources) {
        const auto i = static_cast<std::size_t>(s);
        CHECK(m.events_in[i] == m.events_accepted[i] + m.events_rejected_by_source[i]);
        by_source += m.events_rejected_by_source[i];
      }
      CHECK(rejected_total == by_source);
      if (lines.size() > 4) CHECK(rejected_total >= 1);
      CHECK(m.cues_attached + m.cues_dropped + m.cues_pending == m.cues_accepted);
      CHECK(m.cues_pending == 0);
      CHECK(m.segments_final == result.transcript.size());
      CHECK(m.finalization_latency_ms.samples == m.segments_final);
    }
  }
}
