#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "capfuse/errors.hpp"
#include "capfuse/pipeline.hpp"
#include "capfuse/replay.hpp"
#include "support/batch_oracle.hpp"
#include "support/session_gen.hpp"
#include "support/tempdir.hpp"

using namespace capfuse;
namespace fs = std::filesystem;

namespace {

const char* kConcernedSession = R"({"v":1,"src":"asr","type":"token","seq":1,"t0":5230,"t1":5500,"text":"The","speaker":"S1","stability":"final","conf":0.9}
{"v":1,"src":"asr","type":"token","seq":2,"t0":5520,"t1":5990,"text":"voltage","speaker":"S1","stability":"final","conf":0.9}
{"v":1,"src":"asr","type":"token","seq":3,"t0":6010,"t1":6240,"text":"here","speaker":"S1","stability":"final","conf":0.9}
{"v":1,"src":"asr","type":"token","seq":4,"t0":6260,"t1":6380,"text":"is","speaker":"S1","stability":"final","conf":0.9}
{"v":1,"src":"asr","type":"token","seq":5,"t0":6400,"t1":6800,"text":"critical.","speaker":"S1","stability":"final","conf":0.9}
{"v":1,"src":"affect","type":"cue","seq":1,"t0":5400,"t1":6700,"kind":"tone","label":"concerned","conf":0.81}
{"v":1,"src":"gesture","type":"watermark","t":7000}
)";

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path data_dir() { return fs::path(CAPFUSE_SOURCE_DIR) / "data"; }

std::vector<IngestEvent> events_of(const std::vector<SessionLine>& lines) {
  std::vector<IngestEvent> out;
  for (const auto& l : lines) out.push_back(l.event);
  return out;
}

}  // namespace

TEST_SUITE("replay") {
  TEST_CASE("a short session replays to the expected line") {
    testing_support::TempDir dir;
    write_file(dir / "s.ndjson", kConcernedSession);
    ManualClock clock;
    const auto r = run_replay(dir / "s.ndjson", 0.0, EngineConfig{}, clock);
    REQUIRE(r.transcript.size() == 1);
    CHECK(r.transcript[0] == "5230..6800|[concerned tone] The voltage here is critical.");
    CHECK(r.metrics.segments_final == 1);
    CHECK(r.metrics.cues_attached == 1);
  }

  TEST_CASE("an empty session yields an empty transcript") {
    testing_support::TempDir dir;
    write_file(dir / "empty.ndjson", "");
    ManualClock clock;
    const auto r = run_replay(dir / "empty.ndjson", 0.0, EngineConfig{}, clock);
    CHECK(r.transcript.empty());
    CHECK(r.metrics.segments_final == 0);
    CHECK(join_transcript(r.transcript).empty());
  }

  TEST_CASE("blank lines are skipped and line numbers stay file-relative") {
    const auto lines = parse_session("\n" + std::string(kConcernedSession) + "\n\n");
    REQUIRE(lines.size() == 7);
    CHECK(lines.front().line_no == 2);
    CHECK(lines.back().line_no == 8);
  }

  TEST_CASE("a malformed line aborts with its line number") {
    testing_support::TempDir dir;
    std::string text = kConcernedSession;
    text.insert(text.find("{\"v\":1,\"src\":\"asr\",\"type\":\"token\",\"seq\":3"), "{\"v\":1,\"src\":\"asr\"\n");
    write_file(dir / "bad.ndjson", text);
    ManualClock clock;
    try {
      run_replay(dir / "bad.ndjson", 0.0, EngineConfig{}, clock);
      FAIL("expected ReplayError");
    } catch (const ReplayError& e) {
      CHECK(e.line() == 3);
      CHECK(e.cause_kind() == DecodeError::Kind::malformed_json);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }

  TEST_CASE("a missing file is reported as unreadable") {
    ManualClock clock;
    CHECK_THROWS_AS(run_replay(fs::path("/nonexistent/session.ndjson"), 0.0, EngineConfig{}, clock), FileUnreadable);
  }

  TEST_CASE("terminal watermarks sit one past the latest end") {
    const auto lines = parse_session(kConcernedSession);
    const auto tail = terminal_watermarks(lines, false);
    REQUIRE(tail.size() == 3);
    for (const auto& l : tail) {
      CHECK(l.line_no == 0);
      CHECK(std::get<WatermarkBeat>(l.event.payload).t == 7001);
    }
    CHECK(terminal_watermarks(lines, true).size() == 4);
  }

  TEST_CASE("speed scales wall time on an injected clock") {
    const auto lines = parse_session(kConcernedSession);
    for (double speed : {1.0, 2.0, 4.0}) {
      ManualClock clock(1'000'000);
      Replayer replayer(lines, speed, clock);
      std::vector<std::int64_t> at;
      replayer.run([&](const SessionLine& l) {
        at.push_back(clock.now_us());
        CHECK(replayer.wall_time_of(l.event.start_time()).has_value());
      });
      // From the first start (5230) to the terminal watermarks (7001).
      const auto expected = static_cast<std::int64_t>(std::llround((7001 - 5230) * 1000.0 / speed));
      CHECK(at.back() - 1'000'000 == expected);
      CHECK(std::is_sorted(at.begin(), at.end()));
    }
  }

  TEST_CASE("speed zero never sleeps and speed does not change output") {
    std::mt19937_64 rng(5);
    const auto session = gen::generate(rng, gen::Options{.min_events = 50, .max_events = 120});
    const auto lines = gen::to_lines(session.events);
    ManualClock fast;
    const auto a = run_replay(lines, 0.0, EngineConfig{}, fast);
    CHECK(fast.now_us() == 0);
    ManualClock slow;
    const auto b = run_replay(lines, 1.0, EngineConfig{}, slow);
    CHECK(slow.now_us() > 0);
    CHECK(join_transcript(a.transcript) == join_transcript(b.transcript));
    CHECK_THROWS_AS(Replayer(lines, -1.0, fast), Error);
  }

  TEST_CASE("the same file replays to the same bytes") {
    std::mt19937_64 rng(8);
    testing_support::TempDir dir;
    for (int i = 0; i < 5; ++i) {
      const auto session = gen::generate(rng);
      write_file(dir / "s.ndjson", gen::to_ndjson(session.events));
      ManualClock c1, c2;
      const auto a = run_replay(dir / "s.ndjson", 0.0, EngineConfig{}, c1);
      const auto b = run_replay(dir / "s.ndjson", 0.0, EngineConfig{}, c2);
      CHECK(join_transcript(a.transcript) == join_transcript(b.transcript));
      CHECK(a.metrics.to_json().dump() == b.metrics.to_json().dump());
    }
  }

  TEST_CASE("sample session matches its golden transcript") {
    ManualClock clock;
    const auto r = run_replay(data_dir() / "sample_session.ndjson", 0.0, EngineConfig{}, clock);
    const auto golden = read_file(data_dir() / "sample_session.golden.txt");
    REQUIRE_FALSE(golden.empty());
    CHECK(join_transcript(r.transcript) == golden);

    // The offline reference agrees.
    const auto lines = load_session(data_dir() / "sample_session.ndjson");
    CHECK(join_transcript(oracle::batch_transcript(events_of(lines))) == golden);
  }

  TEST_CASE("prosody frames drive tone tags") {
    std::string text;
    auto frame = [&text](Timestamp t, double rms, double f0m, double f0v, double rate) {
      nlohmann::ordered_json j{{"v", 1}, {"src", "prosody"}, {"type", "frame"}, {"t", t},
                               {"rms", rms}, {"f0m", f0m}, {"f0v", f0v}, {"rate", rate}};
      text += j.dump() + "\n";
    };
    int k = 0;
    for (Timestamp t = 0; t < 6000; t += 100, ++k) {
      const double n = std::sin(k * 1.7);
      frame(t, 0.3 + 0.02 * n, 150 + 5 * n, 20 + 2 * n, 4 + 0.2 * n);
    }
    for (Timestamp t = 6000; t < 7000; t += 100) frame(t, 0.8, 180, 80, 4);
    const char* words[] = {"This", "is", "amazing!"};
    for (int i = 0; i < 3; ++i) {
      nlohmann::ordered_json j{{"v", 1}, {"src", "asr"}, {"type", "token"}, {"seq", i + 1}, {"t0", 6000 + 330 * i},
                               {"t1", 6300 + 330 * i}, {"text", words[i]}, {"speaker", "S1"},
                               {"stability", "final"}, {"conf", 0.9}};
      text += j.dump() + "\n";
    }
    const auto lines = parse_session(text);
    CHECK(has_prosody_frames(lines));
    ManualClock clock;
    const auto r = run_replay(lines, 0.0, EngineConfig{}, clock);
    REQUIRE(r.transcript.size() == 1);
    CHECK(r.transcript[0] == "6000..6960|[excited tone] This is amazing!");
  }
}

TEST_SUITE("record") {
  TEST_CASE("recording a live run replays to the same transcript") {
    std::mt19937_64 rng(77);
    testing_support::TempDir dir;
    for (int trial = 0; trial < 30; ++trial) {
      const auto session = gen::generate(rng, gen::Options{.min_events = 50, .max_events = 200});
      auto lines = gen::to_lines(session.events);
      const auto path = dir / ("rec" + std::to_string(trial) + ".ndjson");

      std::vector<std::string> live;
      {
        ManualClock clock;
        Pipeline pipeline(EngineConfig{}, false, std::make_shared<Metrics>(), clock);
        Recorder recorder(path);
        pipeline.on_accept([&recorder](const IngestEvent& e, std::string_view raw) { recorder.write(e, raw); });
        for (std::size_t i = 0; i < lines.size(); ++i) {
          pipeline.offer_line(lines[i].raw);
          // A stale copy, a garbled line and a foreign line ride along.
          if (i % 17 == 5) pipeline.offer_line(lines[i / 2].raw);
          if (i % 29 == 3) CHECK(pipeline.offer_line("{\"v\":1,\"src\":").has_value());
          if (i % 31 == 7) CHECK(pipeline.offer_line(R"({"v":2,"src":"asr","type":"watermark","t":1})").has_value());
        }
        recorder.close();
        pipeline.finish();
        live = pipeline.transcript();
        const auto m = pipeline.metrics()->report();
        CHECK(m.decode_errors >= 1);
      }

      ManualClock clock;
      const auto replayed = run_replay(path, 0.0, EngineConfig{}, clock);
      CHECK(join_transcript(replayed.transcript) == join_transcript(live));
      std::uint64_t rejected_on_replay = 0;
      for (const auto& [reason, n] : replayed.metrics.events_rejected) rejected_on_replay += n;
      CHECK(rejected_on_replay == 0);
      CHECK(replayed.metrics.decode_errors == 0);
    }
  }

  TEST_CASE("recorded lines are byte-identical to what arrived") {
    testing_support::TempDir dir;
    const std::string line =
        R"({"conf":0.9, "v":1, "src":"asr","type":"token","seq":1,"t0":0,"t1":300,"text":"Hi","speaker":"S1","stability":"final"})";
    {
      Recorder rec(dir / "r.ndjson");
      rec.write(decode_event(line), line + "\r\n");
      rec.close();
    }
    const auto text = read_file(dir / "r.ndjson");
    CHECK(text.substr(0, line.size() + 1) == line + "\n");
    const auto lines = parse_session(text);
    REQUIRE(lines.size() == 4);
    for (std::size_t i = 1; i < 4; ++i) CHECK(std::get<WatermarkBeat>(lines[i].event.payload).t == 301);
  }

  TEST_CASE("recording silence yields watermarks only") {
    testing_support::TempDir dir;
    {
      Recorder rec(dir / "quiet.ndjson");
      for (auto src : {Source::asr, Source::affect, Source::gesture}) {
        for (Timestamp t = 100; t <= 1000; t += 300) {
          rec.write(IngestEvent{kIngestVersion, src, WatermarkBeat{src, t}}, "");
        }
      }
      rec.close();
    }
    const auto lines = load_session(dir / "quiet.ndjson");
    CHECK(lines.size() == 12 + 3);
    for (const auto& l : lines) CHECK(std::holds_alternative<WatermarkBeat>(l.event.payload));
    ManualClock clock;
    const auto r = run_replay(dir / "quiet.ndjson", 0.0, EngineConfig{}, clock);
    CHECK(r.transcript.empty());
    CHECK(r.metrics.segments_final == 0);
  }

  TEST_CASE("a removed line shows up as a sequence gap") {
    auto lines = parse_session(kConcernedSession);
    lines.erase(lines.begin() + 1);  // asr seq 2
    ManualClock clock;
    const auto r = run_replay(lines, 0.0, EngineConfig{}, clock);
    CHECK(r.metrics.events_rejected.at("gap") == 3);
    CHECK(r.metrics.events_rejected_by_source[static_cast<std::size_t>(Source::asr)] == 3);
    REQUIRE(r.transcript.size() == 1);
    CHECK(r.transcript[0] == "5230..5500|The");
  }

  TEST_CASE("storage failures surface as StorageFailure") {
    CHECK_THROWS_AS(Recorder("/nonexistent-dir/x/rec.ndjson"), StorageFailure);
    if (fs::exists("/dev/full")) {
      Recorder rec("/dev/full");
      const auto ev = IngestEvent{kIngestVersion, Source::asr, WatermarkBeat{Source::asr, 10}};
      CHECK_THROWS_AS(rec.write(ev, ""), StorageFailure);
      // Once failed, the recorder stays closed and never appends the tail.
      CHECK_NOTHROW(rec.write(ev, ""));
      CHECK_NOTHROW(rec.close());
    }
  }
}
