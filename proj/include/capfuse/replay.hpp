#pragma once

// Deterministic session replay and recording.

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "capfuse/clock.hpp"
#include "capfuse/config.hpp"
#include "capfuse/ingest.hpp"
#include "capfuse/metrics.hpp"

namespace capfuse {

struct SessionLine {
  std::size_t line_no = 0;  // 1-based; 0 for synthesized terminal watermarks
  std::string raw;
  IngestEvent event;
};

/// Decodes a whole session file. Throws FileUnreadable, or ReplayError on the
/// first undecodable line. Blank lines are skipped.
std::vector<SessionLine> load_session(const std::filesystem::path& path);
std::vector<SessionLine> parse_session(std::string_view text);

/// One watermark per source at (max end time over all events) + 1; the
/// prosody source is included only when `with_prosody`.
std::vector<SessionLine> terminal_watermarks(const std::vector<SessionLine>& lines, bool with_prosody);

bool has_prosody_frames(const std::vector<SessionLine>& lines);

/// Emits the session lines in file order followed by the terminal watermarks.
/// With speed s > 0 the gap between consecutive emissions is the start-time
/// difference divided by s; speed 0 never sleeps.
class Replayer {
 public:
  Replayer(std::vector<SessionLine> lines, double speed, Clock& clock);

  void run(const std::function<void(const SessionLine&)>& emit);

  /// Wall-clock microseconds at which session time `t` is scheduled; empty
  /// at speed 0 or before run() starts.
  std::optional<std::int64_t> wall_time_of(Timestamp t) const;

  double speed() const { return speed_; }

 private:
  std::vector<SessionLine> lines_;
  double speed_;
  Clock& clock_;
  std::optional<std::int64_t> start_us_;
  Timestamp base_t_ = 0;
};

struct ReplayResult {
  std::vector<std::string> transcript;
  MetricsReport metrics;
};

/// Runs the full pipeline headlessly over a session file. `tap`, if set,
/// sees every line (terminal watermarks included) just before the pipeline.
using ReplayTap = std::function<void(const SessionLine&)>;
ReplayResult run_replay(const std::filesystem::path& path, double speed, const EngineConfig& config, Clock& clock,
                        const ReplayTap& tap = {});
ReplayResult run_replay(std::vector<SessionLine> lines, double speed, const EngineConfig& config, Clock& clock,
                        const ReplayTap& tap = {});

/// Transcript bytes: one line per final segment, each LF-terminated.
std::string join_transcript(const std::vector<std::string>& lines);

/// Writes accepted events verbatim in arrival order. close() appends the
/// terminal watermarks; a file without them was cut short.
class Recorder {
 public:
  explicit Recorder(const std::filesystem::path& path);
  ~Recorder();

  Recorder(const Recorder&) = delete;
  Recorder& operator=(const Recorder&) = delete;

  /// Throws StorageFailure when the write fails.
  void write(const IngestEvent& event, std::string_view raw);
  void close();

 private:
  void put(std::string_view line);

  std::filesystem::path path_;
  std::ofstream out_;
  Timestamp max_end_ = 0;
  bool saw_prosody_ = false;
  bool closed_ = false;
};

}  // namespace capfuse
