#include "capfuse/replay.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

#include "capfuse/errors.hpp"
#include "capfuse/pipeline.hpp"

namespace capfuse {

std::vector<SessionLine> parse_session(std::string_view text) {
  std::vector<SessionLine> lines;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (raw.find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      lines.push_back(SessionLine{line_no, std::string(raw), decode_event(raw)});
    } catch (const DecodeError& e) {
      throw ReplayError(line_no, e);
    }
  }
  return lines;
}

std::vector<SessionLine> load_session(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileUnreadable(path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw FileUnreadable(path.string());
  return parse_session(buf.str());
}

bool has_prosody_frames(const std::vector<SessionLine>& lines) {
  return std::any_of(lines.begin(), lines.end(), [](const SessionLine& l) {
    return std::holds_alternative<ProsodyFrame>(l.event.payload);
  });
}

std::vector<SessionLine> terminal_watermarks(const std::vector<SessionLine>& lines, bool with_prosody) {
  Timestamp max_end = 0;
  for (const auto& l : lines) max_end = std::max(max_end, l.event.end_time());
  std::vector<SessionLine> out;
  for (auto src : kAllSources) {
    if (src == Source::prosody && !with_prosody) continue;
    IngestEvent ev{kIngestVersion, src, WatermarkBeat{src, max_end + 1}};
    out.push_back(SessionLine{0, encode_event(ev), ev});
  }
  return out;
}

Replayer::Replayer(std::vector<SessionLine> lines, double speed, Clock& clock)
    : lines_(std::move(lines)), speed_(speed), clock_(clock) {
  if (!(speed_ >= 0.0) || !std::isfinite(speed_)) throw Error("replay speed must be a finite non-negative number");
  auto tail = terminal_watermarks(lines_, has_prosody_frames(lines_));
  lines_.insert(lines_.end(), std::make_move_iterator(tail.begin()), std::make_move_iterator(tail.end()));
}

std::optional<std::int64_t> Replayer::wall_time_of(Timestamp t) const {
  if (speed_ == 0.0 || !start_us_) return std::nullopt;
  return *start_us_ + static_cast<std::int64_t>(std::llround(static_cast<double>(t - base_t_) * 1000.0 / speed_));
}

void Replayer::run(const std::function<void(const SessionLine&)>& emit) {
  if (lines_.empty()) return;
  base_t_ = lines_.front().event.start_time();
  start_us_ = clock_.now_us();
  Timestamp virtual_t = base_t_;
  for (const auto& line : lines_) {
    virtual_t = std::max(virtual_t, line.event.start_time());
    if (speed_ > 0.0) clock_.sleep_until_us(*wall_time_of(virtual_t));
    emit(line);
  }
}

std::string join_transcript(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

ReplayResult run_replay(std::vector<SessionLine> lines, double speed, const EngineConfig& config, Clock& clock,
                        const ReplayTap& tap) {
  const bool prosody = has_prosody_frames(lines);
  Replayer replayer(std::move(lines), speed, clock);
  Pipeline pipeline(config, prosody, std::make_shared<Metrics>(), clock);
  if (speed > 0.0) {
    pipeline.set_session_to_wall([&replayer](Timestamp t) { return replayer.wall_time_of(t); });
  }
  replayer.run([&pipeline, &tap](const SessionLine& line) {
    if (tap) tap(line);
    pipeline.offer(line.event, line.raw);
  });
  pipeline.finish();
  return ReplayResult{pipeline.transcript(), pipeline.metrics()->report()};
}

ReplayResult run_replay(const std::filesystem::path& path, double speed, const EngineConfig& config, Clock& clock,
                        const ReplayTap& tap) {
  return run_replay(load_session(path), speed, config, clock, tap);
}

Recorder::Recorder(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw StorageFailure("cannot open " + path.string() + " for writing");
}

Recorder::~Recorder() {
  try {
    close();
  } catch (const std::exception& e) {
    spdlog::error("recording {} left incomplete: {}", path_.string(), e.what());
  }
}

void Recorder::put(std::string_view line) {
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.put('\n');
  out_.flush();
  if (!out_) {
    // No terminal watermarks on a file we could not finish writing.
    closed_ = true;
    throw StorageFailure("write to " + path_.string() + " failed");
  }
}

void Recorder::write(const IngestEvent& event, std::string_view raw) {
  if (closed_) return;
  std::string_view line = raw;
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  if (line.empty()) {
    put(encode_event(event));
  } else {
    put(line);
  }
  max_end_ = std::max(max_end_, event.end_time());
  if (std::holds_alternative<ProsodyFrame>(event.payload)) saw_prosody_ = true;
}

void Recorder::close() {
  if (closed_) return;
  closed_ = true;
  for (auto src : kAllSources) {
    if (src == Source::prosody && !saw_prosody_) continue;
    put(encode_event(IngestEvent{kIngestVersion, src, WatermarkBeat{src, max_end_ + 1}}));
  }
  out_.close();
}

}  // namespace capfuse
