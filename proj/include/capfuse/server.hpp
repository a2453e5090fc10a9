#pragma once

// Live server: NDJSON ingest over TCP, viewer clients over WebSocket, and an
// HTTP metrics endpoint. Networking runs on one I/O thread, which is also
// the only thread touching the pipeline; metrics are served from their own
// thread.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "capfuse/config.hpp"
#include "capfuse/delivery.hpp"
#include "capfuse/errors.hpp"
#include "capfuse/metrics.hpp"

namespace capfuse {

class BindError : public Error {
 public:
  using Error::Error;
};

struct ServerOptions {
  std::string bind_address = "0.0.0.0";
  /// 0 picks an ephemeral port.
  std::uint16_t ingest_port = 0;
  /// Empty disables the viewer endpoint (record-only mode).
  std::optional<std::uint16_t> client_port;
  std::optional<std::uint16_t> metrics_port;
  std::optional<std::filesystem::path> record_path;
  std::optional<std::filesystem::path> transcript_path;
  std::int64_t tick_ms = 100;
  std::int64_t ping_ms = 15000;
  /// How long shutdown waits for viewers to drain their queues.
  std::int64_t drain_ms = 1000;
  bool handle_signals = true;
};

class LiveServer {
 public:
  LiveServer(ServerOptions options, EngineConfig config, std::shared_ptr<ProfileStore> store = nullptr);
  ~LiveServer();

  LiveServer(const LiveServer&) = delete;
  LiveServer& operator=(const LiveServer&) = delete;

  /// Binds every endpoint. Throws BindError.
  void start();

  /// Serves until stop() or a signal, then shuts down gracefully: open
  /// segments are finalized and published, the recording is closed and the
  /// transcript written.
  void run();

  /// Thread-safe.
  void stop();

  std::uint16_t ingest_port() const;
  std::optional<std::uint16_t> client_port() const;
  std::optional<std::uint16_t> metrics_port() const;

  std::shared_ptr<Metrics> metrics() const;
  Hub& hub();

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace capfuse
