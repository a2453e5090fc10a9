// capfuse: live server, headless replay, session recorder and metrics probe.
//
// Exit codes: 0 ok, 2 usage or configuration error, 3 bind failure,
// 4 server unreachable.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <boost/asio.hpp>
#include <httplib.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "capfuse/config.hpp"
#include "capfuse/errors.hpp"
#include "capfuse/preferences.hpp"
#include "capfuse/replay.hpp"
#include "capfuse/server.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitBind = 3;
constexpr int kExitUnreachable = 4;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("capfuse");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("CAPFUSE_LOG")) {
    const auto parsed = spdlog::level::from_str(level);
    if (parsed != spdlog::level::off || std::string(level) == "off") spdlog::set_level(parsed);
  }
}

capfuse::EngineConfig config_from(const std::optional<std::string>& path) {
  return path ? capfuse::load_config(*path) : capfuse::EngineConfig{};
}

struct ServeArgs {
  std::uint16_t ingest_port = 0;
  std::uint16_t client_port = 0;
  std::optional<std::uint16_t> metrics_port;
  std::optional<std::string> config;
  std::optional<std::string> profiles_dir;
  std::optional<std::string> record;
  std::optional<std::string> transcript;
  std::string bind = "0.0.0.0";
};

int run_server(capfuse::ServerOptions options, const std::optional<std::string>& config_path,
               const std::optional<std::string>& profiles_dir) {
  capfuse::EngineConfig config;
  try {
    config = config_from(config_path);
  } catch (const capfuse::ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  }
  std::shared_ptr<capfuse::ProfileStore> store;
  if (options.client_port) {
    store = std::make_shared<capfuse::ProfileStore>(capfuse::ProfileStore::resolve_directory(profiles_dir));
  }
  try {
    capfuse::LiveServer server(std::move(options), std::move(config), std::move(store));
    server.start();
    server.run();
  } catch (const capfuse::BindError& e) {
    spdlog::error("{}", e.what());
    return kExitBind;
  } catch (const capfuse::StorageFailure& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  }
  return kExitOk;
}

struct ReplayArgs {
  std::string input;
  std::optional<std::string> out;
  double speed = 0.0;
  std::optional<std::string> config;
  std::string ingest_host = "127.0.0.1";
  std::optional<std::uint16_t> ingest_port;
};

int run_replay_cmd(const ReplayArgs& args) {
  namespace net = boost::asio;
  using tcp = net::ip::tcp;

  capfuse::EngineConfig config;
  try {
    config = config_from(args.config);
  } catch (const capfuse::ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  }

  net::io_context io;
  std::optional<tcp::socket> push;
  if (args.ingest_port) {
    try {
      tcp::resolver resolver(io);
      push.emplace(io);
      net::connect(*push, resolver.resolve(args.ingest_host, std::to_string(*args.ingest_port)));
    } catch (const boost::system::system_error& e) {
      spdlog::error("cannot reach ingest endpoint {}:{}: {}", args.ingest_host, *args.ingest_port, e.what());
      return kExitUnreachable;
    }
  }
  capfuse::ReplayTap tap;
  if (push) {
    tap = [&push](const capfuse::SessionLine& line) {
      const auto framed = line.raw + "\n";
      net::write(*push, net::buffer(framed));
    };
  }

  capfuse::SteadyClock clock;
  capfuse::ReplayResult result;
  try {
    result = capfuse::run_replay(args.input, args.speed, config, clock, tap);
  } catch (const capfuse::FileUnreadable& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const capfuse::ReplayError& e) {
    spdlog::error("{}: {}", args.input, e.what());
    return kExitUsage;
  } catch (const boost::system::system_error& e) {
    spdlog::error("ingest connection lost: {}", e.what());
    return kExitUnreachable;
  } catch (const capfuse::Error& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  }

  if (args.out) {
    std::ofstream out(*args.out, std::ios::binary | std::ios::trunc);
    out << capfuse::join_transcript(result.transcript);
    if (!out) {
      spdlog::error("cannot write transcript to {}", *args.out);
      return kExitUsage;
    }
  }
  std::cout << result.metrics.to_json().dump(2) << std::endl;
  return kExitOk;
}

int run_metrics_cmd(const std::string& host, std::uint16_t port) {
  httplib::Client client(host, port);
  client.set_connection_timeout(2);
  client.set_read_timeout(5);
  auto res = client.Get("/metrics");
  if (!res || res->status != 200) {
    spdlog::error("metrics endpoint {}:{} unreachable", host, port);
    return kExitUnreachable;
  }
  std::cout << res->body << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"capfuse: fuses ASR transcripts with tone and gesture cues into annotated captions"};
  app.require_subcommand(1);

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the live server");
  serve_cmd->add_option("--ingest-port", serve.ingest_port, "TCP port for NDJSON ingest sources")->required();
  serve_cmd->add_option("--client-port", serve.client_port, "WebSocket port for caption viewers")->required();
  serve_cmd->add_option("--metrics-port", serve.metrics_port, "HTTP port for GET /metrics");
  serve_cmd->add_option("--config", serve.config, "Engine configuration file");
  serve_cmd->add_option("--profiles-dir", serve.profiles_dir, "Directory of named viewer profiles");
  serve_cmd->add_option("--record", serve.record, "Also record accepted events to this session file");
  serve_cmd->add_option("--transcript", serve.transcript, "Write the final transcript here on shutdown");
  serve_cmd->add_option("--bind", serve.bind, "Listen address")->capture_default_str();

  ReplayArgs replay;
  auto* replay_cmd = app.add_subcommand("replay", "Replay a recorded session headlessly");
  replay_cmd->add_option("--input", replay.input, "Session file (NDJSON)")->required();
  replay_cmd->add_option("--out", replay.out, "Transcript output path");
  replay_cmd->add_option("--speed", replay.speed, "Playback speed; 0 replays as fast as possible")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  replay_cmd->add_option("--config", replay.config, "Engine configuration file");
  replay_cmd->add_option("--ingest-host", replay.ingest_host, "Also push the session to a live server")
      ->capture_default_str();
  replay_cmd->add_option("--ingest-port", replay.ingest_port, "Ingest port of the live server to push to");

  ServeArgs record;
  auto* record_cmd = app.add_subcommand("record", "Accept ingest sources and record them to a session file");
  record_cmd->add_option("--ingest-port", record.ingest_port, "TCP port for NDJSON ingest sources")->required();
  record_cmd->add_option("--out", record.record, "Session file to write")->required();
  record_cmd->add_option("--transcript", record.transcript, "Write the final transcript here on shutdown");
  record_cmd->add_option("--config", record.config, "Engine configuration file");
  record_cmd->add_option("--metrics-port", record.metrics_port, "HTTP port for GET /metrics");
  record_cmd->add_option("--bind", record.bind, "Listen address")->capture_default_str();

  std::string metrics_host = "127.0.0.1";
  std::uint16_t metrics_port = 0;
  auto* metrics_cmd = app.add_subcommand("metrics", "Print the metrics of a running server");
  metrics_cmd->add_option("--metrics-port", metrics_port, "Metrics port of the server")->required();
  metrics_cmd->add_option("--host", metrics_host, "Server host")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (serve_cmd->parsed() || record_cmd->parsed()) {
    const auto& a = serve_cmd->parsed() ? serve : record;
    capfuse::ServerOptions options;
    options.bind_address = a.bind;
    options.ingest_port = a.ingest_port;
    if (serve_cmd->parsed()) options.client_port = a.client_port;
    options.metrics_port = a.metrics_port;
    if (a.record) options.record_path = *a.record;
    if (a.transcript) options.transcript_path = *a.transcript;
    return run_server(std::move(options), a.config, a.profiles_dir);
  }
  if (replay_cmd->parsed()) return run_replay_cmd(replay);
  if (metrics_cmd->parsed()) return run_metrics_cmd(metrics_host, metrics_port);
  return kExitUsage;
}
