#include "capfuse/server.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "capfuse/clock.hpp"
#include "capfuse/pipeline.hpp"
#include "capfuse/replay.hpp"

namespace capfuse {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {
constexpr std::size_t kMaxIngestLine = 1 << 20;
}

class IngestConnection;
class ViewerConnection;

struct LiveServer::Impl {
  Impl(ServerOptions o, EngineConfig c, std::shared_ptr<ProfileStore> s)
      : opts(std::move(o)), config(std::move(c)), hub(std::move(s)) {}

  void start();
  void shutdown();
  void finish_shutdown(std::int64_t deadline_us);
  void accept_ingest();
  void accept_viewer();
  void arm_tick();
  void arm_ping();
  void on_line(std::string_view line);
  Timestamp session_now() const;

  ServerOptions opts;
  EngineConfig config;
  SteadyClock clock;
  std::shared_ptr<Metrics> metrics = std::make_shared<Metrics>();
  Hub hub;
  std::unique_ptr<Pipeline> pipeline;
  std::unique_ptr<Recorder> recorder;

  net::io_context io;
  tcp::acceptor ingest_acceptor{io};
  std::optional<tcp::acceptor> client_acceptor;
  net::steady_timer tick_timer{io};
  net::steady_timer ping_timer{io};
  net::steady_timer drain_timer{io};
  net::signal_set signals{io};

  std::unique_ptr<httplib::Server> http;
  std::thread http_thread;
  std::uint16_t bound_ingest_port = 0;
  std::optional<std::uint16_t> bound_client_port;
  std::optional<std::uint16_t> bound_metrics_port;

  std::set<std::shared_ptr<IngestConnection>> ingest_conns;
  std::map<Hub::ConnectionId, std::weak_ptr<ViewerConnection>> viewers;

  std::optional<Timestamp> latest_t;
  std::int64_t latest_wall_us = 0;
  bool started = false;
  bool stopping = false;
};

class IngestConnection : public std::enable_shared_from_this<IngestConnection> {
 public:
  IngestConnection(tcp::socket socket, LiveServer::Impl& impl)
      : socket_(std::move(socket)), buffer_(kMaxIngestLine), impl_(impl) {}

  void start() { read(); }

  /// Processes complete lines already received, then closes.
  void drain_and_close() {
    consume_complete_lines();
    boost::system::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
  }

 private:
  void read() {
    net::async_read_until(socket_, buffer_, '\n', [self = shared_from_this()](boost::system::error_code ec, std::size_t n) {
      self->on_read(ec, n);
    });
  }

  void on_read(boost::system::error_code ec, std::size_t n) {
    if (ec) {
      if (impl_.stopping) return;
      if (ec != net::error::eof && ec != net::error::operation_aborted) {
        spdlog::warn("ingest connection error: {}", ec.message());
      }
      consume_complete_lines();
      impl_.metrics->source_disconnected();
      spdlog::info("ingest source disconnected");
      impl_.ingest_conns.erase(shared_from_this());
      return;
    }
    take_line(n);
    read();
  }

  void take_line(std::size_t n) {
    std::string line(net::buffers_begin(buffer_.data()), net::buffers_begin(buffer_.data()) + static_cast<std::ptrdiff_t>(n));
    buffer_.consume(n);
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    impl_.on_line(line);
  }

  void consume_complete_lines() {
    for (;;) {
      const auto data = buffer_.data();
      auto begin = net::buffers_begin(data);
      auto end = net::buffers_end(data);
      auto nl = std::find(begin, end, '\n');
      if (nl == end) return;
      take_line(static_cast<std::size_t>(nl - begin) + 1);
    }
  }

  tcp::socket socket_;
  net::streambuf buffer_;
  LiveServer::Impl& impl_;
};

class ViewerConnection : public std::enable_shared_from_this<ViewerConnection> {
 public:
  ViewerConnection(tcp::socket socket, LiveServer::Impl& impl) : ws_(std::move(socket)), impl_(impl) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  void pump() {
    if (done_ || writing_ || closing_) return;
    if (auto frame = impl_.hub.pop(id_)) {
      writing_ = true;
      out_ = std::move(*frame);
      ws_.text(true);
      ws_.async_write(net::buffer(out_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
        self->writing_ = false;
        if (ec) return self->finish();
        self->pump();
      });
    } else if (impl_.hub.wants_close(id_)) {
      close();
    }
  }

  void close() {
    if (done_ || closing_) return;
    closing_ = true;
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) { self->finish(); });
  }

  bool idle() const { return done_ || (!writing_ && !impl_.hub.has_pending(id_)); }

 private:
  void on_accept(beast::error_code ec) {
    if (ec || impl_.stopping) return;
    id_ = impl_.hub.connect();
    accepted_ = true;
    impl_.viewers[id_] = weak_from_this();
    read();
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) return finish();
    const auto text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    impl_.hub.receive(id_, text);
    pump();
    if (!done_ && !closing_) read();
  }

  void finish() {
    if (done_) return;
    done_ = true;
    if (accepted_) {
      impl_.hub.disconnect(id_);
      impl_.viewers.erase(id_);
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  LiveServer::Impl& impl_;
  Hub::ConnectionId id_ = 0;
  std::string out_;
  bool accepted_ = false;
  bool writing_ = false;
  bool closing_ = false;
  bool done_ = false;
};

namespace {

std::uint16_t bind_acceptor(tcp::acceptor& acceptor, const std::string& address, std::uint16_t port, const char* what) {
  boost::system::error_code ec;
  const auto addr = net::ip::make_address(address, ec);
  if (ec) throw BindError(std::string("invalid bind address '") + address + "'");
  const tcp::endpoint ep(addr, port);
  acceptor.open(ep.protocol(), ec);
  if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acceptor.bind(ep, ec);
  if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw BindError(std::string("cannot bind ") + what + " port " + std::to_string(port) + ": " + ec.message());
  return acceptor.local_endpoint().port();
}

}  // namespace

void LiveServer::Impl::start() {
  pipeline = std::make_unique<Pipeline>(config, config.ingest.prosody_lane, metrics, clock);
  pipeline->on_emission([this](const Emission& e) { hub.publish(e); });
  if (opts.record_path) {
    recorder = std::make_unique<Recorder>(*opts.record_path);
    pipeline->on_accept([this](const IngestEvent& ev, std::string_view raw) {
      if (!recorder) return;
      try {
        recorder->write(ev, raw);
      } catch (const StorageFailure& e) {
        spdlog::error("recording stopped: {}", e.what());
        recorder.reset();
      }
    });
  }
  hub.set_wakeup([this](Hub::ConnectionId id) {
    net::post(io, [this, id] {
      auto it = viewers.find(id);
      if (it == viewers.end()) return;
      if (auto v = it->second.lock()) v->pump();
    });
  });

  bound_ingest_port = bind_acceptor(ingest_acceptor, opts.bind_address, opts.ingest_port, "ingest");
  if (opts.client_port) {
    client_acceptor.emplace(io);
    bound_client_port = bind_acceptor(*client_acceptor, opts.bind_address, *opts.client_port, "client");
  }
  if (opts.metrics_port) {
    http = std::make_unique<httplib::Server>();
    auto m = metrics;
    http->Get("/metrics", [m](const httplib::Request&, httplib::Response& res) {
      res.set_content(m->report().to_json().dump(2), "application/json");
    });
    int port = *opts.metrics_port;
    if (port == 0) {
      port = http->bind_to_any_port(opts.bind_address);
    } else if (!http->bind_to_port(opts.bind_address, port)) {
      port = -1;
    }
    if (port <= 0) throw BindError("cannot bind metrics port " + std::to_string(*opts.metrics_port));
    bound_metrics_port = static_cast<std::uint16_t>(port);
    http_thread = std::thread([h = http.get()] { h->listen_after_bind(); });
  }

  accept_ingest();
  if (client_acceptor) accept_viewer();
  arm_tick();
  if (client_acceptor) arm_ping();
  if (opts.handle_signals) {
    signals.add(SIGINT);
    signals.add(SIGTERM);
    signals.async_wait([this](boost::system::error_code ec, int sig) {
      if (ec) return;
      spdlog::info("signal {} received; shutting down", sig);
      shutdown();
    });
  }
  started = true;
  spdlog::info("capfuse serving: ingest_port={} client_port={} metrics_port={} record={}", bound_ingest_port,
               bound_client_port ? std::to_string(*bound_client_port) : "off",
               bound_metrics_port ? std::to_string(*bound_metrics_port) : "off",
               opts.record_path ? opts.record_path->string() : "off");
}

void LiveServer::Impl::accept_ingest() {
  ingest_acceptor.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
    if (ec || stopping) return;
    boost::system::error_code ignored;
    socket.set_option(tcp::no_delay(true), ignored);
    auto conn = std::make_shared<IngestConnection>(std::move(socket), *this);
    ingest_conns.insert(conn);
    spdlog::info("ingest source connected");
    conn->start();
    accept_ingest();
  });
}

void LiveServer::Impl::accept_viewer() {
  client_acceptor->async_accept([this](boost::system::error_code ec, tcp::socket socket) {
    if (ec || stopping) return;
    std::make_shared<ViewerConnection>(std::move(socket), *this)->start();
    accept_viewer();
  });
}

Timestamp LiveServer::Impl::session_now() const {
  return *latest_t + (clock.now_us() - latest_wall_us) / 1000;
}

void LiveServer::Impl::arm_tick() {
  tick_timer.expires_after(std::chrono::milliseconds(opts.tick_ms));
  tick_timer.async_wait([this](boost::system::error_code ec) {
    if (ec || stopping) return;
    if (latest_t) pipeline->tick(session_now());
    arm_tick();
  });
}

void LiveServer::Impl::arm_ping() {
  ping_timer.expires_after(std::chrono::milliseconds(opts.ping_ms));
  ping_timer.async_wait([this](boost::system::error_code ec) {
    if (ec || stopping) return;
    hub.ping_all();
    arm_ping();
  });
}

void LiveServer::Impl::on_line(std::string_view line) {
  if (line.find_first_not_of(" \t") == std::string_view::npos) return;
  IngestEvent event;
  try {
    event = decode_event(line);
  } catch (const DecodeError& e) {
    metrics->decode_error(to_string(e.kind()));
    spdlog::warn("ingest line rejected: {}", e.what());
    return;
  }
  const auto verdict = pipeline->offer(event, line);
  if (!verdict.accepted) {
    spdlog::debug("{} event rejected: {}", to_string(event.source), to_string(verdict.reason));
    return;
  }
  const auto t = std::max(event.start_time(), event.end_time());
  if (!latest_t || t > *latest_t) {
    latest_t = t;
    latest_wall_us = clock.now_us();
  }
}

void LiveServer::Impl::shutdown() {
  if (stopping) return;
  stopping = true;
  boost::system::error_code ec;
  ingest_acceptor.close(ec);
  if (client_acceptor) client_acceptor->close(ec);
  tick_timer.cancel();
  ping_timer.cancel();
  signals.cancel(ec);

  for (const auto& conn : std::vector(ingest_conns.begin(), ingest_conns.end())) conn->drain_and_close();
  ingest_conns.clear();

  pipeline->finish();
  if (recorder) {
    try {
      recorder->close();
    } catch (const StorageFailure& e) {
      spdlog::error("recording left incomplete: {}", e.what());
    }
    recorder.reset();
  }
  if (opts.transcript_path) {
    std::ofstream out(*opts.transcript_path, std::ios::binary | std::ios::trunc);
    out << join_transcript(pipeline->transcript());
    if (!out) spdlog::error("cannot write transcript to {}", opts.transcript_path->string());
  }
  const auto report = metrics->report();
  spdlog::info("session finished: segments_final={} p95_latency_ms={:.1f}", report.segments_final,
               report.finalization_latency_ms.p95);

  finish_shutdown(clock.now_us() + opts.drain_ms * 1000);
}

void LiveServer::Impl::finish_shutdown(std::int64_t deadline_us) {
  bool idle = true;
  for (auto& [id, weak] : viewers) {
    if (auto v = weak.lock(); v && !v->idle()) idle = false;
  }
  if (!idle && clock.now_us() < deadline_us) {
    drain_timer.expires_after(std::chrono::milliseconds(20));
    drain_timer.async_wait([this, deadline_us](boost::system::error_code) { finish_shutdown(deadline_us); });
    return;
  }
  for (auto& [id, weak] : std::map(viewers)) {
    if (auto v = weak.lock()) v->close();
  }
  // Give close handshakes a moment, then stop regardless.
  drain_timer.expires_after(std::chrono::milliseconds(200));
  drain_timer.async_wait([this](boost::system::error_code) { io.stop(); });
}

LiveServer::LiveServer(ServerOptions options, EngineConfig config, std::shared_ptr<ProfileStore> store)
    : impl_(std::make_unique<Impl>(std::move(options), std::move(config), std::move(store))) {}

LiveServer::~LiveServer() {
  if (impl_->http) impl_->http->stop();
  if (impl_->http_thread.joinable()) impl_->http_thread.join();
}

void LiveServer::start() { impl_->start(); }

void LiveServer::run() {
  impl_->io.run();
  if (impl_->http) impl_->http->stop();
  if (impl_->http_thread.joinable()) impl_->http_thread.join();
}

void LiveServer::stop() {
  net::post(impl_->io, [impl = impl_.get()] { impl->shutdown(); });
}

std::uint16_t LiveServer::ingest_port() const { return impl_->bound_ingest_port; }

std::optional<std::uint16_t> LiveServer::client_port() const { return impl_->bound_client_port; }

std::optional<std::uint16_t> LiveServer::metrics_port() const { return impl_->bound_metrics_port; }

std::shared_ptr<Metrics> LiveServer::metrics() const { return impl_->metrics; }

Hub& LiveServer::hub() { return impl_->hub; }

}  // namespace capfuse
