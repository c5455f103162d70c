#include "odlc/fog/server.hpp"

#include <chrono>
#include <system_error>

#include "odlc/core/errors.hpp"
#include "odlc/edge/wire.hpp"
#include "odlc/fog/query_api.hpp"
#include "odlc/util/log.hpp"

namespace odlc::fog {

namespace {
constexpr std::chrono::milliseconds kPoll{100};
}

SocketServer::~SocketServer() { stop(); }

void SocketServer::start() {
  if (acceptor_.joinable()) return;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void SocketServer::stop() {
  stop_.store(true);
  if (acceptor_.joinable()) acceptor_.join();
  std::list<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    workers.swap(workers_);
  }
  for (auto& t : workers)
    if (t.joinable()) t.join();
}

void SocketServer::accept_loop() {
  while (!stop_.load()) {
    std::optional<net::Fd> conn;
    try {
      conn = net::accept_for(listener_, kPoll);
    } catch (const Error& e) {
      log::warn("accept failed: {}", e.what());
      continue;
    }
    if (!conn) continue;
    connections_.fetch_add(1);
    std::lock_guard lock(mu_);
    workers_.emplace_back([this, fd = std::move(*conn)]() mutable {
      try {
        serve(std::move(fd));
      } catch (const std::exception& e) {
        log::warn("connection closed: {}", e.what());
      }
    });
  }
}

FrameServer::FrameServer(FogNode& fog, const std::string& host, std::uint16_t port)
    : SocketServer(net::listen_tcp(host, port)), fog_(fog) {}

FrameServer::~FrameServer() { stop(); }

void FrameServer::serve(net::Fd conn) {
  wire::FrameReader reader;
  while (!stopping()) {
    auto chunk = net::recv_some(conn, kPoll);
    if (!chunk) continue;
    if (chunk->empty()) return;
    count_in(chunk->size());
    reader.feed(*chunk);
    for (;;) {
      std::optional<std::string> frame;
      try {
        frame = reader.next();
      } catch (const MalformedFrame& e) {
        log::warn("dropping edge connection: {}", e.what());
        return;
      }
      if (!frame) break;
      try {
        const auto ack = fog_.ingest(*frame).ack;
        net::send_all(conn, ack);
        count_out(ack.size());
      } catch (const MalformedFrame& e) {
        log::warn("dropping edge connection: {}", e.what());
        return;
      } catch (const StorageFull& e) {
        log::warn("batch left unacked: {}", e.what());
      }
    }
  }
}

QueryServer::QueryServer(FogNode& fog, std::filesystem::path path)
    : SocketServer(net::listen_unix(path)), fog_(fog), path_(std::move(path)) {}

QueryServer::~QueryServer() {
  stop();
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

void QueryServer::serve(net::Fd conn) {
  std::string buffer;
  while (!stopping()) {
    auto chunk = net::recv_some(conn, kPoll);
    if (!chunk) continue;
    if (chunk->empty()) return;
    count_in(chunk->size());
    buffer += *chunk;
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      const std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto resp = handle_query_line(fog_, line);
      net::send_all(conn, resp);
      count_out(resp.size());
    }
  }
}

}  // namespace odlc::fog
