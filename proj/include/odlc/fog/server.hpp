#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <mutex>
#include <string>
#include <thread>

#include "odlc/fog/fog_node.hpp"
#include "odlc/util/socket.hpp"

namespace odlc::fog {

// Accept loop plus one thread per connection. Subclasses handle a single
// connection until the peer closes it or stop() is called.
class SocketServer {
 public:
  virtual ~SocketServer();
  SocketServer(const SocketServer&) = delete;
  SocketServer& operator=(const SocketServer&) = delete;

  void start();
  void stop();
  bool stopping() const noexcept { return stop_.load(); }
  std::uint64_t connections() const noexcept { return connections_.load(); }
  std::uint64_t bytes_in() const noexcept { return bytes_in_.load(); }
  std::uint64_t bytes_out() const noexcept { return bytes_out_.load(); }

 protected:
  explicit SocketServer(net::Fd listener) : listener_(std::move(listener)) {}
  virtual void serve(net::Fd conn) = 0;
  const net::Fd& listener() const noexcept { return listener_; }
  void count_in(std::size_t n) noexcept { bytes_in_.fetch_add(n); }
  void count_out(std::size_t n) noexcept { bytes_out_.fetch_add(n); }

 private:
  void accept_loop();

  net::Fd listener_;
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> connections_{0};
  std::atomic<std::uint64_t> bytes_in_{0};
  std::atomic<std::uint64_t> bytes_out_{0};
  std::thread acceptor_;
  std::mutex mu_;
  std::list<std::thread> workers_;
};

// Edge wire protocol over TCP. Each data frame is ingested and answered with
// its ack; a malformed stream closes the connection, a full store leaves the
// batch unacked so the edge retries it.
class FrameServer : public SocketServer {
 public:
  // Port 0 picks a free port. Throws AddressInUse.
  FrameServer(FogNode& fog, const std::string& host, std::uint16_t port);
  ~FrameServer() override;
  std::uint16_t port() const { return net::local_port(listener()); }

 protected:
  void serve(net::Fd conn) override;

 private:
  FogNode& fog_;
};

// Line-delimited JSON queries over a Unix domain socket.
class QueryServer : public SocketServer {
 public:
  // Throws AddressInUse.
  QueryServer(FogNode& fog, std::filesystem::path path);
  ~QueryServer() override;
  const std::filesystem::path& path() const noexcept { return path_; }

 protected:
  void serve(net::Fd conn) override;

 private:
  FogNode& fog_;
  std::filesystem::path path_;
};

}  // namespace odlc::fog
