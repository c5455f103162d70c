#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace odlc::net {

// Owning file descriptor.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) noexcept : fd_(fd) {}
  ~Fd() { reset(); }
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;

  int get() const noexcept { return fd_; }
  explicit operator bool() const noexcept { return fd_ >= 0; }
  void reset() noexcept;

 private:
  int fd_ = -1;
};

// "host:port"; throws ConfigError.
std::pair<std::string, std::uint16_t> split_host_port(std::string_view address);

// Listening sockets. Throw AddressInUse when the address is taken, IoError otherwise.
Fd listen_tcp(const std::string& host, std::uint16_t port);
Fd listen_unix(const std::filesystem::path& path);
std::uint16_t local_port(const Fd& fd);

// Throw FogUnreachable.
Fd connect_tcp(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);
Fd connect_unix(const std::filesystem::path& path);

// Throws ConnectionLost.
void send_all(const Fd& fd, std::string_view bytes);
// Waits up to `timeout` for readability, then reads what is available. Empty
// optional on timeout; empty string on orderly shutdown. Throws ConnectionLost.
std::optional<std::string> recv_some(const Fd& fd, std::chrono::milliseconds timeout);

// Accepts one pending connection, waiting up to `timeout`.
std::optional<Fd> accept_for(const Fd& listener, std::chrono::milliseconds timeout);

}  // namespace odlc::net
