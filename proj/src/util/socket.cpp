#include "odlc/util/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "odlc/core/errors.hpp"

namespace odlc::net {

namespace {

std::string last_error() { return std::strerror(errno); }

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string h = host.empty() || host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || !res)
    throw FogUnreachable("cannot resolve host '" + host + "'");
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

sockaddr_un unix_addr(const std::filesystem::path& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  const auto s = path.string();
  if (s.size() >= sizeof(addr.sun_path)) throw ConfigError("socket path too long: " + s);
  std::memcpy(addr.sun_path, s.c_str(), s.size() + 1);
  return addr;
}

bool wait_for(int fd, short events, std::chrono::milliseconds timeout) {
  pollfd p{fd, events, 0};
  for (;;) {
    const int r = ::poll(&p, 1, static_cast<int>(std::max<std::int64_t>(0, timeout.count())));
    if (r < 0 && errno == EINTR) continue;
    if (r < 0) throw ConnectionLost("poll failed: " + last_error());
    return r > 0;
  }
}

}  // namespace

void Fd::reset() noexcept {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

std::pair<std::string, std::uint16_t> split_host_port(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos) throw ConfigError("address must be host:port, got '" + std::string(address) + "'");
  const std::string port_text(address.substr(colon + 1));
  char* end = nullptr;
  const long port = std::strtol(port_text.c_str(), &end, 10);
  if (port_text.empty() || *end != '\0' || port < 0 || port > 65535)
    throw ConfigError("bad port in address '" + std::string(address) + "'");
  return {std::string(address.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

Fd listen_tcp(const std::string& host, std::uint16_t port) {
  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!fd) throw IoError("socket: " + last_error());
  const int one = 1;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr;
  try {
    addr = resolve(host.empty() ? "0.0.0.0" : host, port);
  } catch (const FogUnreachable& e) {
    throw ConfigError(e.what());
  }
  if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    if (errno == EADDRINUSE) throw AddressInUse(host + ":" + std::to_string(port) + " is already in use");
    throw IoError("bind " + host + ":" + std::to_string(port) + ": " + last_error());
  }
  if (::listen(fd.get(), 64) != 0) throw IoError("listen: " + last_error());
  return fd;
}

Fd listen_unix(const std::filesystem::path& path) {
  const auto addr = unix_addr(path);
  // A stale socket file from a dead server is replaced; a live one is not.
  if (std::filesystem::exists(path)) {
    Fd probe(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (probe && ::connect(probe.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0)
      throw AddressInUse(path.string() + " is already in use");
    std::filesystem::remove(path);
  }
  Fd fd(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!fd) throw IoError("socket: " + last_error());
  if (::bind(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    if (errno == EADDRINUSE) throw AddressInUse(path.string() + " is already in use");
    throw IoError("bind " + path.string() + ": " + last_error());
  }
  if (::listen(fd.get(), 64) != 0) throw IoError("listen: " + last_error());
  return fd;
}

std::uint16_t local_port(const Fd& fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) throw IoError("getsockname: " + last_error());
  return ntohs(addr.sin_port);
}

Fd connect_tcp(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
  const auto addr = resolve(host, port);
  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0));
  if (!fd) throw FogUnreachable("socket: " + last_error());
  const std::string where = host + ":" + std::to_string(port);
  if (::connect(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    if (errno != EINPROGRESS) throw FogUnreachable("connect " + where + ": " + last_error());
    if (!wait_for(fd.get(), POLLOUT, timeout)) throw FogUnreachable("connect " + where + ": timed out");
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) throw FogUnreachable("connect " + where + ": " + std::strerror(err));
  }
  const int flags = ::fcntl(fd.get(), F_GETFL);
  ::fcntl(fd.get(), F_SETFL, flags & ~O_NONBLOCK);
  const int one = 1;
  ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

Fd connect_unix(const std::filesystem::path& path) {
  const auto addr = unix_addr(path);
  Fd fd(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!fd) throw FogUnreachable("socket: " + last_error());
  if (::connect(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0)
    throw FogUnreachable("connect " + path.string() + ": " + last_error());
  return fd;
}

void send_all(const Fd& fd, std::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd.get(), bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw ConnectionLost("send: " + last_error());
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::optional<std::string> recv_some(const Fd& fd, std::chrono::milliseconds timeout) {
  if (!wait_for(fd.get(), POLLIN, timeout)) return std::nullopt;
  char buf[64 * 1024];
  for (;;) {
    const ssize_t n = ::recv(fd.get(), buf, sizeof(buf), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) throw ConnectionLost("recv: " + last_error());
    return std::string(buf, static_cast<std::size_t>(n));
  }
}

std::optional<Fd> accept_for(const Fd& listener, std::chrono::milliseconds timeout) {
  if (!wait_for(listener.get(), POLLIN, timeout)) return std::nullopt;
  const int fd = ::accept4(listener.get(), nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) return std::nullopt;
  return Fd(fd);
}

}  // namespace odlc::net
