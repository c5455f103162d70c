#include "odlc/edge/tcp_connection.hpp"

#include "odlc/core/errors.hpp"

namespace odlc::edge {

TcpConnection::TcpConnection(const std::string& address, std::chrono::milliseconds connect_timeout) {
  const auto [host, port] = net::split_host_port(address);
  fd_ = net::connect_tcp(host, port, connect_timeout);
}

void TcpConnection::send(std::string_view frame) { net::send_all(fd_, frame); }

std::optional<wire::FrameHeader> TcpConnection::receive_ack(std::chrono::milliseconds timeout) {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + timeout;
  for (;;) {
    try {
      if (auto frame = reader_.next()) return wire::decode_ack_frame(*frame);
    } catch (const MalformedFrame& e) {
      throw ConnectionLost(std::string("bad ack stream: ") + e.what());
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
    if (left.count() <= 0) return std::nullopt;
    auto chunk = net::recv_some(fd_, left);
    if (!chunk) return std::nullopt;
    if (chunk->empty()) throw ConnectionLost("fog node closed the connection");
    reader_.feed(*chunk);
  }
}

}  // namespace odlc::edge
