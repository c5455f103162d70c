#pragma once

#include <chrono>
#include <string>

#include "odlc/edge/transmitter.hpp"
#include "odlc/util/socket.hpp"

namespace odlc::edge {

// Connection to a fog node's frame listener.
class TcpConnection : public Connection {
 public:
  // "host:port". Throws FogUnreachable or ConfigError.
  explicit TcpConnection(const std::string& address,
                         std::chrono::milliseconds connect_timeout = std::chrono::seconds(5));

  void send(std::string_view frame) override;
  std::optional<wire::FrameHeader> receive_ack(std::chrono::milliseconds timeout) override;

 private:
  net::Fd fd_;
  wire::FrameReader reader_;
};

}  // namespace odlc::edge
