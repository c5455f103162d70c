#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "odlc/edge/staging.hpp"
#include "odlc/edge/wire.hpp"

namespace odlc::edge {

// A byte pipe to the fog node carrying data frames out and ack frames back.
class Connection {
 public:
  virtual ~Connection() = default;
  // Throws ConnectionLost.
  virtual void send(std::string_view frame) = 0;
  // Next ack, or nullopt once `timeout` passes. Throws ConnectionLost.
  virtual std::optional<wire::FrameHeader> receive_ack(std::chrono::milliseconds timeout) = 0;
};

struct AckStatus {
  Domain domain;
  std::uint64_t batch_seq;
  std::size_t bytes;
  bool acked = false;
  std::uint32_t accepted = 0;
};

struct TransmitReport {
  std::vector<AckStatus> batches;
  std::size_t frames_sent = 0;
  std::size_t bytes_sent = 0;
  bool connection_lost = false;
  std::size_t timeouts = 0;

  std::size_t acked() const;
};

// Sends every planned batch, then collects acks. A batch leaves staging only
// when its ack arrives; anything unacked stays in flight for the next cycle.
TransmitReport transmit(StagingStore& store, const std::vector<BatchPtr>& plan,
                        std::string_view device_id, Connection& conn,
                        std::chrono::milliseconds timeout = std::chrono::seconds(10),
                        LinkState* link = nullptr);

}  // namespace odlc::edge
