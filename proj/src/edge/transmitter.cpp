#include "odlc/edge/transmitter.hpp"

#include <algorithm>

#include "odlc/core/errors.hpp"
#include "odlc/util/log.hpp"

namespace odlc::edge {

std::size_t TransmitReport::acked() const {
  return static_cast<std::size_t>(
      std::count_if(batches.begin(), batches.end(), [](const AckStatus& s) { return s.acked; }));
}

TransmitReport transmit(StagingStore& store, const std::vector<BatchPtr>& plan,
                        std::string_view device_id, Connection& conn,
                        std::chrono::milliseconds timeout, LinkState* link) {
  TransmitReport report;
  if (plan.empty()) return report;
  report.batches.reserve(plan.size());
  for (const auto& b : plan) report.batches.push_back(AckStatus{b->domain, b->batch_seq, b->encoded_bytes});

  std::size_t outstanding = 0;
  try {
    for (const auto& b : plan) {
      const std::string frame = wire::encode_data_frame(device_id, b->domain, b->batch_seq, b->records);
      conn.send(frame);
      ++report.frames_sent;
      report.bytes_sent += frame.size();
      ++outstanding;
    }
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (outstanding > 0) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      auto ack = conn.receive_ack(std::max(left, std::chrono::milliseconds(0)));
      if (!ack) {
        report.timeouts = outstanding;
        break;
      }
      auto it = std::find_if(report.batches.begin(), report.batches.end(), [&](const AckStatus& s) {
        return !s.acked && s.domain == ack->domain && s.batch_seq == ack->batch_seq;
      });
      if (it == report.batches.end()) continue;  // stale ack from an earlier cycle
      it->acked = true;
      it->accepted = ack->count;
      --outstanding;
      store.acknowledge(it->domain, it->batch_seq);
      if (link) link->last_ack_seq[it->domain] = std::max(link->last_ack_seq[it->domain], it->batch_seq);
    }
  } catch (const ConnectionLost& e) {
    report.connection_lost = true;
    log::warn("connection lost during transmit: {}", e.what());
  }
  return report;
}

}  // namespace odlc::edge
