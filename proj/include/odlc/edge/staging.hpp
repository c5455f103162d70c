#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "odlc/core/model.hpp"
#include "odlc/core/record.hpp"

namespace odlc::edge {

inline constexpr std::size_t kDefaultMaxBatchBytes = 256 * 1024;

struct StagingConfig {
  std::size_t capacity_bytes = 64u << 20;
  double high_watermark = 0.9;  // eviction starts above capacity * high_watermark
};

// Unit of transmission: whole, per-domain, never split. encoded_bytes is the
// full frame size on the wire.
struct Batch {
  std::uint64_t batch_seq = 0;
  Domain domain = Domain::Metric;
  std::vector<ObservabilityRecord> records;
  std::size_t encoded_bytes = 0;
};
using BatchPtr = std::shared_ptr<const Batch>;

struct LinkState {
  bool available = false;
  std::size_t bandwidth_budget_bytes_per_cycle = 0;  // 0 whenever unavailable
  std::map<Domain, std::uint64_t> last_ack_seq;

  std::size_t budget() const noexcept { return available ? bandwidth_budget_bytes_per_cycle : 0; }
};

enum class StageOutcome { Accepted, EvictedThenAccepted, Rejected };

struct EvictionEvent {
  Domain domain;
  std::uint64_t stage_seq;      // admission order
  std::int64_t source_timestamp_ms;
  std::size_t bytes;
  double weight;
  Hash128 dedup_key;
};

struct DomainCounters {
  std::uint64_t staged_records = 0;
  std::uint64_t staged_bytes = 0;
  std::uint64_t evicted_records = 0;
  std::uint64_t evicted_bytes = 0;
  std::uint64_t rejected_records = 0;
  std::uint64_t acked_records = 0;
  std::uint64_t acked_bytes = 0;
};

// Bounded on-device buffer. Per-domain FIFO queues of unbatched records plus
// the batches handed to the transmitter that still wait for an ack. Batched
// records are committed to transmission and are never evicted.
//
// All members are safe to call concurrently: admission and planning are
// serialized on one mutex.
class StagingStore {
 public:
  StagingStore(StagingConfig cfg, WeightProfile weights);

  // Throws RecordTooLarge when the record alone exceeds capacity. Returns
  // Rejected when the space above the watermark is held by in-flight batches.
  StageOutcome stage(ObservabilityRecord record);

  // Greedy whole-batch selection by W_i / Over_i (ties Metric < Log < Trace)
  // within link.budget(). Unacked batches are offered again, oldest first, with
  // their original batch_seq.
  std::vector<BatchPtr> plan_batches(const LinkState& link, const WeightProfile& w,
                                     const std::map<Domain, OverheadScore>& over,
                                     std::size_t max_batch_bytes = kDefaultMaxBatchBytes);

  // Removes an in-flight batch after its ack. Returns false if unknown.
  bool acknowledge(Domain domain, std::uint64_t batch_seq);

  void set_weights(WeightProfile w);
  WeightProfile weights() const;

  std::size_t capacity_bytes() const noexcept { return cfg_.capacity_bytes; }
  std::size_t total_bytes() const;
  std::size_t domain_bytes(Domain d) const;
  std::size_t queued_records(Domain d) const;   // unbatched
  std::size_t inflight_records(Domain d) const;
  std::size_t inflight_batches(Domain d) const;
  bool empty() const;

  // Source timestamps of the unbatched records, oldest first.
  std::vector<std::int64_t> queued_timestamps(Domain d) const;

  std::vector<EvictionEvent> eviction_log() const;
  DomainCounters counters(Domain d) const;

  std::uint64_t next_batch_seq(Domain d) const;
  // Used when restoring persisted state; never moves a sequence backwards.
  void restore_batch_seq(Domain d, std::uint64_t next);

 private:
  struct Entry {
    std::uint64_t stage_seq;
    ObservabilityRecord record;
  };
  struct DomainQueue {
    std::deque<Entry> queued;
    std::deque<BatchPtr> inflight;
    std::size_t queued_bytes = 0;
    std::size_t inflight_bytes = 0;
    std::uint64_t next_seq = 1;
    DomainCounters counters;
  };

  std::size_t total_bytes_locked() const noexcept;
  // Picks the domain to evict from; nullopt when nothing is evictable.
  std::optional<Domain> eviction_victim_locked() const;

  StagingConfig cfg_;
  WeightProfile weights_;
  mutable std::mutex mu_;
  std::array<DomainQueue, kDomainCount> queues_;
  std::uint64_t stage_seq_ = 0;
  std::vector<EvictionEvent> evictions_;
};

}  // namespace odlc::edge
