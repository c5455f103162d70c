#include "odlc/edge/staging.hpp"

#include <algorithm>
#include <cmath>

#include "odlc/core/errors.hpp"
#include "odlc/edge/wire.hpp"

namespace odlc::edge {

StagingStore::StagingStore(StagingConfig cfg, WeightProfile weights)
    : cfg_(cfg), weights_(std::move(weights)) {
  if (cfg_.capacity_bytes == 0) throw ConfigError("staging capacity must be positive");
  if (!(cfg_.high_watermark > 0.0 && cfg_.high_watermark <= 1.0))
    throw ConfigError("staging high watermark must be in (0, 1]");
}

std::size_t StagingStore::total_bytes_locked() const noexcept {
  std::size_t total = 0;
  for (const auto& q : queues_) total += q.queued_bytes + q.inflight_bytes;
  return total;
}

std::optional<Domain> StagingStore::eviction_victim_locked() const {
  std::optional<Domain> best;
  for (Domain d : kDomains) {
    const auto& q = queues_[domain_index(d)];
    if (q.queued.empty()) continue;
    if (!best) {
      best = d;
      continue;
    }
    const double wd = weights_.weight(d);
    const double wb = weights_.weight(*best);
    if (wd < wb || (wd == wb && q.queued_bytes > queues_[domain_index(*best)].queued_bytes)) best = d;
  }
  return best;
}

StageOutcome StagingStore::stage(ObservabilityRecord record) {
  const std::size_t size = record.encoded_size();
  const Domain domain = record.domain();
  std::lock_guard lock(mu_);
  auto& own = queues_[domain_index(domain)];
  if (size > cfg_.capacity_bytes) {
    ++own.counters.rejected_records;
    throw RecordTooLarge("record of " + std::to_string(size) + " bytes exceeds staging capacity " +
                         std::to_string(cfg_.capacity_bytes));
  }
  const auto watermark = static_cast<std::size_t>(
      std::floor(static_cast<double>(cfg_.capacity_bytes) * cfg_.high_watermark));

  bool evicted = false;
  while (total_bytes_locked() + size > watermark) {
    auto victim = eviction_victim_locked();
    if (!victim) break;
    auto& q = queues_[domain_index(*victim)];
    Entry& e = q.queued.front();
    evictions_.push_back(EvictionEvent{*victim, e.stage_seq, e.record.source_timestamp_ms(),
                                       e.record.encoded_size(), weights_.weight(*victim),
                                       e.record.dedup_key()});
    q.queued_bytes -= e.record.encoded_size();
    ++q.counters.evicted_records;
    q.counters.evicted_bytes += e.record.encoded_size();
    q.queued.pop_front();
    evicted = true;
  }
  // The watermark only triggers eviction; hard capacity is the admission bound.
  if (total_bytes_locked() + size > cfg_.capacity_bytes) {
    ++own.counters.rejected_records;
    return StageOutcome::Rejected;
  }
  ++own.counters.staged_records;
  own.counters.staged_bytes += size;
  own.queued_bytes += size;
  own.queued.push_back(Entry{++stage_seq_, std::move(record)});
  return evicted ? StageOutcome::EvictedThenAccepted : StageOutcome::Accepted;
}

std::vector<BatchPtr> StagingStore::plan_batches(const LinkState& link, const WeightProfile& w,
                                                 const std::map<Domain, OverheadScore>& over,
                                                 std::size_t max_batch_bytes) {
  std::vector<BatchPtr> plan;
  const std::size_t budget = link.budget();
  if (budget == 0) return plan;
  const std::size_t cap = std::min(max_batch_bytes, budget);

  struct Candidate {
    Domain domain;
    double priority;
  };
  std::vector<Candidate> order;
  for (Domain d : kDomains) {
    auto it = over.find(d);
    const OverheadScore o = it != over.end() ? it->second : OverheadScore::of(kOverheadFloor);
    const double p = batch_priority(d, w, o);
    if (p > 0.0) order.push_back({d, p});
  }
  // stable: equal priorities keep Metric < Log < Trace
  std::stable_sort(order.begin(), order.end(),
                   [](const Candidate& a, const Candidate& b) { return a.priority > b.priority; });

  std::lock_guard lock(mu_);
  std::size_t remaining = budget;
  for (const auto& c : order) {
    auto& q = queues_[domain_index(c.domain)];
    bool blocked = false;
    for (const auto& b : q.inflight) {
      if (b->encoded_bytes > remaining) {
        blocked = true;
        break;
      }
      plan.push_back(b);
      remaining -= b->encoded_bytes;
    }
    if (blocked) continue;

    while (!q.queued.empty()) {
      // Oldest records first, as many as fit into one batch.
      std::size_t bytes = wire::kFrameOverheadBytes;
      std::size_t n = 0;
      for (const auto& e : q.queued) {
        if (bytes + e.record.encoded_size() > cap) break;
        bytes += e.record.encoded_size();
        ++n;
      }
      if (n == 0 || bytes > remaining) break;
      auto batch = std::make_shared<Batch>();
      batch->batch_seq = q.next_seq++;
      batch->domain = c.domain;
      batch->encoded_bytes = bytes;
      batch->records.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        batch->records.push_back(std::move(q.queued.front().record));
        q.queued.pop_front();
      }
      const std::size_t payload = bytes - wire::kFrameOverheadBytes;
      q.queued_bytes -= payload;
      q.inflight_bytes += payload;
      q.inflight.push_back(batch);
      plan.push_back(std::move(batch));
      remaining -= bytes;
    }
  }
  return plan;
}

bool StagingStore::acknowledge(Domain domain, std::uint64_t batch_seq) {
  std::lock_guard lock(mu_);
  auto& q = queues_[domain_index(domain)];
  auto it = std::find_if(q.inflight.begin(), q.inflight.end(),
                         [&](const BatchPtr& b) { return b->batch_seq == batch_seq; });
  if (it == q.inflight.end()) return false;
  const std::size_t payload = (*it)->encoded_bytes - wire::kFrameOverheadBytes;
  q.inflight_bytes -= payload;
  q.counters.acked_records += (*it)->records.size();
  q.counters.acked_bytes += payload;
  q.inflight.erase(it);
  return true;
}

void StagingStore::set_weights(WeightProfile w) {
  std::lock_guard lock(mu_);
  weights_ = std::move(w);
}

WeightProfile StagingStore::weights() const {
  std::lock_guard lock(mu_);
  return weights_;
}

std::size_t StagingStore::total_bytes() const {
  std::lock_guard lock(mu_);
  return total_bytes_locked();
}

std::size_t StagingStore::domain_bytes(Domain d) const {
  std::lock_guard lock(mu_);
  const auto& q = queues_[domain_index(d)];
  return q.queued_bytes + q.inflight_bytes;
}

std::size_t StagingStore::queued_records(Domain d) const {
  std::lock_guard lock(mu_);
  return queues_[domain_index(d)].queued.size();
}

std::size_t StagingStore::inflight_records(Domain d) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& b : queues_[domain_index(d)].inflight) n += b->records.size();
  return n;
}

std::size_t StagingStore::inflight_batches(Domain d) const {
  std::lock_guard lock(mu_);
  return queues_[domain_index(d)].inflight.size();
}

bool StagingStore::empty() const {
  std::lock_guard lock(mu_);
  return total_bytes_locked() == 0;
}

std::vector<std::int64_t> StagingStore::queued_timestamps(Domain d) const {
  std::lock_guard lock(mu_);
  std::vector<std::int64_t> out;
  for (const auto& e : queues_[domain_index(d)].queued) out.push_back(e.record.source_timestamp_ms());
  return out;
}

std::vector<EvictionEvent> StagingStore::eviction_log() const {
  std::lock_guard lock(mu_);
  return evictions_;
}

DomainCounters StagingStore::counters(Domain d) const {
  std::lock_guard lock(mu_);
  return queues_[domain_index(d)].counters;
}

std::uint64_t StagingStore::next_batch_seq(Domain d) const {
  std::lock_guard lock(mu_);
  return queues_[domain_index(d)].next_seq;
}

void StagingStore::restore_batch_seq(Domain d, std::uint64_t next) {
  std::lock_guard lock(mu_);
  auto& q = queues_[domain_index(d)];
  q.next_seq = std::max(q.next_seq, next);
}

}  // namespace odlc::edge
