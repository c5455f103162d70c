#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include "odlc/core/clock.hpp"
#include "odlc/edge/collectors.hpp"
#include "odlc/edge/staging.hpp"
#include "odlc/edge/transmitter.hpp"
#include "odlc/util/kv_config.hpp"

namespace odlc::edge {

struct EdgeConfig {
  CollectorConfig collector;
  StagingConfig staging;
  std::size_t max_batch_bytes = kDefaultMaxBatchBytes;
  std::size_t link_budget_bytes = 1u << 20;  // per transmit cycle
  std::string fog_address = "127.0.0.1:7070";
  std::filesystem::path state_path;  // empty: no persistence
  double transmit_timeout_s = 10.0;
  double cycle_interval_s = 1.0;
};

// Keys accepted in the edge config file / ODLC_* environment.
const std::set<std::string>& edge_config_keys();
// Throws ConfigError (unknown keys, bad values) or WeightSumError/WeightRangeError.
EdgeConfig edge_config_from(const KvConfig& kv);

// Offsets and next batch sequence numbers, synced after each staging and ack.
struct EdgeState {
  std::map<std::string, FileOffset> offsets;
  std::map<Domain, std::uint64_t> next_batch_seq;

  static std::optional<EdgeState> load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct CollectionCounters {
  std::uint64_t records = 0;         // produced by collectors
  std::uint64_t wire_bytes = 0;
  std::uint64_t footprint_bytes = 0;
  std::uint64_t admission_failures = 0;
};

// Collection, staging and transmission on one device, driven either by the
// replay harness (single-threaded) or by `edge run` (one thread per
// collector plus a transmitter thread).
class EdgeAgent {
 public:
  using AdmitObserver = std::function<void(const ObservabilityRecord&, StageOutcome)>;

  EdgeAgent(EdgeConfig cfg, const Clock& clock, std::unique_ptr<MetricSource> metrics,
            std::uint64_t span_seed = 0);

  const EdgeConfig& config() const noexcept { return cfg_; }
  StagingStore& staging() noexcept { return store_; }
  const StagingStore& staging() const noexcept { return store_; }
  SpanRecorder& spans() noexcept { return spans_; }
  MetricCollector& metrics() noexcept { return metric_collector_; }
  LogHarvester& logs() noexcept { return log_harvester_; }

  // Runs collectors that are due at `now_ms` and stages their output.
  void collect_metrics_if_due(std::int64_t now_ms);
  void harvest_logs(std::int64_t now_ms);
  void collect(std::int64_t now_ms) {
    collect_metrics_if_due(now_ms);
    harvest_logs(now_ms);
  }

  // Stages one record produced outside the built-in collectors (spans from
  // instrumentation, harness replays). Returns false on admission failure.
  bool admit(ObservabilityRecord rec);

  // One plan + transmit round.
  TransmitReport transmit_cycle(Connection& conn, const LinkState& link);

  void set_overheads(std::map<Domain, OverheadScore> over);
  void set_admit_observer(AdmitObserver obs) { observer_ = std::move(obs); }

  CollectionCounters counters(Domain d) const;
  LinkState& link_state() noexcept { return link_; }

  void persist_state();

 private:
  bool trace_enabled() const;

  EdgeConfig cfg_;
  const Clock& clock_;
  StagingStore store_;
  MetricCollector metric_collector_;
  LogHarvester log_harvester_;
  SpanRecorder spans_;
  LinkState link_;
  AdmitObserver observer_;

  mutable std::mutex mu_;  // counters, overheads
  std::mutex harvest_mu_;  // log harvester and state file
  std::map<Domain, OverheadScore> over_;
  std::array<CollectionCounters, kDomainCount> counters_{};
};

}  // namespace odlc::edge
