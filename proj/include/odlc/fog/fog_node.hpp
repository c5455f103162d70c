#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "odlc/archive/segment.hpp"
#include "odlc/core/model.hpp"
#include "odlc/core/record.hpp"
#include "odlc/fog/alerts.hpp"
#include "odlc/fog/inverted_index.hpp"
#include "odlc/fog/trace_analysis.hpp"
#include "odlc/fog/tsdb.hpp"

namespace odlc::fog {

struct FogConfig {
  std::filesystem::path data_dir;       // empty: memory only, no WAL
  std::size_t dedup_window = 1u << 16;  // recent keys per (device, domain)
  std::size_t max_records = 0;          // 0: unlimited
  std::size_t seal_threshold = 65536;
  bool sync_wal = true;
};

struct IngestResult {
  std::string ack;
  Domain domain = Domain::Metric;
  std::uint32_t count = 0;
  std::uint32_t stored = 0;
  std::uint32_t duplicates = 0;
};

struct LogQuery {
  std::string text;
  Labels fields;  // exact key=value filters; keys include level, device_id, source_file
  std::optional<std::int64_t> start;  // ms, inclusive
  std::optional<std::int64_t> end;    // ms, exclusive
  bool fuzzy = false;
  std::size_t limit = 0;  // 0: unlimited
};

struct CorrelationResult {
  std::vector<ObservabilityRecord> metrics;
  std::vector<ObservabilityRecord> logs;
  std::vector<ObservabilityRecord> traces;
  CorrelationScore score;
};

struct TieringPolicy {
  std::int64_t age_limit_s = 7 * 24 * 3600;
  std::int64_t cycle_interval_s = 24 * 3600;
  std::string sink;  // archive directory

  void validate() const;  // ConfigError unless age_limit_s > 0 and cycle_interval_s > 0
};

// Destination of exported segments.
class ArchiveSink {
 public:
  virtual ~ArchiveSink() = default;
  virtual bool available() = 0;
  // Stores the encoded segment and returns a handle for read-back.
  virtual std::string write(const archive::SegmentManifest& manifest, const std::string& bytes) = 0;
  virtual std::string read_back(const std::string& handle) = 0;
  virtual void discard(const std::string& handle) = 0;
};

// Segment files in a local directory (a mounted archive volume).
class DirectorySink : public ArchiveSink {
 public:
  explicit DirectorySink(std::filesystem::path dir) : dir_(std::move(dir)) {}
  bool available() override;
  std::string write(const archive::SegmentManifest& manifest, const std::string& bytes) override;
  std::string read_back(const std::string& handle) override;
  void discard(const std::string& handle) override;

 private:
  std::filesystem::path dir_;
};

struct TieringReport {
  bool skipped = false;  // sink unavailable
  std::vector<archive::SegmentManifest> segments;
  std::vector<std::string> handles;
  std::map<Domain, std::uint64_t> exported;
  std::vector<std::string> errors;
};

struct FogStats {
  std::uint64_t frames = 0;
  std::uint64_t malformed_frames = 0;
  std::uint64_t storage_full = 0;
  std::array<std::uint64_t, kDomainCount> stored{};
  std::array<std::uint64_t, kDomainCount> duplicates{};
  std::array<std::uint64_t, kDomainCount> exported{};
};

// Ingest, storage, query and tiering for one fog node. Ingest and tiering
// deletes take the writer lock; queries share the reader lock.
class FogNode {
 public:
  explicit FogNode(FogConfig cfg = {});
  ~FogNode();
  FogNode(const FogNode&) = delete;
  FogNode& operator=(const FogNode&) = delete;

  // Throws MalformedFrame or StorageFull.
  IngestResult ingest(std::string_view frame);
  std::string ingest_batch(std::string_view frame) { return ingest(frame).ack; }

  std::vector<SeriesResult> query_range(const std::string& selector, std::int64_t start, std::int64_t end,
                                        Aggregation agg, double step_s) const;
  std::vector<LogEntry> search_logs(const LogQuery& q) const;
  SpanTree assemble_trace(const TraceId& id) const;
  std::vector<TraceSpan> critical_path(const TraceId& id) const;
  DependencyGraph dependency_graph(std::int64_t start, std::int64_t end) const;
  CorrelationResult correlate(const CorrelationWindow& w) const;
  std::vector<AlertEvent> evaluate_alerts(const std::vector<AlertRule>& rules, std::int64_t now_ms);
  std::vector<AlertEvent> alert_log() const;
  std::uint64_t bad_alert_selectors() const;

  TieringReport tiering_cycle(const TieringPolicy& policy, std::int64_t now_ms, ArchiveSink& sink);

  // Snapshot of a domain's stored records. Logs carry their extracted fields.
  std::vector<ObservabilityRecord> records(Domain d) const;
  std::size_t record_count(Domain d) const;
  std::size_t record_count() const;
  FogStats stats() const;
  const TimeSeriesStore& tsdb() const noexcept { return tsdb_; }

  // Writes the index snapshot and sealed series segments, then truncates the
  // write-ahead log. No-op without a data directory.
  void checkpoint();

 private:
  struct KeyHash {
    std::size_t operator()(const Hash128& h) const noexcept { return static_cast<std::size_t>(h.hi ^ (h.lo * 31)); }
  };
  struct DedupState {
    std::uint64_t high_seq = 0;
    std::unordered_set<Hash128, KeyHash> keys;
    std::deque<Hash128> order;
  };

  IngestResult ingest_locked(std::string_view frame, bool durable);
  void remember(DedupState& st, const Hash128& key);
  void store_locked(ObservabilityRecord rec);
  void index_log_locked(ObservabilityRecord rec);
  void index_span_locked(ObservabilityRecord rec);
  std::vector<TraceSpan> trace_spans_locked(const TraceId& id) const;
  void recover();
  void checkpoint_locked();
  void open_wal();

  FogConfig cfg_;
  TimeSeriesStore tsdb_;
  mutable std::shared_mutex mu_;
  InvertedIndex logs_;
  InvertedIndex spans_;
  std::map<std::pair<std::string, Domain>, DedupState> dedup_;
  AlertEngine alerts_;
  FogStats stats_;
  int wal_fd_ = -1;
};

}  // namespace odlc::fog
