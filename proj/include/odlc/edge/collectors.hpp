#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "odlc/core/clock.hpp"
#include "odlc/core/model.hpp"
#include "odlc/core/record.hpp"
#include "odlc/exposition/exposition.hpp"

namespace odlc::edge {

enum class MetricSourceKind { HostStats, ExpositionFile, Synthetic };

MetricSourceKind parse_metric_source(std::string_view s);

struct CollectorConfig {
  std::string device_id = "edge-01";
  double metric_interval_s = 5.0;
  MetricSourceKind metric_source = MetricSourceKind::HostStats;
  std::filesystem::path exposition_path;
  std::vector<std::filesystem::path> log_paths;
  bool trace_ingest_enabled = true;
  WeightProfile weights = weight_profile("regular");
  exposition::ReductionPolicy reduction;

  // Throws ConfigError.
  void validate() const;
};

// Produces one exposition document per read. Throws SourceUnavailable.
class MetricSource {
 public:
  virtual ~MetricSource() = default;
  virtual exposition::ExpositionDocument read(std::int64_t now_ms) = 0;
};

class ExpositionFileSource final : public MetricSource {
 public:
  explicit ExpositionFileSource(std::filesystem::path path) : path_(std::move(path)) {}
  exposition::ExpositionDocument read(std::int64_t now_ms) override;

 private:
  std::filesystem::path path_;
};

// Reads CPU, memory, disk and network counters from a procfs tree.
class HostStatsSource final : public MetricSource {
 public:
  explicit HostStatsSource(std::filesystem::path proc_root = "/proc") : root_(std::move(proc_root)) {}
  exposition::ExpositionDocument read(std::int64_t now_ms) override;

 private:
  std::filesystem::path root_;
};

// Replays documents from a generator; the argument is the emission index.
class SyntheticSource final : public MetricSource {
 public:
  using Generator = std::function<std::string(std::uint64_t emission)>;
  explicit SyntheticSource(Generator gen) : gen_(std::move(gen)) {}
  exposition::ExpositionDocument read(std::int64_t now_ms) override;

 private:
  Generator gen_;
  std::uint64_t emission_ = 0;
};

std::unique_ptr<MetricSource> make_metric_source(const CollectorConfig& cfg);

struct MetricEmission {
  std::vector<ObservabilityRecord> records;
  std::size_t exposed_bytes = 0;  // size of the document after the reduction policy
};

// Samples the source every metric_interval_s * interval_scale. Each record's
// footprint is its share of the exposed document, so the footprints of one
// emission sum to exposed_bytes.
class MetricCollector {
 public:
  MetricCollector(const CollectorConfig& cfg, std::unique_ptr<MetricSource> source);

  bool enabled() const noexcept { return enabled_; }
  double effective_interval_s() const noexcept { return interval_s_; }
  bool due(std::int64_t now_ms) const noexcept;

  // Reads once regardless of schedule and advances the schedule. Errors from
  // the source are counted and yield nullopt.
  std::optional<MetricEmission> collect(std::int64_t now_ms);

  std::uint64_t emissions() const noexcept { return emissions_; }
  std::uint64_t source_errors() const noexcept { return errors_; }
  const std::string& last_error() const noexcept { return last_error_; }

 private:
  std::string device_id_;
  exposition::ReductionPolicy policy_;
  std::unique_ptr<MetricSource> source_;
  bool enabled_;
  double interval_s_;
  std::optional<std::int64_t> next_due_ms_;
  std::uint64_t emissions_ = 0;
  std::uint64_t errors_ = 0;
  std::string last_error_;
};

// Converts a document read at `now_ms` into metric records (see MetricCollector).
MetricEmission to_metric_records(const exposition::ExpositionDocument& doc,
                                 const exposition::ReductionPolicy& policy,
                                 const std::string& device_id, std::int64_t now_ms);

struct FileOffset {
  std::uint64_t offset = 0;
  std::uint64_t inode = 0;
};

// Tails log files from persisted offsets, one LogEntry per complete line.
// Lines are `<timestamp> <LEVEL> <message>` where the timestamp is epoch ms or
// ISO-8601 UTC; anything else becomes an INFO entry stamped at read time.
class LogHarvester {
 public:
  LogHarvester(std::string device_id, std::vector<std::filesystem::path> paths,
               std::map<std::string, FileOffset> offsets = {});

  std::vector<ObservabilityRecord> harvest(std::int64_t now_ms);

  const std::map<std::string, FileOffset>& offsets() const noexcept { return offsets_; }
  std::uint64_t truncations() const noexcept { return truncations_; }
  std::uint64_t rotations() const noexcept { return rotations_; }
  std::uint64_t missing_files() const noexcept { return missing_; }

 private:
  std::string device_id_;
  std::vector<std::filesystem::path> paths_;
  std::map<std::string, FileOffset> offsets_;
  std::uint64_t truncations_ = 0;
  std::uint64_t rotations_ = 0;
  std::uint64_t missing_ = 0;
};

LogEntry parse_log_line(std::string_view line, const std::string& device_id,
                        const std::string& source_file, std::int64_t now_ms);

// Manual span instrumentation. Ended spans go to the sink.
class SpanRecorder {
 public:
  using Sink = std::function<void(TraceSpan)>;
  struct Handle {
    TraceId trace_id;
    std::uint64_t span_id = 0;
  };

  SpanRecorder(std::string device_id, const Clock& clock, Sink sink, std::uint64_t seed = 0);

  // A null parent starts a new trace.
  Handle start_span(std::string service, std::string operation,
                    const std::optional<Handle>& parent = std::nullopt);
  // Throws UnbalancedSpan (and counts it) when the span was never started.
  void end_span(const Handle& h);
  void set_attribute(const Handle& h, std::string key, std::string value);

  std::uint64_t unbalanced() const noexcept { return unbalanced_; }
  std::size_t open_spans() const;

 private:
  struct Open {
    TraceSpan span;
  };
  std::string device_id_;
  const Clock& clock_;
  Sink sink_;
  mutable std::mutex mu_;
  std::mt19937_64 rng_;
  std::unordered_map<std::uint64_t, Open> open_;
  std::atomic<std::uint64_t> unbalanced_{0};
};

// RAII span.
class ScopedSpan {
 public:
  ScopedSpan(SpanRecorder& rec, std::string service, std::string operation,
             const std::optional<SpanRecorder::Handle>& parent = std::nullopt)
      : rec_(rec), handle_(rec.start_span(std::move(service), std::move(operation), parent)) {}
  ~ScopedSpan() {
    try {
      rec_.end_span(handle_);
    } catch (...) {
    }
  }
  ScopedSpan(const ScopedSpan&) = delete;
  ScopedSpan& operator=(const ScopedSpan&) = delete;

  const SpanRecorder::Handle& handle() const noexcept { return handle_; }
  void set_attribute(std::string k, std::string v) { rec_.set_attribute(handle_, std::move(k), std::move(v)); }

 private:
  SpanRecorder& rec_;
  SpanRecorder::Handle handle_;
};

}  // namespace odlc::edge
