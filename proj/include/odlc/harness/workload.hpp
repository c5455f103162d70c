#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "odlc/archive/geo.hpp"
#include "odlc/core/model.hpp"
#include "odlc/core/record.hpp"
#include "odlc/exposition/exposition.hpp"
#include "odlc/util/kv_config.hpp"

namespace odlc::harness {

// Per-device generation rates and run shape.
struct WorkloadSpec {
  std::size_t devices = 1;
  std::size_t metric_payload_bytes = 65 * 1024;
  double metric_interval_s = 5.0;
  std::size_t log_line_bytes = 1024;
  double log_interval_s = 1.0;
  std::size_t trace_bytes = 4096;  // wire bytes of one generated trace tree
  double trace_interval_s = 15.0;
  double duration_s = 600.0;
  std::uint64_t seed = 1;
  // Application payload (video) per device; 0 derives it from the rates above.
  double payload_bytes_per_s = 0.0;

  void validate() const;  // ScenarioConfigError
  // Observability bytes per second per device at the default policy.
  double observability_rate() const;
  double effective_payload_rate() const;
};

// Video bytes sent per byte of default-policy observability data.
inline constexpr double kPayloadToObservability = 29.1;

// Node-exporter-like exposition documents filled up to target_bytes. The family set is
// fixed at construction; emissions differ only in sample values.
struct CorpusConfig {
  std::size_t target_bytes = 65 * 1024;
  std::uint64_t seed = 1;
  // Share of target_bytes taken by the allowlisted families once HELP lines
  // are stripped.
  double allowlisted_share = 0.22;
};

class ExpositionCorpus {
 public:
  explicit ExpositionCorpus(CorpusConfig cfg = {});

  std::string emit(std::uint64_t emission) const;
  const exposition::ExpositionDocument& layout() const noexcept { return layout_; }
  const CorpusConfig& config() const noexcept { return cfg_; }

 private:
  struct ValueModel {
    bool counter = false;
    double base = 0.0;
    double rate = 0.0;  // counters: increment per emission; gauges: amplitude
    double phase = 0.0;
    int decimals = 0;
    bool constant = false;
  };

  CorpusConfig cfg_;
  exposition::ExpositionDocument layout_;
  std::vector<std::vector<ValueModel>> models_;  // per family, per sample
};

// Prefixes kept by the reduced policy.
const std::vector<std::string>& reduced_allowlist();
// strip_help + reduced_allowlist + interval_scale 2.
exposition::ReductionPolicy reduced_policy();

// Log lines `<epoch ms> <LEVEL> <message with key=value fields>` of exactly
// line_bytes bytes including the newline, with latency, throughput and GNSS
// coordinates inside `area`.
class LogGenerator {
 public:
  LogGenerator(std::string device_id, std::uint64_t seed, std::size_t line_bytes,
               archive::BoundingBox area = archive::RegionDemoConfig{}.area);
  std::string next_line(std::int64_t now_ms);
  std::uint64_t lines() const noexcept { return seq_; }

 private:
  std::string device_id_;
  std::mt19937_64 rng_;
  std::size_t line_bytes_;
  archive::BoundingBox area_;
  archive::GeoPoint position_;
  std::uint64_t seq_ = 0;
};

// One report-building trace per call, shaped like the region aggregation
// workload, padded so the tree's wire bytes equal target_bytes when possible.
class TraceGenerator {
 public:
  TraceGenerator(std::string device_id, std::uint64_t seed, std::size_t target_bytes);
  std::vector<TraceSpan> next_trace(std::int64_t now_us);

 private:
  std::string device_id_;
  std::mt19937_64 rng_;
  std::size_t target_bytes_;
};

// Parses a line-oriented `key = value` workload file.
WorkloadSpec workload_from(const KvConfig& kv);
const std::vector<std::string>& workload_keys();

std::uint64_t device_seed(std::uint64_t seed, std::size_t device_index);
std::string device_name(std::size_t device_index);

}  // namespace odlc::harness
