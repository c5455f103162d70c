#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "odlc/core/hash.hpp"

namespace odlc {

// The instrumentation domain set ID. Underlying values double as wire tags.
enum class Domain : std::uint8_t { Metric = 0x01, Log = 0x02, Trace = 0x03 };

inline constexpr std::array<Domain, 3> kDomains{Domain::Metric, Domain::Log, Domain::Trace};
inline constexpr std::size_t kDomainCount = kDomains.size();

constexpr std::size_t domain_index(Domain d) noexcept {
  return static_cast<std::size_t>(d) - 1;
}
std::string_view domain_name(Domain d) noexcept;
// Accepts "metric", "log", "trace" (and plural forms). Throws DecodeError.
Domain parse_domain(std::string_view s);

// Sorted by key, keys unique.
using Labels = std::vector<std::pair<std::string, std::string>>;

// Sorts by key and rejects duplicate keys with InvalidRecord.
Labels canonical_labels(Labels labels);
bool valid_metric_name(std::string_view name) noexcept;

struct MetricSample {
  std::string name;
  Labels labels;
  double value = 0.0;
  std::int64_t source_timestamp = 0;  // ms since epoch
  std::string device_id;

  friend bool operator==(const MetricSample& a, const MetricSample& b);
};

enum class LogLevel : std::uint8_t { Debug, Info, Warn, Error };

std::string_view level_name(LogLevel l) noexcept;
// Unparsable text maps to Info.
LogLevel parse_level(std::string_view s) noexcept;

struct LogEntry {
  std::int64_t source_timestamp = 0;  // ms since epoch
  std::string device_id;
  std::string source_file;
  LogLevel level = LogLevel::Info;
  std::string message;
  Labels fields;  // extracted at fog ingest; empty on the wire from the edge

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

struct TraceId {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  std::string hex() const;
  static TraceId parse(std::string_view hex);

  friend bool operator==(const TraceId&, const TraceId&) = default;
  friend auto operator<=>(const TraceId&, const TraceId&) = default;
};

struct TraceSpan {
  TraceId trace_id;
  std::uint64_t span_id = 0;
  std::optional<std::uint64_t> parent_span_id;
  std::string service;
  std::string operation;
  std::int64_t start = 0;     // us since epoch
  std::int64_t duration = 0;  // us
  Labels attributes;
  std::string device_id;

  std::int64_t end() const noexcept { return start + duration; }

  friend bool operator==(const TraceSpan&, const TraceSpan&) = default;
};

using RecordPayload = std::variant<MetricSample, LogEntry, TraceSpan>;

// Validates the payload invariants (InvalidRecord on violation).
void validate_payload(const RecordPayload& payload);

// Immutable unit flowing through the life cycle. The wire line, its size and
// the dedup key are computed once at construction.
class ObservabilityRecord {
 public:
  explicit ObservabilityRecord(RecordPayload payload);

  // Decodes one wire line (with or without the trailing newline).
  static ObservabilityRecord decode(Domain domain, std::string_view line);

  Domain domain() const noexcept { return static_cast<Domain>(payload_.index() + 1); }
  const RecordPayload& payload() const noexcept { return payload_; }

  const MetricSample& metric() const { return std::get<MetricSample>(payload_); }
  const LogEntry& log() const { return std::get<LogEntry>(payload_); }
  const TraceSpan& span() const { return std::get<TraceSpan>(payload_); }

  const std::string& device_id() const noexcept;
  // Milliseconds; spans report their start.
  std::int64_t source_timestamp_ms() const noexcept;

  // Newline-terminated single-line structured-text object.
  const std::string& wire_line() const noexcept { return wire_line_; }
  std::size_t encoded_size() const noexcept { return wire_line_.size(); }
  const Hash128& dedup_key() const noexcept { return dedup_key_; }

  // Bytes this record accounts for at its source (exposition share, raw log
  // line, ...). In-process bookkeeping only; defaults to encoded_size().
  std::size_t footprint_bytes() const noexcept { return footprint_bytes_; }
  void set_footprint_bytes(std::size_t b) noexcept { footprint_bytes_ = b; }

  friend bool operator==(const ObservabilityRecord& a, const ObservabilityRecord& b) {
    return a.wire_line_ == b.wire_line_;
  }

 private:
  RecordPayload payload_;
  std::string wire_line_;
  Hash128 dedup_key_;
  std::size_t footprint_bytes_ = 0;
};

// The wire encoding of a payload, newline-terminated.
std::string encode_payload(const RecordPayload& payload);

Hash128 compute_dedup_key(std::string_view device_id, Domain domain,
                          std::int64_t source_timestamp, std::string_view content);

}  // namespace odlc
