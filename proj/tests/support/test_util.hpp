#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <unistd.h>

#include "odlc/core/record.hpp"

namespace odlc::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("odlc-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline ObservabilityRecord metric(const std::string& name, double value, std::int64_t ts_ms,
                                  const std::string& device = "dev-1", Labels labels = {}) {
  MetricSample s;
  s.name = name;
  s.labels = canonical_labels(std::move(labels));
  s.value = value;
  s.source_timestamp = ts_ms;
  s.device_id = device;
  return ObservabilityRecord(s);
}

inline ObservabilityRecord log_line(const std::string& message, std::int64_t ts_ms,
                                    const std::string& device = "dev-1", LogLevel level = LogLevel::Info) {
  LogEntry e;
  e.source_timestamp = ts_ms;
  e.device_id = device;
  e.source_file = "/var/log/app.log";
  e.level = level;
  e.message = message;
  return ObservabilityRecord(e);
}

inline TraceSpan span(TraceId trace, std::uint64_t id, std::optional<std::uint64_t> parent, std::string service,
                      std::int64_t start_us, std::int64_t duration_us, const std::string& device = "dev-1") {
  TraceSpan s;
  s.trace_id = trace;
  s.span_id = id;
  s.parent_span_id = parent;
  s.service = std::move(service);
  s.operation = "op";
  s.start = start_us;
  s.duration = duration_us;
  s.device_id = device;
  return s;
}

// Relative comparison with an absolute fallback near zero.
inline bool close_rel(double a, double b, double tol) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= tol * scale;
}

}  // namespace odlc::test
