#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "odlc/core/model.hpp"

namespace odlc::meter {

// Consumption of one component over one window, before normalization.
struct RawUsage {
  double cpu_core_seconds = 0.0;
  double mem_bytes = 0.0;  // resident at the end of the window
  double net_bytes = 0.0;  // sent and received during the window

  friend bool operator==(const RawUsage&, const RawUsage&) = default;
};

class AccountingSource {
 public:
  virtual ~AccountingSource() = default;
  // Throws AccountingUnavailable.
  virtual RawUsage usage(const std::string& component, std::int64_t window_start_ms, std::int64_t window_end_ms) = 0;
};

// Normalization basis shared by a whole report.
struct MeterBudget {
  double cores = 1.0;
  double mem_bytes = 512.0 * 1024 * 1024;
  double link_bytes_per_s = 1.25e6;  // 10 Mbit/s

  void validate() const;  // ConfigError on non-positive fields
};

struct ResourceSample {
  std::string component;
  std::int64_t window_start_ms = 0;
  std::int64_t timestamp_ms = 0;  // window end
  RawUsage raw;
  double cpu_pct = 0.0;  // of total machine capacity
  double mem_pct = 0.0;  // of the memory budget
  double net_pct = 0.0;  // of link capacity over the window

  friend bool operator==(const ResourceSample&, const ResourceSample&) = default;
};

// Percentages clamp at 100.
ResourceSample normalize(const std::string& component, const RawUsage& raw, std::int64_t window_start_ms,
                         std::int64_t window_end_ms, const MeterBudget& budget);

struct SampleGap {
  std::string component;
  std::int64_t window_start_ms = 0;
  std::int64_t window_end_ms = 0;
  std::string reason;
};

struct MeterReport {
  MeterBudget budget;
  std::int64_t window_ms = 1000;
  std::map<std::string, std::vector<ResourceSample>> series;
  std::vector<SampleGap> gaps;

  std::string to_text() const;
  static MeterReport from_text(std::string_view text);
};

// Means of the normalized fields over samples whose window end lies in
// [start, end]. Throws NoSamples.
OverheadVector overhead_of(const MeterReport& report, const std::string& component, std::int64_t start,
                           std::int64_t end);

class ResourceSampler {
 public:
  ResourceSampler(MeterBudget budget, std::int64_t window_ms);

  // One window for one component. AccountingUnavailable is recorded as a gap.
  std::optional<ResourceSample> sample_component(const std::string& component, AccountingSource& source,
                                                 std::int64_t window_start_ms, std::int64_t window_end_ms);
  MeterReport report() const;
  std::int64_t window_ms() const noexcept { return window_ms_; }

 private:
  mutable std::mutex mu_;
  MeterReport report_;
  std::int64_t window_ms_;
};

// Returns exactly what was injected for (component, window end).
class InjectedAccounting : public AccountingSource {
 public:
  void inject(const std::string& component, std::int64_t window_end_ms, RawUsage u);
  RawUsage usage(const std::string& component, std::int64_t window_start_ms, std::int64_t window_end_ms) override;

 private:
  std::mutex mu_;
  std::map<std::pair<std::string, std::int64_t>, RawUsage> injected_;
};

// Components charge their own CPU time, memory and socket bytes; each
// usage() call returns what accumulated since the previous call.
class CounterAccounting : public AccountingSource {
 public:
  void charge_cpu(const std::string& component, double core_seconds);
  void charge_net(const std::string& component, double bytes);
  void set_memory(const std::string& component, double bytes);
  RawUsage usage(const std::string& component, std::int64_t window_start_ms, std::int64_t window_end_ms) override;

 private:
  std::mutex mu_;
  std::map<std::string, RawUsage> pending_;
};

// The calling process as a whole, from /proc/self, attributed to one
// component. Network bytes are charged by the socket owner via charge_net.
class ProcAccounting : public AccountingSource {
 public:
  explicit ProcAccounting(std::filesystem::path proc_root = "/proc/self");
  void charge_net(double bytes);
  RawUsage usage(const std::string& component, std::int64_t window_start_ms, std::int64_t window_end_ms) override;

 private:
  double cpu_seconds_total() const;
  double rss_bytes() const;

  std::filesystem::path root_;
  std::mutex mu_;
  std::optional<double> last_cpu_;
  double net_pending_ = 0.0;
  double ticks_per_s_;
  double page_bytes_;
};

// CPU seconds consumed so far by the calling thread.
double thread_cpu_seconds();
// Number of online processors.
double online_cores();

// Correlation counts for a window, from a local or remote fog node.
class CorrelationSource {
 public:
  virtual ~CorrelationSource() = default;
  virtual CorrelationScore correlation(const CorrelationWindow& w) = 0;  // throws FogUnreachable
};

struct ComponentMap {
  std::string metric = "edge.metric";
  std::string log = "edge.log";
  std::string trace = "edge.trace";
  std::vector<std::string> analysis{"fog", "archive"};
};

// Edge collectors map to the collection terms; the fog and archive
// components make up Over_X as the worst of their scores. Components with no
// samples in the window are skipped for Over_X; a collection term with
// positive weight and no samples throws NoSamples.
OutcomeReport compose_outcome(const MeterReport& report, const WeightProfile& w, const CorrelationWindow& window,
                              CorrelationSource& fog, const ComponentMap& map = {});

// Flat object with the weights, each score and term, and the outcome.
nlohmann::json outcome_json(const OutcomeReport& r);

}  // namespace odlc::meter
