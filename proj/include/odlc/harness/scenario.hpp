#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "odlc/archive/catalog.hpp"
#include "odlc/core/clock.hpp"
#include "odlc/core/model.hpp"
#include "odlc/edge/agent.hpp"
#include "odlc/fog/fog_node.hpp"
#include "odlc/harness/link.hpp"
#include "odlc/harness/workload.hpp"
#include "odlc/meter/meter.hpp"
#include "odlc/util/kv_config.hpp"

namespace odlc::harness {

struct ScenarioConfig {
  WorkloadSpec workload;
  WeightProfile weights = weight_profile("balanced");
  exposition::ReductionPolicy reduction;
  edge::StagingConfig staging;
  std::size_t max_batch_bytes = edge::kDefaultMaxBatchBytes;
  double link_bandwidth_bytes_per_s = 1.25e6;  // up intervals without their own bandwidth
  double cycle_interval_s = 1.0;               // harness tick and edge transmit cycle
  double ack_drop_probability = 0.0;
  std::int64_t start_ms = 1656633600000;  // 2022-07-01T00:00:00Z
  std::int64_t tiering_age_limit_s = 0;   // 0: half the run
  bool tiering = true;
  bool fog_durable = false;  // WAL and checkpoints under the work directory
  std::filesystem::path work_dir;  // empty: a fresh temporary directory
  bool keep_work_dir = false;
  meter::MeterBudget budget;
  std::int64_t meter_window_ms = 1000;
  double virtual_speed = 0.0;  // virtual seconds per wall second; 0 runs unthrottled
  bool keep_frames = false;
  bool audit_evictions = false;
  std::size_t max_drain_cycles = 100000;

  void validate() const;  // ScenarioConfigError
};

const std::set<std::string>& scenario_keys();
// Throws ScenarioConfigError or ConfigError.
ScenarioConfig scenario_from(const KvConfig& kv);

struct DomainTally {
  std::uint64_t generated_records = 0;
  std::uint64_t generated_wire_bytes = 0;
  std::uint64_t generated_footprint_bytes = 0;
  std::uint64_t staged_records = 0;
  std::uint64_t admission_failures = 0;
  std::uint64_t evicted_records = 0;
  std::uint64_t evicted_bytes = 0;
  std::uint64_t transmitted_records = 0;  // every attempt, retransmissions included
  std::uint64_t transmitted_bytes = 0;    // data frame bytes
  std::uint64_t acked_records = 0;
  std::uint64_t ingested_records = 0;  // new at the fog node
  std::uint64_t duplicate_records = 0;
  std::uint64_t ingested_wire_bytes = 0;
  std::uint64_t ingested_footprint_bytes = 0;
  std::uint64_t archived_records = 0;

  DomainTally& operator+=(const DomainTally& o);
};

struct DeviceResult {
  std::string device;
  std::array<DomainTally, kDomainCount> domains{};
  double payload_bytes = 0.0;  // simulated application (video) bytes
};

struct TimelinePoint {
  std::int64_t t_ms = 0;  // offset from the run start
  bool link_available = false;
  double bandwidth_bytes_per_s = 0.0;
  std::uint64_t staged_bytes = 0;
  std::array<std::uint64_t, kDomainCount> generated_footprint{};
  std::array<std::uint64_t, kDomainCount> ingested_records{};
};

struct ScenarioResult {
  std::vector<DeviceResult> devices;
  std::vector<LinkInterval> link;
  std::vector<TimelinePoint> timeline;
  double wall_seconds = 0.0;
  double virtual_seconds = 0.0;  // generation phase
  double drain_seconds = 0.0;
  bool drained = false;
  std::uint64_t frames_sent = 0;
  std::uint64_t acks_dropped = 0;
  bool tiering_skipped = false;
  std::size_t archive_segments = 0;
  std::array<std::uint64_t, kDomainCount> exported{};
  std::uint64_t evictions_audited = 0;
  std::vector<std::string> eviction_violations;
  std::uint64_t fog_records = 0;
  std::uint64_t archive_records = 0;
  meter::MeterReport meter;
  std::optional<OutcomeReport> outcome;
  std::string outcome_error;
  double edge_cpu_pct_mean = 0.0;

  DomainTally total(Domain d) const;
  std::uint64_t ingested_footprint_bytes() const;
  double payload_bytes() const;

  std::string to_text() const;
  // Whitespace-separated columns, one row per tick.
  std::string plot_data() const;
};

class Scenario {
 public:
  Scenario(ScenarioConfig cfg, LinkSchedule schedule);
  ~Scenario();
  Scenario(const Scenario&) = delete;
  Scenario& operator=(const Scenario&) = delete;

  ScenarioResult run();

  fog::FogNode& fog() noexcept { return *fog_; }
  archive::ArchiveCatalog& archive() noexcept { return *catalog_; }
  edge::EdgeAgent& agent(std::size_t i);
  std::size_t device_count() const noexcept { return devices_.size(); }
  // Data frames in send order when keep_frames is set.
  const std::vector<std::string>& frames() const noexcept { return frames_; }
  const std::filesystem::path& work_dir() const noexcept { return work_dir_; }
  const VirtualClock& clock() const noexcept { return clock_; }
  std::int64_t tiering_cutoff_ms() const noexcept { return tiering_cutoff_ms_; }

 private:
  struct Device;
  class Link;

  void tick(std::int64_t offset_ms, bool generate, const LinkInterval& link, ScenarioResult& out);
  void admit(Device& d, ObservabilityRecord rec, ScenarioResult& out);
  void sample_meter(std::int64_t window_start_ms, std::int64_t window_end_ms);
  void finish(ScenarioResult& out);

  ScenarioConfig cfg_;
  LinkSchedule schedule_;
  std::filesystem::path work_dir_;
  bool owns_work_dir_ = false;
  VirtualClock clock_;
  std::unique_ptr<fog::FogNode> fog_;
  std::unique_ptr<archive::ArchiveCatalog> catalog_;
  std::vector<std::unique_ptr<Device>> devices_;
  meter::CounterAccounting accounting_;
  meter::ResourceSampler sampler_;
  std::vector<std::string> frames_;
  std::uint64_t fog_held_bytes_ = 0;
  std::int64_t tiering_cutoff_ms_ = 0;
};

ScenarioResult run_scenario(const ScenarioConfig& cfg, const LinkSchedule& schedule);

}  // namespace odlc::harness
