#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "odlc/fog/fog_node.hpp"
#include "odlc/fog/server.hpp"
#include "odlc/meter/meter.hpp"
#include "odlc/util/kv_config.hpp"

namespace odlc::fog {

struct FogServiceConfig {
  FogConfig node;
  std::string listen = "0.0.0.0:7070";
  std::filesystem::path query_socket = "odlc-fog.sock";
  TieringPolicy tiering;  // empty sink: no tiering
  std::vector<AlertRule> alert_rules;
  double alert_interval_s = 15.0;
  double checkpoint_interval_s = 60.0;
  std::filesystem::path meter_out;
  meter::MeterBudget budget;
  std::int64_t meter_window_ms = 1000;
};

const std::set<std::string>& fog_config_keys();
// Throws ConfigError. `alerts.rules` names a file of JSON rule objects, one per line.
FogServiceConfig fog_service_config_from(const KvConfig& kv);
std::vector<AlertRule> load_alert_rules(const std::filesystem::path& path);

// A fog node with its frame listener, query socket, tiering, alert
// evaluation and self-metering ("fog" component, whole process).
class FogService {
 public:
  // Binds both sockets. Throws AddressInUse.
  explicit FogService(FogServiceConfig cfg);
  ~FogService();

  // Serves until `*external` turns true, stop() is called or duration_s passes (0: no limit).
  void run(const std::atomic<bool>* external = nullptr, double duration_s = 0.0);
  void stop() { stop_.store(true); }

  FogNode& node() noexcept { return *node_; }
  std::uint16_t port() const { return frames_->port(); }
  meter::MeterReport meter_report() const { return sampler_.report(); }

 private:
  void tick(std::int64_t now_ms);

  FogServiceConfig cfg_;
  std::unique_ptr<FogNode> node_;
  std::unique_ptr<FrameServer> frames_;
  std::unique_ptr<QueryServer> queries_;
  meter::ProcAccounting accounting_;
  meter::ResourceSampler sampler_;
  std::atomic<bool> stop_{false};
  std::int64_t next_tiering_ms_ = 0;
  std::int64_t next_alert_ms_ = 0;
  std::int64_t next_checkpoint_ms_ = 0;
  std::int64_t window_start_ms_ = 0;
  std::uint64_t net_seen_ = 0;
};

}  // namespace odlc::fog
