#include "odlc/fog/service.hpp"

#include <chrono>
#include <sstream>
#include <thread>

#include "odlc/core/clock.hpp"
#include "odlc/core/errors.hpp"
#include "odlc/fog/query_api.hpp"
#include "odlc/util/files.hpp"
#include "odlc/util/log.hpp"
#include "odlc/util/socket.hpp"

namespace odlc::fog {

namespace {

std::int64_t to_ms(double s) { return static_cast<std::int64_t>(s * 1000.0); }

std::size_t non_negative(const KvConfig& kv, const char* key, std::size_t fallback) {
  const auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError(std::string(key) + " must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

const std::set<std::string>& fog_config_keys() {
  static const std::set<std::string> keys{
      "fog.listen",         "fog.query_socket",  "fog.data_dir",           "fog.dedup_window",
      "fog.max_records",    "fog.seal_threshold", "fog.sync_wal",          "tiering.age_limit_s",
      "tiering.cycle_interval_s", "tiering.sink", "alerts.rules",          "alerts.interval_s",
      "checkpoint.interval_s", "meter.out",       "meter.cores",           "meter.mem_bytes",
      "meter.link_bytes_per_s", "meter.window_ms"};
  return keys;
}

std::vector<AlertRule> load_alert_rules(const std::filesystem::path& path) {
  std::vector<AlertRule> rules;
  std::istringstream in(files::read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    try {
      rules.push_back(alert_rule_from_json(nlohmann::json::parse(t)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rules;
}

FogServiceConfig fog_service_config_from(const KvConfig& kv) {
  kv.reject_unknown(fog_config_keys());
  FogServiceConfig c;
  c.listen = kv.get_string("fog.listen", c.listen);
  net::split_host_port(c.listen);
  c.query_socket = kv.get_string("fog.query_socket", c.query_socket.string());
  c.node.data_dir = kv.get_string("fog.data_dir", "");
  c.node.dedup_window = non_negative(kv, "fog.dedup_window", c.node.dedup_window);
  c.node.max_records = non_negative(kv, "fog.max_records", c.node.max_records);
  c.node.seal_threshold = non_negative(kv, "fog.seal_threshold", c.node.seal_threshold);
  c.node.sync_wal = kv.get_bool("fog.sync_wal", c.node.sync_wal);
  c.tiering.age_limit_s = kv.get_int("tiering.age_limit_s", c.tiering.age_limit_s);
  c.tiering.cycle_interval_s = kv.get_int("tiering.cycle_interval_s", c.tiering.cycle_interval_s);
  c.tiering.sink = kv.get_string("tiering.sink", "");
  if (!c.tiering.sink.empty()) c.tiering.validate();
  if (auto rules = kv.get("alerts.rules"); rules && !rules->empty()) c.alert_rules = load_alert_rules(*rules);
  c.alert_interval_s = kv.get_double("alerts.interval_s", c.alert_interval_s);
  c.checkpoint_interval_s = kv.get_double("checkpoint.interval_s", c.checkpoint_interval_s);
  if (!(c.alert_interval_s > 0) || !(c.checkpoint_interval_s > 0))
    throw ConfigError("alerts.interval_s and checkpoint.interval_s must be positive");
  c.meter_out = kv.get_string("meter.out", "");
  c.budget.cores = kv.get_double("meter.cores", meter::online_cores());
  c.budget.mem_bytes = kv.get_double("meter.mem_bytes", c.budget.mem_bytes);
  c.budget.link_bytes_per_s = kv.get_double("meter.link_bytes_per_s", c.budget.link_bytes_per_s);
  c.budget.validate();
  c.meter_window_ms = kv.get_int("meter.window_ms", c.meter_window_ms);
  if (c.meter_window_ms <= 0) throw ConfigError("meter.window_ms must be positive");
  return c;
}

FogService::FogService(FogServiceConfig cfg)
    : cfg_(std::move(cfg)),
      node_(std::make_unique<FogNode>(cfg_.node)),
      sampler_(cfg_.budget, cfg_.meter_window_ms) {
  const auto [host, port] = net::split_host_port(cfg_.listen);
  frames_ = std::make_unique<FrameServer>(*node_, host, port);
  queries_ = std::make_unique<QueryServer>(*node_, cfg_.query_socket);
}

FogService::~FogService() {
  frames_.reset();
  queries_.reset();
}

void FogService::tick(std::int64_t now_ms) {
  if (!cfg_.tiering.sink.empty() && now_ms >= next_tiering_ms_) {
    next_tiering_ms_ = now_ms + cfg_.tiering.cycle_interval_s * 1000;
    DirectorySink sink(cfg_.tiering.sink);
    const auto r = node_->tiering_cycle(cfg_.tiering, now_ms, sink);
    if (r.skipped) log::warn("archive sink {} unavailable; tiering skipped", cfg_.tiering.sink);
    for (const auto& e : r.errors) log::warn("tiering: {}", e);
    if (!r.segments.empty()) log::info("tiering exported {} segments", r.segments.size());
  }
  if (!cfg_.alert_rules.empty() && now_ms >= next_alert_ms_) {
    next_alert_ms_ = now_ms + to_ms(cfg_.alert_interval_s);
    for (const auto& e : node_->evaluate_alerts(cfg_.alert_rules, now_ms))
      log::info("alert {} {} value={} series={}", e.rule_id, alert_state_name(e.state), e.value, e.series);
  }
  if (!cfg_.node.data_dir.empty() && now_ms >= next_checkpoint_ms_) {
    if (next_checkpoint_ms_ != 0) node_->checkpoint();
    next_checkpoint_ms_ = now_ms + to_ms(cfg_.checkpoint_interval_s);
  }
  if (now_ms - window_start_ms_ >= cfg_.meter_window_ms) {
    const auto net = frames_->bytes_in() + frames_->bytes_out() + queries_->bytes_in() + queries_->bytes_out();
    accounting_.charge_net(static_cast<double>(net - net_seen_));
    net_seen_ = net;
    sampler_.sample_component("fog", accounting_, window_start_ms_, now_ms);
    window_start_ms_ = now_ms;
    if (!cfg_.meter_out.empty()) {
      try {
        files::write_file_atomic(cfg_.meter_out, sampler_.report().to_text());
      } catch (const IoError& e) {
        log::warn("{}", e.what());
      }
    }
  }
}

void FogService::run(const std::atomic<bool>* external, double duration_s) {
  SystemClock clock;
  const std::int64_t start = clock.now_ms();
  window_start_ms_ = start;
  accounting_.usage("fog", start, start);  // baseline for the first window
  frames_->start();
  queries_->start();
  log::info("fog node listening on {} (port {}), queries on {}", cfg_.listen, port(), cfg_.query_socket.string());
  while (!stop_.load() && !(external && external->load())) {
    const auto now = clock.now_ms();
    if (duration_s > 0 && now - start >= to_ms(duration_s)) break;
    tick(now);
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  frames_->stop();
  queries_->stop();
  tick(clock.now_ms());
  if (!cfg_.node.data_dir.empty()) node_->checkpoint();
}

}  // namespace odlc::fog
