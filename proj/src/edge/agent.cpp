#include "odlc/edge/agent.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "odlc/core/errors.hpp"
#include "odlc/util/log.hpp"

namespace odlc::edge {

const std::set<std::string>& edge_config_keys() {
  static const std::set<std::string> keys{
      "device.id",          "metric.interval_s",     "metric.source",     "metric.exposition_path",
      "log.paths",          "trace.ingest_enabled",  "staging.capacity_bytes", "staging.high_watermark",
      "weights.profile",    "fog.address",           "link.budget_bytes", "batch.max_bytes",
      "transmit.timeout_s", "cycle.interval_s",      "state.path",        "reduce.strip_help",
      "reduce.strip_type",  "reduce.allowlist",      "reduce.interval_scale"};
  return keys;
}

EdgeConfig edge_config_from(const KvConfig& kv) {
  kv.reject_unknown(edge_config_keys());
  EdgeConfig cfg;
  auto& c = cfg.collector;
  c.device_id = kv.get_string("device.id", c.device_id);
  c.metric_interval_s = kv.get_double("metric.interval_s", c.metric_interval_s);
  c.metric_source = parse_metric_source(kv.get_string("metric.source", "host-stats"));
  c.exposition_path = kv.get_string("metric.exposition_path", "");
  if (auto paths = kv.get_list("log.paths")) {
    for (auto& p : *paths) c.log_paths.emplace_back(p);
  }
  c.trace_ingest_enabled = kv.get_bool("trace.ingest_enabled", c.trace_ingest_enabled);
  c.weights = weight_profile(kv.get_string("weights.profile", "regular"));
  c.reduction.strip_help = kv.get_bool("reduce.strip_help", false);
  c.reduction.strip_type = kv.get_bool("reduce.strip_type", false);
  if (kv.has("reduce.allowlist")) c.reduction.family_allowlist = kv.get_list("reduce.allowlist");
  c.reduction.interval_scale = kv.get_double("reduce.interval_scale", 1.0);
  c.validate();

  const auto capacity = kv.get_int("staging.capacity_bytes", static_cast<std::int64_t>(cfg.staging.capacity_bytes));
  if (capacity <= 0) throw ConfigError("staging.capacity_bytes must be positive");
  cfg.staging.capacity_bytes = static_cast<std::size_t>(capacity);
  cfg.staging.high_watermark = kv.get_double("staging.high_watermark", cfg.staging.high_watermark);
  const auto budget = kv.get_int("link.budget_bytes", static_cast<std::int64_t>(cfg.link_budget_bytes));
  const auto max_batch = kv.get_int("batch.max_bytes", static_cast<std::int64_t>(cfg.max_batch_bytes));
  if (budget < 0 || max_batch <= 0) throw ConfigError("link.budget_bytes and batch.max_bytes must be positive");
  cfg.link_budget_bytes = static_cast<std::size_t>(budget);
  cfg.max_batch_bytes = static_cast<std::size_t>(max_batch);
  cfg.fog_address = kv.get_string("fog.address", cfg.fog_address);
  cfg.state_path = kv.get_string("state.path", "");
  cfg.transmit_timeout_s = kv.get_double("transmit.timeout_s", cfg.transmit_timeout_s);
  cfg.cycle_interval_s = kv.get_double("cycle.interval_s", cfg.cycle_interval_s);
  if (!(cfg.cycle_interval_s > 0.0)) throw ConfigError("cycle.interval_s must be positive");
  wire::check_device_id(c.device_id);
  return cfg;
}

std::optional<EdgeState> EdgeState::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    in >> j;
    EdgeState st;
    for (auto& [file, o] : j.at("offsets").items()) {
      st.offsets[file] = FileOffset{o.at("offset").get<std::uint64_t>(), o.at("inode").get<std::uint64_t>()};
    }
    for (auto& [dom, seq] : j.at("next_batch_seq").items()) st.next_batch_seq[parse_domain(dom)] = seq.get<std::uint64_t>();
    return st;
  } catch (const std::exception& e) {
    throw ConfigError("corrupt edge state file " + path.string() + ": " + e.what());
  }
}

void EdgeState::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["offsets"] = nlohmann::json::object();
  for (const auto& [file, o] : offsets) j["offsets"][file] = {{"offset", o.offset}, {"inode", o.inode}};
  j["next_batch_seq"] = nlohmann::json::object();
  for (const auto& [d, seq] : next_batch_seq) j["next_batch_seq"][std::string(domain_name(d))] = seq;
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write edge state " + tmp);
    out << j.dump() << '\n';
    out.flush();
    if (!out) throw IoError("cannot write edge state " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::map<std::string, FileOffset> initial_offsets(const EdgeConfig& cfg) {
  if (cfg.state_path.empty()) return {};
  auto st = EdgeState::load(cfg.state_path);
  return st ? st->offsets : std::map<std::string, FileOffset>{};
}

}  // namespace

EdgeAgent::EdgeAgent(EdgeConfig cfg, const Clock& clock, std::unique_ptr<MetricSource> metrics,
                     std::uint64_t span_seed)
    : cfg_(std::move(cfg)),
      clock_(clock),
      store_(cfg_.staging, cfg_.collector.weights),
      metric_collector_(cfg_.collector, std::move(metrics)),
      log_harvester_(cfg_.collector.device_id, cfg_.collector.log_paths, initial_offsets(cfg_)),
      spans_(cfg_.collector.device_id, clock, [this](TraceSpan s) {
        if (trace_enabled()) admit(ObservabilityRecord(std::move(s)));
      }, span_seed) {
  wire::check_device_id(cfg_.collector.device_id);
  if (!cfg_.state_path.empty()) {
    if (auto st = EdgeState::load(cfg_.state_path)) {
      for (const auto& [d, seq] : st->next_batch_seq) store_.restore_batch_seq(d, seq);
    }
  }
}

bool EdgeAgent::trace_enabled() const {
  return cfg_.collector.trace_ingest_enabled && cfg_.collector.weights.enabled(Domain::Trace);
}

bool EdgeAgent::admit(ObservabilityRecord rec) {
  const Domain d = rec.domain();
  {
    std::lock_guard lock(mu_);
    auto& c = counters_[domain_index(d)];
    ++c.records;
    c.wire_bytes += rec.encoded_size();
    c.footprint_bytes += rec.footprint_bytes();
  }
  StageOutcome outcome = StageOutcome::Rejected;
  std::optional<ObservabilityRecord> copy;
  if (observer_) copy = rec;
  try {
    outcome = store_.stage(std::move(rec));
  } catch (const RecordTooLarge& e) {
    log::warn("{}", e.what());
  }
  if (outcome == StageOutcome::Rejected) {
    std::lock_guard lock(mu_);
    ++counters_[domain_index(d)].admission_failures;
  }
  if (observer_) observer_(*copy, outcome);
  return outcome != StageOutcome::Rejected;
}

void EdgeAgent::collect_metrics_if_due(std::int64_t now_ms) {
  if (!metric_collector_.due(now_ms)) return;
  auto em = metric_collector_.collect(now_ms);
  if (!em) return;
  for (auto& r : em->records) admit(std::move(r));
}

void EdgeAgent::harvest_logs(std::int64_t now_ms) {
  if (!cfg_.collector.weights.enabled(Domain::Log) || cfg_.collector.log_paths.empty()) return;
  std::vector<ObservabilityRecord> entries;
  {
    std::lock_guard lock(harvest_mu_);
    entries = log_harvester_.harvest(now_ms);
  }
  for (auto& r : entries) admit(std::move(r));
  if (!entries.empty()) persist_state();
}

TransmitReport EdgeAgent::transmit_cycle(Connection& conn, const LinkState& link) {
  std::map<Domain, OverheadScore> over;
  {
    std::lock_guard lock(mu_);
    over = over_;
  }
  LinkState effective = link;
  effective.last_ack_seq = link_.last_ack_seq;
  auto plan = store_.plan_batches(effective, cfg_.collector.weights, over, cfg_.max_batch_bytes);
  if (plan.empty()) return {};
  auto report = transmit(store_, plan, cfg_.collector.device_id, conn,
                         std::chrono::milliseconds(static_cast<std::int64_t>(cfg_.transmit_timeout_s * 1000)),
                         &link_);
  persist_state();
  return report;
}

void EdgeAgent::set_overheads(std::map<Domain, OverheadScore> over) {
  std::lock_guard lock(mu_);
  over_ = std::move(over);
}

CollectionCounters EdgeAgent::counters(Domain d) const {
  std::lock_guard lock(mu_);
  return counters_[domain_index(d)];
}

void EdgeAgent::persist_state() {
  if (cfg_.state_path.empty()) return;
  std::lock_guard lock(harvest_mu_);
  EdgeState st;
  st.offsets = log_harvester_.offsets();
  for (Domain d : kDomains) st.next_batch_seq[d] = store_.next_batch_seq(d);
  st.save(cfg_.state_path);
}

}  // namespace odlc::edge
