#include "odlc/harness/scenario.hpp"

#include <stdlib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <random>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "odlc/core/errors.hpp"
#include "odlc/edge/wire.hpp"
#include "odlc/util/log.hpp"

namespace odlc::harness {

namespace {

const std::array<std::string, kDomainCount> kEdgeComponents{"edge.metric", "edge.log", "edge.trace"};
const std::string kFog = "fog";
const std::string kArchive = "archive";

struct KeyHash {
  std::size_t operator()(const Hash128& h) const noexcept { return static_cast<std::size_t>(h.hi ^ (h.lo * 31)); }
};

std::int64_t to_ms(double s) { return static_cast<std::int64_t>(std::llround(s * 1000.0)); }

class LocalCorrelation : public meter::CorrelationSource {
 public:
  explicit LocalCorrelation(const fog::FogNode& fog) : fog_(fog) {}
  CorrelationScore correlation(const CorrelationWindow& w) override { return fog_.correlate(w).score; }

 private:
  const fog::FogNode& fog_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ScenarioConfig::validate() const {
  workload.validate();
  reduction.validate();
  budget.validate();
  if (!(cycle_interval_s > 0.0)) throw ScenarioConfigError("cycle.interval_s must be positive");
  if (!(ack_drop_probability >= 0.0 && ack_drop_probability < 1.0))
    throw ScenarioConfigError("ack_drop_probability must be in [0, 1)");
  if (!(link_bandwidth_bytes_per_s > 0.0)) throw ScenarioConfigError("link bandwidth must be positive");
  if (staging.capacity_bytes == 0 || !(staging.high_watermark > 0.0 && staging.high_watermark <= 1.0))
    throw ScenarioConfigError("staging capacity must be positive and the watermark in (0, 1]");
  if (max_batch_bytes == 0) throw ScenarioConfigError("batch.max_bytes must be positive");
  if (tiering_age_limit_s < 0) throw ScenarioConfigError("tiering.age_limit_s must be non-negative");
  if (meter_window_ms <= 0) throw ScenarioConfigError("meter.window_ms must be positive");
  if (!(virtual_speed >= 0.0)) throw ScenarioConfigError("virtual_speed must be non-negative");
}

const std::set<std::string>& scenario_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k{"weights.profile",       "reduce.policy",        "reduce.strip_help",
                            "reduce.strip_type",     "reduce.allowlist",     "reduce.interval_scale",
                            "staging.capacity_bytes", "staging.high_watermark", "batch.max_bytes",
                            "link.bandwidth_bytes_per_s", "cycle.interval_s", "ack_drop_probability",
                            "start_ms",              "tiering.age_limit_s",  "tiering.enabled",
                            "fog.durable",           "work_dir",             "keep_work_dir",
                            "meter.cores",           "meter.mem_bytes",      "meter.link_bytes_per_s",
                            "meter.window_ms",       "virtual_speed",        "audit_evictions"};
    for (const auto& w : workload_keys()) k.insert(w);
    return k;
  }();
  return keys;
}

ScenarioConfig scenario_from(const KvConfig& kv) {
  kv.reject_unknown(scenario_keys());
  ScenarioConfig c;
  c.workload = workload_from(kv);
  c.weights = weight_profile(kv.get_string("weights.profile", c.weights.name()));
  const auto policy = kv.get_string("reduce.policy", "default");
  if (policy == "reduced")
    c.reduction = reduced_policy();
  else if (policy != "default")
    throw ScenarioConfigError("reduce.policy must be 'default' or 'reduced'");
  c.reduction.strip_help = kv.get_bool("reduce.strip_help", c.reduction.strip_help);
  c.reduction.strip_type = kv.get_bool("reduce.strip_type", c.reduction.strip_type);
  if (kv.has("reduce.allowlist")) c.reduction.family_allowlist = kv.get_list("reduce.allowlist");
  c.reduction.interval_scale = kv.get_double("reduce.interval_scale", c.reduction.interval_scale);
  const auto cap = kv.get_int("staging.capacity_bytes", static_cast<std::int64_t>(c.staging.capacity_bytes));
  const auto batch = kv.get_int("batch.max_bytes", static_cast<std::int64_t>(c.max_batch_bytes));
  if (cap <= 0 || batch <= 0) throw ScenarioConfigError("staging.capacity_bytes and batch.max_bytes must be positive");
  c.staging.capacity_bytes = static_cast<std::size_t>(cap);
  c.max_batch_bytes = static_cast<std::size_t>(batch);
  c.staging.high_watermark = kv.get_double("staging.high_watermark", c.staging.high_watermark);
  c.link_bandwidth_bytes_per_s = kv.get_double("link.bandwidth_bytes_per_s", c.link_bandwidth_bytes_per_s);
  c.cycle_interval_s = kv.get_double("cycle.interval_s", c.cycle_interval_s);
  c.ack_drop_probability = kv.get_double("ack_drop_probability", c.ack_drop_probability);
  c.start_ms = kv.get_int("start_ms", c.start_ms);
  c.tiering_age_limit_s = kv.get_int("tiering.age_limit_s", c.tiering_age_limit_s);
  c.tiering = kv.get_bool("tiering.enabled", c.tiering);
  c.fog_durable = kv.get_bool("fog.durable", c.fog_durable);
  c.work_dir = kv.get_string("work_dir", "");
  c.keep_work_dir = kv.get_bool("keep_work_dir", c.keep_work_dir);
  c.budget.cores = kv.get_double("meter.cores", c.budget.cores);
  c.budget.mem_bytes = kv.get_double("meter.mem_bytes", c.budget.mem_bytes);
  c.budget.link_bytes_per_s = kv.get_double("meter.link_bytes_per_s", c.budget.link_bytes_per_s);
  c.meter_window_ms = kv.get_int("meter.window_ms", c.meter_window_ms);
  c.virtual_speed = kv.get_double("virtual_speed", c.virtual_speed);
  c.audit_evictions = kv.get_bool("audit_evictions", c.audit_evictions);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Results

DomainTally& DomainTally::operator+=(const DomainTally& o) {
  generated_records += o.generated_records;
  generated_wire_bytes += o.generated_wire_bytes;
  generated_footprint_bytes += o.generated_footprint_bytes;
  staged_records += o.staged_records;
  admission_failures += o.admission_failures;
  evicted_records += o.evicted_records;
  evicted_bytes += o.evicted_bytes;
  transmitted_records += o.transmitted_records;
  transmitted_bytes += o.transmitted_bytes;
  acked_records += o.acked_records;
  ingested_records += o.ingested_records;
  duplicate_records += o.duplicate_records;
  ingested_wire_bytes += o.ingested_wire_bytes;
  ingested_footprint_bytes += o.ingested_footprint_bytes;
  archived_records += o.archived_records;
  return *this;
}

DomainTally ScenarioResult::total(Domain d) const {
  DomainTally t;
  for (const auto& dev : devices) t += dev.domains[domain_index(d)];
  return t;
}

std::uint64_t ScenarioResult::ingested_footprint_bytes() const {
  std::uint64_t n = 0;
  for (Domain d : kDomains) n += total(d).ingested_footprint_bytes;
  return n;
}

double ScenarioResult::payload_bytes() const {
  double n = 0;
  for (const auto& d : devices) n += d.payload_bytes;
  return n;
}

namespace {

nlohmann::ordered_json tally_json(const DomainTally& t) {
  return {{"generated_records", t.generated_records},
          {"generated_wire_bytes", t.generated_wire_bytes},
          {"generated_footprint_bytes", t.generated_footprint_bytes},
          {"staged_records", t.staged_records},
          {"admission_failures", t.admission_failures},
          {"evicted_records", t.evicted_records},
          {"evicted_bytes", t.evicted_bytes},
          {"transmitted_records", t.transmitted_records},
          {"transmitted_bytes", t.transmitted_bytes},
          {"acked_records", t.acked_records},
          {"ingested_records", t.ingested_records},
          {"duplicate_records", t.duplicate_records},
          {"ingested_wire_bytes", t.ingested_wire_bytes},
          {"ingested_footprint_bytes", t.ingested_footprint_bytes},
          {"archived_records", t.archived_records}};
}

}  // namespace

std::string ScenarioResult::to_text() const {
  nlohmann::ordered_json j;
  j["devices"] = nlohmann::ordered_json::array();
  for (const auto& d : devices) {
    nlohmann::ordered_json dj{{"device", d.device}, {"payload_bytes", d.payload_bytes}};
    for (Domain dom : kDomains) dj[std::string(domain_name(dom))] = tally_json(d.domains[domain_index(dom)]);
    j["devices"].push_back(std::move(dj));
  }
  j["totals"] = nlohmann::ordered_json::object();
  for (Domain dom : kDomains) j["totals"][std::string(domain_name(dom))] = tally_json(total(dom));
  j["link"] = nlohmann::ordered_json::array();
  for (const auto& iv : link)
    j["link"].push_back({{"start_ms", iv.start_ms}, {"end_ms", iv.end_ms}, {"available", iv.available},
                         {"bandwidth_bytes_per_s", iv.bandwidth_bytes_per_s}});
  j["wall_seconds"] = wall_seconds;
  j["virtual_seconds"] = virtual_seconds;
  j["drain_seconds"] = drain_seconds;
  j["drained"] = drained;
  j["frames_sent"] = frames_sent;
  j["acks_dropped"] = acks_dropped;
  j["tiering_skipped"] = tiering_skipped;
  j["archive_segments"] = archive_segments;
  j["exported"] = nlohmann::ordered_json::object();
  for (Domain dom : kDomains) j["exported"][std::string(domain_name(dom))] = exported[domain_index(dom)];
  j["fog_records"] = fog_records;
  j["archive_records"] = archive_records;
  j["evictions_audited"] = evictions_audited;
  j["eviction_violations"] = eviction_violations;
  j["payload_bytes"] = payload_bytes();
  j["ingested_footprint_bytes"] = ingested_footprint_bytes();
  j["edge_cpu_pct_mean"] = edge_cpu_pct_mean;
  if (outcome) {
    j["outcome"] = meter::outcome_json(*outcome);
  } else {
    j["outcome"] = nullptr;
    j["outcome_error"] = outcome_error;
  }
  return j.dump();
}

std::string ScenarioResult::plot_data() const {
  std::string out =
      "# t_s link_up bandwidth_Bps staged_bytes gen_metric_bytes gen_log_bytes gen_trace_bytes "
      "ingested_metric ingested_log ingested_trace\n";
  for (const auto& p : timeline) {
    out += fmt::format("{} {} {} {} {} {} {} {} {} {}\n", static_cast<double>(p.t_ms) / 1000.0,
                       p.link_available ? 1 : 0, p.bandwidth_bytes_per_s, p.staged_bytes, p.generated_footprint[0],
                       p.generated_footprint[1], p.generated_footprint[2], p.ingested_records[0],
                       p.ingested_records[1], p.ingested_records[2]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario

struct Scenario::Device {
  std::string name;
  std::unique_ptr<edge::EdgeAgent> agent;
  LogGenerator logs;
  TraceGenerator traces;
  std::filesystem::path log_path;
  std::ofstream log_out;
  std::unique_ptr<Link> link;
  std::int64_t next_log_ms = 0;
  std::int64_t next_trace_ms = 0;
  DeviceResult result;
  std::unordered_map<Hash128, std::pair<std::uint32_t, std::uint32_t>, KeyHash> sizes;  // footprint, wire
  std::array<std::uint64_t, kDomainCount> generated_footprint{};

  Device(std::string n, std::uint64_t seed, const WorkloadSpec& w)
      : name(std::move(n)), logs(name, seed ^ 0x6c6f67, w.log_line_bytes), traces(name, seed ^ 0x747263, w.trace_bytes) {}
};

// In-process path to the fog node. Acks can be dropped to force retransmission.
class Scenario::Link : public edge::Connection {
 public:
  Link(Scenario& s, Device& d, std::uint64_t seed)
      : s_(s), d_(d), rng_(seed), drop_(s.cfg_.ack_drop_probability) {}

  void send(std::string_view frame) override {
    const auto h = wire::decode_header(frame);
    auto& t = d_.result.domains[domain_index(h.domain)];
    t.transmitted_records += h.count;
    t.transmitted_bytes += frame.size();
    ++frames;
    if (s_.cfg_.keep_frames) s_.frames_.emplace_back(frame);
    const double c0 = meter::thread_cpu_seconds();
    fog::IngestResult r;
    try {
      r = s_.fog_->ingest(frame);
    } catch (const StorageFull& e) {
      log::warn("fog rejected a batch: {}", e.what());
      return;
    }
    s_.accounting_.charge_cpu(kFog, meter::thread_cpu_seconds() - c0);
    s_.accounting_.charge_net(kFog, static_cast<double>(frame.size() + r.ack.size()));
    t.ingested_records += r.stored;
    t.duplicate_records += r.duplicates;
    if (h.count > 0) s_.fog_held_bytes_ += frame.size() * r.stored / h.count;
    if (drop_(rng_)) {
      ++dropped;
      return;
    }
    acks_.push_back(wire::decode_ack_frame(r.ack));
  }

  std::optional<wire::FrameHeader> receive_ack(std::chrono::milliseconds) override {
    if (acks_.empty()) return std::nullopt;
    auto a = acks_.front();
    acks_.pop_front();
    return a;
  }

  std::uint64_t frames = 0;
  std::uint64_t dropped = 0;

 private:
  Scenario& s_;
  Device& d_;
  std::mt19937_64 rng_;
  std::bernoulli_distribution drop_;
  std::deque<wire::FrameHeader> acks_;
};

Scenario::Scenario(ScenarioConfig cfg, LinkSchedule schedule)
    : cfg_(std::move(cfg)),
      schedule_(std::move(schedule)),
      clock_(cfg_.start_ms),
      sampler_(cfg_.budget, cfg_.meter_window_ms) {
  cfg_.validate();
  const auto& w = cfg_.workload;
  if (schedule_.end_ms() < to_ms(w.duration_s))
    throw ScenarioConfigError("link schedule ends before the run");

  if (cfg_.work_dir.empty()) {
    std::string tmpl = (std::filesystem::temp_directory_path() / "odlc-replay-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw IoError("cannot create a temporary work directory");
    work_dir_ = tmpl;
    owns_work_dir_ = !cfg_.keep_work_dir;
  } else {
    work_dir_ = cfg_.work_dir;
    std::filesystem::create_directories(work_dir_);
  }
  std::filesystem::create_directories(work_dir_ / "logs");

  fog::FogConfig fc;
  if (cfg_.fog_durable) fc.data_dir = work_dir_ / "fog";
  fc.sync_wal = false;
  fog_ = std::make_unique<fog::FogNode>(fc);
  catalog_ = std::make_unique<archive::ArchiveCatalog>(work_dir_ / "archive");

  for (std::size_t i = 0; i < w.devices; ++i) {
    const auto seed = device_seed(w.seed, i);
    auto dev = std::make_unique<Device>(device_name(i), seed, w);
    dev->log_path = work_dir_ / "logs" / (dev->name + ".log");
    dev->log_out.open(dev->log_path, std::ios::trunc);
    if (!dev->log_out) throw IoError("cannot create " + dev->log_path.string());

    edge::EdgeConfig ec;
    ec.collector.device_id = dev->name;
    ec.collector.metric_interval_s = w.metric_interval_s;
    ec.collector.metric_source = edge::MetricSourceKind::Synthetic;
    ec.collector.log_paths = {dev->log_path};
    ec.collector.weights = cfg_.weights;
    ec.collector.reduction = cfg_.reduction;
    ec.staging = cfg_.staging;
    ec.max_batch_bytes = cfg_.max_batch_bytes;
    ec.cycle_interval_s = cfg_.cycle_interval_s;

    std::unique_ptr<edge::MetricSource> source;
    if (w.metric_payload_bytes > 0) {
      auto corpus = std::make_shared<const ExpositionCorpus>(CorpusConfig{w.metric_payload_bytes, seed});
      source = std::make_unique<edge::SyntheticSource>([corpus](std::uint64_t e) { return corpus->emit(e); });
    } else {
      source = std::make_unique<edge::SyntheticSource>([](std::uint64_t) { return std::string(); });
    }
    dev->agent = std::make_unique<edge::EdgeAgent>(ec, clock_, std::move(source), seed);
    dev->link = std::make_unique<Link>(*this, *dev, seed ^ 0x61636b);
    dev->result.device = dev->name;
    devices_.push_back(std::move(dev));
  }
  for (const auto& c : kEdgeComponents) accounting_.set_memory(c, 0);
  accounting_.set_memory(kFog, 0);
  accounting_.set_memory(kArchive, 0);
}

Scenario::~Scenario() {
  if (!owns_work_dir_) return;
  std::error_code ec;
  std::filesystem::remove_all(work_dir_, ec);
}

edge::EdgeAgent& Scenario::agent(std::size_t i) { return *devices_.at(i)->agent; }

void Scenario::admit(Device& d, ObservabilityRecord rec, ScenarioResult& out) {
  const Domain dom = rec.domain();
  const Hash128 key = rec.dedup_key();
  const auto sizes = std::make_pair(static_cast<std::uint32_t>(rec.footprint_bytes()),
                                    static_cast<std::uint32_t>(rec.encoded_size()));
  d.generated_footprint[domain_index(dom)] += rec.footprint_bytes();
  auto& staging = d.agent->staging();

  std::array<std::vector<std::int64_t>, kDomainCount> shadow;
  std::size_t seen = 0;
  if (cfg_.audit_evictions) {
    for (Domain x : kDomains) shadow[domain_index(x)] = staging.queued_timestamps(x);
    seen = staging.eviction_log().size();
  }

  if (d.agent->admit(std::move(rec))) d.sizes[key] = sizes;

  if (!cfg_.audit_evictions) return;
  const auto events = staging.eviction_log();
  const auto weights = staging.weights();
  for (std::size_t i = seen; i < events.size(); ++i) {
    const auto& e = events[i];
    ++out.evictions_audited;
    double min_weight = std::numeric_limits<double>::infinity();
    for (Domain x : kDomains) {
      if (!shadow[domain_index(x)].empty()) min_weight = std::min(min_weight, weights.weight(x));
    }
    auto& q = shadow[domain_index(e.domain)];
    if (q.empty()) {
      out.eviction_violations.push_back(
          fmt::format("{}: evicted from {} which had nothing queued", d.name, domain_name(e.domain)));
      continue;
    }
    if (weights.weight(e.domain) > min_weight || e.weight != weights.weight(e.domain)) {
      out.eviction_violations.push_back(fmt::format("{}: evicted {} (weight {}) while weight {} data was queued",
                                                    d.name, domain_name(e.domain), weights.weight(e.domain),
                                                    min_weight));
    }
    const auto oldest = std::min_element(q.begin(), q.end());
    if (e.source_timestamp_ms != *oldest) {
      out.eviction_violations.push_back(fmt::format("{}: evicted {} record at {} ms while {} ms was queued", d.name,
                                                    domain_name(e.domain), e.source_timestamp_ms, *oldest));
    }
    auto hit = std::find(q.begin(), q.end(), e.source_timestamp_ms);
    q.erase(hit != q.end() ? hit : oldest);
  }
}

void Scenario::tick(std::int64_t offset_ms, bool generate, const LinkInterval& link, ScenarioResult& out) {
  const auto& w = cfg_.workload;
  const std::int64_t now = cfg_.start_ms + offset_ms;
  clock_.set_ms(now);
  const double share = 1.0 / static_cast<double>(devices_.size());
  const bool logs_on = cfg_.weights.enabled(Domain::Log) && w.log_line_bytes > 0;
  const bool traces_on = cfg_.weights.enabled(Domain::Trace) && w.trace_bytes > 0;
  const double tick_s = cfg_.cycle_interval_s;

  for (auto& dp : devices_) {
    Device& d = *dp;
    edge::EdgeAgent& agent = *d.agent;
    if (generate) {
      d.result.payload_bytes += w.effective_payload_rate() * tick_s;
      if (logs_on) {
        for (; d.next_log_ms <= offset_ms; d.next_log_ms += to_ms(w.log_interval_s))
          d.log_out << d.logs.next_line(cfg_.start_ms + d.next_log_ms);
        d.log_out.flush();
      }
      if (traces_on) {
        for (; d.next_trace_ms <= offset_ms; d.next_trace_ms += to_ms(w.trace_interval_s)) {
          const double c0 = meter::thread_cpu_seconds();
          for (auto& s : d.traces.next_trace((cfg_.start_ms + d.next_trace_ms) * 1000))
            admit(d, ObservabilityRecord(std::move(s)), out);
          accounting_.charge_cpu(kEdgeComponents[2], (meter::thread_cpu_seconds() - c0) * share);
        }
      }
      if (w.metric_payload_bytes > 0 && agent.metrics().due(now)) {
        const double c0 = meter::thread_cpu_seconds();
        if (auto em = agent.metrics().collect(now)) {
          for (auto& r : em->records) admit(d, std::move(r), out);
        }
        accounting_.charge_cpu(kEdgeComponents[0], (meter::thread_cpu_seconds() - c0) * share);
      }
      if (logs_on) {
        const double c0 = meter::thread_cpu_seconds();
        for (auto& r : agent.logs().harvest(now)) admit(d, std::move(r), out);
        accounting_.charge_cpu(kEdgeComponents[1], (meter::thread_cpu_seconds() - c0) * share);
      }
    }

    const auto budget = static_cast<std::size_t>(link.bandwidth_bytes_per_s * tick_s);
    if (link.available && budget > 0) {
      edge::LinkState ls;
      ls.available = true;
      ls.bandwidth_budget_bytes_per_cycle = budget;
      const double c0 = meter::thread_cpu_seconds();
      const auto report = agent.transmit_cycle(*d.link, ls);
      const double cpu = meter::thread_cpu_seconds() - c0;
      std::array<double, kDomainCount> bytes{};
      double sum = 0;
      for (const auto& b : report.batches) {
        bytes[domain_index(b.domain)] += static_cast<double>(b.bytes);
        sum += static_cast<double>(b.bytes);
      }
      for (Domain x : kDomains) {
        const double part = bytes[domain_index(x)];
        if (part <= 0) continue;
        accounting_.charge_cpu(kEdgeComponents[domain_index(x)], cpu * part / sum * share);
        accounting_.charge_net(kEdgeComponents[domain_index(x)], part * share);
      }
    }
  }

  TimelinePoint p;
  p.t_ms = offset_ms;
  p.link_available = link.available;
  p.bandwidth_bytes_per_s = link.bandwidth_bytes_per_s;
  std::array<double, kDomainCount> mem{};
  for (const auto& dp : devices_) {
    p.staged_bytes += dp->agent->staging().total_bytes();
    for (Domain x : kDomains) {
      const auto i = domain_index(x);
      p.generated_footprint[i] += dp->generated_footprint[i];
      p.ingested_records[i] += dp->result.domains[i].ingested_records;
      mem[i] += static_cast<double>(dp->agent->staging().domain_bytes(x)) * share;
    }
  }
  for (Domain x : kDomains) accounting_.set_memory(kEdgeComponents[domain_index(x)], mem[domain_index(x)]);
  accounting_.set_memory(kFog, static_cast<double>(fog_held_bytes_));
  out.timeline.push_back(p);
}

void Scenario::sample_meter(std::int64_t window_start_ms, std::int64_t window_end_ms) {
  std::map<Domain, OverheadScore> over;
  for (Domain x : kDomains) {
    auto s = sampler_.sample_component(kEdgeComponents[domain_index(x)], accounting_, window_start_ms, window_end_ms);
    if (s) over.emplace(x, overhead_score(make_overhead_vector(s->cpu_pct, s->mem_pct, s->net_pct)));
  }
  sampler_.sample_component(kFog, accounting_, window_start_ms, window_end_ms);
  sampler_.sample_component(kArchive, accounting_, window_start_ms, window_end_ms);
  for (auto& d : devices_) d->agent->set_overheads(over);
}

ScenarioResult Scenario::run() {
  ScenarioResult out;
  out.link = schedule_.intervals();
  const auto wall0 = std::chrono::steady_clock::now();
  const std::int64_t duration_ms = to_ms(cfg_.workload.duration_s);
  const std::int64_t tick_ms = std::max<std::int64_t>(1, to_ms(cfg_.cycle_interval_s));
  std::int64_t window_start = 0;

  auto after_tick = [&](std::int64_t offset_ms) {
    const std::int64_t end = offset_ms + tick_ms;
    while (end - window_start >= cfg_.meter_window_ms) {
      sample_meter(cfg_.start_ms + window_start, cfg_.start_ms + window_start + cfg_.meter_window_ms);
      window_start += cfg_.meter_window_ms;
    }
    if (cfg_.virtual_speed > 0.0) {
      const auto target = wall0 + std::chrono::duration<double>(static_cast<double>(end) / 1000.0 / cfg_.virtual_speed);
      std::this_thread::sleep_until(target);
    }
  };

  std::int64_t offset = 0;
  for (; offset < duration_ms; offset += tick_ms) {
    tick(offset, true, schedule_.at(offset), out);
    after_tick(offset);
  }
  out.virtual_seconds = static_cast<double>(offset) / 1000.0;

  const LinkInterval drain{0, 0, true, cfg_.link_bandwidth_bytes_per_s};
  auto pending = [&] {
    for (const auto& d : devices_)
      if (!d->agent->staging().empty()) return true;
    return false;
  };
  std::size_t cycles = 0;
  while (pending() && cycles < cfg_.max_drain_cycles) {
    tick(offset, false, drain, out);
    after_tick(offset);
    offset += tick_ms;
    ++cycles;
  }
  out.drained = !pending();
  out.drain_seconds = static_cast<double>(cycles * tick_ms) / 1000.0;
  if (!out.drained) log::warn("staging not drained after {} cycles", cycles);

  finish(out);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return out;
}

void Scenario::finish(ScenarioResult& out) {
  const std::int64_t now = clock_.now_ms();
  if (cfg_.tiering) {
    fog::TieringPolicy policy;
    policy.age_limit_s = cfg_.tiering_age_limit_s > 0
                             ? cfg_.tiering_age_limit_s
                             : std::max<std::int64_t>(1, std::llround(cfg_.workload.duration_s / 2));
    policy.cycle_interval_s = policy.age_limit_s;
    policy.sink = (work_dir_ / "export").string();
    std::filesystem::create_directories(policy.sink);
    tiering_cutoff_ms_ = now - policy.age_limit_s * 1000;
    fog::DirectorySink sink(policy.sink);
    const auto held_before = fog_->record_count();
    const double c0 = meter::thread_cpu_seconds();
    const auto report = fog_->tiering_cycle(policy, now, sink);
    std::vector<archive::ImportFailure> errors;
    const auto imported = catalog_->import_dir(policy.sink, &errors);
    accounting_.charge_cpu(kArchive, meter::thread_cpu_seconds() - c0);
    double seg_bytes = 0;
    for (const auto& r : imported) seg_bytes += static_cast<double>(std::filesystem::file_size(r.stored_path));
    accounting_.charge_net(kArchive, seg_bytes);
    accounting_.set_memory(kArchive, 0);
    for (const auto& e : report.errors) log::warn("tiering: {}", e);
    out.tiering_skipped = report.skipped;
    for (const auto& [d, n] : report.exported) out.exported[domain_index(d)] = n;
    if (held_before > 0) fog_held_bytes_ = fog_held_bytes_ * fog_->record_count() / held_before;
    out.archive_segments = catalog_->segment_count();
    accounting_.set_memory(kFog, static_cast<double>(fog_held_bytes_));
    sample_meter(now, now + cfg_.meter_window_ms);
  }

  std::map<std::string, Device*> by_name;
  for (auto& d : devices_) by_name[d->name] = d.get();
  auto credit = [&](const ObservabilityRecord& r, bool archived) {
    auto it = by_name.find(r.device_id());
    if (it == by_name.end()) return;
    auto& t = it->second->result.domains[domain_index(r.domain())];
    if (archived) ++t.archived_records;
    auto s = it->second->sizes.find(r.dedup_key());
    if (s == it->second->sizes.end()) return;
    t.ingested_footprint_bytes += s->second.first;
    t.ingested_wire_bytes += s->second.second;
  };
  for (Domain d : kDomains) {
    for (const auto& r : fog_->records(d)) {
      credit(r, false);
      ++out.fog_records;
    }
    archive::HistoricalQuery q;
    q.domain = d;
    catalog_->scan(q, [&](const ObservabilityRecord& r) {
      credit(r, true);
      ++out.archive_records;
    });
  }

  for (auto& dp : devices_) {
    Device& d = *dp;
    for (Domain x : kDomains) {
      auto& t = d.result.domains[domain_index(x)];
      const auto c = d.agent->counters(x);
      const auto s = d.agent->staging().counters(x);
      t.generated_records = c.records;
      t.generated_wire_bytes = c.wire_bytes;
      t.generated_footprint_bytes = c.footprint_bytes;
      t.admission_failures = c.admission_failures;
      t.staged_records = s.staged_records;
      t.evicted_records = s.evicted_records;
      t.evicted_bytes = s.evicted_bytes;
      t.acked_records = s.acked_records;
    }
    out.frames_sent += d.link->frames;
    out.acks_dropped += d.link->dropped;
    out.devices.push_back(d.result);
  }

  out.meter = sampler_.report();
  const std::int64_t meter_end = cfg_.start_ms + 100LL * 365 * 24 * 3600 * 1000;
  for (const auto& c : kEdgeComponents) {
    try {
      out.edge_cpu_pct_mean += meter::overhead_of(out.meter, c, cfg_.start_ms, meter_end).cpu_pct;
    } catch (const NoSamples&) {
    }
  }
  try {
    LocalCorrelation corr(*fog_);
    const auto window = make_window(cfg_.start_ms, now + 1);
    out.outcome = meter::compose_outcome(out.meter, cfg_.weights, window, corr);
  } catch (const Error& e) {
    out.outcome_error = e.what();
  }
}

ScenarioResult run_scenario(const ScenarioConfig& cfg, const LinkSchedule& schedule) {
  Scenario s(cfg, schedule);
  return s.run();
}

}  // namespace odlc::harness
