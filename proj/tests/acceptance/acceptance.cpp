// One PASS/FAIL line per acceptance criterion; exits nonzero on any FAIL.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "odlc/archive/catalog.hpp"
#include "odlc/archive/geo.hpp"
#include "odlc/archive/segment.hpp"
#include "odlc/core/errors.hpp"
#include "odlc/core/model.hpp"
#include "odlc/edge/wire.hpp"
#include "odlc/exposition/exposition.hpp"
#include "odlc/fog/fog_node.hpp"
#include "odlc/harness/scenario.hpp"
#include "odlc/harness/workload.hpp"
#include "odlc/util/files.hpp"
#include "odlc/util/log.hpp"
#include "test_util.hpp"

namespace odlc::acceptance {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string format(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string format(const char* fmt, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// First failure message wins; later checks still run.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && first_.empty()) first_ = what;
    ok_ = ok_ && ok;
  }
  bool ok() const { return ok_; }
  const std::string& first() const { return first_; }

 private:
  bool ok_ = true;
  std::string first_;
};

Outcome finish(const Checks& c, const std::string& summary) {
  return Outcome{c.ok(), c.ok() ? summary : summary + "; " + c.first()};
}

bool within(double value, double target, double rel) { return std::abs(value - target) <= rel * target; }

bool close_rel(double a, double b, double tol) { return test::close_rel(a, b, tol); }

bool same_value(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

// ---------------------------------------------------------------------------
// 1, 3, 4, 12: replays at the default workload

struct Replays {
  harness::ScenarioResult default_run;
  harness::ScenarioResult reduced_run;
  double default_wall = 0;
};

Replays& replays() {
  static Replays r = [] {
    Replays out;
    harness::ScenarioConfig cfg;
    cfg.workload.duration_s = 600;
    const auto link = harness::LinkSchedule::always_up(600'000, cfg.link_bandwidth_bytes_per_s);
    const auto t0 = Clock::now();
    out.default_run = harness::run_scenario(cfg, link);
    out.default_wall = seconds_since(t0);
    cfg.reduction = harness::reduced_policy();
    out.reduced_run = harness::run_scenario(cfg, link);
    return out;
  }();
  return r;
}

Outcome rate_fidelity() {
  const auto& r = replays();
  const double metric = static_cast<double>(r.default_run.total(Domain::Metric).ingested_footprint_bytes);
  const double log = static_cast<double>(r.default_run.total(Domain::Log).ingested_footprint_bytes);
  const double trace = static_cast<double>(r.default_run.total(Domain::Trace).ingested_footprint_bytes);
  Checks c;
  c.expect(within(metric, 65.0 * 1024 * 120, 0.05), "metric bytes outside 5%");
  c.expect(within(log, 600.0 * 1024, 0.05), "log bytes outside 5%");
  c.expect(within(trace, 160.0 * 1024, 0.05), "trace bytes outside 5%");
  c.expect(r.default_wall < 60.0, "replay took 60 s or more");
  c.expect(r.default_run.drained, "replay did not drain");
  return finish(c, format("metric=%.0f (target 7987200) log=%.0f (target 614400) trace=%.0f (target 163840) "
                          "wall=%.1fs",
                          metric, log, trace, r.default_wall));
}

Outcome aggregate_reduction() {
  const auto& r = replays();
  const double before = static_cast<double>(r.default_run.ingested_footprint_bytes());
  const double after = static_cast<double>(r.reduced_run.ingested_footprint_bytes());
  const double share = after / before;
  Checks c;
  c.expect(share <= 0.20, "reduced replay ingests more than 20% of default");
  c.expect(r.reduced_run.drained, "reduced replay did not drain");
  return finish(c, format("reduced/default ingested bytes = %.0f/%.0f = %.4f (limit 0.20)", after, before, share));
}

Outcome payload_overhead() {
  const auto& r = replays();
  const double obs = static_cast<double>(r.reduced_run.ingested_footprint_bytes());
  const double payload = r.reduced_run.payload_bytes();
  Checks c;
  c.expect(payload > 0, "no payload bytes");
  const double share = payload > 0 ? obs / payload : 1.0;
  c.expect(share < 0.01, "observability share of payload not below 1%");
  return finish(c, format("observability/payload = %.0f/%.0f = %.4f%% (limit 1%%)", obs, payload, share * 100));
}

Outcome edge_cpu_soft_check() {
  double ceiling = 15.0;
  if (const char* env = std::getenv("ODLC_EDGE_CPU_CEILING_PCT")) ceiling = std::strtod(env, nullptr);
  const double cpu = replays().default_run.edge_cpu_pct_mean;
  Checks c;
  c.expect(cpu < ceiling, "edge CPU mean above ceiling");
  return finish(c, format("edge agent CPU mean %.3f%% (ceiling %.1f%%); hardware overheads and weekly volumes "
                          "not reproducible at desk scale",
                          cpu, ceiling));
}

// ---------------------------------------------------------------------------
// 2: reduction ratios against a plain-text oracle

std::string family_of_line(const std::string& line) {
  if (line.rfind("# ", 0) == 0) {
    std::istringstream ss(line);
    std::string hash, kind, name;
    ss >> hash >> kind >> name;
    return name;
  }
  return line.substr(0, line.find_first_of("{ "));
}

double text_ratio(const std::string& doc, bool strip_help, const std::vector<std::string>* allow, double scale) {
  std::size_t before = 0, after = 0;
  std::istringstream in(doc);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t n = line.size() + 1;
    before += n;
    if (line.empty()) continue;
    if (strip_help && line.rfind("# HELP ", 0) == 0) continue;
    if (allow) {
      const auto fam = family_of_line(line);
      const bool keep = std::any_of(allow->begin(), allow->end(), [&](const std::string& p) {
        return fam.rfind(p, 0) == 0;
      });
      if (!keep) continue;
    }
    after += n;
  }
  return 1.0 - static_cast<double>(after) / scale / static_cast<double>(before);
}

Outcome reduction_pipeline() {
  const harness::ExpositionCorpus corpus;
  const auto text = corpus.emit(0);
  const auto doc = exposition::parse_exposition(text);
  exposition::ReductionPolicy help;
  help.strip_help = true;
  exposition::ReductionPolicy doubled;
  doubled.interval_scale = 2.0;
  const auto reduced = harness::reduced_policy();
  const double r_help = exposition::estimate_reduction(doc, help, 5.0).ratio;
  const double r_full = exposition::estimate_reduction(doc, reduced, 5.0).ratio;
  const double r_interval = exposition::estimate_reduction(doc, doubled, 5.0).ratio;
  Checks c;
  c.expect(r_help >= 0.20, "strip_help ratio below 0.20");
  c.expect(r_full >= 0.80, "reduced policy ratio below 0.80");
  c.expect(std::abs(r_interval - 0.50) <= 0.02, "interval doubling not 0.50 +- 0.02");
  const auto& allow = harness::reduced_allowlist();
  c.expect(close_rel(r_help, text_ratio(text, true, nullptr, 1.0), 1e-12), "strip_help disagrees with text oracle");
  c.expect(close_rel(r_full, text_ratio(text, true, &allow, 2.0), 1e-12), "reduced policy disagrees with text oracle");
  c.expect(close_rel(r_interval, text_ratio(text, false, nullptr, 2.0), 1e-12),
           "interval doubling disagrees with text oracle");
  return finish(c, format("strip_help=%.3f (>=0.20) reduced=%.3f (>=0.80, reference 0.87) interval x2=%.3f "
                          "(0.50+-0.02) on %zu-byte corpus",
                          r_help, r_full, r_interval, text.size()));
}

// ---------------------------------------------------------------------------
// 5: durability under random link schedules

Outcome durability() {
  const auto t0 = Clock::now();
  Checks c;
  std::uint64_t audited = 0, generated = 0, evicted_runs = 0;
  const std::vector<std::string> profiles{"balanced", "regular", "incident", "0.6,0.1,0.3"};
  for (std::uint64_t i = 0; i < 100; ++i) {
    std::mt19937_64 rng(1000 + i);
    const double bw = std::uniform_real_distribution<double>(5e4, 1.25e6)(rng);
    const double mean_up = std::uniform_real_distribution<double>(10, 60)(rng);
    const double mean_down = std::uniform_real_distribution<double>(5, 60)(rng);
    const auto link = harness::random_schedule(rng, 180'000, bw, mean_up, mean_down);

    harness::ScenarioConfig ample;
    ample.workload.duration_s = 180;
    ample.workload.seed = i + 1;
    ample.link_bandwidth_bytes_per_s = bw;
    const auto a = harness::run_scenario(ample, link);
    c.expect(a.drained, format("schedule %llu: ample run did not drain", static_cast<unsigned long long>(i)));
    std::uint64_t unique = 0;
    for (Domain d : kDomains) {
      const auto t = a.total(d);
      generated += t.generated_records;
      unique += t.ingested_records;
      c.expect(t.ingested_records == t.generated_records && t.evicted_records == 0 && t.admission_failures == 0,
               format("schedule %llu: %s lost records with ample staging (generated %llu, ingested %llu)",
                      static_cast<unsigned long long>(i), std::string(domain_name(d)).c_str(),
                      static_cast<unsigned long long>(t.generated_records),
                      static_cast<unsigned long long>(t.ingested_records)));
    }
    c.expect(a.fog_records + a.archive_records == unique,
             format("schedule %llu: fog + archive differs from unique ingested", static_cast<unsigned long long>(i)));

    harness::ScenarioConfig tight = ample;
    tight.staging.capacity_bytes = std::uniform_int_distribution<std::size_t>(128 * 1024, 1024 * 1024)(rng);
    tight.audit_evictions = true;
    tight.weights = weight_profile(profiles[i % profiles.size()]);
    const auto b = harness::run_scenario(tight, link);
    audited += b.evictions_audited;
    if (b.evictions_audited > 0) ++evicted_runs;
    c.expect(b.eviction_violations.empty(),
             format("schedule %llu: %s", static_cast<unsigned long long>(i),
                    b.eviction_violations.empty() ? "" : b.eviction_violations.front().c_str()));
    for (Domain d : kDomains) {
      const auto t = b.total(d);
      c.expect(t.staged_records == t.ingested_records + t.evicted_records,
               format("schedule %llu: constrained run lost records outside eviction",
                      static_cast<unsigned long long>(i)));
    }
  }
  const double wall = seconds_since(t0);
  c.expect(evicted_runs > 0, "no constrained run evicted anything");
  c.expect(wall < 300.0, "property run took 5 min or more");
  return finish(c, format("100 schedules, %llu records with zero loss, %llu evictions audited in %llu runs, %.1fs",
                          static_cast<unsigned long long>(generated), static_cast<unsigned long long>(audited),
                          static_cast<unsigned long long>(evicted_runs), wall));
}

// ---------------------------------------------------------------------------
// 6: exactly-once under dropped acks

Outcome exactly_once() {
  harness::ScenarioConfig cfg;
  cfg.workload.duration_s = 300;
  cfg.workload.devices = 2;
  cfg.ack_drop_probability = 0.3;
  cfg.keep_frames = true;
  cfg.tiering = false;
  harness::Scenario s(cfg, harness::LinkSchedule::always_up(300'000, cfg.link_bandwidth_bytes_per_s));
  const auto r = s.run();
  Checks c;
  std::uint64_t delivered = 0, duplicates = 0;
  for (Domain d : kDomains) {
    const auto t = r.total(d);
    delivered += t.staged_records - t.evicted_records;
    duplicates += t.duplicate_records;
  }
  c.expect(r.drained, "run did not drain");
  c.expect(r.acks_dropped > 0, "no acks were dropped");
  c.expect(duplicates > 0, "no retransmission reached the fog node");
  const auto held = s.fog().record_count();
  c.expect(held == delivered, format("fog holds %zu, delivered %llu", held, static_cast<unsigned long long>(delivered)));
  std::set<std::pair<std::uint64_t, std::uint64_t>> keys;
  for (Domain d : kDomains)
    for (const auto& rec : s.fog().records(d)) keys.insert({rec.dedup_key().hi, rec.dedup_key().lo});
  c.expect(keys.size() == held, "fog holds duplicate records");
  std::uint64_t restored = 0;
  for (const auto& f : s.frames()) restored += s.fog().ingest(f).stored;
  c.expect(restored == 0 && s.fog().record_count() == held, "re-ingesting a frame stored new records");
  return finish(c, format("%llu frames, %llu acks dropped, %llu duplicate records absorbed, fog=%zu delivered=%llu, "
                          "re-ingest stored %llu",
                          static_cast<unsigned long long>(r.frames_sent), static_cast<unsigned long long>(r.acks_dropped),
                          static_cast<unsigned long long>(duplicates), held,
                          static_cast<unsigned long long>(delivered), static_cast<unsigned long long>(restored)));
}

// ---------------------------------------------------------------------------
// 7: store/oracle equivalence

std::vector<std::string> oracle_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::size_t oracle_osa(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
    }
  }
  return d[a.size()][b.size()];
}

struct OracleSelector {
  std::string text;
  std::function<bool(const std::string&, const Labels&, const std::string&)> match;
};

std::string label(const Labels& l, const std::string& k) {
  for (const auto& [key, v] : l)
    if (key == k) return v;
  return "";
}

struct GeneratedLog {
  ObservabilityRecord expected;  // with the fields the fog node should extract
  std::size_t order = 0;
  Labels fields;                 // extracted plus device_id
  std::vector<std::string> tokens;
};

struct StoreFixture {
  fog::FogNode fog;
  // (name, labels, device) -> ts -> value, last write wins.
  std::map<fog::SeriesMeta, std::map<std::int64_t, double>> series;
  std::vector<GeneratedLog> logs;
  std::vector<ObservabilityRecord> spans;
  std::vector<std::string> vocabulary;
  std::vector<std::string> devices{"dev-a", "dev-b", "dev-c"};

  explicit StoreFixture(fog::FogConfig cfg) : fog(cfg) {}
};

void build_store(StoreFixture& s, std::mt19937_64& rng) {
  s.vocabulary = {"network", "timeout", "gnss",  "fix",   "lost",   "route",  "depot", "bin",   "lift",  "arm",
                  "hydraulic", "fault", "retry", "queue", "flush",  "sensor", "cabin", "door",  "speed", "limit",
                  "battery", "low",     "modem", "reset", "uplink", "frame",  "ack",   "drop",  "cache", "warm"};
  const std::vector<std::string> names{"cpu", "mem_used", "disk_io"};
  const std::vector<std::string> statuses{"ok", "degraded", "down"};
  auto pick = [&](const auto& v) -> const auto& { return v[rng() % v.size()]; };
  std::uniform_int_distribution<std::int64_t> ts(0, 59'999);
  std::uniform_real_distribution<double> val(-50, 150);
  std::map<std::pair<std::string, Domain>, std::uint64_t> seq;

  auto flush = [&](const std::string& dev, Domain d, std::vector<ObservabilityRecord>& batch) {
    if (batch.empty()) return;
    s.fog.ingest(wire::encode_data_frame(dev, d, ++seq[{dev, d}], batch));
    batch.clear();
  };

  // Metrics, including NaN values and rewrites of an existing timestamp.
  std::map<std::string, std::vector<ObservabilityRecord>> mb;
  for (int i = 0; i < 4000; ++i) {
    const auto& dev = pick(s.devices);
    Labels labels{{"host", pick(std::vector<std::string>{"a", "b", "c"})},
                  {"job", pick(std::vector<std::string>{"x", "y"})}};
    const auto& name = pick(names);
    const double v = rng() % 100 == 0 ? std::nan("") : std::round(val(rng) * 1000) / 1000;
    std::int64_t t = ts(rng);
    fog::SeriesMeta meta{name, canonical_labels(labels), dev};
    auto& pts = s.series[meta];
    if (!pts.empty() && rng() % 20 == 0) t = pts.begin()->first;
    pts[t] = v;
    mb[dev].push_back(test::metric(name, v, t, dev, labels));
    if (mb[dev].size() == 100) flush(dev, Domain::Metric, mb[dev]);
  }
  for (auto& [dev, batch] : mb) flush(dev, Domain::Metric, batch);

  std::map<std::string, std::vector<ObservabilityRecord>> lb;
  // Doc ids follow ingest order, which is per-device batch order.
  std::map<std::string, std::vector<std::size_t>> pending_idx;
  std::size_t ingest_order = 0;
  auto flush_logs = [&](const std::string& dev) {
    for (std::size_t idx : pending_idx[dev]) s.logs[idx].order = ingest_order++;
    pending_idx[dev].clear();
    flush(dev, Domain::Log, lb[dev]);
  };
  for (int i = 0; i < 4000; ++i) {
    const auto& dev = pick(s.devices);
    std::string msg;
    const int words = 2 + static_cast<int>(rng() % 5);
    for (int w = 0; w < words; ++w) msg += pick(s.vocabulary) + " ";
    Labels extracted;
    if (rng() % 2) extracted.emplace_back("zone", std::to_string(rng() % 4));
    if (rng() % 3 == 0) extracted.emplace_back("status", pick(statuses));
    for (const auto& [k, v] : extracted) msg += k + "=" + v + " ";
    msg += "n" + std::to_string(i);
    auto rec = test::log_line(msg, ts(rng), dev);
    auto e = rec.log();
    e.fields = canonical_labels(extracted);
    Labels indexed = e.fields;
    indexed.emplace_back("device_id", dev);
    pending_idx[dev].push_back(s.logs.size());
    s.logs.push_back(GeneratedLog{ObservabilityRecord(e), 0, indexed, oracle_tokens(msg)});
    lb[dev].push_back(rec);
    if (lb[dev].size() == 100) flush_logs(dev);
  }
  for (const auto& dev : s.devices) flush_logs(dev);

  std::map<std::string, std::vector<ObservabilityRecord>> sb;
  for (std::uint64_t t = 1; t <= 400; ++t) {
    const auto& dev = pick(s.devices);
    const TraceId id{t, rng()};
    const std::int64_t base = ts(rng) * 1000 + static_cast<std::int64_t>(rng() % 1000);
    const int n = 1 + static_cast<int>(rng() % 5);
    for (int k = 1; k <= n; ++k) {
      const std::int64_t dur = rng() % 10 == 0 ? 0 : static_cast<std::int64_t>(rng() % 3'000'000);
      const std::optional<std::uint64_t> parent = k == 1 ? std::nullopt : std::optional<std::uint64_t>(1);
      ObservabilityRecord rec(test::span(id, static_cast<std::uint64_t>(k), parent, "svc" + std::to_string(k), base + k * 10,
                                         dur, dev));
      s.spans.push_back(rec);
      sb[dev].push_back(rec);
    }
    if (sb[dev].size() >= 50) flush(dev, Domain::Trace, sb[dev]);
  }
  for (auto& [dev, batch] : sb) flush(dev, Domain::Trace, batch);
}

bool record_before(const ObservabilityRecord& a, const ObservabilityRecord& b) {
  if (a.source_timestamp_ms() != b.source_timestamp_ms()) return a.source_timestamp_ms() < b.source_timestamp_ms();
  return a.wire_line() < b.wire_line();
}

std::vector<std::string> lines_of(std::vector<ObservabilityRecord> v) {
  std::sort(v.begin(), v.end(), record_before);
  std::vector<std::string> out;
  for (const auto& r : v) out.push_back(r.wire_line());
  return out;
}

bool check_range(StoreFixture& s, std::mt19937_64& rng, const std::vector<OracleSelector>& selectors, std::string& why) {
  const auto& sel = selectors[rng() % selectors.size()];
  const std::int64_t start = static_cast<std::int64_t>(rng() % 65'000) - 5000;
  const std::int64_t end = start + 1 + static_cast<std::int64_t>(rng() % 70'000);
  const std::vector<fog::Aggregation> aggs{fog::Aggregation::Raw, fog::Aggregation::Avg, fog::Aggregation::Min,
                                           fog::Aggregation::Max, fog::Aggregation::Rate};
  const auto agg = aggs[rng() % aggs.size()];
  const std::vector<double> steps{0.25, 1.0, 1.5, 5.0, 7.3, 60.0};
  const double step = steps[rng() % steps.size()];
  const auto got = s.fog.query_range(sel.text, start, end, agg, step);

  std::vector<fog::SeriesResult> want;
  const std::int64_t step_ms = std::max<std::int64_t>(1, std::llround(step * 1000));
  for (const auto& [meta, pts] : s.series) {
    if (!sel.match(meta.name, meta.labels, meta.device_id)) continue;
    fog::SeriesResult res{meta, {}};
    std::map<std::int64_t, std::vector<double>> buckets;
    for (const auto& [t, v] : pts) {
      if (t < start || t >= end) continue;
      if (agg == fog::Aggregation::Raw) {
        res.points.push_back({t, v});
      } else if (!std::isnan(v)) {
        buckets[start + (t - start) / step_ms * step_ms].push_back(v);
      }
    }
    for (const auto& [b, vs] : buckets) {
      double value = 0;
      switch (agg) {
        case fog::Aggregation::Avg: {
          double sum = 0;
          for (double v : vs) sum += v;
          value = sum / static_cast<double>(vs.size());
          break;
        }
        case fog::Aggregation::Min: value = *std::min_element(vs.begin(), vs.end()); break;
        case fog::Aggregation::Max: value = *std::max_element(vs.begin(), vs.end()); break;
        case fog::Aggregation::Rate: value = std::max(0.0, vs.back() - vs.front()) / step; break;
        case fog::Aggregation::Raw: break;
      }
      res.points.push_back({b, value});
    }
    if (!res.points.empty()) want.push_back(std::move(res));
  }
  const std::string where = "range " + sel.text + " [" + std::to_string(start) + "," + std::to_string(end) + ") " +
                            std::string(fog::aggregation_name(agg));
  if (got.size() != want.size()) {
    why = where + ": series count " + std::to_string(got.size()) + " vs " + std::to_string(want.size());
    return false;
  }
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (!(got[i].meta == want[i].meta) || got[i].points.size() != want[i].points.size()) {
      why = where + ": series " + std::to_string(i) + " differs";
      return false;
    }
    for (std::size_t k = 0; k < got[i].points.size(); ++k) {
      if (got[i].points[k].ts != want[i].points[k].ts || !same_value(got[i].points[k].value, want[i].points[k].value)) {
        why = where + ": point differs at ts " + std::to_string(want[i].points[k].ts);
        return false;
      }
    }
  }
  return true;
}

bool check_logs(StoreFixture& s, std::mt19937_64& rng, std::string& why) {
  fog::LogQuery q;
  const int terms = static_cast<int>(rng() % 3);
  std::vector<std::string> words;
  for (int i = 0; i < terms; ++i) {
    std::string w = s.vocabulary[rng() % s.vocabulary.size()];
    if (rng() % 4 == 0 && w.size() > 3) std::swap(w[1], w[2]);  // transposition typo
    words.push_back(w);
    q.text += (i ? " " : "") + w;
  }
  q.fuzzy = rng() % 3 == 0;
  if (rng() % 3 == 0) q.fields.emplace_back("zone", std::to_string(rng() % 4));
  if (rng() % 4 == 0) q.fields.emplace_back("device_id", s.devices[rng() % s.devices.size()]);
  if (rng() % 5 == 0) q.fields.emplace_back("status", rng() % 2 ? "ok" : "down");
  q.fields = canonical_labels(q.fields);
  if (rng() % 2) q.start = static_cast<std::int64_t>(rng() % 60'000);
  if (rng() % 2) q.end = q.start.value_or(0) + 1 + static_cast<std::int64_t>(rng() % 40'000);
  if (rng() % 4 == 0) q.limit = 1 + rng() % 20;

  std::vector<const GeneratedLog*> hits;
  const bool unconstrained = words.empty() && q.fields.empty() && !q.start && !q.end;
  if (!unconstrained) {
    for (const auto& g : s.logs) {
      bool ok = true;
      for (const auto& w : words) {
        const bool present = std::any_of(g.tokens.begin(), g.tokens.end(), [&](const std::string& t) {
          return q.fuzzy ? oracle_osa(t, w) <= 1 : t == w;
        });
        ok = ok && present;
      }
      for (const auto& f : q.fields) ok = ok && std::find(g.fields.begin(), g.fields.end(), f) != g.fields.end();
      const auto t = g.expected.source_timestamp_ms();
      if (q.start) ok = ok && t >= *q.start;
      if (q.end) ok = ok && t < *q.end;
      if (ok) hits.push_back(&g);
    }
  }
  std::sort(hits.begin(), hits.end(), [](const GeneratedLog* a, const GeneratedLog* b) {
    const auto ta = a->expected.source_timestamp_ms(), tb = b->expected.source_timestamp_ms();
    return ta != tb ? ta > tb : a->order > b->order;
  });
  if (q.limit && hits.size() > q.limit) hits.resize(q.limit);
  const auto got = s.fog.search_logs(q);
  bool same = got.size() == hits.size();
  for (std::size_t i = 0; same && i < got.size(); ++i)
    same = ObservabilityRecord(got[i]).wire_line() == hits[i]->expected.wire_line();
  if (!same) {
    why = "search '" + q.text + "'" + (q.fuzzy ? " fuzzy" : "") + ": " + std::to_string(got.size()) + " hits vs " +
          std::to_string(hits.size());
  }
  return same;
}

bool check_correlate(StoreFixture& s, std::mt19937_64& rng, std::string& why) {
  const std::int64_t start = static_cast<std::int64_t>(rng() % 62'000) - 1000;
  const std::int64_t end = start + 1 + static_cast<std::int64_t>(rng() % 30'000);
  std::optional<std::set<std::string>> devices;
  if (rng() % 3 == 0) devices = std::set<std::string>{s.devices[rng() % s.devices.size()]};
  const auto w = make_window(start, end, devices);
  const auto got = s.fog.correlate(w);

  auto admitted = [&](const std::string& d) { return !devices || devices->contains(d); };
  std::vector<ObservabilityRecord> m, l, t;
  for (const auto& [meta, pts] : s.series) {
    if (!admitted(meta.device_id)) continue;
    for (const auto& [ts, v] : pts)
      if (ts >= start && ts < end) m.push_back(test::metric(meta.name, v, ts, meta.device_id, meta.labels));
  }
  for (const auto& g : s.logs) {
    const auto ts = g.expected.source_timestamp_ms();
    if (admitted(g.expected.device_id()) && ts >= start && ts < end) l.push_back(g.expected);
  }
  const std::int64_t ws = start * 1000, we = end * 1000;
  for (const auto& r : s.spans) {
    const auto& sp = r.span();
    const bool hit = sp.duration > 0 ? sp.start < we && sp.end() > ws : sp.start >= ws && sp.start < we;
    if (admitted(sp.device_id) && hit) t.push_back(r);
  }
  const int occupied = (!m.empty()) + (!l.empty()) + (!t.empty());
  const double score = occupied <= 1 ? 0.0 : (occupied - 1) / 2.0;
  const bool ok = lines_of(got.metrics) == lines_of(m) && lines_of(got.logs) == lines_of(l) &&
                  lines_of(got.traces) == lines_of(t) && got.score.occupied_domains == occupied &&
                  got.score.score == score;
  if (!ok) {
    why = "correlate [" + std::to_string(start) + "," + std::to_string(end) + "): counts " +
          std::to_string(got.metrics.size()) + "/" + std::to_string(got.logs.size()) + "/" +
          std::to_string(got.traces.size()) + " vs " + std::to_string(m.size()) + "/" + std::to_string(l.size()) +
          "/" + std::to_string(t.size());
  }
  return ok;
}

Outcome store_oracle() {
  fog::FogConfig cfg;
  cfg.seal_threshold = 997;  // exercise sealed segments alongside the head
  StoreFixture s(cfg);
  std::mt19937_64 rng(77);
  build_store(s, rng);
  const std::vector<OracleSelector> selectors{
      {"cpu", [](auto& n, auto&, auto&) { return n == "cpu"; }},
      {"mem_used{host=\"a\"}", [](auto& n, auto& l, auto&) { return n == "mem_used" && label(l, "host") == "a"; }},
      {"disk_io{host!=\"b\", job=\"y\"}",
       [](auto& n, auto& l, auto&) { return n == "disk_io" && label(l, "host") != "b" && label(l, "job") == "y"; }},
      {"cpu{host=~\"a|c\"}", [](auto& n, auto& l, auto&) {
         const auto h = label(l, "host");
         return n == "cpu" && (h == "a" || h == "c");
       }},
      {"{job=\"x\", device_id=\"dev-b\"}", [](auto&, auto& l, auto& d) { return label(l, "job") == "x" && d == "dev-b"; }},
      {"mem_used{host!~\"[ab]\"}", [](auto& n, auto& l, auto&) {
         const auto h = label(l, "host");
         return n == "mem_used" && h != "a" && h != "b";
       }},
  };
  std::size_t total = s.fog.record_count();
  Checks c;
  c.expect(total <= 10'000, "store exceeds 10^4 records");
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 1000; ++i) {
    std::string why;
    const int kind = i % 3;
    ++counts[kind];
    const bool ok = kind == 0 ? check_range(s, rng, selectors, why)
                    : kind == 1 ? check_logs(s, rng, why)
                                : check_correlate(s, rng, why);
    c.expect(ok, why);
  }
  return finish(c, format("%zu records, %d query_range + %d search_logs + %d correlate calls vs full scan", total,
                          counts[0], counts[1], counts[2]));
}

// ---------------------------------------------------------------------------
// 8: tiering completeness

std::pair<std::uint64_t, std::uint64_t> key_of(const ObservabilityRecord& r) {
  const auto k = r.dedup_key();
  return {k.hi, k.lo};
}

Outcome tiering_completeness() {
  Checks c;
  std::uint64_t exported = 0, kept = 0;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    std::mt19937_64 rng(500 + trial);
    test::TempDir dir("tier");
    fog::FogNode fog;
    std::uniform_int_distribution<std::int64_t> ts(0, 100'000);
    std::vector<ObservabilityRecord> metrics, logs, spans;
    std::set<std::int64_t> used;
    for (int i = 0; i < 1000; ++i) {
      std::int64_t t = ts(rng);
      while (!used.insert(t).second) t = ts(rng);
      metrics.push_back(test::metric("temp", std::round(ts(rng) * 0.37) / 100, t, "dev-1", {{"bay", "3"}}));
      logs.push_back(test::log_line("bin lift n" + std::to_string(i) + " weight_kg=" + std::to_string(rng() % 500),
                                    ts(rng)));
      spans.emplace_back(test::span(TraceId{trial, static_cast<std::uint64_t>(i) + 1}, 1, std::nullopt, "aggregate",
                                    ts(rng) * 1000, static_cast<std::int64_t>(rng() % 5000)));
    }
    std::uint64_t seq = 0;
    for (auto* v : {&metrics, &logs, &spans})
      for (std::size_t b = 0; b < v->size(); b += 250) {
        std::vector<ObservabilityRecord> batch(v->begin() + static_cast<std::ptrdiff_t>(b),
                                               v->begin() + static_cast<std::ptrdiff_t>(std::min(v->size(), b + 250)));
        fog.ingest(wire::encode_data_frame("dev-1", batch.front().domain(), ++seq, batch));
      }
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::string> before;
    for (Domain d : kDomains)
      for (const auto& r : fog.records(d)) before[key_of(r)] = r.wire_line();
    c.expect(before.size() == 3000, "ingest lost records before tiering");

    const std::int64_t now = 100'000;
    const std::int64_t age = 10 + static_cast<std::int64_t>(rng() % 80);
    const std::int64_t cutoff = now - age * 1000;
    fog::TieringPolicy policy{age, age, (dir / "export").string()};
    std::filesystem::create_directories(policy.sink);
    fog::DirectorySink sink(policy.sink);
    const auto report = fog.tiering_cycle(policy, now, sink);
    c.expect(!report.skipped && report.errors.empty(), "tiering cycle reported errors");
    archive::ArchiveCatalog catalog(dir / "archive");
    std::vector<archive::ImportFailure> failures;
    catalog.import_dir(policy.sink, &failures);
    c.expect(failures.empty(), "archive import failed");

    std::set<std::pair<std::uint64_t, std::uint64_t>> in_fog, in_archive;
    for (Domain d : kDomains) {
      for (const auto& r : fog.records(d)) {
        in_fog.insert(key_of(r));
        c.expect(r.source_timestamp_ms() >= cutoff, "fog record older than the age limit");
      }
      archive::HistoricalQuery q;
      q.domain = d;
      for (const auto& r : catalog.historical_query(q)) {
        const auto k = key_of(r);
        c.expect(in_archive.insert(k).second, "record archived twice");
        c.expect(r.source_timestamp_ms() < cutoff, "archived record newer than the cutoff");
        auto it = before.find(k);
        c.expect(it != before.end() && it->second == r.wire_line(), "archived record not byte-identical");
      }
    }
    for (const auto& k : in_fog) c.expect(!in_archive.contains(k), "record in both fog and archive");
    c.expect(in_fog.size() + in_archive.size() == before.size(), "fog + archive differs from ingested");
    for (const auto& entry : std::filesystem::directory_iterator(dir / "archive" / "segments")) {
      const auto bytes = files::read_file(entry.path());
      c.expect(archive::encode_segment_file(archive::decode_segment_file(bytes)) == bytes,
               "segment file does not round-trip byte-exactly");
    }
    exported += in_archive.size();
    kept += in_fog.size();
  }
  return finish(c, format("10 cycles: %llu records archived, %llu kept in fog, union complete, intersection empty",
                          static_cast<unsigned long long>(exported), static_cast<unsigned long long>(kept)));
}

// ---------------------------------------------------------------------------
// 9: critical path vs exhaustive enumeration

std::int64_t oracle_self_time(const TraceSpan& s, const std::vector<const TraceSpan*>& kids) {
  std::vector<std::pair<std::int64_t, std::int64_t>> iv;
  for (const auto* k : kids) {
    const auto a = std::max(s.start, k->start), b = std::min(s.end(), k->end());
    if (a < b) iv.emplace_back(a, b);
  }
  std::sort(iv.begin(), iv.end());
  std::int64_t covered = 0, cur_a = 0, cur_b = 0;
  bool open = false;
  for (const auto& [a, b] : iv) {
    if (!open || a > cur_b) {
      if (open) covered += cur_b - cur_a;
      cur_a = a;
      cur_b = b;
      open = true;
    } else {
      cur_b = std::max(cur_b, b);
    }
  }
  if (open) covered += cur_b - cur_a;
  return std::max<std::int64_t>(0, s.duration - covered);
}

Outcome critical_paths() {
  std::mt19937_64 rng(909);
  Checks c;
  std::size_t max_spans = 0, multi_root = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const TraceId id{7, static_cast<std::uint64_t>(trial)};
    const int n = 1 + static_cast<int>(rng() % 20);
    max_spans = std::max<std::size_t>(max_spans, static_cast<std::size_t>(n));
    std::vector<TraceSpan> spans;
    for (int k = 1; k <= n; ++k) {
      std::optional<std::uint64_t> parent;
      std::int64_t start = static_cast<std::int64_t>(rng() % 20);
      if (k > 1 && rng() % 6 != 0) {
        const auto& p = spans[rng() % spans.size()];
        parent = p.span_id;
        start = p.start + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(p.duration + 1));
      }
      const auto dur = static_cast<std::int64_t>(rng() % 40);
      // Shuffled ids so id order differs from creation order.
      spans.push_back(test::span(id, static_cast<std::uint64_t>(k) * 7919 % 1000 + 1, parent, "s" + std::to_string(k),
                                 start, dur));
    }
    // Parents must refer to the remapped ids; spans were built with them already.
    std::map<std::uint64_t, std::vector<const TraceSpan*>> kids;
    std::vector<const TraceSpan*> roots;
    for (const auto& s : spans) {
      if (s.parent_span_id)
        kids[*s.parent_span_id].push_back(&s);
      else
        roots.push_back(&s);
    }
    if (roots.size() > 1) ++multi_root;
    auto order = [](const TraceSpan* a, const TraceSpan* b) {
      return a->start != b->start ? a->start < b->start : a->span_id < b->span_id;
    };
    using Path = std::vector<const TraceSpan*>;
    std::optional<std::pair<std::int64_t, Path>> best;
    auto better = [&](std::int64_t sum, const Path& p) {
      if (!best) return true;
      if (sum != best->first) return sum > best->first;
      return std::lexicographical_compare(p.begin(), p.end(), best->second.begin(), best->second.end(), order);
    };
    std::function<void(const TraceSpan*, Path&, std::int64_t)> walk = [&](const TraceSpan* s, Path& path,
                                                                           std::int64_t sum) {
      path.push_back(s);
      const auto& ch = kids[s->span_id];
      sum += oracle_self_time(*s, ch);
      if (ch.empty()) {
        if (better(sum, path)) best = std::pair{sum, path};
      } else {
        for (const auto* k : ch) walk(k, path, sum);
      }
      path.pop_back();
    };
    for (const auto* r : roots) {
      Path p;
      walk(r, p, 0);
    }
    const auto got = fog::critical_path(fog::assemble_trace(id, spans));
    bool same = best && got.size() == best->second.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) same = got[i].span_id == best->second[i]->span_id;
    c.expect(same, "trace " + std::to_string(trial) + " (" + std::to_string(n) + " spans): path differs");
  }
  return finish(c, format("1000 random traces up to %zu spans (%zu with several roots), exhaustive enumeration agrees",
                          max_spans, multi_root));
}

// ---------------------------------------------------------------------------
// 10: region aggregation

Outcome region_aggregation() {
  Checks c;
  archive::RegionDemoConfig small;
  small.points = 10'000;
  small.regions = 50;
  small.seed = 31;
  const auto polys = archive::demo_regions(small);
  auto samples = archive::demo_samples(small);
  std::size_t boundary = 0;
  for (const auto& p : polys) {
    const auto& v = p.vertices();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& a = v[i];
      const auto& b = v[(i + 1) % v.size()];
      samples.push_back({a, 1.0});
      samples.push_back({{(a.lon + b.lon) / 2, (a.lat + b.lat) / 2}, 2.0});
      boundary += 2;
    }
  }
  const auto naive = archive::assign_regions(samples, polys, archive::AggregationMode::Naive);
  const auto fast = archive::assign_regions(samples, polys, archive::AggregationMode::Accelerated);
  c.expect(naive == fast, "assignments differ between modes");
  std::size_t vertex_inside = 0;
  for (std::size_t i = small.points; i < samples.size(); i += 2) vertex_inside += naive[i] >= 0;
  c.expect(vertex_inside == boundary / 2, "a polygon vertex was not assigned to a region");
  const auto a = archive::aggregate_by_region(samples, polys, archive::AggregationMode::Naive);
  const auto b = archive::aggregate_by_region(samples, polys, archive::AggregationMode::Accelerated);
  c.expect(a.regions == b.regions && a.unassigned == b.unassigned, "aggregates differ between modes");

  archive::RegionDemoConfig big;
  big.points = 100'000;
  big.regions = 100;
  const auto demo = archive::run_region_demo(big);
  c.expect(demo.identical, "modes disagree at 10^5 points");
  c.expect(demo.speedup() >= 10.0, "accelerated mode less than 10x faster");
  return finish(c, format("10^4 points + %zu boundary points / 50 polygons identical; 10^5 / 100: naive %.3fs, "
                          "accelerated %.4fs, speedup %.1fx (>=10x)",
                          boundary, demo.naive_seconds, demo.accelerated_seconds, demo.speedup()));
}

// ---------------------------------------------------------------------------
// 11: model arithmetic

Outcome model_arithmetic() {
  std::mt19937_64 rng(1111);
  std::uniform_real_distribution<double> unit(0.0, 1.0), pct(0.0, 100.0);
  Checks c;
  auto rand_pct = [&] { return rng() % 10 == 0 ? 0.0 : pct(rng); };
  for (int i = 0; i < 10'000; ++i) {
    const double a = unit(rng), b = unit(rng), t = unit(rng);
    const double s = a + b + t;
    const auto w = validate_weights(a / s, b / s, t / s);
    std::array<double, 5> raw_over{};
    std::array<OverheadScore, 5> over{OverheadScore::of(0), OverheadScore::of(0), OverheadScore::of(0),
                                      OverheadScore::of(0), OverheadScore::of(0)};
    for (int k = 0; k < 5; ++k) {
      const auto v = make_overhead_vector(rand_pct(), rand_pct(), rand_pct());
      raw_over[k] = std::max({0.01, v.cpu_pct, v.mem_pct, v.net_pct});
      over[k] = overhead_score(v);
      c.expect(over[k].value() == raw_over[k], "overhead_score differs from max with floor");
    }
    DomainCounts counts;
    int occupied = 0;
    for (Domain d : kDomains) {
      const std::uint64_t n = rng() % 3 == 0 ? 0 : rng() % 1000 + 1;
      counts[d] = n;
      occupied += n > 0;
    }
    const auto x = correlation_score(counts);
    const double want_x = occupied <= 1 ? 0.0 : (occupied - 1) / 2.0;
    c.expect(x.occupied_domains == occupied && x.score == want_x, "correlation_score differs");
    const auto r = outcome(w, over[0], over[1], over[2], x, over[3]);
    const double want = a / s / raw_over[0] + b / s / raw_over[1] + t / s / raw_over[2] + want_x / raw_over[3];
    c.expect(close_rel(r.outcome, want, 1e-12), format("outcome %.17g vs %.17g", r.outcome, want));

    // Binary-exact quarters keep the emission count an integer division.
    const std::uint64_t payload = rng() % 1'000'000 + 1;
    const std::uint64_t quarter_s = rng() % 240 + 1, quarter_h = rng() % 800 + 1, devices = rng() % 1000 + 1;
    const auto got = project_volume(payload, static_cast<double>(quarter_s) / 4, static_cast<double>(quarter_h) / 4,
                                    devices);
    c.expect(got == payload * (quarter_h * 3600 / quarter_s) * devices, "project_volume differs");
  }
  std::size_t rejected = 0;
  for (int i = 0; i < 10'000; ++i) {
    double v[3] = {unit(rng), unit(rng), unit(rng)};
    const double s = v[0] + v[1] + v[2];
    for (double& x : v) x /= s;
    const double off = std::pow(10.0, -8.0 + 7.0 * unit(rng)) * (rng() % 2 ? 1 : -1);
    v[rng() % 3] += off;
    if (i % 10 == 0) v[rng() % 3] = -unit(rng) - 1e-6;
    bool threw = false;
    try {
      validate_weights(v[0], v[1], v[2]);
    } catch (const WeightSumError&) {
      threw = true;
    } catch (const WeightRangeError&) {
      threw = true;
    }
    rejected += threw;
  }
  c.expect(rejected == 10'000, "a weight vector off unit sum was accepted");
  return finish(c, format("10^4 random inputs agree to 1e-12; %zu/10000 invalid weight vectors rejected", rejected));
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

}  // namespace
}  // namespace odlc::acceptance

// Optional arguments name the criterion ids to run.
int main(int argc, char** argv) {
  using namespace odlc::acceptance;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  odlc::log::init("off");
  const Criterion criteria[] = {
      {1, "rate fidelity", rate_fidelity},
      {2, "reduction pipeline", reduction_pipeline},
      {3, "aggregate reduction", aggregate_reduction},
      {4, "payload overhead", payload_overhead},
      {5, "durability under outage", durability},
      {6, "exactly-once ingest", exactly_once},
      {7, "store/oracle equivalence", store_oracle},
      {8, "tiering completeness", tiering_completeness},
      {9, "critical path", critical_paths},
      {10, "region aggregation", region_aggregation},
      {11, "model arithmetic", model_arithmetic},
      {12, "desk-scale substitution", edge_cpu_soft_check},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = Outcome{false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
