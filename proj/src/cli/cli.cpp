#include "odlc/cli/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "odlc/archive/catalog.hpp"
#include "odlc/archive/geo.hpp"
#include "odlc/core/clock.hpp"
#include "odlc/core/errors.hpp"
#include "odlc/edge/agent.hpp"
#include "odlc/edge/runner.hpp"
#include "odlc/exposition/exposition.hpp"
#include "odlc/fog/query_api.hpp"
#include "odlc/fog/service.hpp"
#include "odlc/harness/scenario.hpp"
#include "odlc/harness/workload.hpp"
#include "odlc/meter/meter.hpp"
#include "odlc/util/files.hpp"
#include "odlc/util/kv_config.hpp"
#include "odlc/util/log.hpp"

namespace odlc::cli {

namespace {

using nlohmann::json;
using Flags = std::vector<std::pair<std::string, std::string>>;

struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

// Arrays become one line per element.
void emit_lines(std::ostream& out, const json& j) {
  if (j.is_array()) {
    for (const auto& e : j) out << dump(e) << '\n';
  } else {
    out << dump(j) << '\n';
  }
}

struct Layers {
  std::string config;
  std::vector<std::string> sets;
};

void add_layers(CLI::App* app, Layers& l, const char* config_names = "--config") {
  app->add_option(config_names, l.config, "settings file of `key = value` lines");
  app->add_option("--set", l.sets, "override one setting as key=value (repeatable)");
}

template <typename T>
void flag(Flags& out, const char* key, const std::optional<T>& v) {
  if (!v) return;
  if constexpr (std::is_same_v<T, bool>)
    out.emplace_back(key, *v ? "true" : "false");
  else if constexpr (std::is_same_v<T, std::string>)
    out.emplace_back(key, *v);
  else
    out.emplace_back(key, fmt::format("{}", *v));
}

// defaults < file < ODLC_* environment < flags
KvConfig layered(const Layers& l, const std::set<std::string>& keys, const Flags& flags) {
  KvConfig kv;
  if (!l.config.empty()) kv = KvConfig::load(l.config);
  kv.apply_environment(keys);
  for (const auto& s : l.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  for (const auto& [k, v] : flags) kv.set(k, v);
  return kv;
}

// Epoch milliseconds, `now`, or `now-<n>[ms|s|m|h|d]`.
std::int64_t parse_time(const std::string& text) {
  const auto t = trim(text);
  const std::int64_t now = SystemClock().now_ms();
  if (t == "now") return now;
  auto number = [&](std::string_view s) -> std::int64_t {
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
      v = std::stoll(std::string(s), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0) throw ConfigError("bad time '" + text + "'");
    const auto unit = s.substr(used);
    if (unit.empty() || unit == "ms") return v;
    if (unit == "s") return v * 1000;
    if (unit == "m") return v * 60'000;
    if (unit == "h") return v * 3'600'000;
    if (unit == "d") return v * 86'400'000;
    throw ConfigError("bad time unit in '" + text + "'");
  };
  if (t.starts_with("now-")) return now - number(std::string_view(t).substr(4));
  std::size_t used = 0;
  try {
    const auto v = std::stoll(t, &used);
    if (used == t.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("bad time '" + text + "' (epoch ms, now, or now-<n>[ms|s|m|h|d])");
}

std::pair<std::int64_t, std::int64_t> parse_window(const std::string& text) {
  const auto colon = text.find(',');
  if (colon == std::string::npos) throw ConfigError("window must be <start>,<end>, got '" + text + "'");
  return {parse_time(text.substr(0, colon)), parse_time(text.substr(colon + 1))};
}

std::string read_all(std::istream& in) {
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-")
    out << text;
  else
    files::write_file_atomic(path, text);
}

// ---------------------------------------------------------------------------
// reduce

struct ReduceArgs {
  std::string input;
  bool strip_help = false;
  bool strip_type = false;
  std::optional<std::string> allowlist;
  double interval_scale = 1.0;
  double base_interval_s = 5.0;
  bool generated = false;
  std::uint64_t seed = 1;
};

void add_reduce(CLI::App& app, ReduceArgs& a, CLI::App*& sub) {
  sub = app.add_subcommand("reduce", "apply a reduction policy to a metrics exposition");
  sub->add_option("input", a.input, "exposition file (default: standard input)");
  sub->add_flag("--strip-help", a.strip_help, "drop # HELP lines");
  sub->add_flag("--strip-type", a.strip_type, "drop # TYPE lines");
  sub->add_option("--allowlist", a.allowlist, "comma-separated family name prefixes to keep");
  sub->add_option("--interval-scale", a.interval_scale, "scrape interval multiplier (>= 1)");
  sub->add_option("--base-interval", a.base_interval_s, "scrape interval in seconds for the hourly figures");
  sub->add_flag("--generated", a.generated, "use the generated default corpus instead of an input");
  sub->add_option("--seed", a.seed, "corpus seed with --generated");
}

int run_reduce(const ReduceArgs& a, Io io) {
  std::string text;
  if (a.generated) {
    harness::CorpusConfig cc;
    cc.seed = a.seed;
    text = harness::ExpositionCorpus(cc).emit(0);
  } else if (a.input.empty() || a.input == "-") {
    text = read_all(io.in);
  } else {
    text = files::read_file(a.input);
  }
  exposition::ReductionPolicy policy;
  policy.strip_help = a.strip_help;
  policy.strip_type = a.strip_type;
  if (a.allowlist) policy.family_allowlist = split_list(*a.allowlist);
  policy.interval_scale = a.interval_scale;
  policy.validate();
  const auto doc = exposition::parse_exposition(text);
  io.out << exposition::encode_exposition(doc, policy);
  const auto r = exposition::estimate_reduction(doc, policy, a.base_interval_s);
  io.err << dump({{"bytes_before", r.bytes_before},
                  {"bytes_after", r.bytes_after},
                  {"ratio", r.ratio},
                  {"bytes_per_hour_before", r.bytes_per_hour_before},
                  {"bytes_per_hour_after", r.bytes_per_hour_after}})
         << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// replay

struct ReplayArgs {
  Layers layers;
  std::string schedule;
  std::vector<std::string> outages;
  std::string out;
  std::string plot;
  std::string meter_out;
  std::optional<double> virtual_clock;
  std::optional<std::string> policy;
  std::optional<std::string> weights;
  std::optional<std::int64_t> devices;
  std::optional<double> duration_s;
  std::optional<std::int64_t> seed;
  std::optional<std::string> work_dir;
  std::optional<bool> keep_work_dir;
};

void add_replay(CLI::App& app, ReplayArgs& a, CLI::App*& sub) {
  sub = app.add_subcommand("replay", "run a journey scenario in-process on virtual time");
  add_layers(sub, a.layers, "--spec,--config");
  sub->add_option("--schedule", a.schedule, "link schedule file: `<start_s> <end_s> up|down [bytes_per_s]` lines");
  sub->add_option("--outage", a.outages, "extra outage as <at_s>:<duration_s> (repeatable)");
  sub->add_option("--out", a.out, "result file (default: standard output)");
  sub->add_option("--plot", a.plot, "per-tick plot data file");
  sub->add_option("--meter-out", a.meter_out, "meter report file");
  sub->add_option("--virtual-clock", a.virtual_clock, "virtual seconds per wall second (0: unthrottled)");
  sub->add_option("--policy", a.policy, "reduction policy: default or reduced");
  sub->add_option("--weights", a.weights, "weight profile name or w_metric,w_log,w_trace");
  sub->add_option("--devices", a.devices, "number of devices");
  sub->add_option("--duration", a.duration_s, "journey length in seconds");
  sub->add_option("--seed", a.seed, "workload seed");
  sub->add_option("--work-dir", a.work_dir, "directory for fog and archive state");
  sub->add_flag("--keep-work-dir", a.keep_work_dir, "leave the work directory in place");
}

int run_replay(const ReplayArgs& a, Io io) {
  Flags f;
  flag(f, "virtual_speed", a.virtual_clock);
  flag(f, "reduce.policy", a.policy);
  flag(f, "weights.profile", a.weights);
  flag(f, "devices", a.devices);
  flag(f, "duration_s", a.duration_s);
  flag(f, "seed", a.seed);
  flag(f, "work_dir", a.work_dir);
  flag(f, "keep_work_dir", a.keep_work_dir);
  const auto cfg = harness::scenario_from(layered(a.layers, harness::scenario_keys(), f));
  const auto duration_ms = static_cast<std::int64_t>(cfg.workload.duration_s * 1000.0);
  auto schedule = a.schedule.empty()
                      ? harness::LinkSchedule::always_up(duration_ms, cfg.link_bandwidth_bytes_per_s)
                      : harness::LinkSchedule::parse(files::read_file(a.schedule), cfg.link_bandwidth_bytes_per_s);
  for (const auto& o : a.outages) {
    const auto colon = o.find(':');
    if (colon == std::string::npos) throw ConfigError("--outage expects <at_s>:<duration_s>, got '" + o + "'");
    double at = 0, dur = 0;
    try {
      at = std::stod(o.substr(0, colon));
      dur = std::stod(o.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("--outage expects <at_s>:<duration_s>, got '" + o + "'");
    }
    schedule = harness::inject_outage(schedule, std::llround(at * 1000), std::llround(dur * 1000));
  }
  const auto result = harness::run_scenario(cfg, schedule);
  write_or_print(a.out, result.to_text() + "\n", io.out);
  if (!a.plot.empty()) files::write_file_atomic(a.plot, result.plot_data());
  if (!a.meter_out.empty()) files::write_file_atomic(a.meter_out, result.meter.to_text());
  std::uint64_t gen = 0, ingested = 0;
  for (Domain d : kDomains) {
    gen += result.total(d).generated_records;
    ingested += result.total(d).ingested_records;
  }
  io.err << fmt::format("replay: {} devices, {:.0f} s virtual in {:.2f} s wall, {} of {} records ingested{}\n",
                        result.devices.size(), result.virtual_seconds, result.wall_seconds, ingested, gen,
                        result.drained ? "" : " (staging not drained)");
  return 0;
}

// ---------------------------------------------------------------------------
// edge run

struct EdgeArgs {
  Layers layers;
  std::optional<std::string> device;
  std::optional<std::string> fog;
  std::optional<std::string> metric_source;
  std::optional<std::string> exposition;
  std::vector<std::string> logs;
  std::optional<std::string> weights;
  std::optional<std::string> state;
  double duration_s = 0.0;
  double trace_demo_s = 0.0;
  std::string meter_out;
  std::int64_t meter_window_ms = 1000;
};

void add_edge(CLI::App& app, EdgeArgs& a, CLI::App*& sub) {
  auto* edge = app.add_subcommand("edge", "edge agent");
  edge->require_subcommand(1);
  sub = edge->add_subcommand("run", "collect, stage and ship observability data to a fog node");
  add_layers(sub, a.layers);
  sub->add_option("--device", a.device, "device id (at most 16 bytes)");
  sub->add_option("--fog", a.fog, "fog node address host:port");
  sub->add_option("--metric-source", a.metric_source, "host-stats, exposition-file or synthetic");
  sub->add_option("--exposition", a.exposition, "exposition file for the exposition-file source");
  sub->add_option("--log", a.logs, "log file to tail (repeatable)");
  sub->add_option("--weights", a.weights, "weight profile name or w_metric,w_log,w_trace");
  sub->add_option("--state", a.state, "offset and sequence state file");
  sub->add_option("--duration", a.duration_s, "seconds to run (0: until interrupted)");
  sub->add_option("--trace-demo", a.trace_demo_s, "run the instrumented region aggregation every N seconds");
  sub->add_option("--meter-out", a.meter_out, "meter report file, rewritten every window");
  sub->add_option("--meter-window-ms", a.meter_window_ms, "meter sampling window");
}

int run_edge(const EdgeArgs& a, Io io) {
  Flags f;
  flag(f, "device.id", a.device);
  flag(f, "fog.address", a.fog);
  flag(f, "metric.source", a.metric_source);
  flag(f, "metric.exposition_path", a.exposition);
  if (!a.logs.empty()) {
    std::string joined;
    for (const auto& l : a.logs) joined += (joined.empty() ? "" : ",") + l;
    f.emplace_back("log.paths", joined);
  }
  flag(f, "weights.profile", a.weights);
  flag(f, "state.path", a.state);
  const auto cfg = edge::edge_config_from(layered(a.layers, edge::edge_config_keys(), f));
  std::unique_ptr<edge::MetricSource> source;
  if (cfg.collector.metric_source == edge::MetricSourceKind::Synthetic) {
    auto corpus = std::make_shared<harness::ExpositionCorpus>();
    source = std::make_unique<edge::SyntheticSource>([corpus](std::uint64_t e) { return corpus->emit(e); });
  } else {
    source = edge::make_metric_source(cfg.collector);
  }
  SystemClock clock;
  edge::EdgeAgent agent(cfg, clock, std::move(source), std::random_device{}());
  edge::RunOptions opts;
  opts.duration_s = a.duration_s;
  opts.trace_demo_interval_s = a.trace_demo_s;
  opts.meter_out = a.meter_out;
  opts.meter_window_ms = a.meter_window_ms;
  opts.budget.cores = meter::online_cores();
  edge::EdgeRunner runner(agent, clock, opts);
  const auto s = runner.run(&stop_flag());
  json j = {{"device", cfg.collector.device_id},
            {"wall_seconds", s.wall_seconds},
            {"frames_sent", s.frames_sent},
            {"bytes_sent", s.bytes_sent},
            {"connect_failures", s.connect_failures},
            {"demo_runs", s.demo_runs}};
  for (Domain d : kDomains) {
    const auto& c = s.collected[domain_index(d)];
    const auto& st = s.staging[domain_index(d)];
    j[std::string(domain_name(d))] = {{"records", c.records},         {"footprint_bytes", c.footprint_bytes},
                                      {"staged", st.staged_records},  {"evicted", st.evicted_records},
                                      {"rejected", st.rejected_records}, {"acked", st.acked_records}};
  }
  io.out << dump(j) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// fog serve

struct FogArgs {
  Layers layers;
  std::optional<std::string> listen;
  std::optional<std::string> query_socket;
  std::optional<std::string> data_dir;
  std::optional<std::string> tiering_sink;
  std::optional<std::int64_t> age_limit_s;
  std::optional<std::int64_t> tiering_interval_s;
  std::optional<std::string> alerts;
  std::optional<std::string> meter_out;
  double duration_s = 0.0;
};

void add_fog(CLI::App& app, FogArgs& a, CLI::App*& sub) {
  auto* fog = app.add_subcommand("fog", "fog node");
  fog->require_subcommand(1);
  sub = fog->add_subcommand("serve", "ingest edge frames, answer queries, tier old data to the archive");
  add_layers(sub, a.layers);
  sub->add_option("--listen", a.listen, "edge frame listener host:port");
  sub->add_option("--query-socket", a.query_socket, "Unix socket path for queries");
  sub->add_option("--data-dir", a.data_dir, "write-ahead log and checkpoint directory");
  sub->add_option("--tiering-sink", a.tiering_sink, "archive directory for exported segments");
  sub->add_option("--age-limit", a.age_limit_s, "tier records older than this many seconds");
  sub->add_option("--tiering-interval", a.tiering_interval_s, "seconds between tiering cycles");
  sub->add_option("--alerts", a.alerts, "alert rules file, one JSON object per line");
  sub->add_option("--meter-out", a.meter_out, "meter report file, rewritten every window");
  sub->add_option("--duration", a.duration_s, "seconds to serve (0: until interrupted)");
}

int run_fog(const FogArgs& a, Io io) {
  Flags f;
  flag(f, "fog.listen", a.listen);
  flag(f, "fog.query_socket", a.query_socket);
  flag(f, "fog.data_dir", a.data_dir);
  flag(f, "tiering.sink", a.tiering_sink);
  flag(f, "tiering.age_limit_s", a.age_limit_s);
  flag(f, "tiering.cycle_interval_s", a.tiering_interval_s);
  flag(f, "alerts.rules", a.alerts);
  flag(f, "meter.out", a.meter_out);
  fog::FogService svc(fog::fog_service_config_from(layered(a.layers, fog::fog_config_keys(), f)));
  io.err << "fog serve: listening on port " << svc.port() << '\n';
  svc.run(&stop_flag(), a.duration_s);
  auto stats = fog::handle_query(svc.node(), {{"op", "stats"}});
  io.out << dump(stats["result"]) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// archive

struct ArchiveArgs {
  std::string root = "archive";
  std::string import_path;
  std::string domain = "log";
  std::optional<std::string> start, end;
  std::optional<std::string> selector;
  std::vector<std::string> devices;
  std::string regions;
  std::string field = "throughput_mbps";
  std::string mode = "accelerated";
  std::string spans_out;
  bool demo = false;
  std::size_t points = 100000;
  std::size_t region_count = 100;
  std::uint64_t seed = 7;
};

struct ArchiveSubs {
  CLI::App* import = nullptr;
  CLI::App* query = nullptr;
  CLI::App* aggregate = nullptr;
};

void add_range(CLI::App* sub, ArchiveArgs& a) {
  sub->add_option("--start", a.start, "range start (epoch ms, now, now-1h, ...)");
  sub->add_option("--end", a.end, "range end, exclusive");
  sub->add_option("--device", a.devices, "device filter (repeatable)");
}

void add_archive(CLI::App& app, ArchiveArgs& a, ArchiveSubs& subs) {
  auto* ar = app.add_subcommand("archive", "cloud archive");
  ar->require_subcommand(1);
  ar->add_option("--root", a.root, "catalog directory")->capture_default_str();
  subs.import = ar->add_subcommand("import", "import segment files (a directory or one file)");
  subs.import->add_option("path", a.import_path, "segment file or directory")->required();
  subs.query = ar->add_subcommand("query", "stream archived records");
  subs.query->add_option("--domain", a.domain, "metric, log or trace")->capture_default_str();
  subs.query->add_option("--selector", a.selector, "metric selector, e.g. node_cpu_seconds_total{mode=\"idle\"}");
  add_range(subs.query, a);
  subs.aggregate = ar->add_subcommand("aggregate", "point-in-polygon aggregation by region");
  subs.aggregate->add_option("--regions", a.regions, "region file, one JSON polygon per line");
  subs.aggregate->add_option("--domain", a.domain, "domain holding the samples")->capture_default_str();
  subs.aggregate->add_option("--field", a.field, "value field")->capture_default_str();
  subs.aggregate->add_option("--mode", a.mode, "naive or accelerated")->capture_default_str();
  subs.aggregate->add_option("--spans", a.spans_out, "write the aggregation's spans here, one JSON object per line");
  subs.aggregate->add_flag("--demo", a.demo, "generated points and regions, both modes, timed");
  subs.aggregate->add_option("--points", a.points, "demo point count")->capture_default_str();
  subs.aggregate->add_option("--region-count", a.region_count, "demo region count")->capture_default_str();
  subs.aggregate->add_option("--seed", a.seed, "demo seed")->capture_default_str();
  add_range(subs.aggregate, a);
}

archive::HistoricalQuery historical(const ArchiveArgs& a) {
  archive::HistoricalQuery q;
  q.domain = parse_domain(a.domain);
  if (a.start) q.start = parse_time(*a.start);
  if (a.end) q.end = parse_time(*a.end);
  if (a.selector) {
    if (q.domain != Domain::Metric) throw ConfigError("--selector applies to the metric domain only");
    q.selector = fog::MetricSelector::parse(*a.selector);
  }
  if (!a.devices.empty()) q.devices = std::set<std::string>(a.devices.begin(), a.devices.end());
  return q;
}

json import_json(const archive::ImportResult& r) {
  return {{"status", r.status == archive::ImportStatus::Imported ? "imported" : "duplicate"},
          {"file", r.stored_path.string()},
          {"manifest", json::parse(archive::manifest_to_text(r.manifest))}};
}

int run_archive_import(const ArchiveArgs& a, Io io) {
  archive::ArchiveCatalog catalog(a.root);
  if (!std::filesystem::is_directory(a.import_path)) {
    io.out << dump(import_json(catalog.import_segment(a.import_path))) << '\n';
    return 0;
  }
  std::vector<archive::ImportFailure> failures;
  for (const auto& r : catalog.import_dir(a.import_path, &failures)) io.out << dump(import_json(r)) << '\n';
  for (const auto& f : failures) io.err << "import failed: " << f.file.string() << ": " << f.message << '\n';
  if (!failures.empty())
    throw Error(failures.front().code, fmt::format("{} of the segments in {} were rejected; first: {}",
                                                   failures.size(), a.import_path, failures.front().message));
  return 0;
}

int run_archive_query(const ArchiveArgs& a, Io io) {
  archive::ArchiveCatalog catalog(a.root);
  archive::QueryStats stats;
  catalog.scan(historical(a), [&](const ObservabilityRecord& r) { io.out << dump(fog::record_json(r)) << '\n'; },
               &stats);
  io.err << dump({{"segments_considered", stats.segments_considered},
                  {"segments_pruned", stats.segments_pruned},
                  {"segments_decompressed", stats.segments_decompressed},
                  {"records_returned", stats.records_returned}})
         << '\n';
  return 0;
}

json aggregate_json(const archive::RegionAggregate& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"region", r.region}, {"count", r.count}, {"mean", opt(r.mean)}, {"min", opt(r.min)}, {"max", opt(r.max)}};
}

int run_archive_aggregate(const ArchiveArgs& a, Io io) {
  SystemClock clock;
  std::vector<TraceSpan> spans;
  std::mutex spans_mu;
  edge::SpanRecorder recorder("archive", clock, [&](TraceSpan s) {
    std::lock_guard lock(spans_mu);
    spans.push_back(std::move(s));
  });
  auto write_spans = [&] {
    if (a.spans_out.empty()) return;
    std::string text;
    for (const auto& s : spans) text += encode_payload(s);
    files::write_file_atomic(a.spans_out, text);
  };

  if (a.demo) {
    archive::RegionDemoConfig cfg;
    cfg.points = a.points;
    cfg.regions = a.region_count;
    cfg.seed = a.seed;
    const auto r = archive::run_region_demo(cfg, &recorder);
    for (const auto& reg : r.accelerated.regions) io.out << dump(aggregate_json(reg)) << '\n';
    io.err << dump({{"points", cfg.points},
                    {"regions", cfg.regions},
                    {"identical", r.identical},
                    {"naive_seconds", r.naive_seconds},
                    {"accelerated_seconds", r.accelerated_seconds},
                    {"speedup", r.speedup()}})
           << '\n';
    write_spans();
    return 0;
  }

  if (a.regions.empty()) throw ConfigError("archive aggregate needs --regions (or --demo)");
  archive::AggregationMode mode;
  if (a.mode == "naive")
    mode = archive::AggregationMode::Naive;
  else if (a.mode == "accelerated")
    mode = archive::AggregationMode::Accelerated;
  else
    throw ConfigError("--mode must be naive or accelerated");
  const auto polys = archive::parse_regions(files::read_file(a.regions));
  archive::ArchiveCatalog catalog(a.root);
  archive::RegionAggregation agg;
  std::size_t record_count = 0;
  {
    edge::ScopedSpan root(recorder, "archive-geo", "aggregate_by_region");
    root.set_attribute("mode", a.mode);
    std::vector<ObservabilityRecord> records;
    {
      edge::ScopedSpan load(recorder, "archive-geo", "load", root.handle());
      records = catalog.historical_query(historical(a));
    }
    record_count = records.size();
    std::uint64_t missing = 0;
    const auto samples = archive::geo_samples(records, a.field, &missing);
    {
      edge::ScopedSpan pip(recorder, "archive-geo", "point_in_polygon", root.handle());
      agg = archive::aggregate_by_region(samples, polys, mode);
    }
    agg.missing_field = missing;
  }
  for (const auto& reg : agg.regions) io.out << dump(aggregate_json(reg)) << '\n';
  io.err << dump({{"records", record_count}, {"unassigned", agg.unassigned}, {"missing_field", agg.missing_field}})
         << '\n';
  write_spans();
  return 0;
}

// ---------------------------------------------------------------------------
// query

struct QueryArgs {
  Layers layers;
  std::optional<std::string> socket;
  std::string selector;
  std::optional<std::string> start, end;
  std::string agg = "raw";
  double step_s = 0.0;
  std::string text;
  std::vector<std::string> fields;
  bool fuzzy = false;
  std::size_t limit = 0;
  std::string trace_id;
  std::vector<std::string> devices;
  bool records = false;
  std::string rules;
  std::optional<std::string> now;
  bool log = false;
};

struct QuerySubs {
  CLI::App* range = nullptr;
  CLI::App* logs = nullptr;
  CLI::App* trace = nullptr;
  CLI::App* critical = nullptr;
  CLI::App* deps = nullptr;
  CLI::App* correlate = nullptr;
  CLI::App* alerts = nullptr;
};

void add_query(CLI::App& app, QueryArgs& a, QuerySubs& s) {
  auto* q = app.add_subcommand("query", "query a running fog node");
  q->require_subcommand(1);
  add_layers(q, a.layers);
  q->add_option("--socket", a.socket, "fog query socket");
  auto times = [&](CLI::App* sub, bool required) {
    auto* st = sub->add_option("--start", a.start, "range start (epoch ms, now, now-1h, ...)");
    auto* en = sub->add_option("--end", a.end, "range end, exclusive");
    if (required) {
      st->required();
      en->required();
    }
  };
  s.range = q->add_subcommand("range", "metric range query");
  s.range->add_option("selector", a.selector, "metric selector")->required();
  times(s.range, true);
  s.range->add_option("--agg", a.agg, "raw, avg, min, max or rate")->capture_default_str();
  s.range->add_option("--step", a.step_s, "aggregation step in seconds");
  s.logs = q->add_subcommand("logs", "log search");
  s.logs->add_option("text", a.text, "search terms");
  s.logs->add_option("--field", a.fields, "key=value filter (repeatable)");
  s.logs->add_flag("--fuzzy", a.fuzzy, "match terms within one edit");
  s.logs->add_option("--limit", a.limit, "maximum results");
  times(s.logs, false);
  s.trace = q->add_subcommand("trace", "assembled span tree");
  s.trace->add_option("trace_id", a.trace_id, "32 hex digits")->required();
  s.critical = q->add_subcommand("critical", "critical path of a trace");
  s.critical->add_option("trace_id", a.trace_id, "32 hex digits")->required();
  s.deps = q->add_subcommand("deps", "service dependency graph");
  times(s.deps, true);
  s.correlate = q->add_subcommand("correlate", "records of every domain in a window");
  times(s.correlate, true);
  s.correlate->add_option("--device", a.devices, "device filter (repeatable)");
  s.correlate->add_flag("--records", a.records, "include the records themselves");
  s.alerts = q->add_subcommand("alerts", "evaluate alert rules, or print the alert log");
  s.alerts->add_option("--rules", a.rules, "rules file, one JSON object per line");
  s.alerts->add_option("--now", a.now, "evaluation time (default: now)");
  s.alerts->add_flag("--log", a.log, "print the alert log instead");
}

int run_query(const QueryArgs& a, const QuerySubs& s, Io io) {
  Flags f;
  flag(f, "fog.query_socket", a.socket);
  const auto kv = layered(a.layers, {"fog.query_socket"}, f);
  kv.reject_unknown({"fog.query_socket"});
  json req;
  auto times = [&] {
    if (a.start) req["start"] = parse_time(*a.start);
    if (a.end) req["end"] = parse_time(*a.end);
  };
  if (s.range->parsed()) {
    req = {{"op", "range"}, {"selector", a.selector}, {"agg", a.agg}, {"step_s", a.step_s}};
    times();
  } else if (s.logs->parsed()) {
    req = {{"op", "logs"}, {"text", a.text}, {"fuzzy", a.fuzzy}, {"limit", a.limit}};
    json fields = json::object();
    for (const auto& kvp : a.fields) {
      const auto eq = kvp.find('=');
      if (eq == std::string::npos) throw ConfigError("--field expects key=value, got '" + kvp + "'");
      fields[kvp.substr(0, eq)] = kvp.substr(eq + 1);
    }
    req["fields"] = fields;
    times();
  } else if (s.trace->parsed()) {
    req = {{"op", "trace"}, {"trace_id", a.trace_id}};
  } else if (s.critical->parsed()) {
    req = {{"op", "critical"}, {"trace_id", a.trace_id}};
  } else if (s.deps->parsed()) {
    req = {{"op", "deps"}};
    times();
  } else if (s.correlate->parsed()) {
    req = {{"op", "correlate"}, {"records", a.records}};
    if (!a.devices.empty()) req["devices"] = a.devices;
    times();
  } else if (s.alerts->parsed()) {
    if (a.log) {
      req = {{"op", "alert_log"}};
    } else {
      if (a.rules.empty()) throw ConfigError("query alerts needs --rules or --log");
      json rules = json::array();
      std::istringstream in(files::read_file(a.rules));
      for (std::string line; std::getline(in, line);) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        try {
          rules.push_back(json::parse(t));
        } catch (const json::parse_error& e) {
          throw ConfigError(a.rules + ": " + e.what());
        }
      }
      req = {{"op", "alerts"}, {"rules", rules}, {"now", parse_time(a.now.value_or("now"))}};
    }
  }
  fog::QueryClient client(kv.get_string("fog.query_socket", "odlc-fog.sock"));
  emit_lines(io.out, client.request(req));
  return 0;
}

// ---------------------------------------------------------------------------
// report outcome

struct ReportArgs {
  Layers layers;
  std::vector<std::string> meters;
  std::optional<std::string> window;
  std::string weights = "balanced";
  std::optional<std::string> socket;
  std::string plot;
};

void add_report(CLI::App& app, ReportArgs& a, CLI::App*& sub) {
  auto* rep = app.add_subcommand("report", "reports");
  rep->require_subcommand(1);
  sub = rep->add_subcommand("outcome", "weighted observability outcome over a window");
  add_layers(sub, a.layers);
  sub->add_option("--meter", a.meters, "meter report file (repeatable; merged)")->required();
  sub->add_option("--window", a.window, "<start>,<end> (default: the span of the samples)");
  sub->add_option("--weights", a.weights, "weight profile name or w_metric,w_log,w_trace")->capture_default_str();
  sub->add_option("--socket", a.socket, "fog query socket for the correlation counts");
  sub->add_option("--plot", a.plot, "plot data file with columns term, value");
}

meter::MeterReport merge_reports(const std::vector<std::string>& paths) {
  std::optional<meter::MeterReport> merged;
  for (const auto& p : paths) {
    auto r = meter::MeterReport::from_text(files::read_file(p));
    if (!merged) {
      merged = std::move(r);
      continue;
    }
    const auto& b = merged->budget;
    if (b.cores != r.budget.cores || b.mem_bytes != r.budget.mem_bytes ||
        b.link_bytes_per_s != r.budget.link_bytes_per_s)
      throw ConfigError("meter report " + p + " uses a different normalization budget");
    for (auto& [component, samples] : r.series) {
      auto& dst = merged->series[component];
      dst.insert(dst.end(), samples.begin(), samples.end());
      std::sort(dst.begin(), dst.end(),
                [](const auto& x, const auto& y) { return x.timestamp_ms < y.timestamp_ms; });
    }
    merged->gaps.insert(merged->gaps.end(), r.gaps.begin(), r.gaps.end());
  }
  return *merged;
}

int run_report(const ReportArgs& a, Io io) {
  Flags f;
  flag(f, "fog.query_socket", a.socket);
  const auto kv = layered(a.layers, {"fog.query_socket"}, f);
  kv.reject_unknown({"fog.query_socket"});
  const auto report = merge_reports(a.meters);
  std::int64_t start = 0, end = 0;
  if (a.window) {
    std::tie(start, end) = parse_window(*a.window);
  } else {
    bool first = true;
    for (const auto& [c, samples] : report.series) {
      for (const auto& s : samples) {
        start = first ? s.window_start_ms : std::min(start, s.window_start_ms);
        end = first ? s.timestamp_ms : std::max(end, s.timestamp_ms);
        first = false;
      }
    }
    if (first) throw NoSamples("the meter reports hold no samples");
  }
  const auto window = make_window(start, end);
  fog::RemoteCorrelation corr(kv.get_string("fog.query_socket", "odlc-fog.sock"));
  const auto r = meter::compose_outcome(report, weight_profile(a.weights), window, corr);
  auto j = meter::outcome_json(r);
  j["window"] = {{"start", start}, {"end", end}};
  io.out << dump(j) << '\n';
  if (!a.plot.empty()) {
    std::string text = "term value\n";
    for (const char* k : {"over_metric", "over_log", "over_trace", "over_x", "x_score", "collection_term",
                          "analysis_term", "outcome"})
      text += fmt::format("{} {}\n", k, j[k].get<double>());
    files::write_file_atomic(a.plot, text);
  }
  return 0;
}

int domain_error(std::ostream& err, const std::string& code, const std::string& message) {
  err << dump({{"error", code}, {"message", message}}) << '\n';
  return 1;
}

}  // namespace

std::atomic<bool>& stop_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

int dispatch(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Observability data life cycle: edge agent, fog node, cloud archive, meter and replay harness",
               args.empty() ? "odlc" : args.front()};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  ReduceArgs reduce;
  ReplayArgs replay;
  EdgeArgs edge;
  FogArgs fog;
  ArchiveArgs archive;
  QueryArgs query;
  ReportArgs report;
  CLI::App *reduce_cmd = nullptr, *replay_cmd = nullptr, *edge_cmd = nullptr, *fog_cmd = nullptr,
           *report_cmd = nullptr;
  ArchiveSubs archive_cmds;
  QuerySubs query_cmds;
  add_reduce(app, reduce, reduce_cmd);
  add_replay(app, replay, replay_cmd);
  add_edge(app, edge, edge_cmd);
  add_fog(app, fog, fog_cmd);
  add_archive(app, archive, archive_cmds);
  add_query(app, query, query_cmds);
  add_report(app, report, report_cmd);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  log::init(log_level);
  Io io{in, out, err};
  try {
    if (reduce_cmd->parsed()) return run_reduce(reduce, io);
    if (replay_cmd->parsed()) return run_replay(replay, io);
    if (edge_cmd->parsed()) return run_edge(edge, io);
    if (fog_cmd->parsed()) return run_fog(fog, io);
    if (archive_cmds.import->parsed()) return run_archive_import(archive, io);
    if (archive_cmds.query->parsed()) return run_archive_query(archive, io);
    if (archive_cmds.aggregate->parsed()) return run_archive_aggregate(archive, io);
    if (report_cmd->parsed()) return run_report(report, io);
    return run_query(query, query_cmds, io);
  } catch (const Error& e) {
    return domain_error(err, e.code(), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return domain_error(err, "IoError", e.what());
  } catch (const std::exception& e) {
    return domain_error(err, "InternalError", e.what());
  }
}

}  // namespace odlc::cli
