#include "odlc/edge/collectors.hpp"

#include <sys/stat.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "odlc/core/errors.hpp"
#include "odlc/util/log.hpp"

namespace odlc::edge {

namespace expo = odlc::exposition;

MetricSourceKind parse_metric_source(std::string_view s) {
  if (s == "host-stats") return MetricSourceKind::HostStats;
  if (s == "exposition-file") return MetricSourceKind::ExpositionFile;
  if (s == "synthetic") return MetricSourceKind::Synthetic;
  throw ConfigError("unknown metric source '" + std::string(s) + "'");
}

void CollectorConfig::validate() const {
  if (!(metric_interval_s > 0.0) || !std::isfinite(metric_interval_s))
    throw ConfigError("metric.interval_s must be positive");
  reduction.validate();
}

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw SourceUnavailable("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t b = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

double to_double(std::string_view s) {
  double v = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    fn(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
}

expo::MetricFamily& family(expo::ExpositionDocument& doc, std::string name, std::string help,
                           expo::MetricKind kind) {
  for (auto& f : doc.families) {
    if (f.name == name) return f;
  }
  doc.families.push_back(expo::MetricFamily{std::move(name), std::move(help), kind, {}});
  return doc.families.back();
}

void add(expo::MetricFamily& f, Labels labels, double v) {
  f.samples.push_back(expo::Sample{f.name, canonical_labels(std::move(labels)), v, std::nullopt});
}

}  // namespace

expo::ExpositionDocument ExpositionFileSource::read(std::int64_t) {
  std::error_code ec;
  if (!std::filesystem::exists(path_, ec)) throw SourceUnavailable("exposition file " + path_.string() + " missing");
  return expo::parse_exposition(read_file(path_));
}

expo::ExpositionDocument HostStatsSource::read(std::int64_t) {
  using expo::MetricKind;
  expo::ExpositionDocument doc;
  {
    const std::string stat = read_file(root_ / "stat");
    static constexpr const char* kModes[] = {"user", "nice", "system", "idle", "iowait",
                                             "irq", "softirq", "steal"};
    auto& cpu = family(doc, "node_cpu_seconds_total", "Seconds the CPUs spent in each mode.",
                       MetricKind::Counter);
    for_each_line(stat, [&](std::string_view line) {
      if (!line.starts_with("cpu") || line.size() < 4 || line[3] == ' ') return;
      auto tok = split_ws(line);
      std::string id(tok[0].substr(3));
      for (std::size_t m = 0; m < std::size(kModes) && m + 1 < tok.size(); ++m) {
        add(cpu, {{"cpu", id}, {"mode", kModes[m]}}, to_double(tok[m + 1]) / 100.0);
      }
    });
    if (cpu.samples.empty()) throw SourceUnavailable("no per-cpu counters in " + (root_ / "stat").string());
  }
  if (std::filesystem::exists(root_ / "meminfo")) {
    const std::string mem = read_file(root_ / "meminfo");
    for_each_line(mem, [&](std::string_view line) {
      auto colon = line.find(':');
      if (colon == std::string_view::npos) return;
      std::string key;
      for (char c : line.substr(0, colon)) {
        if (std::isalnum(static_cast<unsigned char>(c))) key.push_back(c);
        else if (c == '(' || c == '_') key.push_back('_');
      }
      auto tok = split_ws(line.substr(colon + 1));
      if (tok.empty()) return;
      double v = to_double(tok[0]);
      if (tok.size() > 1 && tok[1] == "kB") v *= 1024.0;
      auto& f = family(doc, "node_memory_" + key + "_bytes", "Memory information field " + key + ".",
                       MetricKind::Gauge);
      add(f, {}, v);
    });
  }
  if (std::filesystem::exists(root_ / "diskstats")) {
    const std::string disk = read_file(root_ / "diskstats");
    for_each_line(disk, [&](std::string_view line) {
      auto tok = split_ws(line);
      if (tok.size() < 10) return;
      std::string dev(tok[2]);
      if (dev.starts_with("loop") || dev.starts_with("ram")) return;
      add(family(doc, "node_disk_reads_completed_total", "The total number of reads completed successfully.",
                 MetricKind::Counter), {{"device", dev}}, to_double(tok[3]));
      add(family(doc, "node_disk_read_bytes_total", "The total number of bytes read successfully.",
                 MetricKind::Counter), {{"device", dev}}, to_double(tok[5]) * 512.0);
      add(family(doc, "node_disk_writes_completed_total", "The total number of writes completed successfully.",
                 MetricKind::Counter), {{"device", dev}}, to_double(tok[7]));
      add(family(doc, "node_disk_written_bytes_total", "The total number of bytes written successfully.",
                 MetricKind::Counter), {{"device", dev}}, to_double(tok[9]) * 512.0);
    });
  }
  if (std::filesystem::exists(root_ / "net" / "dev")) {
    const std::string net = read_file(root_ / "net" / "dev");
    for_each_line(net, [&](std::string_view line) {
      auto colon = line.find(':');
      if (colon == std::string_view::npos) return;
      auto name_tok = split_ws(line.substr(0, colon));
      auto tok = split_ws(line.substr(colon + 1));
      if (name_tok.size() != 1 || tok.size() < 10) return;
      std::string dev(name_tok[0]);
      add(family(doc, "node_network_receive_bytes_total", "Network device statistic receive_bytes.",
                 MetricKind::Counter), {{"device", dev}}, to_double(tok[0]));
      add(family(doc, "node_network_receive_packets_total", "Network device statistic receive_packets.",
                 MetricKind::Counter), {{"device", dev}}, to_double(tok[1]));
      add(family(doc, "node_network_transmit_bytes_total", "Network device statistic transmit_bytes.",
                 MetricKind::Counter), {{"device", dev}}, to_double(tok[8]));
      add(family(doc, "node_network_transmit_packets_total", "Network device statistic transmit_packets.",
                 MetricKind::Counter), {{"device", dev}}, to_double(tok[9]));
    });
  }
  return doc;
}

expo::ExpositionDocument SyntheticSource::read(std::int64_t) {
  return expo::parse_exposition(gen_(emission_++));
}

std::unique_ptr<MetricSource> make_metric_source(const CollectorConfig& cfg) {
  switch (cfg.metric_source) {
    case MetricSourceKind::HostStats: return std::make_unique<HostStatsSource>();
    case MetricSourceKind::ExpositionFile: return std::make_unique<ExpositionFileSource>(cfg.exposition_path);
    case MetricSourceKind::Synthetic:
      throw ConfigError("the synthetic metric source needs a generator; use the replay harness");
  }
  throw ConfigError("unknown metric source");
}

MetricEmission to_metric_records(const expo::ExpositionDocument& doc, const expo::ReductionPolicy& policy,
                                 const std::string& device_id, std::int64_t now_ms) {
  MetricEmission out;
  std::size_t carry = 0;  // bytes of families without samples
  std::string buf;
  for (const expo::MetricFamily* f : expo::admitted_families(doc, policy)) {
    buf.clear();
    expo::encode_family(*f, policy, buf);
    out.exposed_bytes += buf.size();
    if (f->samples.empty()) {
      carry += buf.size();
      continue;
    }
    const std::size_t share = buf.size() / f->samples.size();
    std::size_t extra = buf.size() - share * f->samples.size() + carry;
    carry = 0;
    for (const auto& s : f->samples) {
      MetricSample m{s.name, s.labels, s.value, s.timestamp_ms.value_or(now_ms), device_id};
      ObservabilityRecord rec(std::move(m));
      rec.set_footprint_bytes(share + extra);
      extra = 0;
      out.records.push_back(std::move(rec));
    }
  }
  if (carry > 0 && !out.records.empty()) {
    auto& last = out.records.back();
    last.set_footprint_bytes(last.footprint_bytes() + carry);
  }
  return out;
}

MetricCollector::MetricCollector(const CollectorConfig& cfg, std::unique_ptr<MetricSource> source)
    : device_id_(cfg.device_id),
      policy_(cfg.reduction),
      source_(std::move(source)),
      enabled_(cfg.weights.enabled(Domain::Metric)),
      interval_s_(cfg.metric_interval_s * cfg.reduction.interval_scale) {
  cfg.validate();
}

bool MetricCollector::due(std::int64_t now_ms) const noexcept {
  return enabled_ && (!next_due_ms_ || now_ms >= *next_due_ms_);
}

std::optional<MetricEmission> MetricCollector::collect(std::int64_t now_ms) {
  if (!enabled_) return std::nullopt;
  const auto step = static_cast<std::int64_t>(std::llround(interval_s_ * 1000.0));
  next_due_ms_ = next_due_ms_ ? std::max(*next_due_ms_ + step, now_ms) : now_ms + step;
  try {
    expo::ExpositionDocument doc = source_->read(now_ms);
    auto em = to_metric_records(doc, policy_, device_id_, now_ms);
    ++emissions_;
    return em;
  } catch (const Error& e) {
    // ParseError from a broken exposition document is treated like a missing source.
    ++errors_;
    last_error_ = e.what();
    log::warn("metric collection skipped: {}", e.what());
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------

namespace {

std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool digits(std::string_view s, std::size_t at, std::size_t n, int& out) {
  if (at + n > s.size()) return false;
  out = 0;
  for (std::size_t i = at; i < at + n; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + (s[i] - '0');
  }
  return true;
}

// YYYY-MM-DDTHH:MM:SS[.fff]Z
std::optional<std::int64_t> parse_iso8601_ms(std::string_view s) {
  int y, mo, d, h, mi, se;
  if (!digits(s, 0, 4, y) || s.size() < 20 || s[4] != '-' || !digits(s, 5, 2, mo) || s[7] != '-' ||
      !digits(s, 8, 2, d) || (s[10] != 'T' && s[10] != ' ') || !digits(s, 11, 2, h) || s[13] != ':' ||
      !digits(s, 14, 2, mi) || s[16] != ':' || !digits(s, 17, 2, se))
    return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 60) return std::nullopt;
  std::size_t at = 19;
  int ms = 0;
  if (at < s.size() && s[at] == '.') {
    ++at;
    int scale = 100;
    while (at < s.size() && s[at] >= '0' && s[at] <= '9') {
      ms += (s[at] - '0') * scale;
      scale /= 10;
      ++at;
    }
  }
  if (at + 1 != s.size() || s[at] != 'Z') return std::nullopt;
  const std::int64_t days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  return ((days * 24 + h) * 60 + mi) * 60000LL + se * 1000LL + ms;
}

bool is_level_token(std::string_view t) {
  static constexpr std::string_view kLevels[] = {"DEBUG", "INFO", "WARN", "WARNING", "ERROR", "TRACE", "FATAL"};
  for (auto l : kLevels) {
    if (t == l) return true;
  }
  return false;
}

}  // namespace

LogEntry parse_log_line(std::string_view line, const std::string& device_id,
                        const std::string& source_file, std::int64_t now_ms) {
  LogEntry e;
  e.device_id = device_id;
  e.source_file = source_file;
  e.source_timestamp = now_ms;
  e.level = LogLevel::Info;

  std::string_view rest = line;
  auto sp = rest.find(' ');
  if (sp != std::string_view::npos) {
    std::string_view first = rest.substr(0, sp);
    std::optional<std::int64_t> ts;
    std::int64_t n = 0;
    auto [ptr, ec] = std::from_chars(first.data(), first.data() + first.size(), n);
    if (ec == std::errc() && ptr == first.data() + first.size() && n >= 0) ts = n;
    else ts = parse_iso8601_ms(first);
    if (ts) {
      e.source_timestamp = *ts;
      rest.remove_prefix(sp + 1);
      auto sp2 = rest.find(' ');
      std::string_view level_tok = rest.substr(0, sp2);
      if (is_level_token(level_tok) && sp2 != std::string_view::npos) {
        e.level = parse_level(level_tok);
        rest.remove_prefix(sp2 + 1);
      }
    }
  }
  e.message = std::string(rest.empty() ? line : rest);
  return e;
}

LogHarvester::LogHarvester(std::string device_id, std::vector<std::filesystem::path> paths,
                           std::map<std::string, FileOffset> offsets)
    : device_id_(std::move(device_id)), paths_(std::move(paths)), offsets_(std::move(offsets)) {}

std::vector<ObservabilityRecord> LogHarvester::harvest(std::int64_t now_ms) {
  std::vector<ObservabilityRecord> out;
  for (const auto& path : paths_) {
    const std::string key = path.string();
    struct stat st {};
    if (::stat(key.c_str(), &st) != 0) {
      ++missing_;
      continue;
    }
    auto& off = offsets_[key];
    const auto inode = static_cast<std::uint64_t>(st.st_ino);
    const auto size = static_cast<std::uint64_t>(st.st_size);
    if (off.inode != 0 && off.inode != inode) {
      // rotated: the path now names a new file
      ++rotations_;
      log::info("{} rotated, reading from the start", key);
      off.offset = 0;
    } else if (size < off.offset) {
      ++truncations_;
      log::info("{} truncated, reading from the start", key);
      off.offset = 0;
    }
    off.inode = inode;
    if (size == off.offset) continue;

    std::ifstream in(path, std::ios::binary);
    if (!in) {
      ++missing_;
      continue;
    }
    in.seekg(static_cast<std::streamoff>(off.offset));
    std::string chunk(size - off.offset, '\0');
    in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    chunk.resize(static_cast<std::size_t>(in.gcount()));

    std::size_t pos = 0;
    while (true) {
      std::size_t nl = chunk.find('\n', pos);
      if (nl == std::string::npos) break;  // partial line waits for the writer
      std::string_view line(chunk.data() + pos, nl - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.find_first_not_of(" \t") != std::string_view::npos) {
        ObservabilityRecord rec(parse_log_line(line, device_id_, key, now_ms));
        rec.set_footprint_bytes(nl - pos + 1);
        out.push_back(std::move(rec));
      }
      pos = nl + 1;
    }
    off.offset += pos;
  }
  return out;
}

// ---------------------------------------------------------------------------

SpanRecorder::SpanRecorder(std::string device_id, const Clock& clock, Sink sink, std::uint64_t seed)
    : device_id_(std::move(device_id)),
      clock_(clock),
      sink_(std::move(sink)),
      rng_(seed != 0 ? seed : std::random_device{}()) {}

SpanRecorder::Handle SpanRecorder::start_span(std::string service, std::string operation,
                                              const std::optional<Handle>& parent) {
  std::lock_guard lock(mu_);
  TraceSpan s;
  std::uint64_t id = 0;
  while (id == 0 || open_.contains(id)) id = rng_();
  s.span_id = id;
  if (parent) {
    s.trace_id = parent->trace_id;
    s.parent_span_id = parent->span_id;
  } else {
    while (s.trace_id.hi == 0 && s.trace_id.lo == 0) s.trace_id = TraceId{rng_(), rng_()};
  }
  s.service = std::move(service);
  s.operation = std::move(operation);
  s.start = clock_.now_us();
  s.device_id = device_id_;
  Handle h{s.trace_id, s.span_id};
  open_.emplace(id, Open{std::move(s)});
  return h;
}

void SpanRecorder::set_attribute(const Handle& h, std::string key, std::string value) {
  std::lock_guard lock(mu_);
  auto it = open_.find(h.span_id);
  if (it == open_.end()) return;
  auto& attrs = it->second.span.attributes;
  for (auto& [k, v] : attrs) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  attrs.emplace_back(std::move(key), std::move(value));
}

void SpanRecorder::end_span(const Handle& h) {
  TraceSpan done;
  {
    std::lock_guard lock(mu_);
    auto it = open_.find(h.span_id);
    if (it == open_.end() || it->second.span.trace_id != h.trace_id) {
      ++unbalanced_;
      throw UnbalancedSpan("end_span for a span that was never started");
    }
    done = std::move(it->second.span);
    open_.erase(it);
  }
  done.duration = std::max<std::int64_t>(0, clock_.now_us() - done.start);
  done.attributes = canonical_labels(std::move(done.attributes));
  sink_(std::move(done));
}

std::size_t SpanRecorder::open_spans() const {
  std::lock_guard lock(mu_);
  return open_.size();
}

}  // namespace odlc::edge
