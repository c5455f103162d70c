#include "odlc/fog/fog_node.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <limits>

#include <json.hpp>

#include "odlc/core/errors.hpp"
#include "odlc/edge/wire.hpp"
#include "odlc/util/files.hpp"
#include "odlc/util/log.hpp"

namespace odlc::fog {

namespace {

constexpr std::int64_t kMinTs = std::numeric_limits<std::int64_t>::min();
constexpr std::int64_t kMaxTs = std::numeric_limits<std::int64_t>::max();

std::vector<DocId> intersect(const std::vector<DocId>& a, const std::vector<DocId>& b) {
  std::vector<DocId> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<DocId> unite(const std::vector<DocId>& a, const std::vector<DocId>& b) {
  std::vector<DocId> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool record_before(const ObservabilityRecord& a, const ObservabilityRecord& b) {
  if (a.source_timestamp_ms() != b.source_timestamp_ms()) return a.source_timestamp_ms() < b.source_timestamp_ms();
  return a.wire_line() < b.wire_line();
}

}  // namespace

void TieringPolicy::validate() const {
  if (age_limit_s <= 0) throw ConfigError("tiering age limit must be positive");
  if (cycle_interval_s <= 0) throw ConfigError("tiering cycle interval must be positive");
}

bool DirectorySink::available() {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  return !ec && std::filesystem::is_directory(dir_, ec) && ::access(dir_.c_str(), W_OK) == 0;
}

std::string DirectorySink::write(const archive::SegmentManifest& manifest, const std::string& bytes) {
  try {
    auto path = files::unique_path(dir_, archive::segment_stem(manifest), ".seg");
    files::write_file_atomic(path, bytes);
    return path.string();
  } catch (const IoError& e) {
    throw SinkUnavailable(e.what());
  }
}

std::string DirectorySink::read_back(const std::string& handle) {
  try {
    return files::read_file(handle);
  } catch (const IoError& e) {
    throw SinkUnavailable(e.what());
  }
}

void DirectorySink::discard(const std::string& handle) {
  std::error_code ec;
  std::filesystem::remove(handle, ec);
}

FogNode::FogNode(FogConfig cfg)
    : cfg_(std::move(cfg)),
      tsdb_(TsdbConfig{cfg_.seal_threshold, cfg_.data_dir.empty() ? std::filesystem::path{} : cfg_.data_dir / "tsdb"}) {
  if (cfg_.dedup_window == 0) cfg_.dedup_window = 1;
  if (!cfg_.data_dir.empty()) {
    std::filesystem::create_directories(cfg_.data_dir);
    recover();
    open_wal();
  }
}

FogNode::~FogNode() {
  if (wal_fd_ >= 0) ::close(wal_fd_);
}

void FogNode::open_wal() {
  const auto path = (cfg_.data_dir / "wal.log").string();
  wal_fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (wal_fd_ < 0) throw IoError("cannot open write-ahead log " + path + ": " + std::strerror(errno));
}

void FogNode::remember(DedupState& st, const Hash128& key) {
  if (!st.keys.insert(key).second) return;
  st.order.push_back(key);
  while (st.order.size() > cfg_.dedup_window) {
    st.keys.erase(st.order.front());
    st.order.pop_front();
  }
}

IngestResult FogNode::ingest(std::string_view frame) {
  std::unique_lock lock(mu_);
  return ingest_locked(frame, true);
}

IngestResult FogNode::ingest_locked(std::string_view frame, bool durable) {
  wire::DataFrame df;
  std::vector<ObservabilityRecord> recs;
  try {
    df = wire::decode_data_frame(frame);
    recs.reserve(df.record_lines.size());
    for (auto line : df.record_lines) recs.push_back(ObservabilityRecord::decode(df.header.domain, line));
  } catch (const MalformedFrame&) {
    ++stats_.malformed_frames;
    throw;
  } catch (const DecodeError& e) {
    ++stats_.malformed_frames;
    throw MalformedFrame(std::string("bad record in frame: ") + e.what());
  }
  const auto& h = df.header;
  for (const auto& r : recs) {
    if (r.device_id() != h.device_id) {
      ++stats_.malformed_frames;
      throw MalformedFrame("record device '" + r.device_id() + "' differs from frame device '" + h.device_id + "'");
    }
  }

  auto& st = dedup_[{h.device_id, h.domain}];
  const bool replayed_seq = h.batch_seq <= st.high_seq;
  std::vector<bool> fresh(recs.size(), false);
  std::size_t fresh_count = 0;
  {
    std::unordered_set<Hash128, KeyHash> in_frame;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto& key = recs[i].dedup_key();
      if (st.keys.contains(key) || replayed_seq || !in_frame.insert(key).second) continue;
      fresh[i] = true;
      ++fresh_count;
    }
  }
  const std::size_t held = tsdb_.sample_count() + logs_.size() + spans_.size();
  if (cfg_.max_records != 0 && held + fresh_count > cfg_.max_records) {
    ++stats_.storage_full;
    throw StorageFull("fog store holds " + std::to_string(held) + " of " +
                      std::to_string(cfg_.max_records) + " records");
  }
  if (durable && wal_fd_ >= 0) {
    std::size_t done = 0;
    while (done < frame.size()) {
      const auto n = ::write(wal_fd_, frame.data() + done, frame.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError(std::string("write-ahead log append failed: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
    if (cfg_.sync_wal && ::fdatasync(wal_fd_) != 0) throw IoError("write-ahead log sync failed");
  }

  IngestResult res;
  res.domain = h.domain;
  res.count = h.count;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto key = recs[i].dedup_key();
    if (fresh[i]) {
      store_locked(std::move(recs[i]));
      ++res.stored;
    } else {
      ++res.duplicates;
    }
    remember(st, key);
  }
  st.high_seq = std::max(st.high_seq, h.batch_seq);
  ++stats_.frames;
  stats_.stored[domain_index(h.domain)] += res.stored;
  stats_.duplicates[domain_index(h.domain)] += res.duplicates;
  res.ack = wire::encode_ack_frame(h.device_id, h.domain, h.batch_seq, h.count);
  return res;
}

void FogNode::store_locked(ObservabilityRecord rec) {
  switch (rec.domain()) {
    case Domain::Metric: tsdb_.append(rec.metric()); break;
    case Domain::Log: index_log_locked(std::move(rec)); break;
    case Domain::Trace: index_span_locked(std::move(rec)); break;
  }
}

void FogNode::index_log_locked(ObservabilityRecord rec) {
  LogEntry e = rec.log();
  if (e.fields.empty()) {
    e.fields = extract_fields(e.message);
    if (!e.fields.empty()) rec = ObservabilityRecord(e);
  }
  Labels fields = e.fields;
  fields.emplace_back("level", std::string(level_name(e.level)));
  fields.emplace_back("device_id", e.device_id);
  fields.emplace_back("source_file", e.source_file);
  logs_.add(std::move(rec), tokenize(e.message), fields);
}

void FogNode::index_span_locked(ObservabilityRecord rec) {
  const auto& s = rec.span();
  auto terms = tokenize(s.service);
  for (auto& t : tokenize(s.operation)) terms.push_back(std::move(t));
  terms.push_back(s.trace_id.hex());
  Labels fields{{"service", s.service},
                {"operation", s.operation},
                {"trace_id", s.trace_id.hex()},
                {"device_id", s.device_id}};
  spans_.add(std::move(rec), terms, fields);
}

std::vector<SeriesResult> FogNode::query_range(const std::string& selector, std::int64_t start, std::int64_t end,
                                               Aggregation agg, double step_s) const {
  return tsdb_.query_range(MetricSelector::parse(selector), start, end, agg, step_s);
}

std::vector<LogEntry> FogNode::search_logs(const LogQuery& q) const {
  std::shared_lock lock(mu_);
  const auto tokens = tokenize(q.text);
  std::optional<std::vector<DocId>> cand;
  auto narrow = [&](std::vector<DocId> ids) { cand = cand ? intersect(*cand, ids) : std::move(ids); };
  for (const auto& t : tokens) {
    if (q.fuzzy) {
      std::vector<DocId> any;
      for (const auto& term : logs_.fuzzy_terms(t)) any = unite(any, logs_.postings(term));
      narrow(std::move(any));
    } else {
      narrow(logs_.postings(t));
    }
  }
  for (const auto& [k, v] : q.fields) narrow(logs_.field(k, v));
  const std::int64_t start = q.start.value_or(kMinTs);
  const std::int64_t end = q.end.value_or(kMaxTs);
  if (!cand) {
    if (!q.start && !q.end) return {};
    cand = logs_.overlapping(start, end);
  }
  std::vector<std::pair<std::int64_t, DocId>> hits;
  for (DocId id : *cand) {
    const auto* d = logs_.get(id);
    if (d && d->time_ms >= start && d->time_ms < end) hits.emplace_back(d->time_ms, id);
  }
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a > b; });
  if (q.limit && hits.size() > q.limit) hits.resize(q.limit);
  std::vector<LogEntry> out;
  out.reserve(hits.size());
  for (const auto& [ts, id] : hits) out.push_back(logs_.get(id)->record.log());
  return out;
}

std::vector<TraceSpan> FogNode::trace_spans_locked(const TraceId& id) const {
  std::vector<TraceSpan> out;
  for (DocId d : spans_.field("trace_id", id.hex())) out.push_back(spans_.get(d)->record.span());
  return out;
}

SpanTree FogNode::assemble_trace(const TraceId& id) const {
  std::shared_lock lock(mu_);
  return fog::assemble_trace(id, trace_spans_locked(id));
}

std::vector<TraceSpan> FogNode::critical_path(const TraceId& id) const {
  return fog::critical_path(assemble_trace(id));
}

DependencyGraph FogNode::dependency_graph(std::int64_t start, std::int64_t end) const {
  if (start >= end) throw InvalidRange("range start must be before end");
  std::shared_lock lock(mu_);
  std::vector<TraceSpan> spans;
  for (DocId id : spans_.overlapping(start, end)) spans.push_back(spans_.get(id)->record.span());
  return fog::dependency_graph(spans);
}

CorrelationResult FogNode::correlate(const CorrelationWindow& w) const {
  if (w.start >= w.end) throw InvalidRange("window start must be before end");
  CorrelationResult out;
  for (auto& s : tsdb_.samples_in(w.start, w.end, w.device_filter)) out.metrics.emplace_back(std::move(s));
  {
    std::shared_lock lock(mu_);
    for (DocId id : logs_.overlapping(w.start, w.end)) {
      const auto& r = logs_.get(id)->record;
      if (w.admits_device(r.device_id())) out.logs.push_back(r);
    }
    for (DocId id : spans_.overlapping(w.start, w.end)) {
      const auto& r = spans_.get(id)->record;
      if (w.admits_device(r.device_id())) out.traces.push_back(r);
    }
  }
  for (auto* v : {&out.metrics, &out.logs, &out.traces}) std::sort(v->begin(), v->end(), record_before);
  out.score = correlation_score(DomainCounts{{Domain::Metric, out.metrics.size()},
                                             {Domain::Log, out.logs.size()},
                                             {Domain::Trace, out.traces.size()}});
  return out;
}

std::vector<AlertEvent> FogNode::evaluate_alerts(const std::vector<AlertRule>& rules, std::int64_t now_ms) {
  std::unique_lock lock(mu_);
  return alerts_.evaluate(rules, tsdb_, now_ms);
}

std::vector<AlertEvent> FogNode::alert_log() const {
  std::shared_lock lock(mu_);
  return alerts_.log();
}

std::uint64_t FogNode::bad_alert_selectors() const {
  std::shared_lock lock(mu_);
  return alerts_.bad_selector_count();
}

TieringReport FogNode::tiering_cycle(const TieringPolicy& policy, std::int64_t now_ms, ArchiveSink& sink) {
  policy.validate();
  TieringReport report;
  if (!sink.available()) {
    report.skipped = true;
    log::warn("archive sink unavailable; tiering skipped, data retained");
    return report;
  }
  const std::int64_t cutoff = now_ms - policy.age_limit_s * 1000;
  bool deleted_any = false;
  for (Domain d : kDomains) {
    std::vector<ObservabilityRecord> recs;
    std::vector<MetricSample> samples;
    std::vector<DocId> ids;
    if (d == Domain::Metric) {
      samples = tsdb_.samples_in(kMinTs, cutoff);
      for (const auto& s : samples) recs.emplace_back(s);
    } else {
      std::shared_lock lock(mu_);
      const auto& index = d == Domain::Log ? logs_ : spans_;
      ids = index.older_than(cutoff);
      for (DocId id : ids) recs.push_back(index.get(id)->record);
    }
    if (recs.empty()) continue;
    const auto seg = archive::make_segment(recs);
    const auto bytes = archive::encode_segment_file(seg);
    std::optional<std::string> handle;
    for (int attempt = 0; attempt < 2 && !handle; ++attempt) {
      std::string h;
      try {
        h = sink.write(seg.manifest, bytes);
        const auto back = archive::decode_segment_file(sink.read_back(h));
        if (back.body != seg.body) throw ChecksumMismatch("read-back body differs from the exported body");
        handle = h;
      } catch (const ChecksumMismatch& e) {
        if (!h.empty()) sink.discard(h);
        report.errors.push_back(std::string(domain_name(d)) + ": " + e.what());
      } catch (const DecodeError& e) {
        if (!h.empty()) sink.discard(h);
        report.errors.push_back(std::string(domain_name(d)) + ": " + e.what());
      } catch (const SinkUnavailable& e) {
        report.errors.push_back(std::string(domain_name(d)) + ": " + e.what());
        break;
      }
    }
    if (!handle) {
      log::warn("tiering of {} records kept on the fog: export not verified", domain_name(d));
      continue;
    }
    {
      std::unique_lock lock(mu_);
      if (d == Domain::Metric) {
        tsdb_.remove_exact(samples);
      } else {
        (d == Domain::Log ? logs_ : spans_).remove(ids);
      }
      stats_.exported[domain_index(d)] += recs.size();
    }
    deleted_any = true;
    report.segments.push_back(seg.manifest);
    report.handles.push_back(*handle);
    report.exported[d] = recs.size();
  }
  if (deleted_any) checkpoint();
  return report;
}

std::vector<ObservabilityRecord> FogNode::records(Domain d) const {
  std::vector<ObservabilityRecord> out;
  if (d == Domain::Metric) {
    for (auto& s : tsdb_.all_samples()) out.emplace_back(std::move(s));
  } else {
    std::shared_lock lock(mu_);
    (d == Domain::Log ? logs_ : spans_).for_each([&](DocId, const InvertedIndex::Doc& doc) { out.push_back(doc.record); });
  }
  return out;
}

std::size_t FogNode::record_count(Domain d) const {
  if (d == Domain::Metric) return tsdb_.sample_count();
  std::shared_lock lock(mu_);
  return d == Domain::Log ? logs_.size() : spans_.size();
}

std::size_t FogNode::record_count() const {
  std::shared_lock lock(mu_);
  return tsdb_.sample_count() + logs_.size() + spans_.size();
}

FogStats FogNode::stats() const {
  std::shared_lock lock(mu_);
  return stats_;
}

void FogNode::checkpoint() {
  if (cfg_.data_dir.empty()) return;
  std::unique_lock lock(mu_);
  checkpoint_locked();
}

void FogNode::checkpoint_locked() {
  tsdb_.seal();
  std::string logs, spans;
  logs_.for_each([&](DocId, const InvertedIndex::Doc& d) { logs += d.record.wire_line(); });
  spans_.for_each([&](DocId, const InvertedIndex::Doc& d) { spans += d.record.wire_line(); });
  nlohmann::json dedup = nlohmann::json::array();
  for (const auto& [key, st] : dedup_) {
    nlohmann::json keys = nlohmann::json::array();
    for (const auto& k : st.order) keys.push_back(k.hex());
    dedup.push_back({{"device", key.first}, {"domain", domain_name(key.second)}, {"high_seq", st.high_seq}, {"keys", keys}});
  }
  files::write_file_atomic(cfg_.data_dir / "logs.ndjson", logs);
  files::write_file_atomic(cfg_.data_dir / "spans.ndjson", spans);
  files::write_file_atomic(cfg_.data_dir / "dedup.json", dedup.dump());
  if (wal_fd_ >= 0 && ::ftruncate(wal_fd_, 0) != 0) throw IoError("cannot truncate write-ahead log");
}

void FogNode::recover() {
  std::unique_lock lock(mu_);
  tsdb_.load();
  auto load_lines = [&](const char* file, Domain d) {
    const auto path = cfg_.data_dir / file;
    if (!std::filesystem::exists(path)) return;
    const auto text = files::read_file(path);
    std::string_view rest(text);
    while (!rest.empty()) {
      const auto nl = rest.find('\n');
      const auto line = rest.substr(0, nl == std::string_view::npos ? rest.size() : nl + 1);
      store_locked(ObservabilityRecord::decode(d, line));
      rest.remove_prefix(line.size());
    }
  };
  load_lines("logs.ndjson", Domain::Log);
  load_lines("spans.ndjson", Domain::Trace);
  if (const auto path = cfg_.data_dir / "dedup.json"; std::filesystem::exists(path)) {
    const auto j = nlohmann::json::parse(files::read_file(path));
    for (const auto& e : j) {
      auto& st = dedup_[{e.at("device").get<std::string>(), parse_domain(e.at("domain").get<std::string>())}];
      st.high_seq = e.at("high_seq").get<std::uint64_t>();
      for (const auto& k : e.at("keys")) {
        const auto hex = k.get<std::string>();
        remember(st, Hash128{parse_hex64(std::string_view(hex).substr(0, 16)), parse_hex64(std::string_view(hex).substr(16))});
      }
    }
  }
  const auto wal = cfg_.data_dir / "wal.log";
  if (!std::filesystem::exists(wal)) return;
  const auto bytes = files::read_file(wal);
  std::size_t pos = 0, replayed = 0;
  while (bytes.size() - pos >= wire::kFrameOverheadBytes) {
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len = (len << 8) | static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(i)]);
    const std::size_t total = wire::kLengthPrefixBytes + len;
    if (total > bytes.size() - pos) break;  // torn tail; never acknowledged
    try {
      ingest_locked(std::string_view(bytes).substr(pos, total), false);
      ++replayed;
    } catch (const Error& e) {
      log::warn("skipping unreadable write-ahead log frame: {}", e.what());
    }
    pos += total;
  }
  if (replayed) log::info("replayed {} frames from the write-ahead log", replayed);
}

}  // namespace odlc::fog
