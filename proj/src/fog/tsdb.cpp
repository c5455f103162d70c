#include "odlc/fog/tsdb.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>

#include "odlc/core/errors.hpp"
#include "odlc/core/hash.hpp"
#include "odlc/util/bytes.hpp"
#include "odlc/util/files.hpp"
#include "odlc/util/log.hpp"

namespace odlc::fog {

namespace {

constexpr std::string_view kMagic = "ODLCTSG1";
constexpr std::string_view kEnd = "ODLCEND1";
constexpr std::size_t kFooterBytes = 8 + 8 + 8;

std::uint64_t double_bits(double v) {
  std::uint64_t b;
  std::memcpy(&b, &v, sizeof b);
  return b;
}

double bits_double(std::uint64_t b) {
  double v;
  std::memcpy(&v, &b, sizeof v);
  return v;
}

MetricSample to_sample(const SeriesMeta& m, const Point& p) {
  return MetricSample{m.name, m.labels, p.value, p.ts, m.device_id};
}

}  // namespace

SeriesId series_id(std::string_view name, const Labels& labels, std::string_view device_id) {
  std::string key(name);
  key.push_back('\0');
  for (const auto& [k, v] : labels) {
    key.append(k);
    key.push_back('=');
    key.append(v);
    key.push_back('\0');
  }
  key.push_back('\0');
  key.append(device_id);
  return hash64(key, 0x73657269);
}

std::string_view aggregation_name(Aggregation a) noexcept {
  switch (a) {
    case Aggregation::Raw: return "raw";
    case Aggregation::Avg: return "avg";
    case Aggregation::Min: return "min";
    case Aggregation::Max: return "max";
    case Aggregation::Rate: return "rate";
  }
  return "raw";
}

Aggregation parse_aggregation(std::string_view s) {
  for (auto a : {Aggregation::Raw, Aggregation::Avg, Aggregation::Min, Aggregation::Max, Aggregation::Rate}) {
    if (aggregation_name(a) == s) return a;
  }
  throw InvalidRange("unknown aggregation '" + std::string(s) + "'");
}

SealedSegment SealedSegment::build(const std::map<SeriesId, SeriesMeta>& metas, const SeriesData& data) {
  std::string out(kMagic);
  std::uint32_t nseries = 0;
  for (const auto& [id, pts] : data) nseries += pts.empty() ? 0 : 1;
  bytes::put_u32(out, nseries);
  std::uint64_t count = 0;
  for (const auto& [id, pts] : data) {
    if (pts.empty()) continue;
    const auto& m = metas.at(id);
    bytes::put_u64(out, id);
    bytes::put_str(out, m.name);
    bytes::put_str(out, m.device_id);
    bytes::put_u32(out, static_cast<std::uint32_t>(m.labels.size()));
    for (const auto& [k, v] : m.labels) {
      bytes::put_str(out, k);
      bytes::put_str(out, v);
    }
    bytes::put_u32(out, static_cast<std::uint32_t>(pts.size()));
    std::int64_t prev = 0;
    for (const auto& p : pts) {
      bytes::put_varint(out, bytes::zigzag(p.ts - prev));
      prev = p.ts;
    }
    for (const auto& p : pts) bytes::put_u64(out, double_bits(p.value));
    count += pts.size();
  }
  bytes::put_u64(out, count);
  bytes::put_u64(out, hash64(out));
  out.append(kEnd);
  SealedSegment seg;
  seg.bytes_ = std::move(out);
  seg.parse();
  return seg;
}

SealedSegment SealedSegment::from_bytes(std::string b) {
  SealedSegment seg;
  seg.bytes_ = std::move(b);
  seg.parse();
  return seg;
}

void SealedSegment::parse() {
  const std::string_view all(bytes_);
  if (all.size() < kMagic.size() + 4 + kFooterBytes || all.substr(0, kMagic.size()) != kMagic ||
      all.substr(all.size() - kEnd.size()) != kEnd)
    throw DecodeError("not a series segment");
  const std::size_t body_end = all.size() - kFooterBytes;
  bytes::Reader footer(all, body_end);
  const auto declared_count = footer.u64();
  const auto checksum = footer.u64();
  if (hash64(all.substr(0, body_end + 8)) != checksum) throw ChecksumMismatch("series segment checksum mismatch");

  bytes::Reader r(all.substr(0, body_end), kMagic.size());
  const auto nseries = r.u32();
  count_ = 0;
  bool first = true;
  for (std::uint32_t i = 0; i < nseries; ++i) {
    Entry e;
    const auto id = r.u64();
    e.meta.name = std::string(r.str());
    e.meta.device_id = std::string(r.str());
    const auto nlabels = r.u32();
    for (std::uint32_t l = 0; l < nlabels; ++l) {
      std::string k(r.str());
      std::string v(r.str());
      e.meta.labels.emplace_back(std::move(k), std::move(v));
    }
    e.count = r.u32();
    e.offset = r.pos();
    std::int64_t ts = 0;
    for (std::uint32_t p = 0; p < e.count; ++p) {
      ts += bytes::unzigzag(r.varint());
      if (first || ts < min_ts_) min_ts_ = ts;
      if (first || ts > max_ts_) max_ts_ = ts;
      first = false;
    }
    r.take(static_cast<std::size_t>(e.count) * 8);
    count_ += e.count;
    index_.emplace(id, std::move(e));
  }
  if (r.remaining() != 0) throw DecodeError("trailing bytes in series segment");
  if (count_ != declared_count) throw ChecksumMismatch("series segment count mismatch");
}

std::vector<SeriesId> SealedSegment::series() const {
  std::vector<SeriesId> out;
  out.reserve(index_.size());
  for (const auto& [id, e] : index_) out.push_back(id);
  return out;
}

std::vector<Point> SealedSegment::points(SeriesId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return {};
  const auto& e = it->second;
  bytes::Reader r(bytes_, e.offset);
  std::vector<Point> pts(e.count);
  std::int64_t ts = 0;
  for (auto& p : pts) {
    ts += bytes::unzigzag(r.varint());
    p.ts = ts;
  }
  for (auto& p : pts) p.value = bits_double(r.u64());
  return pts;
}

SealedSegment::SeriesData SealedSegment::decode_all() const {
  SeriesData out;
  for (const auto& [id, e] : index_) out.emplace(id, points(id));
  return out;
}

TimeSeriesStore::TimeSeriesStore(TsdbConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.seal_threshold == 0) cfg_.seal_threshold = 1;
}

void TimeSeriesStore::append(const MetricSample& s) {
  const auto id = series_id(s.name, s.labels, s.device_id);
  std::unique_lock lock(mu_);
  if (!metas_.contains(id)) metas_.emplace(id, SeriesMeta{s.name, s.labels, s.device_id});
  if (auto it = sealed_max_ts_.find(id); it != sealed_max_ts_.end() && s.source_timestamp <= it->second) {
    erase_from_segments_locked(id, s.source_timestamp);
  }
  auto [pos, inserted] = head_[id].insert_or_assign(s.source_timestamp, s.value);
  (void)pos;
  if (inserted) ++head_count_;
  if (head_count_ >= cfg_.seal_threshold) seal_locked();
}

void TimeSeriesStore::erase_from_segments_locked(SeriesId id, std::int64_t ts) {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    auto& seg = segments_[i];
    if (!seg.contains_series(id) || ts < seg.min_ts() || ts > seg.max_ts()) continue;
    auto pts = seg.points(id);
    auto it = std::lower_bound(pts.begin(), pts.end(), ts, [](const Point& p, std::int64_t t) { return p.ts < t; });
    if (it == pts.end() || it->ts != ts) continue;
    auto data = seg.decode_all();
    auto& series = data[id];
    series.erase(series.begin() + (it - pts.begin()));
    rewrite_segment_locked(i, std::move(data));
    return;
  }
}

void TimeSeriesStore::rewrite_segment_locked(std::size_t idx, SealedSegment::SeriesData data) {
  std::erase_if(data, [](const auto& kv) { return kv.second.empty(); });
  drop_file(segments_[idx]);
  if (data.empty()) {
    segments_.erase(segments_.begin() + static_cast<std::ptrdiff_t>(idx));
    return;
  }
  auto seg = SealedSegment::build(metas_, data);
  persist_segment_locked(seg);
  segments_[idx] = std::move(seg);
}

void TimeSeriesStore::drop_file(const SealedSegment& seg) {
  if (seg.path().empty()) return;
  std::error_code ec;
  std::filesystem::remove(seg.path(), ec);
  if (ec) log::warn("cannot remove segment {}: {}", seg.path().string(), ec.message());
}

void TimeSeriesStore::persist_segment_locked(SealedSegment& seg) {
  if (cfg_.dir.empty()) return;
  std::filesystem::create_directories(cfg_.dir);
  auto path = files::unique_path(cfg_.dir,
                                 "metric-" + std::to_string(seg.min_ts()) + "-" + std::to_string(seg.max_ts()), ".seg");
  files::write_file_atomic(path, seg.bytes());
  seg.set_path(std::move(path));
}

void TimeSeriesStore::seal() {
  std::unique_lock lock(mu_);
  seal_locked();
}

void TimeSeriesStore::seal_locked() {
  if (head_count_ == 0) return;
  SealedSegment::SeriesData data;
  for (auto& [id, pts] : head_) {
    if (pts.empty()) continue;
    auto& v = data[id];
    v.reserve(pts.size());
    for (const auto& [ts, val] : pts) v.push_back(Point{ts, val});
    auto& mx = sealed_max_ts_[id];
    mx = std::max(mx, pts.rbegin()->first);
  }
  auto seg = SealedSegment::build(metas_, data);
  persist_segment_locked(seg);
  segments_.push_back(std::move(seg));
  head_.clear();
  head_count_ = 0;
}

std::vector<Point> TimeSeriesStore::points_locked(SeriesId id, std::int64_t start, std::int64_t end) const {
  std::vector<Point> out;
  for (const auto& seg : segments_) {
    if (!seg.contains_series(id) || seg.max_ts() < start || seg.min_ts() >= end) continue;
    for (const auto& p : seg.points(id)) {
      if (p.ts >= start && p.ts < end) out.push_back(p);
    }
  }
  if (auto it = head_.find(id); it != head_.end()) {
    for (auto p = it->second.lower_bound(start); p != it->second.end() && p->first < end; ++p)
      out.push_back(Point{p->first, p->second});
  }
  std::sort(out.begin(), out.end(), [](const Point& a, const Point& b) { return a.ts < b.ts; });
  return out;
}

std::vector<SeriesResult> TimeSeriesStore::query_range(const MetricSelector& sel, std::int64_t start,
                                                       std::int64_t end, Aggregation agg, double step_s) const {
  if (start >= end) throw InvalidRange("query range start must be before end");
  std::int64_t step_ms = 0;
  if (agg != Aggregation::Raw) {
    if (!(step_s > 0.0) || !std::isfinite(step_s)) throw InvalidRange("step must be positive");
    step_ms = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(step_s * 1000.0)));
  }
  std::shared_lock lock(mu_);
  std::vector<SeriesResult> out;
  for (const auto& [id, meta] : metas_) {
    if (!sel.matches(meta.name, meta.labels, meta.device_id)) continue;
    auto pts = points_locked(id, start, end);
    if (pts.empty()) continue;
    SeriesResult res{meta, {}};
    if (agg == Aggregation::Raw) {
      res.points = std::move(pts);
    } else {
      std::size_t i = 0;
      while (i < pts.size()) {
        const std::int64_t k = (pts[i].ts - start) / step_ms;
        const std::int64_t bucket_start = start + k * step_ms;
        const std::int64_t bucket_end = bucket_start + step_ms;
        double sum = 0, mn = 0, mx = 0, first = 0, last = 0;
        std::size_t n = 0;
        for (; i < pts.size() && pts[i].ts < bucket_end; ++i) {
          const double v = pts[i].value;
          if (std::isnan(v)) continue;
          if (n == 0) {
            mn = mx = first = v;
          } else {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
          }
          last = v;
          sum += v;
          ++n;
        }
        if (n == 0) continue;
        double value = 0;
        switch (agg) {
          case Aggregation::Avg: value = sum / static_cast<double>(n); break;
          case Aggregation::Min: value = mn; break;
          case Aggregation::Max: value = mx; break;
          case Aggregation::Rate: value = std::max(0.0, last - first) / step_s; break;
          case Aggregation::Raw: break;
        }
        res.points.push_back(Point{bucket_start, value});
      }
    }
    if (!res.points.empty()) out.push_back(std::move(res));
  }
  std::sort(out.begin(), out.end(), [](const SeriesResult& a, const SeriesResult& b) { return a.meta < b.meta; });
  return out;
}

std::vector<std::pair<SeriesMeta, Point>> TimeSeriesStore::latest(const MetricSelector& sel, std::int64_t at) const {
  std::shared_lock lock(mu_);
  std::vector<std::pair<SeriesMeta, Point>> out;
  for (const auto& [id, meta] : metas_) {
    if (!sel.matches(meta.name, meta.labels, meta.device_id)) continue;
    std::optional<Point> best;
    if (auto it = head_.find(id); it != head_.end()) {
      auto p = it->second.upper_bound(at);
      if (p != it->second.begin()) {
        --p;
        best = Point{p->first, p->second};
      }
    }
    for (const auto& seg : segments_) {
      if (!seg.contains_series(id) || seg.min_ts() > at) continue;
      if (best && seg.max_ts() <= best->ts) continue;
      for (const auto& p : seg.points(id)) {
        if (p.ts <= at && (!best || p.ts > best->ts)) best = p;
      }
    }
    if (best) out.emplace_back(meta, *best);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::vector<MetricSample> TimeSeriesStore::samples_in(std::int64_t start, std::int64_t end,
                                                      const std::optional<std::set<std::string>>& devices) const {
  std::shared_lock lock(mu_);
  std::vector<MetricSample> out;
  for (const auto& [id, meta] : metas_) {
    if (devices && !devices->contains(meta.device_id)) continue;
    for (const auto& p : points_locked(id, start, end)) out.push_back(to_sample(meta, p));
  }
  return out;
}

std::vector<MetricSample> TimeSeriesStore::all_samples() const {
  return samples_in(std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::max());
}

std::size_t TimeSeriesStore::remove_older_than(std::int64_t cutoff) {
  std::unique_lock lock(mu_);
  std::size_t removed = 0;
  for (auto& [id, pts] : head_) {
    auto stop = pts.lower_bound(cutoff);
    const auto n = static_cast<std::size_t>(std::distance(pts.begin(), stop));
    pts.erase(pts.begin(), stop);
    removed += n;
    head_count_ -= n;
  }
  std::erase_if(head_, [](const auto& kv) { return kv.second.empty(); });
  for (std::size_t i = segments_.size(); i-- > 0;) {
    auto& seg = segments_[i];
    if (seg.min_ts() >= cutoff) continue;
    if (seg.max_ts() < cutoff) {
      removed += seg.sample_count();
      drop_file(seg);
      segments_.erase(segments_.begin() + static_cast<std::ptrdiff_t>(i));
      continue;
    }
    auto data = seg.decode_all();
    for (auto& [id, pts] : data) {
      const auto before = pts.size();
      std::erase_if(pts, [&](const Point& p) { return p.ts < cutoff; });
      removed += before - pts.size();
    }
    rewrite_segment_locked(i, std::move(data));
  }
  return removed;
}

std::size_t TimeSeriesStore::remove_exact(const std::vector<MetricSample>& samples) {
  std::map<SeriesId, std::set<std::int64_t>> doomed;
  for (const auto& s : samples) doomed[series_id(s.name, s.labels, s.device_id)].insert(s.source_timestamp);
  std::unique_lock lock(mu_);
  std::size_t removed = 0;
  for (const auto& [id, stamps] : doomed) {
    auto it = head_.find(id);
    if (it == head_.end()) continue;
    for (auto ts : stamps) {
      if (it->second.erase(ts)) {
        ++removed;
        --head_count_;
      }
    }
    if (it->second.empty()) head_.erase(it);
  }
  for (std::size_t i = segments_.size(); i-- > 0;) {
    auto& seg = segments_[i];
    bool touched = false;
    for (const auto& [id, stamps] : doomed) {
      if (seg.contains_series(id) && *stamps.begin() <= seg.max_ts() && *stamps.rbegin() >= seg.min_ts()) {
        touched = true;
        break;
      }
    }
    if (!touched) continue;
    auto data = seg.decode_all();
    std::size_t n = 0;
    for (auto& [id, pts] : data) {
      auto d = doomed.find(id);
      if (d == doomed.end()) continue;
      const auto before = pts.size();
      std::erase_if(pts, [&](const Point& p) { return d->second.contains(p.ts); });
      n += before - pts.size();
    }
    if (n == 0) continue;
    removed += n;
    rewrite_segment_locked(i, std::move(data));
  }
  return removed;
}

std::size_t TimeSeriesStore::sample_count() const {
  std::shared_lock lock(mu_);
  std::size_t n = head_count_;
  for (const auto& s : segments_) n += s.sample_count();
  return n;
}

std::size_t TimeSeriesStore::head_count() const {
  std::shared_lock lock(mu_);
  return head_count_;
}

std::size_t TimeSeriesStore::segment_count() const {
  std::shared_lock lock(mu_);
  return segments_.size();
}

std::size_t TimeSeriesStore::series_count() const {
  std::shared_lock lock(mu_);
  return metas_.size();
}

void TimeSeriesStore::load() {
  if (cfg_.dir.empty() || !std::filesystem::exists(cfg_.dir)) return;
  std::unique_lock lock(mu_);
  std::vector<std::filesystem::path> paths;
  for (const auto& e : std::filesystem::directory_iterator(cfg_.dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.starts_with("metric-") && name.find(".seg") != std::string::npos &&
        !name.ends_with(".tmp"))
      paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) {
    auto seg = SealedSegment::from_bytes(files::read_file(p));
    seg.set_path(p);
    for (auto id : seg.series()) {
      metas_.emplace(id, seg.meta(id));
      auto& mx = sealed_max_ts_[id];
      mx = std::max(mx, seg.points(id).back().ts);
    }
    segments_.push_back(std::move(seg));
  }
}

}  // namespace odlc::fog
