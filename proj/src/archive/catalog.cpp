#include "odlc/archive/catalog.hpp"

#include <algorithm>
#include <limits>

#include <json.hpp>

#include "odlc/core/errors.hpp"
#include "odlc/util/files.hpp"
#include "odlc/util/log.hpp"

namespace odlc::archive {

namespace {

bool record_matches(const HistoricalQuery& q, const ObservabilityRecord& r) {
  const auto ts = r.source_timestamp_ms();
  if (q.start && ts < *q.start) return false;
  if (q.end && ts >= *q.end) return false;
  if (q.devices && !q.devices->contains(r.device_id())) return false;
  if (q.selector && r.domain() == Domain::Metric && !q.selector->matches(r.metric())) return false;
  return true;
}

}  // namespace

ArchiveCatalog::ArchiveCatalog(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_ / "segments");
  const auto path = root_ / "catalog.json";
  if (!std::filesystem::exists(path)) return;
  try {
    const auto j = nlohmann::json::parse(files::read_file(path));
    for (const auto& e : j.at("segments")) {
      entries_.push_back(Entry{e.at("file").get<std::string>(), manifest_from_text(e.at("manifest").dump())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError("corrupt archive catalog " + path.string() + ": " + e.what());
  }
}

void ArchiveCatalog::save_locked() const {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& e : entries_) {
    segs.push_back({{"file", e.file}, {"manifest", nlohmann::json::parse(manifest_to_text(e.manifest))}});
  }
  files::write_file_atomic(root_ / "catalog.json", nlohmann::json{{"segments", segs}}.dump(1));
}

ImportResult ArchiveCatalog::import_segment(const std::filesystem::path& file) {
  const auto bytes = files::read_file(file);
  const auto seg = decode_segment_file(bytes);
  std::unique_lock lock(mu_);
  for (const auto& e : entries_) {
    if (e.manifest == seg.manifest) return ImportResult{ImportStatus::Duplicate, e.manifest, root_ / e.file};
  }
  const auto dest = files::unique_path(root_ / "segments", segment_stem(seg.manifest), ".seg");
  files::write_file_atomic(dest, bytes);
  entries_.push_back(Entry{std::filesystem::relative(dest, root_).string(), seg.manifest});
  save_locked();
  return ImportResult{ImportStatus::Imported, seg.manifest, dest};
}

std::vector<ImportResult> ArchiveCatalog::import_dir(const std::filesystem::path& dir, std::vector<ImportFailure>* errors) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename().string().find(".seg") != std::string::npos &&
        !e.path().string().ends_with(".tmp"))
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ImportResult> out;
  for (const auto& f : files) {
    try {
      out.push_back(import_segment(f));
    } catch (const Error& e) {
      log::warn("import of {} failed: {}", f.string(), e.what());
      if (errors) errors->push_back(ImportFailure{f, e.code(), e.what()});
    }
  }
  return out;
}

void ArchiveCatalog::scan(const HistoricalQuery& q, const std::function<void(const ObservabilityRecord&)>& fn,
                          QueryStats* stats) const {
  std::vector<Entry> entries;
  {
    std::shared_lock lock(mu_);
    entries = entries_;
  }
  QueryStats local;
  for (const auto& e : entries) {
    if (e.manifest.domain != q.domain) continue;
    ++local.segments_considered;
    const auto start = q.start.value_or(std::numeric_limits<std::int64_t>::min());
    const auto end = q.end.value_or(std::numeric_limits<std::int64_t>::max());
    bool device_hit = !q.devices;
    if (q.devices) {
      for (const auto& d : *q.devices) device_hit = device_hit || e.manifest.devices.contains(d);
    }
    if (!e.manifest.intersects(start, end) || !device_hit) {
      ++local.segments_pruned;
      continue;
    }
    ++local.segments_decompressed;
    const auto seg = decode_segment_file(files::read_file(root_ / e.file));
    for (const auto& r : segment_records(seg)) {
      if (!record_matches(q, r)) continue;
      ++local.records_returned;
      fn(r);
    }
  }
  if (stats) *stats = local;
}

std::vector<ObservabilityRecord> ArchiveCatalog::historical_query(const HistoricalQuery& q, QueryStats* stats) const {
  std::vector<ObservabilityRecord> out;
  scan(q, [&](const ObservabilityRecord& r) { out.push_back(r); }, stats);
  return out;
}

std::vector<SegmentManifest> ArchiveCatalog::manifests() const {
  std::shared_lock lock(mu_);
  std::vector<SegmentManifest> out;
  for (const auto& e : entries_) out.push_back(e.manifest);
  return out;
}

std::size_t ArchiveCatalog::segment_count() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

std::uint64_t ArchiveCatalog::record_count(Domain d) const {
  std::shared_lock lock(mu_);
  std::uint64_t n = 0;
  for (const auto& e : entries_) n += e.manifest.domain == d ? e.manifest.record_count : 0;
  return n;
}

}  // namespace odlc::archive
