#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "odlc/archive/segment.hpp"
#include "odlc/fog/selector.hpp"

namespace odlc::archive {

enum class ImportStatus { Imported, Duplicate };

struct ImportResult {
  ImportStatus status = ImportStatus::Imported;
  SegmentManifest manifest;
  std::filesystem::path stored_path;
};

struct ImportFailure {
  std::filesystem::path file;
  std::string code;  // Error::code(), e.g. ChecksumMismatch
  std::string message;
};

struct HistoricalQuery {
  Domain domain = Domain::Metric;
  std::optional<std::int64_t> start;  // ms, inclusive
  std::optional<std::int64_t> end;    // ms, exclusive
  std::optional<fog::MetricSelector> selector;  // metrics only
  std::optional<std::set<std::string>> devices;
};

struct QueryStats {
  std::size_t segments_considered = 0;
  std::size_t segments_pruned = 0;
  std::size_t segments_decompressed = 0;
  std::uint64_t records_returned = 0;
};

// Segment catalog rooted at a directory: `catalog.json` plus the imported
// segment files under `segments/`.
class ArchiveCatalog {
 public:
  explicit ArchiveCatalog(std::filesystem::path root);

  // Verifies count and checksum before registering. Throws ChecksumMismatch
  // (the source file is left in place) or DecodeError. An identical segment
  // already in the catalog yields ImportStatus::Duplicate.
  ImportResult import_segment(const std::filesystem::path& file);
  // Every `*.seg` file in `dir`, in name order. Failures are logged and
  // collected in `errors` instead of aborting the batch.
  std::vector<ImportResult> import_dir(const std::filesystem::path& dir, std::vector<ImportFailure>* errors = nullptr);

  // Streams matching records segment by segment; segments whose
  // manifest misses the range are skipped without decompression.
  void scan(const HistoricalQuery& q, const std::function<void(const ObservabilityRecord&)>& fn,
            QueryStats* stats = nullptr) const;
  std::vector<ObservabilityRecord> historical_query(const HistoricalQuery& q, QueryStats* stats = nullptr) const;

  std::vector<SegmentManifest> manifests() const;
  std::size_t segment_count() const;
  std::uint64_t record_count(Domain d) const;

 private:
  struct Entry {
    std::string file;  // relative to root
    SegmentManifest manifest;
  };
  void save_locked() const;

  std::filesystem::path root_;
  mutable std::shared_mutex mu_;
  std::vector<Entry> entries_;
};

}  // namespace odlc::archive
