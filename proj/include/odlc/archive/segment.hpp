#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "odlc/core/record.hpp"

namespace odlc::archive {

inline constexpr std::string_view kCodec = "zlib";

struct SegmentManifest {
  Domain domain = Domain::Metric;
  std::set<std::string> devices;
  std::int64_t min_ts = 0;  // ms, inclusive
  std::int64_t max_ts = 0;  // ms, inclusive
  std::uint64_t record_count = 0;
  std::uint64_t checksum = 0;  // hash64 of the decompressed body
  std::string codec{kCodec};
  std::uint64_t body_bytes = 0;  // decompressed

  bool intersects(std::int64_t start, std::int64_t end) const noexcept {
    return min_ts < end && max_ts >= start;
  }
  friend bool operator==(const SegmentManifest&, const SegmentManifest&) = default;
};

// A decompressed segment: newline-delimited wire lines of one domain.
struct ArchiveSegment {
  SegmentManifest manifest;
  std::string body;
};

// Throws InvalidRecord when the records are empty or span several domains.
ArchiveSegment make_segment(const std::vector<ObservabilityRecord>& records);

// "ODLCSEG1" | u32 manifest length | manifest | u64 compressed length |
// compressed body | u64 record count | u64 checksum | "ODLCEND1"
std::string encode_segment_file(const ArchiveSegment& seg);
// Verifies count and checksum; throws ChecksumMismatch or DecodeError.
ArchiveSegment decode_segment_file(std::string_view bytes);
// Reads only the manifest. Throws DecodeError.
SegmentManifest read_manifest(std::string_view bytes);
SegmentManifest read_manifest_file(const std::filesystem::path& path);

std::vector<ObservabilityRecord> segment_records(const ArchiveSegment& seg);

// `<domain>-<min_ts>-<max_ts>`.
std::string segment_stem(const SegmentManifest& m);

std::string manifest_to_text(const SegmentManifest& m);
SegmentManifest manifest_from_text(std::string_view text);

}  // namespace odlc::archive
