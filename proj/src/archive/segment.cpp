#include "odlc/archive/segment.hpp"

#include <zlib.h>

#include <fstream>

#include <json.hpp>

#include "odlc/core/errors.hpp"
#include "odlc/core/hash.hpp"
#include "odlc/util/bytes.hpp"
#include "odlc/util/files.hpp"

namespace odlc::archive {

namespace {

constexpr std::string_view kMagic = "ODLCSEG1";
constexpr std::string_view kEnd = "ODLCEND1";

std::string compress(std::string_view in) {
  uLongf cap = compressBound(static_cast<uLong>(in.size()));
  std::string out(cap, '\0');
  const int rc = compress2(reinterpret_cast<Bytef*>(out.data()), &cap, reinterpret_cast<const Bytef*>(in.data()),
                           static_cast<uLong>(in.size()), 6);
  if (rc != Z_OK) throw IoError("segment compression failed");
  out.resize(cap);
  return out;
}

std::string decompress(std::string_view in, std::uint64_t expected) {
  std::string out(expected, '\0');
  uLongf len = static_cast<uLongf>(expected);
  const int rc = uncompress(reinterpret_cast<Bytef*>(out.data()), &len, reinterpret_cast<const Bytef*>(in.data()),
                            static_cast<uLong>(in.size()));
  if (rc != Z_OK || len != expected) throw ChecksumMismatch("segment body does not decompress to the declared size");
  return out;
}

}  // namespace

std::string manifest_to_text(const SegmentManifest& m) {
  nlohmann::ordered_json j;
  j["domain"] = domain_name(m.domain);
  j["devices"] = m.devices;
  j["min_ts"] = m.min_ts;
  j["max_ts"] = m.max_ts;
  j["count"] = m.record_count;
  j["checksum"] = to_hex64(m.checksum);
  j["codec"] = m.codec;
  j["body_bytes"] = m.body_bytes;
  return j.dump();
}

SegmentManifest manifest_from_text(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    SegmentManifest m;
    m.domain = parse_domain(j.at("domain").get<std::string>());
    m.devices = j.at("devices").get<std::set<std::string>>();
    m.min_ts = j.at("min_ts").get<std::int64_t>();
    m.max_ts = j.at("max_ts").get<std::int64_t>();
    m.record_count = j.at("count").get<std::uint64_t>();
    m.checksum = parse_hex64(j.at("checksum").get<std::string>());
    m.codec = j.at("codec").get<std::string>();
    m.body_bytes = j.at("body_bytes").get<std::uint64_t>();
    if (m.codec != kCodec) throw DecodeError("unsupported segment codec '" + m.codec + "'");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("bad segment manifest: ") + e.what());
  }
}

ArchiveSegment make_segment(const std::vector<ObservabilityRecord>& records) {
  if (records.empty()) throw InvalidRecord("a segment needs at least one record");
  ArchiveSegment seg;
  auto& m = seg.manifest;
  m.domain = records.front().domain();
  m.min_ts = m.max_ts = records.front().source_timestamp_ms();
  for (const auto& r : records) {
    if (r.domain() != m.domain) throw InvalidRecord("segment records must share one domain");
    m.devices.insert(r.device_id());
    m.min_ts = std::min(m.min_ts, r.source_timestamp_ms());
    m.max_ts = std::max(m.max_ts, r.source_timestamp_ms());
    seg.body.append(r.wire_line());
  }
  m.record_count = records.size();
  m.body_bytes = seg.body.size();
  m.checksum = hash64(seg.body);
  return seg;
}

std::string encode_segment_file(const ArchiveSegment& seg) {
  const auto manifest = manifest_to_text(seg.manifest);
  const auto body = compress(seg.body);
  std::string out(kMagic);
  bytes::put_u32(out, static_cast<std::uint32_t>(manifest.size()));
  out.append(manifest);
  bytes::put_u64(out, body.size());
  out.append(body);
  bytes::put_u64(out, seg.manifest.record_count);
  bytes::put_u64(out, seg.manifest.checksum);
  out.append(kEnd);
  return out;
}

SegmentManifest read_manifest(std::string_view in) {
  if (in.substr(0, kMagic.size()) != kMagic) throw DecodeError("not a segment file");
  bytes::Reader r(in, kMagic.size());
  return manifest_from_text(r.str());
}

SegmentManifest read_manifest_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::string head(kMagic.size() + 4, '\0');
  f.read(head.data(), static_cast<std::streamsize>(head.size()));
  if (!f) throw DecodeError("truncated segment " + path.string());
  bytes::Reader r(head, kMagic.size());
  const auto len = r.u32();
  if (len > (1u << 26)) throw DecodeError("oversized segment manifest");
  std::string manifest(len, '\0');
  f.read(manifest.data(), len);
  if (!f) throw DecodeError("truncated segment " + path.string());
  return read_manifest(head + manifest);
}

ArchiveSegment decode_segment_file(std::string_view in) {
  ArchiveSegment seg;
  seg.manifest = read_manifest(in);
  bytes::Reader r(in, kMagic.size());
  r.str();
  const auto body = r.take(r.u64());
  const auto count = r.u64();
  const auto checksum = r.u64();
  if (r.take(kEnd.size()) != kEnd || r.remaining() != 0) throw DecodeError("bad segment footer");
  if (count != seg.manifest.record_count || checksum != seg.manifest.checksum)
    throw ChecksumMismatch("segment footer disagrees with its manifest");
  seg.body = decompress(body, seg.manifest.body_bytes);
  if (hash64(seg.body) != seg.manifest.checksum) throw ChecksumMismatch("segment checksum mismatch");
  std::uint64_t lines = 0;
  for (char c : seg.body) lines += c == '\n' ? 1 : 0;
  if (lines != seg.manifest.record_count) throw ChecksumMismatch("segment record count mismatch");
  return seg;
}

std::vector<ObservabilityRecord> segment_records(const ArchiveSegment& seg) {
  std::vector<ObservabilityRecord> out;
  out.reserve(seg.manifest.record_count);
  std::string_view body(seg.body);
  while (!body.empty()) {
    const auto nl = body.find('\n');
    const auto line = body.substr(0, nl == std::string_view::npos ? body.size() : nl + 1);
    out.push_back(ObservabilityRecord::decode(seg.manifest.domain, line));
    body.remove_prefix(line.size());
  }
  return out;
}

std::string segment_stem(const SegmentManifest& m) {
  return std::string(domain_name(m.domain)) + "-" + std::to_string(m.min_ts) + "-" + std::to_string(m.max_ts);
}

}  // namespace odlc::archive
