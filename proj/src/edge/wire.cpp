#include "odlc/edge/wire.hpp"

#include "odlc/core/errors.hpp"

namespace odlc::wire {

void put_u32(std::string& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xFF));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(in[at + i]);
  return v;
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v = (v << 8) | static_cast<unsigned char>(in[at + i]);
  return v;
}

void check_device_id(std::string_view device_id) {
  if (device_id.empty() || device_id.size() > kDeviceIdBytes)
    throw MalformedFrame("device id must be 1.." + std::to_string(kDeviceIdBytes) + " bytes");
  if (device_id.find('\0') != std::string_view::npos)
    throw MalformedFrame("device id must not contain NUL");
}

namespace {

void put_header(std::string& out, FrameKind kind, std::string_view device_id, Domain domain,
                std::uint64_t seq, std::uint32_t count) {
  check_device_id(device_id);
  out.push_back(static_cast<char>(kVersion));
  out.push_back(static_cast<char>(kind));
  out.append(device_id);
  out.append(kDeviceIdBytes - device_id.size(), '\0');
  out.push_back(static_cast<char>(domain));
  put_u64(out, seq);
  put_u32(out, count);
}

void patch_length(std::string& frame) {
  const auto len = static_cast<std::uint32_t>(frame.size() - kLengthPrefixBytes);
  for (int i = 0; i < 4; ++i) frame[static_cast<std::size_t>(i)] = static_cast<char>((len >> (24 - 8 * i)) & 0xFF);
}

}  // namespace

std::string encode_data_frame(std::string_view device_id, Domain domain, std::uint64_t batch_seq,
                              std::span<const ObservabilityRecord> records) {
  std::size_t body = 0;
  for (const auto& r : records) body += r.encoded_size();
  std::string frame;
  frame.reserve(kFrameOverheadBytes + body);
  frame.append(kLengthPrefixBytes, '\0');
  put_header(frame, FrameKind::Data, device_id, domain, batch_seq,
             static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    if (r.domain() != domain) throw MalformedFrame("record domain differs from batch domain");
    frame.append(r.wire_line());
  }
  patch_length(frame);
  return frame;
}

std::string encode_ack_frame(std::string_view device_id, Domain domain, std::uint64_t batch_seq,
                             std::uint32_t accepted) {
  std::string frame;
  frame.reserve(kFrameOverheadBytes);
  frame.append(kLengthPrefixBytes, '\0');
  put_header(frame, FrameKind::Ack, device_id, domain, batch_seq, accepted);
  patch_length(frame);
  return frame;
}

FrameHeader decode_header(std::string_view frame) {
  if (frame.size() < kFrameOverheadBytes) throw MalformedFrame("frame shorter than header");
  const std::uint32_t len = get_u32(frame, 0);
  if (len != frame.size() - kLengthPrefixBytes) throw MalformedFrame("length prefix mismatch");
  std::size_t at = kLengthPrefixBytes;
  if (static_cast<std::uint8_t>(frame[at]) != kVersion) throw MalformedFrame("unsupported version");
  ++at;
  const auto kind = static_cast<std::uint8_t>(frame[at++]);
  if (kind != 0x01 && kind != 0x02) throw MalformedFrame("unknown frame kind");
  FrameHeader h;
  h.kind = static_cast<FrameKind>(kind);
  std::string_view dev = frame.substr(at, kDeviceIdBytes);
  at += kDeviceIdBytes;
  auto nul = dev.find('\0');
  if (nul != std::string_view::npos) {
    if (dev.find_first_not_of('\0', nul) != std::string_view::npos)
      throw MalformedFrame("device id padding is not zero");
    dev = dev.substr(0, nul);
  }
  if (dev.empty()) throw MalformedFrame("empty device id");
  h.device_id = std::string(dev);
  const auto tag = static_cast<std::uint8_t>(frame[at++]);
  if (tag < 0x01 || tag > 0x03) throw MalformedFrame("unknown domain tag");
  h.domain = static_cast<Domain>(tag);
  h.batch_seq = get_u64(frame, at);
  at += 8;
  h.count = get_u32(frame, at);
  return h;
}

DataFrame decode_data_frame(std::string_view frame) {
  DataFrame out;
  out.header = decode_header(frame);
  if (out.header.kind != FrameKind::Data) throw MalformedFrame("expected a data frame");
  std::string_view body = frame.substr(kFrameOverheadBytes);
  out.record_lines.reserve(out.header.count);
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t nl = body.find('\n', pos);
    if (nl == std::string_view::npos) throw MalformedFrame("record not newline-terminated");
    out.record_lines.push_back(body.substr(pos, nl - pos + 1));
    pos = nl + 1;
  }
  if (out.record_lines.size() != out.header.count)
    throw MalformedFrame("record count " + std::to_string(out.record_lines.size()) +
                         " differs from header count " + std::to_string(out.header.count));
  return out;
}

FrameHeader decode_ack_frame(std::string_view frame) {
  FrameHeader h = decode_header(frame);
  if (h.kind != FrameKind::Ack) throw MalformedFrame("expected an ack frame");
  if (frame.size() != kFrameOverheadBytes) throw MalformedFrame("ack frame carries a body");
  return h;
}

std::optional<std::string> FrameReader::next() {
  if (buffer_.size() < kLengthPrefixBytes) return std::nullopt;
  const std::uint32_t len = get_u32(buffer_, 0);
  if (len < kHeaderBytes || len > kMaxPayloadBytes) throw MalformedFrame("frame length out of bounds");
  const std::size_t total = kLengthPrefixBytes + len;
  if (buffer_.size() < total) return std::nullopt;
  std::string frame = buffer_.substr(0, total);
  buffer_.erase(0, total);
  return frame;
}

}  // namespace odlc::wire
