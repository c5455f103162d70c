#pragma once

// Edge -> fog framing. Every frame is a 4-byte big-endian payload length
// followed by the payload:
//
//   u8  version (0x01)
//   u8  kind (0x01 data, 0x02 ack)
//   16  device id, UTF-8, zero-padded
//   u8  domain tag (0x01 metric, 0x02 log, 0x03 trace)
//   u64 batch_seq, big-endian
//   u32 record count (data) or accepted count (ack), big-endian
//   data frames only: `count` newline-terminated structured-text records

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "odlc/core/record.hpp"

namespace odlc::wire {

inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kDeviceIdBytes = 16;
inline constexpr std::size_t kLengthPrefixBytes = 4;
inline constexpr std::size_t kHeaderBytes = 1 + 1 + kDeviceIdBytes + 1 + 8 + 4;
inline constexpr std::size_t kFrameOverheadBytes = kLengthPrefixBytes + kHeaderBytes;
inline constexpr std::size_t kMaxPayloadBytes = 64u << 20;

enum class FrameKind : std::uint8_t { Data = 0x01, Ack = 0x02 };

struct FrameHeader {
  FrameKind kind = FrameKind::Data;
  std::string device_id;
  Domain domain = Domain::Metric;
  std::uint64_t batch_seq = 0;
  std::uint32_t count = 0;
};

struct DataFrame {
  FrameHeader header;
  std::vector<std::string_view> record_lines;  // views into the frame buffer
};

// Throws MalformedFrame for device ids that do not fit.
void check_device_id(std::string_view device_id);

std::string encode_data_frame(std::string_view device_id, Domain domain, std::uint64_t batch_seq,
                              std::span<const ObservabilityRecord> records);
std::string encode_ack_frame(std::string_view device_id, Domain domain, std::uint64_t batch_seq,
                             std::uint32_t accepted);

// `frame` includes the length prefix. Throws MalformedFrame.
FrameHeader decode_header(std::string_view frame);
DataFrame decode_data_frame(std::string_view frame);
FrameHeader decode_ack_frame(std::string_view frame);

// Incremental reassembly from a byte stream.
class FrameReader {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }
  // Next complete frame (with length prefix), if buffered. Throws MalformedFrame
  // when the announced length is out of bounds.
  std::optional<std::string> next();
  std::size_t buffered() const noexcept { return buffer_.size(); }

 private:
  std::string buffer_;
};

void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
std::uint32_t get_u32(std::string_view in, std::size_t at);
std::uint64_t get_u64(std::string_view in, std::size_t at);

}  // namespace odlc::wire
