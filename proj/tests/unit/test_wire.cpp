#include <gtest/gtest.h>

#include <random>

#include "odlc/core/errors.hpp"
#include "odlc/edge/wire.hpp"
#include "test_util.hpp"

namespace odlc::wire {
namespace {

std::vector<ObservabilityRecord> sample_records(int n) {
  std::vector<ObservabilityRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(test::metric("m", i, 1000 + i, "edge-07"));
  return out;
}

TEST(WireTest, DataFrameLayout) {
  const auto recs = sample_records(3);
  const auto frame = encode_data_frame("edge-07", Domain::Metric, 0x0102030405060708ULL, recs);
  std::size_t body = 0;
  for (const auto& r : recs) body += r.encoded_size();
  ASSERT_EQ(frame.size(), kFrameOverheadBytes + body);
  EXPECT_EQ(get_u32(frame, 0), frame.size() - kLengthPrefixBytes);
  EXPECT_EQ(static_cast<std::uint8_t>(frame[4]), kVersion);
  EXPECT_EQ(static_cast<std::uint8_t>(frame[5]), 0x01);
  EXPECT_EQ(frame.substr(6, 7), "edge-07");
  EXPECT_EQ(frame[13], '\0');
  EXPECT_EQ(static_cast<std::uint8_t>(frame[22]), 0x01);
  EXPECT_EQ(static_cast<std::uint8_t>(frame[23]), 0x01);
  EXPECT_EQ(static_cast<std::uint8_t>(frame[30]), 0x08);
  EXPECT_EQ(get_u32(frame, 31), 3u);

  const auto df = decode_data_frame(frame);
  EXPECT_EQ(df.header.device_id, "edge-07");
  EXPECT_EQ(df.header.batch_seq, 0x0102030405060708ULL);
  ASSERT_EQ(df.record_lines.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(df.record_lines[i], recs[i].wire_line());
}

TEST(WireTest, AckFrame) {
  const auto ack = encode_ack_frame("dev", Domain::Trace, 9, 41);
  EXPECT_EQ(ack.size(), kFrameOverheadBytes);
  const auto h = decode_ack_frame(ack);
  EXPECT_EQ(h.kind, FrameKind::Ack);
  EXPECT_EQ(h.domain, Domain::Trace);
  EXPECT_EQ(h.batch_seq, 9u);
  EXPECT_EQ(h.count, 41u);
  EXPECT_THROW(decode_data_frame(ack), MalformedFrame);
}

TEST(WireTest, MalformedFrames) {
  const auto good = encode_data_frame("d", Domain::Log, 1, std::vector<ObservabilityRecord>{test::log_line("x", 1)});
  auto bad_version = good;
  bad_version[4] = 0x07;
  EXPECT_THROW(decode_data_frame(bad_version), MalformedFrame);
  auto bad_domain = good;
  bad_domain[22] = 0x09;
  EXPECT_THROW(decode_data_frame(bad_domain), MalformedFrame);
  auto bad_count = good;
  bad_count[34] = 0x02;
  EXPECT_THROW(decode_data_frame(bad_count), MalformedFrame);
  EXPECT_THROW(decode_data_frame(good.substr(0, 20)), MalformedFrame);
  EXPECT_THROW(check_device_id("this-device-id-is-far-too-long"), MalformedFrame);
  EXPECT_THROW(check_device_id(""), MalformedFrame);
}

TEST(WireTest, ReaderReassemblesArbitraryFragments) {
  std::string stream;
  std::vector<std::string> frames;
  for (int i = 0; i < 20; ++i) {
    frames.push_back(encode_data_frame("d", Domain::Metric, static_cast<std::uint64_t>(i + 1), sample_records(i % 4 + 1)));
    stream += frames.back();
  }
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    FrameReader reader;
    std::vector<std::string> got;
    std::size_t pos = 0;
    while (pos < stream.size()) {
      const std::size_t n = std::min<std::size_t>(stream.size() - pos, 1 + rng() % 97);
      reader.feed(std::string_view(stream).substr(pos, n));
      pos += n;
      while (auto f = reader.next()) got.push_back(*f);
    }
    EXPECT_EQ(got, frames);
    EXPECT_EQ(reader.buffered(), 0u);
  }
}

TEST(WireTest, ReaderRejectsOversizedLength) {
  FrameReader reader;
  std::string prefix;
  put_u32(prefix, static_cast<std::uint32_t>(kMaxPayloadBytes + 1));
  reader.feed(prefix);
  EXPECT_THROW(reader.next(), MalformedFrame);
  FrameReader tiny;
  std::string short_len;
  put_u32(short_len, 3);
  tiny.feed(short_len);
  EXPECT_THROW(tiny.next(), MalformedFrame);
}

}  // namespace
}  // namespace odlc::wire
