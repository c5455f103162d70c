#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace odlc::bytes {

void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_varint(std::string& out, std::uint64_t v);
void put_str(std::string& out, std::string_view s);  // u32 length + bytes

constexpr std::uint64_t zigzag(std::int64_t v) noexcept {
  return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}
constexpr std::int64_t unzigzag(std::uint64_t v) noexcept {
  return static_cast<std::int64_t>(v >> 1) ^ -static_cast<std::int64_t>(v & 1);
}

// Big-endian cursor; every read past the end throws DecodeError.
class Reader {
 public:
  explicit Reader(std::string_view in, std::size_t pos = 0) : in_(in), pos_(pos) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::uint64_t varint();
  std::string_view take(std::size_t n);
  std::string_view str();

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  std::string_view in_;
  std::size_t pos_;
};

}  // namespace odlc::bytes
