#include "odlc/core/hash.hpp"

#include <array>

#include "odlc/core/errors.hpp"

namespace odlc {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t hash64(std::string_view bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = kFnvOffset ^ mix(seed);
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return mix(h ^ bytes.size());
}

Hash128 hash128(std::string_view bytes) noexcept {
  return Hash128{hash64(bytes, 0x6f646c632d6869ULL), hash64(bytes, 0x6f646c632d6c6fULL)};
}

std::string Hash128::hex() const { return to_hex64(hi) + to_hex64(lo); }

std::string to_hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    v >>= 4;
  }
  return out;
}

std::uint64_t parse_hex64(std::string_view hex) {
  if (hex.size() != 16) throw DecodeError("expected 16 hex digits, got '" + std::string(hex) + "'");
  std::uint64_t v = 0;
  for (char c : hex) {
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
    else throw DecodeError("bad hex digit in '" + std::string(hex) + "'");
    v = (v << 4) | static_cast<std::uint64_t>(d);
  }
  return v;
}

}  // namespace odlc
