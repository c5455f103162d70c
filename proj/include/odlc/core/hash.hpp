#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace odlc {

// FNV-1a 64 over the bytes, finalized with the splitmix64 mixer. Stable across
// platforms and runs; used for series ids, segment checksums and dedup keys.
std::uint64_t hash64(std::string_view bytes, std::uint64_t seed = 0) noexcept;

struct Hash128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  friend bool operator==(const Hash128&, const Hash128&) = default;
  friend auto operator<=>(const Hash128&, const Hash128&) = default;

  std::string hex() const;
};

Hash128 hash128(std::string_view bytes) noexcept;

std::string to_hex64(std::uint64_t v);
// Throws DecodeError on anything but exactly 16 hex digits.
std::uint64_t parse_hex64(std::string_view hex);

}  // namespace odlc
