#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "bboost/unit_model.hpp"

namespace bboost {

// Binary image of a parsed UnitSet:
//
//   offset  size  field
//   0       8     magic "BBPPCACH"
//   8       2     format version (u16 LE)
//   10      32    source digest
//   42      8     payload length N (u64 LE)
//   50      N     payload
//   50+N    4     CRC-32 of the payload (u32 LE)
//
// The payload is little-endian fixed-width integers and u32-length-prefixed
// strings. Decoding never touches the text parser.
inline constexpr std::string_view kCacheMagic = "BBPPCACH";
inline constexpr std::uint16_t kCacheVersion = 2;

enum class CacheErrorKind : std::uint8_t { BadMagic, VersionMismatch, Corrupt };

std::string_view to_string(CacheErrorKind kind);

class CacheError : public std::runtime_error {
 public:
  CacheError(CacheErrorKind kind, const std::string& detail);
  CacheErrorKind kind() const { return kind_; }

 private:
  CacheErrorKind kind_;
};

using Bytes = std::vector<std::uint8_t>;

Bytes encode_cache(const UnitSet& set);

// Throws CacheError.
UnitSet decode_cache(std::span<const std::uint8_t> image);

// True iff the image decodes and was built from sources hashing to
// `current_digest`.
bool cache_valid(std::span<const std::uint8_t> image,
                 const Digest& current_digest);

// Byte offsets of the payload inside a well-formed image, for tests and
// tooling.
struct CacheLayout {
  std::size_t payload_offset;
  std::size_t payload_size;
};
CacheLayout cache_layout(std::span<const std::uint8_t> image);

}  // namespace bboost
