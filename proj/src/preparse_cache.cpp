#include "bboost/preparse_cache.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <vector>

#if defined(__x86_64__)
#include <nmmintrin.h>
#endif

namespace bboost {

namespace {

constexpr std::size_t kHeaderSize = 8 + 2 + 32 + 8;
constexpr std::size_t kTrailerSize = 4;

class Writer {
 public:
  explicit Writer(Bytes& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
  void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(le(8)); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::string_view str() {
    const auto n = u32();
    need(n);
    std::string_view s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) {
    if (in_.size() - pos_ < n) {
      throw CacheError(CacheErrorKind::Corrupt, "truncated payload");
    }
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(&v, in_.data() + pos_, static_cast<std::size_t>(n));
    } else {
      for (int i = 0; i < n; ++i) v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

// CRC-32C (Castagnoli). The SSE4.2 instruction computes it directly; the
// table is the fallback for other CPUs.
constexpr std::uint32_t kCrcPoly = 0x82F63B78u;

constexpr std::array<std::uint32_t, 256> crc_table() {
  std::array<std::uint32_t, 256> t{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c >> 1) ^ (c & 1 ? kCrcPoly : 0);
    t[i] = c;
  }
  return t;
}

std::uint32_t crc_soft(std::uint32_t crc, const std::uint8_t* p, std::size_t n) {
  static constexpr auto table = crc_table();
  while (n--) crc = (crc >> 8) ^ table[(crc ^ *p++) & 0xFF];
  return crc;
}

#if defined(__x86_64__)
__attribute__((target("sse4.2")))
std::uint32_t crc_hw(std::uint32_t crc, const std::uint8_t* p, std::size_t n) {
  std::uint64_t c = crc;
  for (; n >= 8; n -= 8, p += 8) {
    std::uint64_t v;
    std::memcpy(&v, p, 8);
    c = _mm_crc32_u64(c, v);
  }
  crc = static_cast<std::uint32_t>(c);
  for (; n; --n) crc = _mm_crc32_u8(crc, *p++);
  return crc;
}
#endif

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  std::uint32_t crc = ~0u;
#if defined(__x86_64__)
  static const bool hw = __builtin_cpu_supports("sse4.2");
  if (hw) return ~crc_hw(crc, bytes.data(), bytes.size());
#endif
  return ~crc_soft(crc, bytes.data(), bytes.size());
}

std::uint8_t checked_enum(std::uint8_t v, std::uint8_t max) {
  if (v > max) throw CacheError(CacheErrorKind::Corrupt, "enum out of range");
  return v;
}

// Payload layout: a sorted name table first, then units and deps refer to
// names by index so each name is validated once on load.
void encode_payload(const UnitSet& set, Bytes& out) {
  std::vector<const UnitName*> names;
  for (const auto& [name, u] : set.units) {
    names.push_back(&name);
    for (const auto& d : u.deps) names.push_back(&d.target);
  }
  for (const auto& name : set.dangling) names.push_back(&name);
  std::sort(names.begin(), names.end(), [](auto a, auto b) { return *a < *b; });
  names.erase(std::unique(names.begin(), names.end(), [](auto a, auto b) { return *a == *b; }),
              names.end());
  auto index = [&](const UnitName& n) {
    return static_cast<std::uint32_t>(
        std::lower_bound(names.begin(), names.end(), &n, [](auto a, auto b) { return *a < *b; }) -
        names.begin());
  };

  Writer w(out);
  w.u32(static_cast<std::uint32_t>(names.size()));
  for (const auto* n : names) w.str(n->str());
  w.u32(static_cast<std::uint32_t>(set.units.size()));
  for (const auto& [name, u] : set.units) {
    w.u32(index(name));
    w.str(u.description);
    w.str(u.exec_start);
    w.u8(static_cast<std::uint8_t>(u.service_type));
    w.i64(u.exec_duration.count());
    w.u8(u.fork_point ? 1 : 0);
    w.i64(u.fork_point ? u.fork_point->count() : 0);
    w.u8(u.deferred ? 1 : 0);
    w.u8(u.boot_critical_hint ? 1 : 0);
    w.i32(u.priority);
    w.u32(static_cast<std::uint32_t>(u.deps.size()));
    for (const auto& d : u.deps) {
      w.u8(static_cast<std::uint8_t>(d.kind));
      w.u32(index(d.target));
    }
  }
  w.u32(static_cast<std::uint32_t>(set.dangling.size()));
  for (const auto& name : set.dangling) w.u32(index(name));
}

void decode_payload(std::span<const std::uint8_t> payload, UnitSet& set) {
  Reader r(payload);
  struct Entry {
    std::string_view text;
    UnitKind kind;
  };
  // Reused across calls; a fresh large block per load costs a heap consolidation.
  thread_local std::vector<Entry> names;
  names.clear();
  const auto nnames = r.u32();
  for (std::uint32_t i = 0; i < nnames; ++i) {
    const auto text = r.str();
    const auto kind = UnitName::classify(text);
    if (!kind) throw CacheError(CacheErrorKind::Corrupt, "invalid unit name");
    if (!names.empty() && !(names.back().text < text)) {
      throw CacheError(CacheErrorKind::Corrupt, "name table out of order");
    }
    names.push_back({text, *kind});
  }
  auto name_at = [&](std::uint32_t i) {
    if (i >= names.size()) throw CacheError(CacheErrorKind::Corrupt, "name index out of range");
    return UnitName::classified(names[i].text, names[i].kind);
  };

  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto self = r.u32();
    UnitFile u(name_at(self));
    u.description = std::string(r.str());
    u.exec_start = std::string(r.str());
    u.service_type = static_cast<ServiceType>(checked_enum(r.u8(), 2));
    u.exec_duration = Duration{r.i64()};
    const bool has_fork = checked_enum(r.u8(), 1) != 0;
    const auto fork = r.i64();
    if (has_fork) u.fork_point = Duration{fork};
    u.deferred = checked_enum(r.u8(), 1) != 0;
    u.boot_critical_hint = checked_enum(r.u8(), 1) != 0;
    u.priority = r.i32();
    const auto ndeps = r.u32();
    u.deps.reserve(std::min<std::uint32_t>(ndeps, 4096));
    for (std::uint32_t k = 0; k < ndeps; ++k) {
      const auto kind = static_cast<DependencyKind>(checked_enum(r.u8(), 4));
      u.deps.push_back({kind, name_at(r.u32())});
    }
    if (!set.units.empty() && !(std::prev(set.units.end())->first < u.name)) {
      throw CacheError(CacheErrorKind::Corrupt, "unit names out of order");
    }
    set.units.emplace_hint(set.units.end(), name_at(self), std::move(u));
  }
  const auto ndangling = r.u32();
  for (std::uint32_t i = 0; i < ndangling; ++i) {
    set.dangling.emplace_hint(set.dangling.end(), name_at(r.u32()));
  }
  if (!r.done()) throw CacheError(CacheErrorKind::Corrupt, "trailing payload bytes");
}

struct Header {
  Digest digest;
  std::span<const std::uint8_t> payload;
};

Header check_frame(std::span<const std::uint8_t> image) {
  if (image.size() < kCacheMagic.size() ||
      std::memcmp(image.data(), kCacheMagic.data(), kCacheMagic.size()) != 0) {
    throw CacheError(CacheErrorKind::BadMagic, "not a pre-parse cache image");
  }
  if (image.size() < kHeaderSize + kTrailerSize) {
    throw CacheError(CacheErrorKind::Corrupt, "truncated header");
  }
  Reader head(image.subspan(8, kHeaderSize - 8));
  if (const auto version = head.u16(); version != kCacheVersion) {
    throw CacheError(CacheErrorKind::VersionMismatch,
                     "cache version " + std::to_string(version) + ", expected " +
                         std::to_string(kCacheVersion));
  }
  Header h{};
  std::memcpy(h.digest.data(), image.data() + 10, h.digest.size());
  Reader len(image.subspan(42, 8));
  const auto n = len.u64();
  if (n != image.size() - kHeaderSize - kTrailerSize) {
    throw CacheError(CacheErrorKind::Corrupt, "payload length mismatch");
  }
  h.payload = image.subspan(kHeaderSize, n);
  Reader trailer(image.subspan(kHeaderSize + n));
  if (trailer.u32() != crc_of(h.payload)) {
    throw CacheError(CacheErrorKind::Corrupt, "payload checksum mismatch");
  }
  return h;
}

}  // namespace

std::string_view to_string(CacheErrorKind kind) {
  switch (kind) {
    case CacheErrorKind::BadMagic: return "BadMagic";
    case CacheErrorKind::VersionMismatch: return "VersionMismatch";
    case CacheErrorKind::Corrupt: return "Corrupt";
  }
  return "?";
}

CacheError::CacheError(CacheErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
      kind_(kind) {}

Bytes encode_cache(const UnitSet& set) {
  Bytes payload;
  encode_payload(set, payload);

  Bytes out;
  out.reserve(kHeaderSize + payload.size() + kTrailerSize);
  out.insert(out.end(), kCacheMagic.begin(), kCacheMagic.end());
  Writer w(out);
  w.u16(kCacheVersion);
  out.insert(out.end(), set.source_digest.begin(), set.source_digest.end());
  w.u64(payload.size());
  out.insert(out.end(), payload.begin(), payload.end());
  w.u32(crc_of(payload));
  return out;
}

UnitSet decode_cache(std::span<const std::uint8_t> image) {
  const auto header = check_frame(image);
  UnitSet set;
  set.source_digest = header.digest;
  decode_payload(header.payload, set);
  return set;
}

bool cache_valid(std::span<const std::uint8_t> image,
                 const Digest& current_digest) {
  try {
    auto set = decode_cache(image);
    return set.source_digest == current_digest;
  } catch (const CacheError&) {
    return false;
  }
}

CacheLayout cache_layout(std::span<const std::uint8_t> image) {
  const auto h = check_frame(image);
  return {kHeaderSize, h.payload.size()};
}

}  // namespace bboost
