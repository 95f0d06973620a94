#include <gtest/gtest.h>

#include <random>

#include "bboost/fixtures.hpp"
#include "bboost/preparse_cache.hpp"
#include "bboost/unit_parser.hpp"
#include "helpers.hpp"

using namespace bboost;

namespace {

UnitSet myapp_set() {
  return parse_tree({{UnitName("Myapp.service"), testing_helpers::kMyapp}}).set;
}

void expect_same_fields(const UnitSet& a, const UnitSet& b) {
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, u] : a.units) {
    const auto* v = b.find(name);
    ASSERT_NE(v, nullptr) << name.str();
    EXPECT_EQ(u.description, v->description);
    EXPECT_EQ(u.exec_start, v->exec_start);
    EXPECT_EQ(u.deps, v->deps);
    EXPECT_EQ(u.service_type, v->service_type);
    EXPECT_EQ(u.exec_duration, v->exec_duration);
    EXPECT_EQ(u.fork_point, v->fork_point);
    EXPECT_EQ(u.deferred, v->deferred);
    EXPECT_EQ(u.boot_critical_hint, v->boot_critical_hint);
    EXPECT_EQ(u.priority, v->priority);
  }
  EXPECT_EQ(a.dangling, b.dangling);
  EXPECT_EQ(a.source_digest, b.source_digest);
}

}  // namespace

TEST(Cache, StartsWithMagic) {
  const auto img = encode_cache(myapp_set());
  ASSERT_GE(img.size(), 8u);
  EXPECT_EQ(std::string(img.begin(), img.begin() + 8), "BBPPCACH");
}

TEST(Cache, DefaultUnitDecodes) {
  UnitSet s;
  UnitFile u(UnitName("blank.service"));
  s.units.emplace(u.name, u);
  EXPECT_EQ(decode_cache(encode_cache(s)), s);
}

TEST(Cache, CorpusFieldwise) {
  const auto set = testing_helpers::load(fixtures::random_corpus(250, 3));
  expect_same_fields(set, decode_cache(encode_cache(set)));
}

TEST(Cache, FlippedPayloadByteIsCorrupt) {
  const auto img = encode_cache(myapp_set());
  const auto lay = cache_layout(img);
  auto bad = img;
  bad[lay.payload_offset + lay.payload_size / 2] ^= 0x20;
  try {
    decode_cache(bad);
    FAIL();
  } catch (const CacheError& e) {
    EXPECT_EQ(e.kind(), CacheErrorKind::Corrupt);
  }
}

TEST(Cache, VersionBump) {
  auto img = encode_cache(myapp_set());
  img[8] = static_cast<std::uint8_t>(kCacheVersion + 1);
  try {
    decode_cache(img);
    FAIL();
  } catch (const CacheError& e) {
    EXPECT_EQ(e.kind(), CacheErrorKind::VersionMismatch);
  }
}

TEST(Cache, BadMagic) {
  auto img = encode_cache(myapp_set());
  img[0] = 'X';
  try {
    decode_cache(img);
    FAIL();
  } catch (const CacheError& e) {
    EXPECT_EQ(e.kind(), CacheErrorKind::BadMagic);
  }
}

TEST(Cache, TruncationAtEveryLengthIsRejected) {
  const auto img = encode_cache(myapp_set());
  for (std::size_t n = 0; n < img.size(); ++n) {
    EXPECT_THROW(decode_cache(std::span(img.data(), n)), CacheError) << n;
  }
}

TEST(CacheValid, FreshEditedTruncated) {
  std::map<UnitName, std::string> src{{UnitName("Myapp.service"), testing_helpers::kMyapp}};
  const auto set = parse_tree(src).set;
  const auto img = encode_cache(set);
  EXPECT_TRUE(cache_valid(img, source_digest(src)));

  auto edited = src;
  edited.begin()->second += "# edited\n";
  EXPECT_FALSE(cache_valid(img, source_digest(edited)));

  EXPECT_FALSE(cache_valid(std::span(img.data(), img.size() - 1), source_digest(src)));
}

TEST(Cache, RandomSetsRoundTrip) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto set = testing_helpers::load(fixtures::random_corpus(1 + seed % 30, seed));
    EXPECT_EQ(decode_cache(encode_cache(set)), set) << seed;
  }
}
