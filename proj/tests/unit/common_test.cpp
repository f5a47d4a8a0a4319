#include <gtest/gtest.h>

#include <array>
#include <set>
#include <vector>

#include "geolm/common/error.hpp"
#include "geolm/common/hash.hpp"
#include "geolm/common/io.hpp"
#include "geolm/common/rng.hpp"
#include "test_util.hpp"

namespace geolm {
namespace {

TEST(Hash, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Hash, Crc32KnownVector) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32({reinterpret_cast<const unsigned char*>(s.data()), s.size()}), 0xCBF43926u);
}

TEST(Hash, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hash, Mix64SpreadsNearbyInputs) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 16; ++a) {
    for (std::uint64_t b = 0; b < 16; ++b) seen.insert(mix64(a, b));
  }
  EXPECT_EQ(seen.size(), 256u);
  EXPECT_NE(mix64(1, 2), mix64(2, 1));
}

TEST(Rng, SplitMixReferenceSequence) {
  // Reference outputs of SplitMix64 seeded with 0.
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next(), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(rng.next(), 0x6e789e6aa1b965f4ULL);
  EXPECT_EQ(rng.next(), 0x06c45d188009454fULL);
}

TEST(Rng, BelowStaysInRangeAndCoversIt) {
  SplitMix64 rng(42);
  std::array<int, 7> counts{};
  for (int i = 0; i < 7000; ++i) {
    const auto x = rng.below(7);
    ASSERT_LT(x, 7u);
    ++counts[x];
  }
  for (int c : counts) EXPECT_GT(c, 800);
}

TEST(Rng, ShuffleIsAPermutationAndSeedDeterministic) {
  std::vector<int> a(50), b(50);
  for (int i = 0; i < 50; ++i) a[i] = b[i] = i;
  SplitMix64 r1(9), r2(9);
  seeded_shuffle(a, r1);
  seeded_shuffle(b, r2);
  EXPECT_EQ(a, b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(ByteCodec, RoundTripLittleEndian) {
  ByteWriter w;
  w.u32(0x01020304u);
  w.u64(0x1122334455667788ULL);
  w.i32(-5);
  w.f32(1.5f);
  w.bytes("xy");
  const std::string& d = w.data();
  ASSERT_EQ(d.size(), 4u + 8 + 4 + 4 + 2);
  EXPECT_EQ(static_cast<unsigned char>(d[0]), 0x04);
  EXPECT_EQ(static_cast<unsigned char>(d[3]), 0x01);

  ByteReader r(d);
  EXPECT_EQ(r.u32(), 0x01020304u);
  EXPECT_EQ(r.u64(), 0x1122334455667788ULL);
  EXPECT_EQ(r.i32(), -5);
  EXPECT_EQ(r.f32(), 1.5f);
  EXPECT_EQ(r.bytes(2), "xy");
  EXPECT_EQ(r.remaining(), 0u);
  EXPECT_GEOLM_ERROR(r.u32(), ErrorCode::kFormat);
}

TEST(Errors, CodeNamesRoundTrip) {
  for (int c = 0; c <= static_cast<int>(ErrorCode::kStageFailed); ++c) {
    const auto code = static_cast<ErrorCode>(c);
    const auto back = error_code_from_string(to_string(code));
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, code);
  }
  EXPECT_FALSE(error_code_from_string("NoSuchCode").has_value());
  EXPECT_EQ(to_string(ErrorCode::kNoNegationSite), "NoNegationSite");
}

TEST(Io, AtomicWriteAndJsonl) {
  testing::TempDir dir("io");
  const auto p = dir.file("rows.jsonl");
  write_file_atomic(p, to_jsonl({Json{{"a", 1}}, Json{{"b", "x"}}}));
  std::vector<Json> rows;
  for_each_jsonl(p, [&](std::size_t line, const Json& j) {
    EXPECT_EQ(line, rows.size() + 1);
    rows.push_back(j);
  });
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1]["b"], "x");
  EXPECT_EQ(read_file(p), "{\"a\":1}\n{\"b\":\"x\"}\n");
  EXPECT_GEOLM_ERROR(read_file(dir.file("missing")), ErrorCode::kIo);
}

}  // namespace
}  // namespace geolm
