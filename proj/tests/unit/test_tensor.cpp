// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "edgepipe/bytes.hpp"
#include "edgepipe/prng.hpp"
#include "edgepipe/tensor.hpp"

using namespace edgepipe;

TEST(Tensor, FromChecksValueCount) {
  EXPECT_NO_THROW(Tensor::from<float>({2, 3}, std::vector<float>(6)));
  try {
    Tensor::from<float>({2, 3}, std::vector<float>(5));
    FAIL() << "expected a shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kShapeMismatch);
  }
}

TEST(Tensor, ZeroInitialisedAndTyped) {
  Tensor t(DType::kF64, {3, 2});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.byte_size(), 48u);
  for (double v : t.values<double>()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(t.values<float>(), Error);
}

TEST(Tensor, ScalarHasRankZero) {
  const Tensor s = Tensor::scalar<double>(2.5);
  EXPECT_EQ(s.rank(), 0u);
  EXPECT_EQ(s.numel(), 1u);
  EXPECT_EQ(s.at_as_double(0), 2.5);
}

TEST(Tensor, EmptyDimension) {
  Tensor t(DType::kU8, {2, 0});
  EXPECT_EQ(t.numel(), 0u);
  EXPECT_EQ(shape_str(t.shape()), "(2,0)");
}

TEST(Tensor, SliceAndConcatRoundTrip) {
  std::vector<float> v(12);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i);
  const Tensor t = Tensor::from<float>({4, 3}, v);
  const Tensor a = t.slice_rows(0, 1);
  const Tensor b = t.slice_rows(1, 4);
  EXPECT_EQ(b.shape(), (Shape{3, 3}));
  EXPECT_EQ(b.at_as_double(0), 3.0);
  const Tensor parts[] = {a, b};
  EXPECT_TRUE(concat_rows(parts).bit_equal(t));
}

TEST(Tensor, ReshapeKeepsBytes) {
  const Tensor t = Tensor::from<std::int32_t>({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.shape(), (Shape{3, 2}));
  EXPECT_TRUE(std::equal(r.raw_bytes().begin(), r.raw_bytes().end(), t.raw_bytes().begin()));
  EXPECT_THROW(t.reshaped({4, 2}), Error);
}

TEST(Tensor, CastBetweenFloatTypes) {
  const Tensor t = Tensor::from<double>({2}, {0.5, -3.25});
  const Tensor f = t.cast(DType::kF32);
  EXPECT_EQ(f.dtype(), DType::kF32);
  EXPECT_EQ(f.values<float>()[1], -3.25f);
  EXPECT_TRUE(f.cast(DType::kF64).bit_equal(t));
}

TEST(Tensor, BitEqualDistinguishesSignedZero) {
  const Tensor a = Tensor::from<float>({1}, {0.0f});
  const Tensor b = Tensor::from<float>({1}, {-0.0f});
  EXPECT_FALSE(a.bit_equal(b));
  EXPECT_TRUE(a.bit_equal(a));
}

TEST(Prng, CounterBasedStreamsAreReproducible) {
  Prng a = Prng::for_stream(1, 2, 3, 4);
  Prng b = Prng::for_stream(1, 2, 3, 4);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Prng, NeighbouringStreamsDiffer) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t mb = 0; mb < 64; ++mb) firsts.insert(Prng::for_stream(1, 0, mb, 5).next_u64());
  EXPECT_EQ(firsts.size(), 64u);
}

TEST(Prng, UnitIntervalMoments) {
  Prng p(99);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = p.next_unit();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  // Uniform(0,1): mean 1/2, variance 1/12; bounds are ~6 standard errors.
  EXPECT_NEAR(sum / n, 0.5, 0.004);
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 0.002);
}

TEST(Prng, NormalMoments) {
  Prng p(7);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = p.next_normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.015);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Bytes, LittleEndianIntegers) {
  ByteWriter w;
  w.u16(0x0102);
  w.u32(0x03040506);
  w.u64(0x0708090A0B0C0D0EULL);
  const Bytes expect{0x02, 0x01, 0x06, 0x05, 0x04, 0x03, 0x0E, 0x0D, 0x0C, 0x0B, 0x0A, 0x09, 0x08, 0x07};
  EXPECT_EQ(w.data(), expect);
  ByteReader r(w.data());
  EXPECT_EQ(r.u16(), 0x0102);
  EXPECT_EQ(r.u32(), 0x03040506u);
  EXPECT_EQ(r.u64(), 0x0708090A0B0C0D0EULL);
  EXPECT_TRUE(r.at_end());
}

TEST(Bytes, ReaderReportsShortInput) {
  const Bytes b{1, 2, 3};
  ByteReader r(b);
  try {
    r.u32();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kTruncatedPayload);
  }
}

TEST(Bytes, Strings) {
  ByteWriter w;
  w.short_str("abc");
  w.long_str("");
  ByteReader r(w.data());
  EXPECT_EQ(r.short_str(), "abc");
  EXPECT_EQ(r.long_str(), "");
  EXPECT_TRUE(r.at_end());
}
