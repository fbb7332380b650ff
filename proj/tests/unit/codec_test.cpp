// Copyright 2026 The qadagrad Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include <gtest/gtest.h>

#include <random>
#include <string>
#include <vector>

#include "qadagrad/codec.hpp"

namespace qadagrad {
namespace {

using Bytes = std::vector<std::uint8_t>;

IndicatorBitmap bits_from(const std::string& s) {
  IndicatorBitmap b(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '1') b.set(i);
  }
  return b;
}

std::string bits_to(const IndicatorBitmap& b) {
  std::string s;
  for (std::size_t i = 0; i < b.dim(); ++i) s += b.test(i) ? '1' : '0';
  return s;
}

TernaryGradient example_gradient() {
  TernaryGradient q(8);
  q.scale = 0.5;
  q.codes = {0, -1, 0, 0, 1, 0, 0, 0};
  return q;
}

TEST(Codec, WorkedExampleBitCount) {
  GradientMessage msg = encode(example_gradient(), bits_from("01001000"));
  EXPECT_EQ(payload_bits(msg), 44u);
  EXPECT_EQ(serialize_counted(msg).payload_bit_count, 44u);
  TernaryGradient back = decode(msg);
  EXPECT_EQ(back.dense(), (std::vector<double>{0, -0.5, 0, 0, 0.5, 0, 0, 0}));
}

TEST(Codec, ByteLayout) {
  // dim=8 LE | scale 0.5f LE | bitmap 0b00010010 | codes "10" then "01", LSB first
  Bytes expected{0x08, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x3F, 0x12, 0x06};
  EXPECT_EQ(serialize(encode(example_gradient(), bits_from("01001000"))), expected);
}

TEST(Codec, EmptyIndicator) {
  TernaryGradient q(8);
  GradientMessage msg = encode(q, IndicatorBitmap(8));
  EXPECT_EQ(payload_bits(msg), 40u);
  EXPECT_EQ(decode(deserialize(serialize(msg))).dense(), std::vector<double>(8, 0.0));
}

TEST(Codec, FullIndicatorCostsMoreThanDenseTernary) {
  for (std::size_t d : {1u, 8u, 100u}) {
    EXPECT_EQ(payload_bits(d, d), 32 + 3 * d);
    EXPECT_GT(payload_bits(d, d), dense_ternary_bits(d));
  }
}

TEST(Codec, LargeDimensionCount) {
  EXPECT_EQ(payload_bits(47236, 472), 48212u);
  EXPECT_EQ(dense_float_bits(47236), 32u * 47236u);
}

TEST(Codec, ZeroCodeInsideIndicator) {
  TernaryGradient q(4);
  q.scale = 1.0;
  q.codes = {1, 0, -1, 0};
  GradientMessage msg = encode(q, bits_from("1110"));
  EXPECT_EQ(msg.code_count, 3u);
  EXPECT_EQ(msg.code_at(0), kCodePlus);
  EXPECT_EQ(msg.code_at(1), kCodeZero);
  EXPECT_EQ(msg.code_at(2), kCodeMinus);
  EXPECT_EQ(decode(msg), q);
}

TEST(Codec, CorruptCodeRejected) {
  Bytes bytes = serialize(encode(example_gradient(), bits_from("01001000")));
  bytes[9] |= 0x03;  // first code becomes 11
  EXPECT_THROW(deserialize(bytes), Error);

  GradientMessage msg = encode(example_gradient(), bits_from("01001000"));
  msg.codes[0] |= 0x03;
  EXPECT_THROW(decode(msg), Error);
}

TEST(Codec, TruncationAndTrailingBytes) {
  Bytes bytes = serialize(encode(example_gradient(), bits_from("01001000")));
  Bytes shorter(bytes.begin(), bytes.end() - 1);
  EXPECT_THROW(deserialize(shorter), Error);
  EXPECT_THROW(deserialize(Bytes(bytes.begin(), bytes.begin() + 6)), Error);
  Bytes longer = bytes;
  longer.push_back(0);
  EXPECT_THROW(deserialize(longer), Error);
}

TEST(Codec, NegativeScaleRejected) {
  GradientMessage msg = encode(example_gradient(), bits_from("01001000"));
  msg.scale = -1.0f;
  EXPECT_THROW(decode(msg), Error);
}

TEST(Codec, WireSizeWalksConcatenation) {
  Bytes a = serialize(encode(example_gradient(), bits_from("01001000")));
  TernaryGradient q(13);
  q.scale = 2.0;
  q.codes[12] = -1;
  IndicatorBitmap ind(13);
  ind.set(12);
  ind.set(3);
  Bytes b = serialize(encode(q, ind));
  Bytes both = a;
  both.insert(both.end(), b.begin(), b.end());
  std::size_t first = wire_size(both);
  EXPECT_EQ(first, a.size());
  EXPECT_EQ(deserialize(std::span(both).subspan(0, first)), deserialize(a));
  EXPECT_EQ(wire_size(std::span(both).subspan(first)), b.size());
}

TEST(Indicator, OrExamples) {
  EXPECT_EQ(bits_to(indicator_or(bits_from("00110000"), bits_from("00000011"))), "00110011");
  EXPECT_EQ(bits_to(indicator_or(bits_from("1111"), bits_from("0000"))), "1111");
  EXPECT_EQ(bits_to(indicator_or(bits_from("0000"), bits_from("0000"))), "0000");
  EXPECT_THROW(indicator_or(IndicatorBitmap(3), IndicatorBitmap(4)), Error);
}

TEST(Indicator, SelectedAndPopcount) {
  IndicatorBitmap b = bits_from("1000000001");
  EXPECT_EQ(b.popcount(), 2u);
  EXPECT_EQ(b.selected(), (std::vector<std::size_t>{0, 9}));
  EXPECT_EQ(IndicatorBitmap::all(11).popcount(), 11u);
}

TEST(Codec, EncodeRejectsDimensionMismatch) {
  EXPECT_THROW(encode(TernaryGradient(4), IndicatorBitmap(5)), Error);
}

TEST(Codec, FuzzRoundTrip) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(1, 300);
  std::uniform_int_distribution<int> code(-1, 1);
  std::uniform_real_distribution<float> scale(0.0f, 10.0f);
  std::bernoulli_distribution keep(0.3);
  for (int trial = 0; trial < 2000; ++trial) {
    std::size_t d = dim(rng);
    TernaryGradient q(d);
    q.scale = scale(rng);
    IndicatorBitmap ind(d);
    for (std::size_t i = 0; i < d; ++i) {
      if (keep(rng)) {
        ind.set(i);
        q.codes[i] = static_cast<std::int8_t>(code(rng));
      }
    }
    SerializedMessage s = serialize_counted(encode(q, ind));
    ASSERT_EQ(s.payload_bit_count, payload_bits(d, ind.popcount()));
    ASSERT_EQ(s.bytes.size(), kFramingBytes + (s.payload_bit_count + 7) / 8);
    GradientMessage back = deserialize(s.bytes);
    ASSERT_EQ(back.indicator, ind);
    ASSERT_EQ(decode(back), q) << "trial " << trial;
  }
}

}  // namespace
}  // namespace qadagrad
